use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ZoneNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleStatus {
    Idle,
    Rebalancing,
    Pickup,
    Occupied,
}

/// A vehicle tracked at zone granularity. While moving, `region` is the zone
/// the current leg started in and `remaining_s` counts down to arrival at
/// `destination`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u32,
    pub status: VehicleStatus,
    pub region: usize,
    pub destination: usize,
    pub remaining_s: f64,
    pub leg_s: f64,
    /// Passenger served by the current pickup/occupied leg.
    pub passenger: Option<u32>,
}

impl Vehicle {
    pub fn idle(id: u32, region: usize) -> Self {
        Vehicle {
            id,
            status: VehicleStatus::Idle,
            region,
            destination: region,
            remaining_s: 0.0,
            leg_s: 0.0,
            passenger: None,
        }
    }

    /// Zone the vehicle is currently passing through, by linear
    /// interpolation of its leg.
    pub fn current_zone(&self, net: &ZoneNetwork) -> usize {
        if self.status == VehicleStatus::Idle || self.leg_s <= 0.0 {
            return self.region;
        }
        let elapsed = 1.0 - self.remaining_s / self.leg_s;
        net.interpolate(self.region, self.destination, elapsed)
    }
}

/// Per-vehicle records plus per-region idle (`v`) and occupied (`o`) counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetState {
    pub vehicles: Vec<Vehicle>,
    pub v: Vec<u32>,
    pub o: Vec<u32>,
}

impl FleetState {
    pub fn new(vehicles: Vec<Vehicle>, net: &ZoneNetwork) -> Self {
        let mut s = FleetState { vehicles, v: Vec::new(), o: Vec::new() };
        s.recount(net);
        s
    }

    pub fn size(&self) -> usize {
        self.vehicles.len()
    }

    /// Recomputes `v` and `o` from the vehicle records. Occupied vehicles
    /// are counted in the zone they are passing through.
    pub fn recount(&mut self, net: &ZoneNetwork) {
        let n = net.len();
        self.v = vec![0; n];
        self.o = vec![0; n];
        for veh in &self.vehicles {
            match veh.status {
                VehicleStatus::Idle => self.v[veh.region] += 1,
                VehicleStatus::Occupied => self.o[veh.current_zone(net)] += 1,
                VehicleStatus::Pickup | VehicleStatus::Rebalancing => {}
            }
        }
    }

    pub fn in_transit(&self) -> usize {
        self.vehicles
            .iter()
            .filter(|v| matches!(v.status, VehicleStatus::Pickup | VehicleStatus::Rebalancing))
            .count()
    }

    /// Checks the conservation identity `sum V + sum O + transit = fleet size`
    /// and that the counts agree with a fresh recount.
    pub fn check(&self, expected_size: usize, net: &ZoneNetwork) -> Result<()> {
        if self.vehicles.len() != expected_size {
            return Err(Error::invariant(format!(
                "fleet has {} vehicles, expected {expected_size}",
                self.vehicles.len()
            )));
        }
        let total: usize = self.v.iter().chain(&self.o).map(|&c| c as usize).sum::<usize>() + self.in_transit();
        if total != expected_size {
            return Err(Error::invariant(format!("fleet counts sum to {total}, expected {expected_size}")));
        }
        let mut fresh = self.clone();
        fresh.recount(net);
        if fresh.v != self.v || fresh.o != self.o {
            return Err(Error::invariant("fleet counts disagree with vehicle records"));
        }
        Ok(())
    }
}
