//! Closed-loop fleet simulation.
//!
//! Each rebalancing interval starts with an engine decision on the current
//! fleet snapshot; the executed flows are dispatched and the interval is then
//! played out in matching ticks. Every tick admits new requests, matches
//! waiting passengers to idle vehicles, then advances vehicles and waits,
//! at which point passengers past the maximum wait leave.

mod engine;
mod matching;

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::{FleetState, Vehicle, VehicleStatus};
use crate::ingest::{HistoricalMoments, TripRecord};
use crate::mivr::{IndexConvention, RebalancePlan, DEFAULT_DISTANCE_SCALE};
use crate::network::{DemandTensor, TimeGrid, TransitionMatrices, ZoneNetwork};

pub use engine::{
    plan_interval, DemandForecaster, EngineInputs, EngineKind, EngineParams, ModelForecaster, PresetForecast,
    ALL_ENGINES,
};
pub use matching::{match_tick, Assignment, MatchRequest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PassengerStatus {
    Waiting,
    /// Assigned to a vehicle; the pickup may still be under way.
    PickedUp,
    Served,
    Left,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Passenger {
    pub id: u32,
    pub origin: usize,
    pub destination: usize,
    /// Seconds since simulation start.
    pub request_s: f64,
    pub status: PassengerStatus,
    /// Wait so far; final once the vehicle arrives.
    pub wait_s: f64,
    /// In-vehicle duration.
    pub trip_s: f64,
    pub boarded: bool,
}

/// One passenger per trip whose pickup falls in `[start, end)` (epoch
/// seconds), in request order. Trip durations come from the travel-time
/// matrix unless `recorded_durations` is set.
pub fn generate_passengers(
    trips: &[TripRecord],
    start: i64,
    end: i64,
    net: &ZoneNetwork,
    recorded_durations: bool,
) -> Vec<Passenger> {
    let mut picked: Vec<&TripRecord> = trips.iter().filter(|t| t.pickup_time >= start && t.pickup_time < end).collect();
    picked.sort_by_key(|t| t.pickup_time);
    picked
        .into_iter()
        .enumerate()
        .map(|(id, t)| Passenger {
            id: id as u32,
            origin: t.pickup_zone,
            destination: t.dropoff_zone,
            request_s: (t.pickup_time - start) as f64,
            status: PassengerStatus::Waiting,
            wait_s: 0.0,
            trip_s: if recorded_durations {
                (t.dropoff_time - t.pickup_time).max(0) as f64
            } else {
                net.tt()[[t.pickup_zone, t.dropoff_zone]]
            },
            boarded: false,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub beta: f64,
    pub gamma: f64,
    /// Interval length, simulated intervals, look-ahead, tick, waits.
    pub grid: TimeGrid,
    /// Expected number of regions; zero accepts any network.
    pub regions: usize,
    /// Historical days behind the moment estimates.
    pub history_days: usize,
    pub fleet_size: usize,
    pub engine: EngineKind,
    pub pi: f64,
    pub budget: f64,
    pub rho: f64,
    pub seed: u64,
    /// Day interval at which the simulation starts.
    pub start_interval: usize,
    pub recorded_durations: bool,
    /// Multiplier from network metres to objective distance units.
    pub distance_scale: f64,
    pub convention: IndexConvention,
    /// When false, decision times are reported as zero so that reports are
    /// reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            beta: 1.0,
            gamma: 100.0,
            grid: TimeGrid::default(),
            regions: 63,
            history_days: 18,
            fleet_size: 2000,
            engine: EngineKind::Duro,
            pi: 95.0,
            budget: 10.0,
            rho: 1.0,
            seed: 0,
            start_interval: 0,
            recorded_durations: false,
            distance_scale: DEFAULT_DISTANCE_SCALE,
            convention: IndexConvention::default(),
            record_timing: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.beta > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::invariant("beta and gamma must be positive"));
        }
        if self.fleet_size == 0 {
            return Err(Error::invariant("fleet size must be positive"));
        }
        if !(self.pi > 0.0 && self.pi < 100.0) {
            return Err(Error::Domain(format!("PI must lie in (0, 100), got {}", self.pi)));
        }
        if !(self.budget >= 0.0) || !(self.rho > 0.0) {
            return Err(Error::invariant("budget must be nonnegative and rho positive"));
        }
        if !(self.distance_scale > 0.0) {
            return Err(Error::invariant("distance scale must be positive"));
        }
        Ok(())
    }
}

/// Counts at the end of one matching tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickLog {
    pub time_s: f64,
    pub waiting: usize,
    pub idle: usize,
    pub rebalancing: usize,
    pub pickup: usize,
    pub occupied: usize,
    pub served: usize,
    pub left: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub engine: EngineKind,
    pub pi: f64,
    pub budget: f64,
    pub rho: f64,
    pub generated: usize,
    /// Passengers whose vehicle arrived.
    pub served: usize,
    /// Passengers dropped off.
    pub completed: usize,
    pub left: usize,
    /// Mean wait of served passengers; zero when nobody was served.
    pub avg_wait_s: f64,
    pub max_wait_s: f64,
    /// Mean in-vehicle time of completed trips; zero when none completed.
    pub avg_travel_s: f64,
    /// `100 * left / generated`; passengers still waiting at the end count as
    /// not having left.
    pub leaving_rate_pct: f64,
    pub decision_ms: Vec<f64>,
    pub decision_ms_p50: f64,
    /// Robust decisions replaced by the deterministic program.
    pub fallbacks: usize,
    /// Engine failures, each answered with an empty plan.
    pub incidents: Vec<String>,
    pub ticks: Vec<TickLog>,
}

impl SimReport {
    pub fn no_served(&self) -> bool {
        self.served == 0
    }
}

pub const REPORT_HEADER: [&str; 8] =
    ["engine", "pi", "budget", "rho", "avg_wait_s", "avg_travel_s", "leaving_rate_pct", "decision_ms_p50"];

/// One row per report, columns [`REPORT_HEADER`].
pub fn write_report_csv<W: Write>(reports: &[SimReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.engine.to_string(),
            format!("{}", r.pi),
            format!("{}", r.budget),
            format!("{}", r.rho),
            format!("{:.3}", r.avg_wait_s),
            format!("{:.3}", r.avg_travel_s),
            format!("{:.3}", r.leaving_rate_pct),
            format!("{:.3}", r.decision_ms_p50),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mutable simulation state between ticks.
#[derive(Clone, Debug)]
pub struct SimState {
    /// Seconds since simulation start.
    pub clock: f64,
    pub fleet: FleetState,
    pub passengers: Vec<Passenger>,
    /// Ids of waiting passengers in admission order.
    pub waiting: Vec<u32>,
    pub events: String,
}

impl SimState {
    pub fn new(fleet: FleetState, passengers: Vec<Passenger>) -> Self {
        SimState { clock: 0.0, fleet, passengers, waiting: Vec::new(), events: String::new() }
    }

    fn event(&mut self, at: f64, kind: &str, fields: std::fmt::Arguments<'_>) {
        let _ = writeln!(self.events, "{at:.3}\t{kind}\t{fields}");
    }

    /// Moves the clock by `dt`: vehicles progress along their legs (arrivals
    /// fire at their exact time within the step and leftover time carries
    /// into the next leg), waits grow, and passengers waiting longer than
    /// `max_wait` leave.
    pub fn advance(&mut self, net: &ZoneNetwork, dt: f64, max_wait: f64) {
        let now = self.clock;
        for v in 0..self.fleet.vehicles.len() {
            let mut budget = dt;
            let mut elapsed = 0.0;
            loop {
                let veh = &mut self.fleet.vehicles[v];
                if veh.status == VehicleStatus::Idle {
                    break;
                }
                if veh.remaining_s > budget + 1e-9 {
                    veh.remaining_s -= budget;
                    break;
                }
                elapsed += veh.remaining_s;
                budget = (budget - veh.remaining_s).max(0.0);
                let at = now + elapsed;
                let id = veh.id;
                match veh.status {
                    VehicleStatus::Rebalancing => {
                        let to = veh.destination;
                        *veh = Vehicle::idle(id, to);
                        self.event(at, "arrive", format_args!("{id}\t{to}"));
                        break;
                    }
                    VehicleStatus::Pickup => {
                        let p = veh.passenger.expect("pickup leg carries a passenger") as usize;
                        let pass = &mut self.passengers[p];
                        pass.wait_s = at - pass.request_s;
                        pass.boarded = true;
                        veh.status = VehicleStatus::Occupied;
                        veh.region = pass.origin;
                        veh.destination = pass.destination;
                        veh.leg_s = pass.trip_s;
                        veh.remaining_s = pass.trip_s;
                        let wait = pass.wait_s;
                        self.event(at, "pickup", format_args!("{id}\t{p}\t{wait:.3}"));
                    }
                    VehicleStatus::Occupied => {
                        let p = veh.passenger.expect("occupied leg carries a passenger") as usize;
                        let to = veh.destination;
                        *veh = Vehicle::idle(id, to);
                        self.passengers[p].status = PassengerStatus::Served;
                        self.event(at, "dropoff", format_args!("{id}\t{p}\t{to}"));
                        break;
                    }
                    VehicleStatus::Idle => unreachable!(),
                }
            }
        }
        self.clock = now + dt;
        let clock = self.clock;
        let mut still = Vec::with_capacity(self.waiting.len());
        for &p in &self.waiting.clone() {
            let pass = &mut self.passengers[p as usize];
            pass.wait_s = clock - pass.request_s;
            if pass.wait_s > max_wait {
                pass.status = PassengerStatus::Left;
                let wait = pass.wait_s;
                self.event(clock, "leave", format_args!("{p}\t{wait:.3}"));
            } else {
                still.push(p);
            }
        }
        self.waiting = still;
        self.fleet.recount(net);
    }

    /// Admits every not-yet-admitted passenger requesting at or before the
    /// clock; `next` is the first such passenger.
    fn admit(&mut self, next: &mut usize) {
        while *next < self.passengers.len() && self.passengers[*next].request_s <= self.clock {
            let p = &mut self.passengers[*next];
            p.wait_s = self.clock - p.request_s;
            let (id, o, d) = (p.id, p.origin, p.destination);
            let at = p.request_s;
            self.waiting.push(id);
            self.event(at, "request", format_args!("{id}\t{o}\t{d}"));
            *next += 1;
        }
    }

    fn match_waiting(&mut self, net: &ZoneNetwork, grid: &TimeGrid) {
        let requests: Vec<MatchRequest> = self
            .waiting
            .iter()
            .map(|&p| {
                let pass = &self.passengers[p as usize];
                MatchRequest { passenger: p, zone: pass.origin, wait_s: pass.wait_s }
            })
            .collect();
        let idle: Vec<(u32, usize)> = self
            .fleet
            .vehicles
            .iter()
            .filter(|v| v.status == VehicleStatus::Idle)
            .map(|v| (v.id, v.region))
            .collect();
        if requests.is_empty() || idle.is_empty() {
            return;
        }
        let assignments = match_tick(&requests, &idle, net, grid.max_pickup as f64, grid.max_wait as f64);
        let now = self.clock;
        for a in &assignments {
            let pass = &mut self.passengers[a.passenger as usize];
            pass.status = PassengerStatus::PickedUp;
            let origin = pass.origin;
            let veh = &mut self.fleet.vehicles[a.vehicle as usize];
            veh.status = VehicleStatus::Pickup;
            veh.region = a.vehicle_zone;
            veh.destination = origin;
            veh.leg_s = a.pickup_s;
            veh.remaining_s = a.pickup_s;
            veh.passenger = Some(a.passenger);
            self.event(now, "match", format_args!("{}\t{}\t{:.3}", a.vehicle, a.passenger, a.pickup_s));
        }
        let matched: std::collections::HashSet<u32> = assignments.iter().map(|a| a.passenger).collect();
        self.waiting.retain(|p| !matched.contains(p));
        self.fleet.recount(net);
    }

    /// Sends idle vehicles along the plan, lowest ids first, never more than
    /// are idle in the origin.
    fn dispatch(&mut self, plan: &RebalancePlan, net: &ZoneNetwork) {
        let now = self.clock;
        for (&(from, to), &count) in &plan.x {
            let mut sent = 0;
            for v in 0..self.fleet.vehicles.len() {
                if sent == count {
                    break;
                }
                let veh = &mut self.fleet.vehicles[v];
                if veh.status == VehicleStatus::Idle && veh.region == from {
                    let leg = net.tt()[[from, to]];
                    veh.status = VehicleStatus::Rebalancing;
                    veh.destination = to;
                    veh.leg_s = leg;
                    veh.remaining_s = leg;
                    let id = veh.id;
                    self.event(now, "rebalance", format_args!("{id}\t{from}\t{to}"));
                    sent += 1;
                }
            }
        }
        self.fleet.recount(net);
    }

    /// Planning view of the fleet: rebalancing vehicles count as vacant at
    /// their destination and vehicles on a pickup leg as occupied at the
    /// pickup zone.
    pub fn snapshot(&self, net: &ZoneNetwork) -> (Vec<f64>, Vec<f64>) {
        let n = net.len();
        let mut v = vec![0.0; n];
        let mut o = vec![0.0; n];
        for veh in &self.fleet.vehicles {
            match veh.status {
                VehicleStatus::Idle => v[veh.region] += 1.0,
                VehicleStatus::Rebalancing => v[veh.destination] += 1.0,
                VehicleStatus::Pickup => o[veh.destination] += 1.0,
                VehicleStatus::Occupied => o[veh.current_zone(net)] += 1.0,
            }
        }
        (v, o)
    }
}

/// Inputs of one run besides the configuration.
pub struct SimInputs<'a> {
    pub net: &'a ZoneNetwork,
    /// Realized trips of the simulated day.
    pub trips: &'a [TripRecord],
    /// Epoch seconds of day interval 0.
    pub day_start: i64,
    pub transitions: &'a TransitionMatrices,
    pub moments: Option<&'a HistoricalMoments>,
    pub forecaster: Option<&'a dyn DemandForecaster>,
    pub truth: Option<&'a Array2<f64>>,
    /// Starting vehicles; seeded uniform placement of `fleet_size` when absent.
    pub fleet: Option<&'a FleetState>,
}

#[derive(Clone, Debug)]
pub struct SimRun {
    pub report: SimReport,
    /// Tab-separated `time, kind, fields...` lines.
    pub events: String,
}

/// Vehicles placed uniformly at random over the zones.
pub fn initial_fleet(size: usize, net: &ZoneNetwork, seed: u64) -> FleetState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vehicles = (0..size as u32).map(|id| Vehicle::idle(id, rng.random_range(0..net.len()))).collect();
    FleetState::new(vehicles, net)
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

pub fn run_simulation(cfg: &SimConfig, inputs: &SimInputs) -> Result<SimRun> {
    cfg.validate()?;
    let net = inputs.net;
    let n = net.len();
    let grid = &cfg.grid;
    if cfg.regions != 0 && cfg.regions != n {
        return Err(Error::shape(format!("configured for {} regions, network has {n}", cfg.regions)));
    }
    if cfg.engine.needs_moments() && inputs.moments.is_none() {
        return Err(Error::invariant(format!("engine {} needs historical moments", cfg.engine)));
    }
    if cfg.engine.needs_forecaster() && inputs.forecaster.is_none() {
        return Err(Error::invariant(format!("engine {} needs a forecaster", cfg.engine)));
    }
    if cfg.engine == EngineKind::Truth && inputs.truth.is_none() {
        return Err(Error::invariant("engine truth needs expected demand"));
    }
    let delta = grid.delta as f64;
    let tick = grid.match_tick as f64;
    let start = inputs.day_start + (cfg.start_interval as i64) * grid.delta as i64;
    let end = start + (grid.omega as i64) * grid.delta as i64;
    let passengers = generate_passengers(inputs.trips, start, end, net, cfg.recorded_durations);

    let day_intervals = (cfg.start_interval + grid.omega).max(inputs.moments.map_or(0, |m| m.intervals()));
    let mut observed = DemandTensor::zeros(n, day_intervals);
    for t in inputs.trips {
        let off = t.pickup_time - inputs.day_start;
        if off >= 0 && ((off / grid.delta as i64) as usize) < day_intervals {
            observed.add(t.pickup_zone, (off / grid.delta as i64) as usize, 1);
        }
    }

    let fleet = match inputs.fleet {
        Some(f) => {
            f.check(cfg.fleet_size, net)?;
            f.clone()
        }
        None => initial_fleet(cfg.fleet_size, net, cfg.seed),
    };
    let mut state = SimState::new(fleet, passengers);
    let engine_inputs = EngineInputs {
        net,
        grid,
        transitions: inputs.transitions,
        moments: inputs.moments,
        forecaster: inputs.forecaster,
        truth: inputs.truth,
    };
    let params = EngineParams {
        beta: cfg.beta,
        gamma: cfg.gamma,
        pi: cfg.pi,
        budget: cfg.budget,
        rho: cfg.rho,
        distance_scale: cfg.distance_scale,
        fleet_size: cfg.fleet_size as f64,
        convention: cfg.convention,
    };
    let mut next = 0;
    let mut decision_ms = Vec::new();
    let mut fallbacks = 0;
    let mut incidents = Vec::new();
    let mut ticks = Vec::new();
    for interval in 0..grid.omega {
        let day_k = cfg.start_interval + interval;
        let horizon = grid.kappa.min(grid.omega - interval);
        let mut revealed = observed.clone();
        for i in 0..n {
            for k in day_k..day_intervals {
                revealed.set(i, k, 0);
            }
        }
        let (v, o) = state.snapshot(net);
        let clock = Instant::now();
        let outcome = plan_interval(cfg.engine, &params, &engine_inputs, &v, &o, day_k, horizon, &revealed);
        let ms = if cfg.record_timing { clock.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        let plan = match outcome {
            Ok(plan) => plan,
            Err(e) => {
                log::warn!("engine {} failed at interval {interval}: {e}", cfg.engine);
                incidents.push(format!("interval {interval}: {e}"));
                RebalancePlan::empty()
            }
        };
        if cfg.engine != EngineKind::None {
            decision_ms.push(ms);
        }
        fallbacks += usize::from(plan.fallback);
        let at = state.clock;
        state.event(
            at,
            "plan",
            format_args!("{interval}\t{}\t{:.6}\t{}", plan.total_moves(), plan.objective, u8::from(plan.fallback)),
        );
        state.dispatch(&plan, net);
        for t in 0..grid.ticks_per_interval() {
            state.clock = interval as f64 * delta + t as f64 * tick;
            state.admit(&mut next);
            state.match_waiting(net, grid);
            state.advance(net, tick, grid.max_wait as f64);
            state.fleet.check(cfg.fleet_size, net)?;
            let count = |s: VehicleStatus| state.fleet.vehicles.iter().filter(|v| v.status == s).count();
            ticks.push(TickLog {
                time_s: state.clock,
                waiting: state.waiting.len(),
                idle: count(VehicleStatus::Idle),
                rebalancing: count(VehicleStatus::Rebalancing),
                pickup: count(VehicleStatus::Pickup),
                occupied: count(VehicleStatus::Occupied),
                served: state.passengers.iter().filter(|p| p.boarded).count(),
                left: state.passengers.iter().filter(|p| p.status == PassengerStatus::Left).count(),
            });
        }
    }

    let served: Vec<&Passenger> = state.passengers.iter().filter(|p| p.boarded).collect();
    let completed: Vec<&Passenger> =
        state.passengers.iter().filter(|p| p.status == PassengerStatus::Served).collect();
    let left = state.passengers.iter().filter(|p| p.status == PassengerStatus::Left).count();
    let generated = state.passengers.len();
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let waits: Vec<f64> = served.iter().map(|p| p.wait_s).collect();
    let travels: Vec<f64> = completed.iter().map(|p| p.trip_s).collect();
    let report = SimReport {
        engine: cfg.engine,
        pi: cfg.pi,
        budget: cfg.budget,
        rho: cfg.rho,
        generated,
        served: served.len(),
        completed: completed.len(),
        left,
        avg_wait_s: mean(&waits),
        max_wait_s: waits.iter().copied().fold(0.0, f64::max),
        avg_travel_s: mean(&travels),
        leaving_rate_pct: if generated == 0 { 0.0 } else { 100.0 * left as f64 / generated as f64 },
        decision_ms_p50: median(&decision_ms),
        decision_ms,
        fallbacks,
        incidents,
        ticks,
    };
    Ok(SimRun { report, events: state.events })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_zones() -> ZoneNetwork {
        ZoneNetwork::from_centroids(vec![1, 2], vec![[0.0, 0.0], [20.0, 0.0]], 1.0, None, 1).unwrap()
    }

    fn trip(t: i64, o: usize, d: usize) -> TripRecord {
        TripRecord { pickup_time: t, dropoff_time: t + 100, pickup_zone: o, dropoff_zone: d }
    }

    #[test]
    fn passenger_generation_window() {
        let net = two_zones();
        assert!(generate_passengers(&[], 0, 300, &net, false).is_empty());
        let trips = [trip(400, 0, 1), trip(10, 1, 0), trip(5, 0, 1)];
        let ps = generate_passengers(&trips, 0, 300, &net, false);
        assert_eq!(ps.len(), 2);
        assert_eq!((ps[0].origin, ps[0].destination, ps[0].request_s), (0, 1, 5.0));
        assert_eq!((ps[1].origin, ps[1].destination), (1, 0));
        assert_eq!(ps[0].trip_s, 20.0);
        assert_eq!(generate_passengers(&trips, 0, 300, &net, true)[0].trip_s, 100.0);
    }

    #[test]
    fn idle_advance_only_moves_clock() {
        let net = two_zones();
        let mut s = SimState::new(initial_fleet(3, &net, 1), Vec::new());
        let before = s.fleet.clone();
        s.advance(&net, 30.0, 300.0);
        assert_eq!(s.fleet, before);
        assert_eq!(s.clock, 30.0);
        assert!(s.events.is_empty());
    }

    #[test]
    fn arrival_fires_on_exact_budget() {
        let net = two_zones();
        let mut fleet = FleetState::new(vec![Vehicle::idle(0, 0)], &net);
        fleet.vehicles[0].status = VehicleStatus::Rebalancing;
        fleet.vehicles[0].destination = 1;
        fleet.vehicles[0].leg_s = 30.0;
        fleet.vehicles[0].remaining_s = 30.0;
        let mut s = SimState::new(fleet, Vec::new());
        s.advance(&net, 30.0, 300.0);
        assert_eq!(s.fleet.vehicles[0], Vehicle::idle(0, 1));
        assert_eq!(s.events, "30.000\tarrive\t0\t1\n");
    }

    #[test]
    fn wait_threshold_leaves() {
        let net = two_zones();
        let mut ps = generate_passengers(&[trip(0, 0, 1)], 0, 300, &net, false);
        ps[0].request_s = -290.0;
        let mut s = SimState::new(FleetState::new(Vec::new(), &net), ps);
        s.waiting.push(0);
        s.advance(&net, 30.0, 300.0);
        assert_eq!(s.passengers[0].status, PassengerStatus::Left);
        assert_eq!(s.passengers[0].wait_s, 320.0);
    }

    #[test]
    fn report_header() {
        let mut buf = Vec::new();
        write_report_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "engine,pi,budget,rho,avg_wait_s,avg_travel_s,leaving_rate_pct,decision_ms_p50\n");
    }
}
