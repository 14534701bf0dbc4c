//! On-disk layout written by `amod ingest` and the simulation sources built
//! from it.
//!
//! ```text
//! <dir>/zones.csv        zone_id,lat,lon
//! <dir>/edges.csv        zone_id_a,zone_id_b (optional)
//! <dir>/network.json     speed and k-nearest-neighbour settings
//! <dir>/trips.csv        normalized trips, epoch seconds
//! <dir>/demand.json      grid metadata and the day list
//! <dir>/demand/<day>.csv region,interval,count
//! ```

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use amod_core::forecast::ForecastModel;
use amod_core::ingest::{
    estimate_transitions, historical_moments, read_trips, split_days, DemandSidecar, HistoricalMoments, StdDivisor,
    TripRecord,
};
use amod_core::network::{read_edges, read_zones, DemandTensor, TransitionMatrices, ZoneNetwork};
use amod_core::sim::{run_simulation, ModelForecaster, SimConfig, SimInputs, SimRun};
use amod_core::synthetic::{CityConfig, Scenario};
use anyhow::{bail, Context, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSettings {
    pub speed_mps: f64,
    pub knn: usize,
    pub has_edges: bool,
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_network(dir: &Path) -> Result<ZoneNetwork> {
    let settings: NetworkSettings = read_json(&dir.join("network.json"))?;
    let zones = read_zones(open(&dir.join("zones.csv"))?)?;
    let edges = if settings.has_edges { Some(read_edges(open(&dir.join("edges.csv"))?)?) } else { None };
    Ok(ZoneNetwork::from_lat_lon(&zones, edges.as_deref(), settings.speed_mps, settings.knn)?)
}

pub struct IngestedData {
    pub net: ZoneNetwork,
    pub sidecar: DemandSidecar,
    /// Per-day demand, chronological, aligned with `sidecar.days`.
    pub days: Vec<DemandTensor>,
    pub trips: Vec<TripRecord>,
}

impl IngestedData {
    pub fn load(dir: &Path) -> Result<Self> {
        let net = load_network(dir)?;
        let sidecar: DemandSidecar = read_json(&dir.join("demand.json"))?;
        if sidecar.zone_ids != net.zone_ids() {
            bail!("demand.json zones differ from zones.csv");
        }
        let mut days = Vec::with_capacity(sidecar.days.len());
        for (_, file) in &sidecar.days {
            let path = dir.join("demand").join(file);
            days.push(DemandTensor::read_csv(open(&path)?, net.len(), sidecar.intervals_per_day)?);
        }
        let trips = read_trips(open(&dir.join("trips.csv"))?, &net)?;
        Ok(IngestedData { net, sidecar, days, trips })
    }

    /// Index of `day`, counted from the end when negative.
    pub fn day_index(&self, day: i64) -> Result<usize> {
        let len = self.days.len() as i64;
        let idx = if day < 0 { len + day } else { day };
        if idx < 0 || idx >= len {
            bail!("day {day} outside the {len} ingested days");
        }
        Ok(idx as usize)
    }

    /// Simulation inputs for day `idx` with up to `history` preceding days
    /// behind the moments and transition estimates.
    pub fn day_context(&self, idx: usize, history: usize) -> Result<DayContext> {
        let start = self.sidecar.days[idx].0;
        let first = idx.saturating_sub(history);
        let moments = if first < idx {
            Some(historical_moments(&self.days[first..idx], StdDivisor::Population)?)
        } else {
            None
        };
        let by_day = split_days(&self.trips);
        let past: Vec<TripRecord> = self.sidecar.days[first..idx]
            .iter()
            .flat_map(|(s, _)| by_day.get(s).cloned().unwrap_or_default())
            .collect();
        let grid = amod_core::network::TimeGrid { delta: self.sidecar.interval_sec, ..Default::default() };
        let transitions = if past.is_empty() {
            TransitionMatrices::stay_vacant(self.net.len())
        } else {
            estimate_transitions(&past, &self.net, &grid)
        };
        Ok(DayContext {
            day_start: start,
            trips: by_day.get(&start).cloned().unwrap_or_default(),
            moments,
            transitions,
            truth: self.days[idx].to_array(),
            history_days: idx - first,
        })
    }
}

pub struct DayContext {
    pub day_start: i64,
    pub trips: Vec<TripRecord>,
    pub moments: Option<HistoricalMoments>,
    pub transitions: TransitionMatrices,
    /// Realized counts of the simulated day, the input of the truth engine.
    pub truth: Array2<f64>,
    pub history_days: usize,
}

/// Where simulated days come from.
pub enum Source {
    Data { data: Box<IngestedData>, day: Box<DayContext>, model: Option<Box<ForecastModel>> },
    Synthetic(Box<Scenario>),
}

impl Source {
    pub fn synthetic(history_days: u64, noise: f64, seed: u64) -> Result<Self> {
        Ok(Source::Synthetic(Box::new(Scenario::new(CityConfig::default(), history_days, noise, seed)?)))
    }

    pub fn regions(&self) -> usize {
        match self {
            Source::Data { data, .. } => data.net.len(),
            Source::Synthetic(sc) => sc.city.net.len(),
        }
    }

    /// Aligns the parts of `cfg` the source dictates and rejects conflicts.
    pub fn fit_config(&self, cfg: &mut SimConfig) -> Result<()> {
        if cfg.regions == 0 {
            cfg.regions = self.regions();
        }
        let delta = match self {
            Source::Data { data, day, .. } => {
                cfg.history_days = day.history_days;
                data.sidecar.interval_sec
            }
            Source::Synthetic(sc) => {
                cfg.history_days = sc.day as usize;
                sc.city.config.delta
            }
        };
        if cfg.grid.delta != delta {
            bail!("Delta = {} s but the demand data uses {delta} s intervals", cfg.grid.delta);
        }
        Ok(())
    }

    pub fn run(&self, cfg: &SimConfig) -> Result<SimRun> {
        match self {
            Source::Data { data, day, model } => {
                let forecaster = match (model, &day.moments) {
                    (Some(model), Some(moments)) => Some(ModelForecaster { model, moments }),
                    _ => None,
                };
                let inputs = SimInputs {
                    net: &data.net,
                    trips: &day.trips,
                    day_start: day.day_start,
                    transitions: &day.transitions,
                    moments: day.moments.as_ref(),
                    forecaster: forecaster.as_ref().map(|f| f as _),
                    truth: Some(&day.truth),
                    fleet: None,
                };
                Ok(run_simulation(cfg, &inputs)?)
            }
            Source::Synthetic(sc) => Ok(sc.run(cfg)?),
        }
    }
}
