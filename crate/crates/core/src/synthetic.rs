//! Seeded synthetic commuter city.
//!
//! Zones sit on a `columns x 2` grid: the first row is residential, the
//! second a business district. Residential zones emit most trips, mostly
//! toward the business row, with a peak in the middle of the day window, so
//! vehicles drain away from where demand arises unless they are rebalanced.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::dist::sample_poisson;
use crate::forecast::{DistFamily, Theta};
use crate::ingest::{
    aggregate_demand, estimate_transitions, historical_moments, DayWindow, HistoricalMoments, StdDivisor, TripRecord,
    SECONDS_PER_DAY,
};
use crate::network::{DemandTensor, TimeGrid, TransitionMatrices, ZoneNetwork};
use crate::sim::{run_simulation, EngineKind, PresetForecast, SimConfig, SimInputs, SimRun};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CityConfig {
    pub columns: usize,
    pub spacing_m: f64,
    pub speed_mps: f64,
    /// Intervals in the synthetic day.
    pub intervals: usize,
    pub delta: u32,
    /// Peak trips per interval of a central residential zone.
    pub residential_rate: f64,
    pub business_rate: f64,
    /// Share of residential trips headed to the business row.
    pub commute_share: f64,
}

impl Default for CityConfig {
    fn default() -> Self {
        CityConfig {
            columns: 5,
            spacing_m: 1200.0,
            speed_mps: 8.0,
            intervals: 24,
            delta: 300,
            residential_rate: 20.0,
            business_rate: 5.0,
            commute_share: 0.8,
        }
    }
}

/// Demand history drawn from a city.
#[derive(Clone, Debug)]
pub struct History {
    pub trips: Vec<TripRecord>,
    pub days: Vec<DemandTensor>,
    pub moments: HistoricalMoments,
    pub transitions: TransitionMatrices,
}

#[derive(Clone, Debug)]
pub struct SyntheticCity {
    pub config: CityConfig,
    pub net: ZoneNetwork,
    /// Expected pickups per (zone, interval).
    pub rates: Array2<f64>,
    /// Destination probabilities per origin.
    pub destinations: Array2<f64>,
}

impl SyntheticCity {
    pub fn new(config: CityConfig) -> Result<Self> {
        let c = config.columns;
        if c < 2 || config.intervals == 0 || config.delta == 0 {
            return Err(Error::invariant("city needs at least two columns and one interval"));
        }
        if !(0.0..=1.0).contains(&config.commute_share) {
            return Err(Error::Domain(format!("commute share {} outside [0, 1]", config.commute_share)));
        }
        let n = 2 * c;
        let centroids: Vec<[f64; 2]> =
            (0..n).map(|z| [(z % c) as f64 * config.spacing_m, (z / c) as f64 * config.spacing_m]).collect();
        let net = ZoneNetwork::from_centroids((1..=n as u32).collect(), centroids, config.speed_mps, None, 4)?;

        let mid = (c as f64 - 1.0) / 2.0;
        let k_mid = (config.intervals as f64 - 1.0) / 2.0;
        let width = (config.intervals as f64 / 4.0).max(1.0);
        let rates = Array2::from_shape_fn((n, config.intervals), |(z, k)| {
            let col = (z % c) as f64;
            let spatial = 1.0 - 0.3 * (col - mid).abs() / mid.max(1.0);
            if z < c {
                let peak = 0.5 + 0.5 * (-((k as f64 - k_mid) / width).powi(2)).exp();
                config.residential_rate * spatial * peak
            } else {
                config.business_rate * spatial
            }
        });

        let mut destinations = Array2::zeros((n, n));
        for o in 0..n {
            let col = (o % c) as f64;
            let near = |d: usize| (-((d % c) as f64 - col).abs()).exp();
            if o < c {
                let business: f64 = (c..n).map(near).sum();
                let home: f64 = (0..c).filter(|&d| d != o).map(near).sum();
                for d in 0..n {
                    destinations[[o, d]] = if d >= c {
                        config.commute_share * near(d) / business
                    } else if d != o {
                        (1.0 - config.commute_share) * near(d) / home
                    } else {
                        0.0
                    };
                }
            } else {
                let total: f64 = (0..n).filter(|&d| d != o).map(near).sum();
                for d in (0..n).filter(|&d| d != o) {
                    destinations[[o, d]] = near(d) / total;
                }
            }
        }
        Ok(SyntheticCity { config, net, rates, destinations })
    }

    /// Default simulation timing over the city's interval length and day.
    pub fn grid(&self) -> TimeGrid {
        TimeGrid { delta: self.config.delta, omega: self.config.intervals, ..TimeGrid::default() }
    }

    pub fn day_start(day: u64) -> i64 {
        day as i64 * SECONDS_PER_DAY
    }

    pub fn window(&self, day: u64) -> DayWindow {
        DayWindow { start: Self::day_start(day), intervals: self.config.intervals }
    }

    /// Poisson trips for day `day`, uniform within their interval. Each
    /// `(seed, day)` pair is an independent stream.
    pub fn sample_day(&self, day: u64, seed: u64) -> Vec<TripRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(day);
        let start = Self::day_start(day);
        let delta = self.config.delta as i64;
        let n = self.net.len();
        let mut trips = Vec::new();
        for k in 0..self.config.intervals {
            for o in 0..n {
                let count = sample_poisson(self.rates[[o, k]], &mut rng) as usize;
                for _ in 0..count {
                    let t = start + k as i64 * delta + rng.random_range(0..delta);
                    let d = self.draw_destination(o, &mut rng);
                    let dur = self.net.tt()[[o, d]].ceil() as i64;
                    trips.push(TripRecord { pickup_time: t, dropoff_time: t + dur, pickup_zone: o, dropoff_zone: d });
                }
            }
        }
        trips.sort_by_key(|t| (t.pickup_time, t.pickup_zone, t.dropoff_zone));
        trips
    }

    fn draw_destination<R: Rng>(&self, origin: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = self.destinations.row(origin);
        for (d, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return d;
            }
        }
        row.iter().rposition(|&p| p > 0.0).unwrap_or(origin)
    }

    /// Days `0..days` with moments and pooled transitions.
    pub fn history(&self, days: u64, seed: u64) -> Result<History> {
        let grid = self.grid();
        let mut trips = Vec::new();
        let mut tensors = Vec::new();
        for day in 0..days {
            let t = self.sample_day(day, seed);
            tensors.push(aggregate_demand(&t, &self.net, &grid, self.window(day)).0);
            trips.extend(t);
        }
        let moments = historical_moments(&tensors, StdDivisor::Population)?;
        let transitions = estimate_transitions(&trips, &self.net, &grid);
        Ok(History { trips, days: tensors, moments, transitions })
    }

    /// True rates scaled by independent log-normal factors with log-sd
    /// `noise`, as rows of a Poisson forecast.
    pub fn noisy_rates(&self, noise: f64, seed: u64) -> Result<Array2<f64>> {
        let normal = Normal::new(0.0, noise).map_err(|e| Error::Domain(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.rates.mapv(|r| (r * normal.sample(&mut rng).exp()).max(1e-3)))
    }

    /// Poisson forecaster that reports `rates` regardless of what it observes.
    pub fn preset_forecast(&self, rates: &Array2<f64>) -> Result<PresetForecast> {
        let (n, h) = rates.dim();
        let theta: Vec<Theta> = rates.iter().map(|&r| [r.max(1e-3), 0.0]).collect();
        PresetForecast::new(DistFamily::Poisson, n, h, theta)
    }
}

/// A seeded experiment: history days, the day that is simulated after them,
/// and a forecaster that sees the true rates through log-normal noise.
pub struct Scenario {
    pub city: SyntheticCity,
    pub history: History,
    pub day: u64,
    pub trips: Vec<TripRecord>,
    pub forecast: PresetForecast,
    pub seed: u64,
}

impl Scenario {
    pub fn new(config: CityConfig, history_days: u64, noise: f64, seed: u64) -> Result<Self> {
        let city = SyntheticCity::new(config)?;
        let history = city.history(history_days, seed)?;
        let trips = city.sample_day(history_days, seed);
        let forecast = city.preset_forecast(&city.noisy_rates(noise, seed ^ 0x5eed)?)?;
        Ok(Scenario { city, history, day: history_days, trips, forecast, seed })
    }

    pub fn sim_config(&self, engine: EngineKind, fleet_size: usize) -> SimConfig {
        SimConfig {
            grid: self.city.grid(),
            regions: self.city.net.len(),
            history_days: self.day as usize,
            fleet_size,
            engine,
            seed: self.seed,
            ..SimConfig::default()
        }
    }

    pub fn run(&self, cfg: &SimConfig) -> Result<SimRun> {
        let inputs = SimInputs {
            net: &self.city.net,
            trips: &self.trips,
            day_start: SyntheticCity::day_start(self.day),
            transitions: &self.history.transitions,
            moments: Some(&self.history.moments),
            forecaster: Some(&self.forecast),
            truth: Some(&self.city.rates),
            fleet: None,
        };
        run_simulation(cfg, &inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_destinations() {
        let city = SyntheticCity::new(CityConfig::default()).unwrap();
        assert_eq!(city.net.len(), 10);
        assert_eq!(city.net.tt()[[0, 5]], 150.0);
        for o in 0..10 {
            assert!((city.destinations.row(o).sum() - 1.0).abs() < 1e-12);
            assert_eq!(city.destinations[[o, o]], 0.0);
        }
        let to_business: f64 = (5..10).map(|d| city.destinations[[2, d]]).sum();
        assert!((to_business - 0.8).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seeded() {
        let city = SyntheticCity::new(CityConfig::default()).unwrap();
        assert_eq!(city.sample_day(3, 7), city.sample_day(3, 7));
        assert_ne!(city.sample_day(3, 7), city.sample_day(4, 7));
        let trips = city.sample_day(0, 1);
        let expected: f64 = city.rates.sum();
        assert!((trips.len() as f64 - expected).abs() < 5.0 * expected.sqrt());
        assert!(trips.iter().all(|t| t.pickup_time < 24 * 300 && t.dropoff_time >= t.pickup_time));
    }

    #[test]
    fn history_moments_track_rates() {
        let city = SyntheticCity::new(CityConfig::default()).unwrap();
        let h = city.history(18, 5).unwrap();
        assert_eq!(h.moments.m, 18);
        h.transitions.validate().unwrap();
        let mean_mu: f64 = h.moments.mu.mean().unwrap();
        assert!((mean_mu - city.rates.mean().unwrap()).abs() < 0.3);
    }
}
