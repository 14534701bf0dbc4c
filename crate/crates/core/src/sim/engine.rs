//! Rebalancing engines: each turns the current fleet snapshot and its own
//! demand input into a first-interval rebalancing plan.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{DistFamily, DistForecast, ForecastModel, Theta};
use crate::ingest::HistoricalMoments;
use crate::mivr::{self, Demand, IndexConvention, MivrInstance, RebalancePlan};
use crate::network::{DemandTensor, TimeGrid, TransitionMatrices, ZoneNetwork};
use crate::uncertainty::{build_duro_set, build_ro_set};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    /// No rebalancing.
    None,
    /// Deterministic program on historical means.
    Dohv,
    /// Deterministic program on forecast means.
    Donn,
    /// Robust program on a historical moment set.
    Ro,
    /// Robust program on a forecast-interval set.
    Duro,
    /// Deterministic program on the true expected demand, where known.
    Truth,
}

pub const ALL_ENGINES: [EngineKind; 6] =
    [EngineKind::None, EngineKind::Dohv, EngineKind::Donn, EngineKind::Ro, EngineKind::Duro, EngineKind::Truth];

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::None => "none",
            EngineKind::Dohv => "dohv",
            EngineKind::Donn => "donn",
            EngineKind::Ro => "ro",
            EngineKind::Duro => "duro",
            EngineKind::Truth => "truth",
        }
    }

    pub fn needs_moments(self) -> bool {
        matches!(self, EngineKind::Dohv | EngineKind::Ro)
    }

    pub fn needs_forecaster(self) -> bool {
        matches!(self, EngineKind::Donn | EngineKind::Duro)
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_ENGINES
            .into_iter()
            .find(|e| e.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Domain(format!("unknown engine `{s}`")))
    }
}

/// Distributional demand forecasts made from counts revealed so far.
pub trait DemandForecaster: Send + Sync {
    /// Forecast of day intervals `interval .. interval + horizon`. Only
    /// `revealed` intervals before `interval` may be read.
    fn forecast(&self, revealed: &DemandTensor, interval: usize, horizon: usize) -> Result<DistForecast>;
}

/// Forecasts from a trained model. Lags before the start of the day fall back
/// to the historical mean of the first interval; historical inputs past the
/// end of the moments repeat the last interval.
pub struct ModelForecaster<'a> {
    pub model: &'a ForecastModel,
    pub moments: &'a HistoricalMoments,
}

impl DemandForecaster for ModelForecaster<'_> {
    fn forecast(&self, revealed: &DemandTensor, interval: usize, horizon: usize) -> Result<DistForecast> {
        let cfg = &self.model.config;
        if horizon > cfg.horizon {
            return Err(Error::shape(format!("model forecasts {} intervals, asked for {horizon}", cfg.horizon)));
        }
        let n = revealed.regions();
        let last = self.moments.intervals().saturating_sub(1);
        let lags = Array2::from_shape_fn((n, cfg.lag), |(i, l)| {
            let back = cfg.lag - l;
            if back <= interval {
                revealed.get(i, interval - back) as f64
            } else {
                self.moments.mu(i, 0)
            }
        });
        let hist = Array2::from_shape_fn((n, cfg.horizon), |(i, h)| self.moments.mu(i, (interval + h).min(last)));
        let full = self.model.forward(&lags, &hist)?;
        truncate(&full, horizon)
    }
}

/// Fixed per-cell parameters for a whole day.
pub struct PresetForecast {
    family: DistFamily,
    regions: usize,
    intervals: usize,
    theta: Vec<Theta>,
}

impl PresetForecast {
    /// `theta` is region-major over `intervals`.
    pub fn new(family: DistFamily, regions: usize, intervals: usize, theta: Vec<Theta>) -> Result<Self> {
        DistForecast::new(family, regions, intervals, theta.clone())?;
        Ok(PresetForecast { family, regions, intervals, theta })
    }
}

impl DemandForecaster for PresetForecast {
    fn forecast(&self, _revealed: &DemandTensor, interval: usize, horizon: usize) -> Result<DistForecast> {
        if interval + horizon > self.intervals {
            return Err(Error::shape(format!(
                "preset covers {} intervals, asked for {interval}..{}",
                self.intervals,
                interval + horizon
            )));
        }
        let theta = (0..self.regions)
            .flat_map(|i| (interval..interval + horizon).map(move |k| (i, k)))
            .map(|(i, k)| self.theta[i * self.intervals + k])
            .collect();
        DistForecast::new(self.family, self.regions, horizon, theta)
    }
}

fn truncate(f: &DistForecast, horizon: usize) -> Result<DistForecast> {
    if horizon == f.horizon {
        return Ok(f.clone());
    }
    let theta = (0..f.regions).flat_map(|i| (0..horizon).map(move |h| (i, h))).map(|(i, h)| *f.theta(i, h)).collect();
    DistForecast::new(f.family, f.regions, horizon, theta)
}

/// Everything an engine may read besides the fleet snapshot.
pub struct EngineInputs<'a> {
    pub net: &'a ZoneNetwork,
    pub grid: &'a TimeGrid,
    pub transitions: &'a TransitionMatrices,
    pub moments: Option<&'a HistoricalMoments>,
    pub forecaster: Option<&'a dyn DemandForecaster>,
    /// Expected demand per region and day interval.
    pub truth: Option<&'a Array2<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineParams {
    pub beta: f64,
    pub gamma: f64,
    pub pi: f64,
    pub budget: f64,
    pub rho: f64,
    pub distance_scale: f64,
    pub fleet_size: f64,
    pub convention: IndexConvention,
}

/// Plans day interval `interval` over `horizon` intervals from vacant and
/// occupied counts `v`, `o`.
#[allow(clippy::too_many_arguments)]
pub fn plan_interval(
    kind: EngineKind,
    params: &EngineParams,
    inputs: &EngineInputs,
    v: &[f64],
    o: &[f64],
    interval: usize,
    horizon: usize,
    revealed: &DemandTensor,
) -> Result<RebalancePlan> {
    if kind == EngineKind::None {
        return Ok(RebalancePlan::empty());
    }
    let n = inputs.net.len();
    let mut inst = MivrInstance::from_network(inputs.net, inputs.grid, horizon, inputs.transitions.clone());
    inst.dist = inputs.net.dist() * params.distance_scale;
    inst.v0 = v.to_vec();
    inst.o0 = o.to_vec();
    inst.beta = params.beta;
    inst.gamma = params.gamma;
    inst.fleet_size = params.fleet_size;
    inst.convention = params.convention;
    let cells = |f: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
        (0..n).flat_map(|i| (0..horizon).map(move |k| (i, k))).map(|(i, k)| f(i, k)).collect()
    };
    let moments = || inputs.moments.ok_or_else(|| Error::invariant(format!("engine {kind} needs historical moments")));
    let forecaster = || inputs.forecaster.ok_or_else(|| Error::invariant(format!("engine {kind} needs a forecaster")));
    inst.demand = match kind {
        EngineKind::None => unreachable!(),
        EngineKind::Dohv => {
            let m = moments()?;
            if interval + horizon > m.intervals() {
                return Err(Error::shape(format!("moments end before interval {}", interval + horizon)));
            }
            Demand::Point(cells(&|i, k| m.mu(i, interval + k)))
        }
        EngineKind::Truth => {
            let t = inputs.truth.ok_or_else(|| Error::invariant("engine truth needs expected demand"))?;
            if interval + horizon > t.ncols() {
                return Err(Error::shape(format!("expected demand ends before interval {}", interval + horizon)));
            }
            Demand::Point(cells(&|i, k| t[[i, interval + k]]))
        }
        EngineKind::Donn => {
            let f = forecaster()?.forecast(revealed, interval, horizon)?;
            Demand::Point(cells(&|i, k| f.mean(i, k).max(0.0)))
        }
        EngineKind::Ro => Demand::Set(build_ro_set(moments()?, interval, horizon, params.rho, params.budget)?),
        EngineKind::Duro => {
            let f = forecaster()?.forecast(revealed, interval, horizon)?;
            Demand::Set(build_duro_set(&f, params.pi, params.budget)?)
        }
    };
    mivr::plan(&inst)
}
