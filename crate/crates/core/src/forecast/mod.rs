//! Distributional demand forecasting.

pub mod dist;
pub mod metrics;
pub mod model;
pub mod train;

pub use dist::{DistFamily, Theta, ALL_FAMILIES};
pub use metrics::{evaluate, mae, mape, mpiw, picp, MetricReport};
pub use model::{gcn_forward, lstm_step, DistForecast, ForecastModel, LstmWeights, ModelConfig, ModelWeights};
pub use train::{day_samples, train, Dataset, Sample, TrainConfig, TrainOutcome};
