//! Robust rebalancing for autonomous mobility-on-demand fleets.
//!
//! The crate is organized bottom-up:
//!
//! * [`network`] and [`fleet`]: zones, time grid, demand tensors, vehicles.
//! * [`ingest`]: trip parsing, demand aggregation, historical moments,
//!   transition estimation.
//! * [`forecast`]: likelihood heads, the GCN-LSTM forecaster, training and
//!   forecast metrics.
//! * [`uncertainty`]: interval- and moment-based budgeted uncertainty sets.
//! * [`lp`] and [`mivr`]: an embedded simplex solver and the
//!   matching-integrated rebalancing programs built on it.
//! * [`sim`]: the closed-loop fleet simulator and its rebalancing engines.
//! * [`synthetic`]: seeded synthetic cities for experiments and tests.

// `!(x > 0.0)` deliberately rejects NaN; dense numeric kernels index.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fleet;
pub mod forecast;
pub mod ingest;
pub mod lp;
pub mod mivr;
pub mod network;
pub mod sim;
pub mod synthetic;
pub mod uncertainty;

pub use error::{Error, Result};
