//! Fixed-budget order-statistic resampling inference: confidence intervals,
//! tests and prediction sets built from `B` Monte Carlo draws, together with
//! finite-`B` coverage bounds and exact enumeration oracles.

pub mod bounds;
pub mod distances;
pub mod error;
pub mod exact_dists;
pub mod harness;
pub mod oracle;
pub mod orderstats;
pub mod procedures;
pub mod resampling;

pub use error::{Error, Result};
