//! Factor-adjusted vector autoregression for high-dimensional time series.
//!
//! The pipeline removes pervasive factor-driven co-movements in the frequency
//! (or time) domain, fits a sparse VAR to the remaining idiosyncratic
//! autocovariances, and estimates the innovation precision matrix. From those
//! fits it derives three networks: Granger-causal links, contemporaneous
//! partial correlations, and long-run partial correlations. Forecasts combine
//! a static-factor predictor with the iterated VAR predictor.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod factor_number;
pub mod forecast;
pub mod linalg;
pub mod networks;
pub mod lp;
pub mod panel;
pub mod pipeline;
pub mod simulate;
pub mod precision;
pub mod spectral;
pub mod threshold_select;
pub mod tuning;
pub mod var_estimation;

pub use error::{Error, Result};
