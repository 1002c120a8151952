//! Sparse vector-autoregressive forecasting of weekly case counts.
//!
//! The pipeline smooths and differences each series, fits an L1-penalized
//! VAR(p) by coordinate descent, issues rolling two-week-ahead forecasts
//! with prediction intervals, and scores them against univariate and naive
//! benchmarks with slope-weighted error metrics that emphasize weeks of
//! rising incidence.

pub mod backtest;
pub mod benchmarks;
pub mod error;
pub mod evaluate;
pub mod lasso;
pub mod linalg;
pub mod panel;
pub mod preprocess;
pub mod synth;
pub mod varmodel;

pub use error::{Error, ErrorKind, Result};
