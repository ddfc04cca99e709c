//! Hawkes order flow, propagator price impact and optimal execution.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// numeric kernels walk several arrays in lockstep by index
#![allow(clippy::needless_range_loop)]

pub mod backtest;
pub mod error;
pub mod hawkes_estimator;
pub mod hawkes_model;
pub mod market_data;
pub mod newton;
pub mod par;
pub mod propagator_estimator;
pub mod strategy_engine;

pub use error::{Error, Result};
