//! Calibration of the propagator price-impact curve.

mod curve;
mod data;
mod fit;

pub use curve::{compute_r2, estimate_sigma, predict_price, quadratic_error, FnCurve, PiecewiseCurve};
pub use data::{LagData, LagDay, RegressionDay, RegressionSet};
pub use fit::{
    calibrate_propagator, fit_mono_resilience, fit_multi_resilience, fit_unconstrained, linear_step, resilience_objective, select_adjustment_lag,
    unconstrained_normal_equations, FitKind, Form, LagScore, PropagatorCalibration, PropagatorFit, RegressionConfig,
};
