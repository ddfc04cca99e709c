use serde::{Deserialize, Serialize};

use crate::hawkes_model::{HawkesSpec, PropagatorSpec};

/// Direction of the deviation from a martingale price.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Martingale,
    MeanReverting,
    Persistent,
}

/// Initial imbalances (Hawkes speed grid) and transient impacts (propagator grid).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmsInitial {
    pub delta: Vec<f64>,
    pub d: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmsReport {
    /// Merged speed grid.
    pub speeds: Vec<f64>,
    /// (iota_s - iota_c) w_i - lambda_i rho_i per merged speed.
    pub condition_residuals: Vec<f64>,
    /// (m1 / q) delta_i - rho_i D_i per merged speed.
    pub initial_residuals: Option<Vec<f64>>,
    /// Largest |(phi_s - phi_c)(x) - (iota_s - iota_c) x| over the mark support.
    pub affine_residual: f64,
    pub branching_ratio: f64,
    pub dbr: f64,
    pub transient_fraction: f64,
    pub regime: Regime,
}

impl PmsReport {
    pub fn max_residual(&self) -> f64 {
        let mut m = self.condition_residuals.iter().fold(self.affine_residual.abs(), |a, r| a.max(r.abs()));
        if let Some(init) = &self.initial_residuals {
            m = init.iter().fold(m, |a, r| a.max(r.abs()));
        }
        m
    }
}

fn merge(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * y.abs().max(1.0));
    all
}

fn pad(grid: &[f64], speeds: &[f64], values: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|g| speeds.iter().position(|s| (s - g).abs() <= 1e-9 * g.abs().max(1.0)).map_or(0.0, |i| values[i]))
        .collect()
}

/// Checks the no-price-manipulation conditions for a Hawkes flow and a
/// multi-exponential propagator. `mark_support` bounds the marks seen in data
/// and `tol` is the DBR band counted as a martingale.
pub fn check_pms(
    hawkes: &HawkesSpec,
    prop: &PropagatorSpec,
    initial: Option<&PmsInitial>,
    mark_support: (f64, f64),
    tol: f64,
) -> PmsReport {
    let speeds = merge(&hawkes.betas, &prop.rhos);
    let w = pad(&speeds, &hawkes.betas, &hawkes.weights);
    let lam = pad(&speeds, &prop.rhos, &prop.lambdas);
    let net = hawkes.iota_s() - hawkes.iota_c();
    let condition_residuals = speeds.iter().enumerate().map(|(i, r)| net * w[i] - lam[i] * r).collect();
    let initial_residuals = initial.map(|init| {
        let delta = pad(&speeds, &hawkes.betas, &init.delta);
        let d = pad(&speeds, &prop.rhos, &init.d);
        speeds.iter().enumerate().map(|(i, r)| hawkes.m1 / prop.q * delta[i] - r * d[i]).collect()
    });
    let diff = |x: f64| (hawkes.phi_self(x) - hawkes.phi_cross(x)) - net * x;
    let affine_residual = diff(mark_support.0).abs().max(diff(mark_support.1).abs());
    let dbr = hawkes.directional_branching_ratio();
    let transient_fraction = 1.0 - prop.nu;
    let regime = if (dbr - transient_fraction).abs() <= tol {
        Regime::Martingale
    } else if dbr < transient_fraction {
        Regime::MeanReverting
    } else {
        Regime::Persistent
    };
    PmsReport {
        speeds,
        condition_residuals,
        initial_residuals,
        affine_residual,
        branching_ratio: hawkes.branching_ratio(),
        dbr,
        transient_fraction,
        regime,
    }
}
