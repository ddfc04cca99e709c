//! Closed-form optimal execution against a Hawkes trade flow, the Poisson
//! benchmark, and no-manipulation diagnostics.

pub mod matrix_fn;
pub mod pms;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes_model::{HawkesSpec, PropagatorSpec};

pub use matrix_fn::{exp_zeta_omega, omega, zeta};
pub use pms::{check_pms, PmsInitial, PmsReport, Regime};

/// Parameters of the optimal strategy: mono-exponential propagator speed and
/// permanent part, plus the Hawkes trend matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub rho: f64,
    pub nu: f64,
    pub eps: f64,
    /// Shares per currency unit of impact.
    pub q: f64,
    pub m1: f64,
    pub betas: Vec<f64>,
    /// w_i (iota_s - iota_c).
    pub alphas: Vec<f64>,
}

impl StrategyParams {
    /// Hawkes-driven strategy. `eps` defaults to `nu`.
    pub fn hawkes(hawkes: &HawkesSpec, rho: f64, nu: f64, q: f64) -> Result<Self> {
        let net = hawkes.iota_s() - hawkes.iota_c();
        let p = Self {
            rho,
            nu,
            eps: nu,
            q,
            m1: hawkes.m1,
            betas: hawkes.betas.clone(),
            alphas: hawkes.weights.iter().map(|w| w * net).collect(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Strategy from a fitted mono-exponential propagator, with liquidity
    /// `m1 / (gamma m_bar)` so one mean trade moves the price by `gamma m_bar`.
    pub fn from_fits(hawkes: &HawkesSpec, prop: &PropagatorSpec) -> Result<Self> {
        if prop.rhos.len() != 1 {
            return Err(Error::InvalidParameter("strategy needs a mono-exponential propagator".into()));
        }
        let q = hawkes.m1 / (prop.gamma * hawkes.m_bar);
        Self::hawkes(hawkes, prop.rhos[0], prop.nu, q)
    }

    /// Same strategy with the trend term switched off.
    pub fn without_trend(&self) -> Self {
        Self { alphas: vec![0.0; self.alphas.len()], ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.q > 0.0 && self.m1 > 0.0) {
            return Err(Error::InvalidParameter("rho, q and m1 must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(Error::InvalidParameter(format!("eps = {} outside [0,1)", self.eps)));
        }
        if self.betas.len() != self.alphas.len() {
            return Err(Error::InvalidParameter("betas and alphas differ in length".into()));
        }
        Ok(())
    }

    /// H_ij = 1{i=j} beta_i - alpha_j.
    pub fn h_matrix(&self) -> DMatrix<f64> {
        let p = self.betas.len();
        DMatrix::from_fn(p, p, |i, j| if i == j { self.betas[i] } else { 0.0 } - self.alphas[j])
    }

    /// Trend loadings k(u) on the intensity imbalances, `u` the time to horizon.
    pub fn trend_loadings(&self, u: f64) -> DVector<f64> {
        let p = self.betas.len();
        let ones = DVector::from_element(p, 1.0);
        let (_, z, w) = exp_zeta_omega(&(self.h_matrix() * u));
        let ru = self.rho * u;
        let inner = z + w * (self.nu * ru);
        let m = DMatrix::identity(p, p) + inner * (ru / (2.0 + ru));
        (m * ones) * (self.m1 / (2.0 * self.rho))
    }

    fn trend(&self, u: f64, delta: &[f64]) -> f64 {
        if delta.iter().all(|d| *d == 0.0) {
            return 0.0;
        }
        self.trend_loadings(u).iter().zip(delta).map(|(k, d)| k * d).sum()
    }
}

/// Strategy state at a decision time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionState {
    /// Position in shares.
    pub x: f64,
    /// Transient impact level, currency.
    pub d: f64,
    /// Per-scale intensity imbalances.
    pub delta: Vec<f64>,
    pub t: f64,
    pub horizon: f64,
}

impl ExecutionState {
    fn remaining(&self) -> Result<f64> {
        if self.t >= self.horizon {
            return Err(Error::InvalidParameter(format!("t = {} not before horizon {}", self.t, self.horizon)));
        }
        Ok(self.horizon - self.t)
    }

    /// State right after trading `xi`, including the trade's own transient impact.
    pub fn after_trade(&self, params: &StrategyParams, xi: f64) -> Self {
        Self { x: self.x + xi, d: self.d + (1.0 - params.eps) * xi / params.q, ..self.clone() }
    }
}

/// Target position X* at the current state.
pub fn optimal_position(params: &StrategyParams, state: &ExecutionState) -> Result<f64> {
    let u = state.remaining()?;
    let ru = params.rho * u;
    let lhs = -(1.0 + ru) * params.q * state.d + (2.0 + ru) * params.trend(u, &state.delta);
    Ok(lhs / (1.0 - params.eps))
}

/// Trade that brings the position onto the optimal trajectory, with the
/// impact and trend signals scaled by `s`.
pub fn optimal_trade(params: &StrategyParams, state: &ExecutionState, s: f64) -> Result<f64> {
    let u = state.remaining()?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("scale {s} outside [0,1]")));
    }
    let ru = params.rho * u;
    let keep = 1.0 - params.eps;
    let delta: Vec<f64> = state.delta.iter().map(|d| s * d).collect();
    let num = -((1.0 + ru) * params.q * s * state.d + keep * state.x) / (2.0 + ru) + params.trend(u, &delta);
    Ok(num / keep)
}

/// Mean-reversion-only trade of a flow without self-excitation.
pub fn poisson_trade(params: &StrategyParams, state: &ExecutionState, s: f64) -> Result<f64> {
    let flat = ExecutionState { delta: vec![0.0; state.delta.len()], ..state.clone() };
    optimal_trade(params, &flat, s)
}

/// Instantaneous expected cost rate of holding the current position.
pub fn nontrading_cost(params: &StrategyParams, state: &ExecutionState) -> Result<f64> {
    let u = state.remaining()?;
    let keep = 1.0 - params.eps;
    let j = 1.0 / (2.0 + params.rho * u);
    let qd = params.q * state.d;
    let bracket = j * (qd - keep * state.x) - qd + params.trend(u, &state.delta);
    Ok(params.rho / (keep * params.q) * bracket * bracket)
}
