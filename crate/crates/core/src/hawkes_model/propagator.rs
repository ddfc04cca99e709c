use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A price impact curve: fraction of a trade's jump still present `t` hours later.
pub trait ImpactCurve {
    fn value(&self, t: f64) -> f64;
    /// Limit of the curve at infinity.
    fn long_run(&self) -> f64;
}

/// Multi-exponential resilience with a linear ramp over the adjustment lag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorSpec {
    pub gamma: f64,
    pub nu: f64,
    pub lambdas: Vec<f64>,
    /// 1/hour.
    pub rhos: Vec<f64>,
    /// Hours.
    pub adj_lag: f64,
    /// Currency per square-root hour.
    pub sigma: f64,
    /// Shares per currency unit of impact.
    pub q: f64,
}

impl PropagatorSpec {
    pub fn new(gamma: f64, nu: f64, lambdas: Vec<f64>, rhos: Vec<f64>, adj_lag: f64, sigma: f64, q: f64) -> Result<Self> {
        let spec = Self { gamma, nu, lambdas, rhos, adj_lag, sigma, q };
        spec.validate()?;
        Ok(spec)
    }

    /// Mono-exponential curve with unit liquidity.
    pub fn mono(gamma: f64, lambda: f64, rho: f64, adj_lag: f64, sigma: f64) -> Result<Self> {
        Self::new(gamma, 1.0 - lambda, vec![lambda], vec![rho], adj_lag, sigma, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.len() != self.rhos.len() {
            return Err(Error::InvalidParameter("lambdas and rhos differ in length".into()));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter("gamma must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::InvalidParameter(format!("nu = {} outside [0,1]", self.nu)));
        }
        if self.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::InvalidParameter("lambdas must lie in [0,1]".into()));
        }
        if self.rhos.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidParameter("rhos must be positive".into()));
        }
        let total = self.nu + self.lambdas.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("nu + sum(lambda) = {total}, expected 1")));
        }
        if !(self.adj_lag >= 0.0 && self.sigma >= 0.0) {
            return Err(Error::InvalidParameter("adjustment lag and sigma must be nonnegative".into()));
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(Error::InvalidParameter("liquidity must be positive".into()));
        }
        Ok(())
    }

    /// R(t) = gamma [nu + sum lambda_i exp(-rho_i t)].
    pub fn resilience(&self, t: f64) -> f64 {
        self.gamma * (self.nu + self.lambdas.iter().zip(&self.rhos).map(|(l, r)| l * (-r * t).exp()).sum::<f64>())
    }

    /// G(t), erroring on negative times.
    pub fn propagator_value(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidParameter(format!("propagator evaluated at negative time {t}")));
        }
        Ok(self.value(t))
    }

    pub fn permanent(&self) -> f64 {
        self.gamma * self.nu
    }

    pub fn transient_fraction(&self) -> f64 {
        1.0 - self.nu
    }
}

impl ImpactCurve for PropagatorSpec {
    fn value(&self, t: f64) -> f64 {
        if self.adj_lag > 0.0 && t <= self.adj_lag {
            1.0 + (self.resilience(self.adj_lag) - 1.0) * t / self.adj_lag
        } else {
            self.resilience(t)
        }
    }

    fn long_run(&self) -> f64 {
        self.permanent()
    }
}

/// Markovian accumulator of past trade impacts under a [`PropagatorSpec`].
///
/// Trades younger than the adjustment lag sit in a ramp queue; older ones are
/// folded into a permanent sum and one exponential accumulator per speed.
#[derive(Clone, Debug)]
pub struct PropagatorState {
    spec: PropagatorSpec,
    r_lag: f64,
    permanent: f64,
    exp: Vec<f64>,
    ramp: VecDeque<(f64, f64)>,
    total_jump: f64,
    last: f64,
}

impl PropagatorState {
    pub fn new(spec: &PropagatorSpec) -> Self {
        Self {
            r_lag: spec.resilience(spec.adj_lag),
            spec: spec.clone(),
            permanent: 0.0,
            exp: vec![0.0; spec.rhos.len()],
            ramp: VecDeque::new(),
            total_jump: 0.0,
            last: 0.0,
        }
    }

    pub fn advance(&mut self, t: f64) {
        let dt = t - self.last;
        if dt > 0.0 {
            for (e, r) in self.exp.iter_mut().zip(&self.spec.rhos) {
                *e *= (-r * dt).exp();
            }
            self.last = t;
        }
        while let Some(&(tau, jump)) = self.ramp.front() {
            if t - tau <= self.spec.adj_lag {
                break;
            }
            self.ramp.pop_front();
            self.fold(t - tau, jump);
        }
    }

    fn fold(&mut self, age: f64, jump: f64) {
        let g = self.spec.gamma;
        self.permanent += jump * g * self.spec.nu;
        for ((e, l), r) in self.exp.iter_mut().zip(&self.spec.lambdas).zip(&self.spec.rhos) {
            *e += jump * g * l * (-r * age).exp();
        }
    }

    pub fn add_trade(&mut self, t: f64, jump: f64) {
        self.advance(t);
        self.total_jump += jump;
        if self.spec.adj_lag > 0.0 {
            self.ramp.push_back((t, jump));
        } else {
            self.fold(0.0, jump);
        }
    }

    fn ramp_value(&self, u: f64) -> f64 {
        1.0 + (self.r_lag - 1.0) * u / self.spec.adj_lag
    }

    /// Sum of jump * G(t - tau) over all trades so far.
    pub fn impact(&mut self, t: f64) -> f64 {
        self.advance(t);
        let ramp: f64 = self.ramp.iter().map(|&(tau, j)| j * self.ramp_value(t - tau)).sum();
        self.permanent + self.exp.iter().sum::<f64>() + ramp
    }

    /// Sum of jump * [G(t - tau) - G(inf)]: the transient impact level.
    pub fn transient(&mut self, t: f64) -> f64 {
        self.impact(t) - self.spec.permanent() * self.total_jump
    }
}
