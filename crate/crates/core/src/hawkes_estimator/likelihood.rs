//! Log-likelihood of the two-sided marked Hawkes flow with analytic derivatives.
//!
//! Parameters are ordered (kappa_inf, phi_s0, phi_s1, phi_c0, phi_c1, w_1..w_p, beta_1..beta_p).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hawkes_model::{HawkesSpec, MarkType, MarkedEvent};
use crate::market_data::DayWindow;
use crate::newton::Objective;
use crate::par;

/// Excitation sums at one jump for one decay speed, before the jump itself.
/// Index 0..4 is (same side, same side x mark, opposite side, opposite side x mark);
/// `u` and `uu` weight each term by the elapsed time and its square.
#[derive(Clone, Copy, Debug, Default)]
struct Features {
    a: [f64; 4],
    u: [f64; 4],
    uu: [f64; 4],
}

/// Compensator sums for one speed: plain and mark weighted, with beta derivatives.
#[derive(Clone, Copy, Debug, Default)]
struct Compensator {
    q: [f64; 2],
    dq: [f64; 2],
    ddq: [f64; 2],
}

#[derive(Clone, Debug)]
struct DayData {
    /// Features of jumps in [t0, T), row-major by jump then speed.
    features: Vec<Features>,
    compensator: Vec<Compensator>,
    span: f64,
    horizon: f64,
}

/// Sufficient statistics of the likelihood for fixed speeds, marks and burn-in.
#[derive(Clone, Debug)]
pub struct LikelihoodData {
    pub betas: Vec<f64>,
    pub mark_type: MarkType,
    pub burn_in: f64,
    days: Vec<DayData>,
    n_points: usize,
}

/// Antiderivative of exp(-beta u) and its first two beta derivatives.
fn antiderivative(beta: f64, u: f64) -> [f64; 3] {
    if u <= 0.0 {
        return [0.0; 3];
    }
    let e = (-beta * u).exp();
    let one_minus = -(-beta * u).exp_m1();
    [
        one_minus / beta,
        u * e / beta - one_minus / (beta * beta),
        -u * u * e / beta - 2.0 * u * e / (beta * beta) + 2.0 * one_minus / beta.powi(3),
    ]
}

fn day_data(trades: &[MarkedEvent], marks: &[f64], betas: &[f64], burn_in: f64, horizon: f64) -> DayData {
    let p = betas.len();
    // Per speed and side: [a, a x, u, u x, uu, uu x].
    let mut state = vec![[[0.0f64; 6]; 2]; p];
    let mut last = 0.0;
    let mut features = Vec::new();
    for (e, &x) in trades.iter().zip(marks) {
        let dt = e.time - last;
        for (i, beta) in betas.iter().enumerate() {
            let f = (-beta * dt).exp();
            for side in state[i].iter_mut() {
                for m in 0..2 {
                    let (a, b, c) = (side[m], side[2 + m], side[4 + m]);
                    side[m] = f * a;
                    side[2 + m] = f * (b + dt * a);
                    side[4 + m] = f * (c + 2.0 * dt * b + dt * dt * a);
                }
            }
        }
        last = e.time;
        let own = usize::from(!e.is_buy());
        if e.time >= burn_in && e.time < horizon {
            for s in &state {
                let (same, other) = (&s[own], &s[1 - own]);
                features.push(Features {
                    a: [same[0], same[1], other[0], other[1]],
                    u: [same[2], same[3], other[2], other[3]],
                    uu: [same[4], same[5], other[4], other[5]],
                });
            }
        }
        for s in state.iter_mut() {
            s[own][0] += 1.0;
            s[own][1] += x;
        }
    }
    let compensator = betas
        .iter()
        .map(|&beta| {
            let mut c = Compensator::default();
            for (e, &x) in trades.iter().zip(marks) {
                if e.time >= horizon {
                    break;
                }
                let hi = antiderivative(beta, horizon - e.time);
                let lo = antiderivative(beta, burn_in.max(e.time) - e.time);
                for (m, w) in [1.0, x].into_iter().enumerate() {
                    c.q[m] += w * (hi[0] - lo[0]);
                    c.dq[m] += w * (hi[1] - lo[1]);
                    c.ddq[m] += w * (hi[2] - lo[2]);
                }
            }
            c
        })
        .collect();
    DayData { features, compensator, span: horizon - burn_in, horizon }
}

/// Mark of each trade under `mark_type`; unit marks carry no linear term.
pub fn trade_marks(trades: &[MarkedEvent], mark_type: MarkType, m1: f64, m_bar: f64) -> Vec<f64> {
    trades
        .iter()
        .map(|e| match mark_type {
            MarkType::Unit => 0.0,
            MarkType::Volume => e.volume / m1,
            MarkType::Price => e.price_jump.abs() / m_bar,
        })
        .collect()
}

/// Hawkes parameters in the order used by the likelihood, minus the speeds.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelParams {
    pub kappa_inf: f64,
    pub phi_s: [f64; 2],
    pub phi_c: [f64; 2],
    pub weights: Vec<f64>,
}

impl KernelParams {
    pub fn from_spec(spec: &HawkesSpec) -> Self {
        Self { kappa_inf: spec.kappa_inf, phi_s: spec.phi_s, phi_c: spec.phi_c, weights: spec.weights.clone() }
    }

    fn phi(&self) -> [f64; 4] {
        [self.phi_s[0], self.phi_s[1], self.phi_c[0], self.phi_c[1]]
    }
}

fn set(m: &mut DMatrix<f64>, a: usize, b: usize, v: f64) {
    m[(a, b)] = v;
    m[(b, a)] = v;
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LikelihoodData {
    pub fn new(windows: &[DayWindow], mark_type: MarkType, m1: f64, m_bar: f64, betas: &[f64], burn_in: f64) -> Result<Self> {
        if betas.is_empty() || betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidParameter("decay speeds must be positive".into()));
        }
        if !(m1 > 0.0 && m_bar > 0.0) {
            return Err(Error::InvalidParameter("mark scales must be positive".into()));
        }
        if let Some(w) = windows.iter().find(|w| !(burn_in >= 0.0 && burn_in < w.horizon)) {
            return Err(Error::InvalidParameter(format!("burn-in {burn_in} outside [0, {})", w.horizon)));
        }
        let days = par::map(windows, |w| {
            let trades: Vec<MarkedEvent> = w.trades().copied().collect();
            let marks = trade_marks(&trades, mark_type, m1, m_bar);
            day_data(&trades, &marks, betas, burn_in, w.horizon)
        });
        let n_points = days.iter().map(|d| d.features.len() / betas.len()).sum();
        Ok(Self { betas: betas.to_vec(), mark_type, burn_in, days, n_points })
    }

    /// Number of jumps inside [t0, T) over all days.
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dim(&self) -> usize {
        5 + 2 * self.betas.len()
    }

    fn check(&self, params: &KernelParams) -> Result<()> {
        if params.weights.len() != self.betas.len() {
            return Err(Error::InvalidParameter("weights and speeds differ in length".into()));
        }
        Ok(())
    }

    /// Log-likelihood value only.
    pub fn value(&self, params: &KernelParams) -> Result<f64> {
        self.check(params)?;
        let p = self.betas.len();
        let phi = params.phi();
        let parts = par::map(&self.days, |day| -> Result<f64> {
            let mut v = 0.0;
            for feats in day.features.chunks(p) {
                let lam = params.kappa_inf + feats.iter().zip(&params.weights).map(|(f, w)| w * dot(&phi, &f.a)).sum::<f64>();
                if !(lam > 0.0) {
                    return Err(Error::ZeroIntensity(lam));
                }
                v += lam.ln();
            }
            v -= 2.0 * params.kappa_inf * day.span;
            for (c, w) in day.compensator.iter().zip(&params.weights) {
                v -= w * ((phi[0] + phi[2]) * c.q[0] + (phi[1] + phi[3]) * c.q[1]);
            }
            Ok(v + 2.0 * day.horizon)
        });
        parts.into_iter().sum()
    }

    /// Log-likelihood with gradient and Hessian over all parameters.
    pub fn evaluate(&self, params: &KernelParams) -> Result<Objective> {
        self.check(params)?;
        let p = self.betas.len();
        let n = self.dim();
        let phi = params.phi();
        let w = &params.weights;
        let parts = par::map(&self.days, |day| -> Result<Objective> {
            let mut obj = Objective::zeros(n);
            let mut g = DVector::zeros(n);
            let mut h2 = DMatrix::zeros(n, n);
            for feats in day.features.chunks(p) {
                g.fill(0.0);
                h2.fill(0.0);
                g[0] = 1.0;
                let mut lam = params.kappa_inf;
                for (i, f) in feats.iter().enumerate() {
                    let level = dot(&phi, &f.a);
                    let slope = dot(&phi, &f.u);
                    lam += w[i] * level;
                    for k in 0..4 {
                        g[1 + k] += w[i] * f.a[k];
                        set(&mut h2, 1 + k, 5 + i, f.a[k]);
                        set(&mut h2, 1 + k, 5 + p + i, -w[i] * f.u[k]);
                    }
                    g[5 + i] = level;
                    g[5 + p + i] = -w[i] * slope;
                    set(&mut h2, 5 + i, 5 + p + i, -slope);
                    set(&mut h2, 5 + p + i, 5 + p + i, w[i] * dot(&phi, &f.uu));
                }
                if !(lam > 0.0) {
                    return Err(Error::ZeroIntensity(lam));
                }
                obj.value += lam.ln();
                obj.grad += &g / lam;
                obj.hess += &h2 / lam;
                obj.hess.ger(-1.0 / (lam * lam), &g, &g, 1.0);
            }
            let big = [phi[0] + phi[2], phi[1] + phi[3]];
            obj.value += 2.0 * day.horizon - 2.0 * params.kappa_inf * day.span;
            obj.grad[0] -= 2.0 * day.span;
            for (i, c) in day.compensator.iter().enumerate() {
                let (wi, bi) = (5 + i, 5 + p + i);
                obj.value -= w[i] * (big[0] * c.q[0] + big[1] * c.q[1]);
                for m in 0..2 {
                    for k in [1 + m, 3 + m] {
                        obj.grad[k] -= w[i] * c.q[m];
                        obj.hess[(k, wi)] -= c.q[m];
                        obj.hess[(wi, k)] -= c.q[m];
                        obj.hess[(k, bi)] -= w[i] * c.dq[m];
                        obj.hess[(bi, k)] -= w[i] * c.dq[m];
                    }
                }
                let dw = big[0] * c.dq[0] + big[1] * c.dq[1];
                obj.grad[wi] -= big[0] * c.q[0] + big[1] * c.q[1];
                obj.grad[bi] -= w[i] * dw;
                obj.hess[(wi, bi)] -= dw;
                obj.hess[(bi, wi)] -= dw;
                obj.hess[(bi, bi)] -= w[i] * (big[0] * c.ddq[0] + big[1] * c.ddq[1]);
            }
            Ok(obj)
        });
        let mut total = Objective::zeros(n);
        for part in parts {
            total = total.accumulate(&part?);
        }
        // the rank-one update is not bitwise symmetric
        total.hess = (&total.hess + total.hess.transpose()) * 0.5;
        Ok(total)
    }
}

/// Total log-likelihood of `spec` on `windows` after burn-in, with derivatives.
pub fn hawkes_loglik(windows: &[DayWindow], spec: &HawkesSpec, burn_in: f64) -> Result<(Objective, usize)> {
    spec.validate()?;
    let data = LikelihoodData::new(windows, spec.mark_type, spec.m1, spec.m_bar, &spec.betas, burn_in)?;
    Ok((data.evaluate(&KernelParams::from_spec(spec))?, data.n_points()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(events: Vec<MarkedEvent>) -> DayWindow {
        DayWindow { label: "l".into(), events, horizon: 1.0, tick_size: 0.005, p0: 10.0, mean_queue: 1.0 }
    }

    #[test]
    fn poisson_reduction() {
        let events: Vec<MarkedEvent> = (1..40).map(|i| MarkedEvent::trade(i as f64 * 0.024, if i % 3 == 0 { -0.0025 } else { 0.0025 }, 5.0)).collect();
        let w = window(events);
        let t0 = 0.25;
        let data = LikelihoodData::new(std::slice::from_ref(&w), MarkType::Volume, 5.0, 0.0025, &[30.0], t0).unwrap();
        let k = 17.0;
        let v = data.value(&KernelParams { kappa_inf: k, phi_s: [0.0; 2], phi_c: [0.0; 2], weights: vec![1.0] }).unwrap();
        let n = w.trades().filter(|e| e.time >= t0).count() as f64;
        let oracle = k.ln() * n - 2.0 * k * (1.0 - t0) + 2.0 * 1.0;
        assert!((v - oracle).abs() < 1e-12);
        assert_eq!(data.n_points(), n as usize);
    }

    #[test]
    fn single_buy_excites_next_buy() {
        let w = window(vec![MarkedEvent::trade(0.1, 0.0025, 1.0), MarkedEvent::trade(0.2, 0.0025, 1.0)]);
        let data = LikelihoodData::new(std::slice::from_ref(&w), MarkType::Unit, 1.0, 1.0, &[10.0], 0.0).unwrap();
        let params = KernelParams { kappa_inf: 2.0, phi_s: [3.0, 0.0], phi_c: [1.0, 0.0], weights: vec![1.0] };
        let v = data.value(&params).unwrap();
        let lam2 = 2.0 + 3.0 * (-1.0f64).exp();
        let comp = 2.0 * 2.0 * 1.0 + 4.0 * ((1.0 - (-9.0f64).exp()) + (1.0 - (-8.0f64).exp())) / 10.0;
        assert!((v - (2.0f64.ln() + lam2.ln() - comp + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_intensity_is_reported() {
        let w = window(vec![MarkedEvent::trade(0.1, 0.0025, 1.0)]);
        let data = LikelihoodData::new(std::slice::from_ref(&w), MarkType::Unit, 1.0, 1.0, &[10.0], 0.0).unwrap();
        let params = KernelParams { kappa_inf: 0.0, phi_s: [3.0, 0.0], phi_c: [1.0, 0.0], weights: vec![1.0] };
        assert!(matches!(data.value(&params), Err(Error::ZeroIntensity(_))));
    }
}
