//! Least-squares fits of the propagator: unconstrained knots, multi- and
//! mono-exponential resilience.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes_model::PropagatorSpec;
use crate::market_data::DayWindow;
use crate::newton::{self, Objective};
use crate::par;

use super::curve::{estimate_sigma, PiecewiseCurve};
use super::data::{LagData, LagDay, RegressionDay, RegressionSet};

const SECONDS: f64 = 1.0 / 3600.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionConfig {
    /// Regression window in hours.
    pub reg_window: f64,
    /// Candidate adjustment lags in seconds.
    pub lag_grid: Vec<f64>,
    /// Fixed resilience speeds of the multi-exponential fit, 1/hour.
    pub rho_grid: Vec<f64>,
    /// Knot times of the unconstrained curve in hours, excluding 0.
    pub knots: Vec<f64>,
    pub max_iter: usize,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            reg_window: 0.5,
            lag_grid: vec![0.0, 2.0, 4.0, 6.0],
            rho_grid: vec![6.0, 60.0, 120.0, 360.0],
            knots: (1..=20).map(|i| i as f64 * 0.01).collect(),
            max_iter: 200,
        }
    }
}

fn increasing(v: &[f64], strict_positive: bool) -> bool {
    !v.is_empty() && v.windows(2).all(|w| w[1] > w[0]) && v.iter().all(|x| x.is_finite() && if strict_positive { *x > 0.0 } else { *x >= 0.0 })
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.1..=1.0).contains(&self.reg_window) {
            return Err(Error::InvalidParameter(format!("regression window {} outside [0.1, 1] hours", self.reg_window)));
        }
        if !increasing(&self.lag_grid, false) || !increasing(&self.rho_grid, true) || !increasing(&self.knots, true) {
            return Err(Error::InvalidParameter("lag, speed and knot grids must be nonempty and increasing".into()));
        }
        if self.lag_grid.last().unwrap() * SECONDS >= self.reg_window {
            return Err(Error::InvalidParameter("adjustment lag must be shorter than the regression window".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Unconstrained,
    Multi,
    Mono,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorFit {
    pub kind: FitKind,
    /// Resilience form; absent for the unconstrained curve.
    pub spec: Option<PropagatorSpec>,
    /// Knot values; present for the unconstrained curve.
    pub curve: Option<PiecewiseCurve>,
    pub r2: f64,
    pub sigma_hat: f64,
    /// Quadratic error at the optimum.
    pub error: f64,
    /// Steps taken by the mono protocol, empty otherwise.
    pub trace: Vec<String>,
    /// False when the decay speed could not be pinned down.
    pub identified: bool,
}

/// Parameterization of the resilience R(t) used by the Newton fits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Form {
    /// (nu_bar, lambda_bar_1..p, rho_1..p) with R = nu_bar + sum lambda_bar_i exp(-rho_i t).
    General,
    /// (lambda_1..p, rho_1..p) with R = gamma (1 - sum lambda_i (1 - exp(-rho_i t))).
    Unit { gamma: f64 },
}

impl Form {
    fn speeds(self, n: usize) -> usize {
        match self {
            Form::General => (n - 1) / 2,
            Form::Unit { .. } => n / 2,
        }
    }
}

fn day_objective(day: &RegressionDay, lag_day: &LagDay, lag: f64, delta_r: f64, form: Form, x: &DVector<f64>) -> Objective {
    let n = x.len();
    let p = form.speeds(n);
    let off = match form {
        Form::General => 1,
        Form::Unit { .. } => 0,
    };
    let rho = |i: usize| x[off + p + i];
    let moments: Vec<[Vec<f64>; 3]> = (0..p).map(|i| day.tail_moments(rho(i), lag, delta_r)).collect();
    let decays: Vec<f64> = (0..p).map(|i| (-rho(i) * lag).exp()).collect();
    let mut obj = Objective::zeros(n);
    let mut grad = DVector::zeros(n);
    let mut second = DMatrix::zeros(n, n);
    for k in 0..day.theta.len() {
        let (c, r, a) = (lag_day.ramp_const[k], lag_day.ramp_weight[k], lag_day.tail_jumps[k]);
        let base = r + a;
        let mut pred = c;
        second.fill(0.0);
        match form {
            Form::General => {
                pred += x[0] * base;
                grad[0] = base;
            }
            Form::Unit { gamma } => pred += gamma * base,
        }
        let scale = match form {
            Form::General => 1.0,
            Form::Unit { gamma } => gamma,
        };
        for i in 0..p {
            let e = decays[i];
            let s0 = r * e + moments[i][0][k];
            let s1 = lag * r * e + moments[i][1][k];
            let s2 = lag * lag * r * e + moments[i][2][k];
            let weight = x[off + i];
            let level = match form {
                Form::General => s0,
                Form::Unit { .. } => s0 - base,
            };
            pred += scale * weight * level;
            grad[off + i] = scale * level;
            grad[off + p + i] = -scale * weight * s1;
            second[(off + i, off + p + i)] = -scale * s1;
            second[(off + p + i, off + i)] = -scale * s1;
            second[(off + p + i, off + p + i)] = scale * weight * s2;
        }
        let res = pred - day.target[k];
        obj.value += res * res;
        obj.grad += &grad * (2.0 * res);
        obj.hess.ger(2.0, &grad, &grad, 1.0);
        obj.hess += &second * (2.0 * res);
    }
    obj
}

/// Quadratic error with gradient and Hessian for a resilience parameterization.
pub fn resilience_objective(lag_data: &LagData, form: Form, x: &DVector<f64>) -> Objective {
    let set = lag_data.set;
    let parts = par::map_range(set.days.len(), |d| day_objective(&set.days[d], &lag_data.days[d], lag_data.lag, set.delta_r, form, x));
    parts.iter().fold(Objective::zeros(x.len()), |acc, o| acc.accumulate(o))
}

/// Optimal (nu_bar, lambda_bar) for fixed speeds: one Newton step from zero.
pub fn linear_step(lag_data: &LagData, rhos: &[f64]) -> Result<DVector<f64>> {
    let p = rhos.len();
    let mut x = DVector::zeros(1 + 2 * p);
    for (i, r) in rhos.iter().enumerate() {
        x[1 + p + i] = *r;
    }
    let obj = resilience_objective(lag_data, Form::General, &x);
    let g = obj.grad.rows(0, 1 + p).into_owned();
    let h = obj.hess.view((0, 0), (1 + p, 1 + p)).into_owned();
    newton::newton_step(&g, &h, &DVector::zeros(1 + p))
}

fn require_signal(set: &RegressionSet) -> Result<()> {
    if set.signal_mass() == 0.0 {
        return Err(Error::Degenerate("no trade price jumps to regress on".into()));
    }
    Ok(())
}

fn finish(kind: FitKind, spec: PropagatorSpec, set: &RegressionSet, error: f64, windows: &[DayWindow], trace: Vec<String>, identified: bool) -> Result<PropagatorFit> {
    let sigma_hat = estimate_sigma(windows, &spec)?;
    let spec = PropagatorSpec { sigma: sigma_hat, ..spec };
    Ok(PropagatorFit { kind, spec: Some(spec), curve: None, r2: 1.0 - error / set.ss_tot, sigma_hat, error, trace, identified })
}

/// Builds a spec from (nu_bar, lambda_bar) values, renormalizing into (gamma, nu, lambda).
fn spec_from_bars(nu_bar: f64, lambda_bars: &[f64], rhos: &[f64], lag_hours: f64) -> Result<PropagatorSpec> {
    let gamma = nu_bar + lambda_bars.iter().sum::<f64>();
    if !(gamma > 0.0) {
        return Err(Error::Degenerate(format!("resilience level {gamma} is not positive")));
    }
    let lambdas: Vec<f64> = lambda_bars.iter().map(|l| l / gamma).collect();
    let nu = 1.0 - lambdas.iter().sum::<f64>();
    if nu < 0.0 {
        return Err(Error::Degenerate(format!("permanent fraction {} is negative", nu_bar / gamma)));
    }
    PropagatorSpec::new(gamma, nu, lambdas, rhos.to_vec(), lag_hours, 0.0, 1.0)
}

/// Multi-exponential fit on the fixed speed grid, pruning nonpositive weights.
pub fn fit_multi_resilience(windows: &[DayWindow], cfg: &RegressionConfig, lag_secs: f64) -> Result<PropagatorFit> {
    cfg.validate()?;
    let set = RegressionSet::new(windows, cfg.reg_window)?;
    fit_multi_on(&set, windows, cfg, lag_secs)
}

fn fit_multi_on(set: &RegressionSet, windows: &[DayWindow], cfg: &RegressionConfig, lag_secs: f64) -> Result<PropagatorFit> {
    require_signal(set)?;
    let lag = lag_secs * SECONDS;
    let lag_data = LagData::new(set, lag);
    let mut rhos = cfg.rho_grid.clone();
    loop {
        if rhos.is_empty() {
            return Err(Error::Degenerate("every resilience weight was pruned".into()));
        }
        let beta = linear_step(&lag_data, &rhos)?;
        let lambda_bars: Vec<f64> = beta.iter().skip(1).copied().collect();
        let worst = lambda_bars.iter().enumerate().fold(None, |acc: Option<(usize, f64)>, (i, &l)| match acc {
            Some((_, m)) if l >= m => acc,
            _ => Some((i, l)),
        });
        match worst {
            Some((i, l)) if l <= 0.0 => {
                rhos.remove(i);
            }
            _ => {
                let spec = spec_from_bars(beta[0], &lambda_bars, &rhos, lag)?;
                let x = general_point(beta[0], &lambda_bars, &rhos);
                let error = resilience_objective(&lag_data, Form::General, &x).value;
                return finish(FitKind::Multi, spec, set, error, windows, Vec::new(), true);
            }
        }
    }
}

fn general_point(nu_bar: f64, lambda_bars: &[f64], rhos: &[f64]) -> DVector<f64> {
    let mut v = vec![nu_bar];
    v.extend_from_slice(lambda_bars);
    v.extend_from_slice(rhos);
    DVector::from_vec(v)
}

/// Adjustment-lag table entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagScore {
    pub lag_secs: f64,
    pub r2: f64,
}

/// Fits the multi-exponential resilience for each candidate lag and keeps the best r².
pub fn select_adjustment_lag(windows: &[DayWindow], cfg: &RegressionConfig) -> Result<(f64, Vec<LagScore>, PropagatorFit)> {
    cfg.validate()?;
    let set = RegressionSet::new(windows, cfg.reg_window)?;
    let mut best: Option<(f64, PropagatorFit)> = None;
    let mut table = Vec::new();
    for &lag in &cfg.lag_grid {
        let fit = fit_multi_on(&set, windows, cfg, lag)?;
        table.push(LagScore { lag_secs: lag, r2: fit.r2 });
        if best.as_ref().is_none_or(|(_, b)| fit.r2 > b.r2) {
            best = Some((lag, fit));
        }
    }
    let (lag, fit) = best.unwrap();
    Ok((lag, table, fit))
}

fn tolerance(set: &RegressionSet) -> f64 {
    1e-12 * set.ss_tot.max(f64::MIN_POSITIVE)
}

fn general_valid(x: &DVector<f64>) -> bool {
    let p = (x.len() - 1) / 2;
    x.iter().take(1 + p).all(|v| *v >= 0.0) && x.iter().skip(1 + p).all(|r| *r > 0.0 && r.is_finite())
}

fn unit_valid(x: &DVector<f64>) -> bool {
    let p = x.len() / 2;
    x.iter().take(p).all(|l| (0.0..=1.0).contains(l)) && x.iter().take(p).sum::<f64>() <= 1.0 && x.iter().skip(p).all(|r| *r > 0.0 && r.is_finite())
}

/// Mono-exponential resilience via the six-step protocol, starting from a multi fit.
pub fn fit_mono_resilience(windows: &[DayWindow], cfg: &RegressionConfig, lag_secs: f64, multi: &PropagatorFit) -> Result<PropagatorFit> {
    cfg.validate()?;
    let set = RegressionSet::new(windows, cfg.reg_window)?;
    require_signal(&set)?;
    let start = multi.spec.as_ref().ok_or_else(|| Error::InvalidParameter("mono fit needs a multi-exponential start".into()))?;
    let lag = lag_secs * SECONDS;
    let lag_data = LagData::new(&set, lag);
    let tol = tolerance(&set);
    let mut trace = Vec::new();

    let gamma0 = start.gamma;
    let lambda0: f64 = start.lambdas.iter().sum();
    let rho0 = if lambda0 > 0.0 { start.lambdas.iter().zip(&start.rhos).map(|(l, r)| l * r).sum::<f64>() / lambda0 } else { start.rhos[0] };
    let lag_ref = &lag_data;
    let objective = |form: Form| move |x: &DVector<f64>| resilience_objective(lag_ref, form, x);

    let x1 = general_point(gamma0 * (1.0 - lambda0), &[gamma0 * lambda0], &[rho0]);
    match newton::minimize(objective(Form::General), general_valid, x1, tol, cfg.max_iter) {
        Ok(res) if res.converged => {
            trace.push(format!("step 1: full Newton converged in {} iterations", res.iterations));
            return mono_result(&set, windows, &res.param, lag, res.value, trace, true);
        }
        Ok(res) => trace.push(format!("step 1: line search stalled after {} iterations", res.iterations)),
        Err(e) => trace.push(format!("step 1: {e}")),
    }

    let beta = linear_step(&lag_data, &[rho0])?;
    let gamma = beta[0] + beta[1];
    if !(gamma > 0.0) {
        return Err(Error::NoConvergence(format!("step 2 gave resilience level {gamma}; trace: {}", trace.join("; "))));
    }
    trace.push(format!("step 2: linear fit at rho {rho0:.4} gives gamma {gamma:.4}, lambda {:.4}", beta[1] / gamma));

    let unit = Form::Unit { gamma };
    let mut best = (f64::INFINITY, 0.0, rho0);
    for j in 0..21 {
        let rho = rho0 / 4.0 * 16f64.powf(j as f64 / 20.0);
        let q = resilience_objective(&lag_data, unit, &DVector::from_vec(vec![0.0, rho]));
        for i in 0..21 {
            let l = i as f64 / 20.0;
            let e = q.value + q.grad[0] * l + 0.5 * q.hess[(0, 0)] * l * l;
            if e < best.0 {
                best = (e, l, rho);
            }
        }
    }
    trace.push(format!("step 3: grid minimum at lambda {:.3}, rho {:.4}", best.1, best.2));

    let mut lam_rho = (best.1, best.2);
    let mut identified = true;
    match newton::minimize(objective(unit), unit_valid, DVector::from_vec(vec![best.1, best.2]), tol, cfg.max_iter) {
        Ok(res) => {
            trace.push(format!("step 4: unit Newton {} after {} iterations", if res.converged { "converged" } else { "stalled" }, res.iterations));
            lam_rho = (res.param[0], res.param[1]);
        }
        Err(e) => {
            identified = !matches!(e, Error::NotPositiveDefinite { .. });
            trace.push(format!("step 4: {e}"));
        }
    }

    let x5 = general_point(gamma * (1.0 - lam_rho.0), &[gamma * lam_rho.0], &[lam_rho.1]);
    match newton::minimize(objective(Form::General), general_valid, x5.clone(), tol, cfg.max_iter) {
        Ok(res) => {
            trace.push(format!("step 5: full Newton {} after {} iterations", if res.converged { "converged" } else { "stalled" }, res.iterations));
            mono_result(&set, windows, &res.param, lag, res.value, trace, identified)
        }
        Err(e) => {
            trace.push(format!("step 5: {e}"));
            let value = resilience_objective(&lag_data, Form::General, &x5).value;
            if value.is_finite() && general_valid(&x5) {
                let identified = identified && !matches!(e, Error::NotPositiveDefinite { .. });
                mono_result(&set, windows, &x5, lag, value, trace, identified)
            } else {
                Err(Error::NoConvergence(format!("mono resilience fit; trace: {}", trace.join("; "))))
            }
        }
    }
}

fn mono_result(set: &RegressionSet, windows: &[DayWindow], x: &DVector<f64>, lag: f64, error: f64, mut trace: Vec<String>, identified: bool) -> Result<PropagatorFit> {
    let spec = spec_from_bars(x[0], &[x[1]], &[x[2]], lag)?;
    trace.push(format!("step 6: gamma {:.4}, lambda {:.4}, rho {:.4}", spec.gamma, spec.lambdas[0], spec.rhos[0]));
    finish(FitKind::Mono, spec, set, error, windows, trace, identified)
}

fn hat_row(knots: &[f64], u: f64, jump: f64, row: &mut [f64]) -> f64 {
    // Returns the part multiplying the fixed value g0 = 1.
    let l = knots.len();
    if u >= knots[l - 1] {
        row[l - 1] += jump;
        return 0.0;
    }
    let k = knots.partition_point(|&t| t <= u);
    let t0 = if k == 0 { 0.0 } else { knots[k - 1] };
    let w = (u - t0) / (knots[k] - t0);
    row[k] += jump * w;
    if k == 0 {
        jump * (1.0 - w)
    } else {
        row[k - 1] += jump * (1.0 - w);
        0.0
    }
}

/// Normal equations of the unconstrained piecewise-linear curve.
pub fn unconstrained_normal_equations(set: &RegressionSet, knots: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let l = knots.len();
    let parts = par::map(&set.days, |day| {
        let mut xtx = DMatrix::zeros(l, l);
        let mut xty = DVector::zeros(l);
        let mut row = DVector::zeros(l);
        for (k, &th) in day.theta.iter().enumerate() {
            row.fill(0.0);
            let lo = day.trade_times.partition_point(|&s| s <= th - set.delta_r);
            let hi = day.trade_times.partition_point(|&s| s <= th);
            let mut fixed = 0.0;
            for j in lo..hi {
                fixed += hat_row(knots, th - day.trade_times[j], day.trade_jumps[j], row.as_mut_slice());
            }
            let y = day.target[k] - fixed;
            xtx.ger(1.0, &row, &row, 1.0);
            xty += &row * y;
        }
        (xtx, xty)
    });
    parts.into_iter().fold((DMatrix::zeros(l, l), DVector::zeros(l)), |(a, b), (x, y)| (a + x, b + y))
}

/// Unconstrained piecewise-linear propagator with G(0) = 1.
pub fn fit_unconstrained(windows: &[DayWindow], cfg: &RegressionConfig) -> Result<PropagatorFit> {
    cfg.validate()?;
    let set = RegressionSet::new(windows, cfg.reg_window)?;
    let (xtx, xty) = unconstrained_normal_equations(&set, &cfg.knots);
    let l = cfg.knots.len();
    for k in 1..=l {
        if xtx.view((0, 0), (k, k)).into_owned().cholesky().is_none() {
            return Err(Error::RankDeficient { knot: k, time: cfg.knots[k - 1] });
        }
    }
    let g = newton::newton_step(&(-&xty * 2.0), &(&xtx * 2.0), &DVector::zeros(l))?;
    let mut times = vec![0.0];
    times.extend_from_slice(&cfg.knots);
    let mut values = vec![1.0];
    values.extend(g.iter());
    let curve = PiecewiseCurve::new(times, values)?;
    let error = super::curve::quadratic_error(windows, &curve, cfg.reg_window)?;
    let sigma_hat = estimate_sigma(windows, &curve)?;
    Ok(PropagatorFit {
        kind: FitKind::Unconstrained,
        spec: None,
        curve: Some(curve),
        r2: 1.0 - error / set.ss_tot,
        sigma_hat,
        error,
        trace: Vec::new(),
        identified: true,
    })
}

/// Everything the propagator calibration produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorCalibration {
    pub lag_secs: f64,
    pub lag_table: Vec<LagScore>,
    pub multi: PropagatorFit,
    pub mono: PropagatorFit,
    pub unconstrained: Option<PropagatorFit>,
}

/// Lag selection, multi fit at the chosen lag, then the mono fit. The
/// unconstrained curve is included when its normal equations are solvable.
pub fn calibrate_propagator(windows: &[DayWindow], cfg: &RegressionConfig) -> Result<PropagatorCalibration> {
    let (lag_secs, lag_table, multi) = select_adjustment_lag(windows, cfg)?;
    let mono = fit_mono_resilience(windows, cfg, lag_secs, &multi)?;
    let unconstrained = fit_unconstrained(windows, cfg).ok();
    Ok(PropagatorCalibration { lag_secs, lag_table, multi, mono, unconstrained })
}
