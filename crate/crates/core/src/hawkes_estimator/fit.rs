//! Calibration protocol: moments, excitation split, mark type, multi-exponential kernel.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes_model::{HawkesSpec, MarkType};
use crate::market_data::{compute_stats, DayWindow};
use crate::newton::{self, Objective};

use super::gmm::{bin_counts, gmm_mono, GmmEstimate};
use super::likelihood::{KernelParams, LikelihoodData};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HawkesConfig {
    /// Bin width in hours.
    pub bin_width: f64,
    pub k_max: usize,
    /// Fixed decay speeds of the multi-exponential kernel, 1/hour.
    pub beta_grid: Vec<f64>,
    /// Burn-in excluded from the likelihood, hours.
    pub burn_in: f64,
    /// Forces the mark type instead of selecting it by likelihood.
    #[serde(default)]
    pub mark_override: Option<MarkType>,
    pub max_iter: usize,
}

impl Default for HawkesConfig {
    fn default() -> Self {
        Self { bin_width: 1.0 / 360.0, k_max: 36, beta_grid: vec![6.0, 60.0, 120.0, 360.0], burn_in: 0.25, mark_override: None, max_iter: 200 }
    }
}

impl HawkesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.burn_in >= 0.0 && self.k_max > 0 && self.max_iter > 0) {
            return Err(Error::InvalidParameter("bin width, burn-in, maximum lag and iterations must be valid".into()));
        }
        if self.beta_grid.is_empty() || self.beta_grid.windows(2).any(|w| w[1] <= w[0]) || self.beta_grid[0] <= 0.0 {
            return Err(Error::InvalidParameter("decay speed grid must be positive and increasing".into()));
        }
        Ok(())
    }
}

/// Mark scales measured on the calibration sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkScales {
    /// Mean traded volume.
    pub m1: f64,
    /// Mean absolute price jump of trades.
    pub m_bar: f64,
}

impl MarkScales {
    pub fn measure(windows: &[DayWindow]) -> Result<Self> {
        let stats = compute_stats(windows)?;
        Ok(Self { m1: stats.m1, m_bar: stats.m_bar })
    }
}

/// Fitted model with its likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub spec: HawkesSpec,
    pub loglik_per_point: f64,
    pub burn_in: f64,
    pub branching_ratio: f64,
    pub directional_branching_ratio: f64,
    pub n_points: usize,
}

impl MleResult {
    fn new(spec: HawkesSpec, value: f64, n_points: usize, burn_in: f64) -> Self {
        Self {
            branching_ratio: spec.branching_ratio(),
            directional_branching_ratio: spec.directional_branching_ratio(),
            loglik_per_point: value / n_points.max(1) as f64,
            spec,
            burn_in,
            n_points,
        }
    }
}

/// Split of the mono-exponential excitation into self/cross and constant/linear parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSplit {
    pub mark_type: MarkType,
    /// Self share of the total excitation.
    pub u: f64,
    /// Constant share of the self excitation.
    pub u_s: f64,
    /// Constant share of the cross excitation.
    pub u_c: f64,
    pub phi_s: [f64; 2],
    pub phi_c: [f64; 2],
    pub loglik_per_point: f64,
}

/// Maximizes `f` over [0, 1] on a 0.01 grid, then on a 0.001 grid around the best point.
/// Ties keep the smallest argument.
pub fn grid_maximize(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let scan = |best: &mut (f64, f64), lo: i64, hi: i64, step: f64| {
        for k in lo..=hi {
            let x = (k as f64 * step).clamp(0.0, 1.0);
            let v = f(x);
            if v > best.1 {
                *best = (x, v);
            }
        }
    };
    let mut best = (0.0, f64::NEG_INFINITY);
    scan(&mut best, 0, 100, 0.01);
    let centre = (best.0 * 1000.0).round() as i64;
    scan(&mut best, (centre - 10).max(0), (centre + 10).min(1000), 0.001);
    best
}

fn mono_data(windows: &[DayWindow], gmm: &GmmEstimate, mark_type: MarkType, scales: MarkScales, burn_in: f64) -> Result<LikelihoodData> {
    LikelihoodData::new(windows, mark_type, scales.m1, scales.m_bar, &[gmm.beta], burn_in)
}

fn split_params(gmm: &GmmEstimate, u: f64, u_s: f64, u_c: f64) -> KernelParams {
    let (iota_s, iota_c) = (u * gmm.iota, (1.0 - u) * gmm.iota);
    KernelParams { kappa_inf: gmm.kappa_inf, phi_s: [u_s * iota_s, (1.0 - u_s) * iota_s], phi_c: [u_c * iota_c, (1.0 - u_c) * iota_c], weights: vec![1.0] }
}

fn loglik_or_floor(data: &LikelihoodData, params: &KernelParams) -> f64 {
    data.value(params).unwrap_or(f64::NEG_INFINITY)
}

/// Self share of the excitation, fitted on unit marks.
pub fn fit_self_share(windows: &[DayWindow], gmm: &GmmEstimate, scales: MarkScales, burn_in: f64) -> Result<f64> {
    let data = mono_data(windows, gmm, MarkType::Unit, scales, burn_in)?;
    Ok(grid_maximize(|u| loglik_or_floor(&data, &split_params(gmm, u, 1.0, 1.0))).0)
}

/// Grid searches for the excitation split under `mark_type`, given the self share `u`.
pub fn fit_excitation_split(windows: &[DayWindow], gmm: &GmmEstimate, mark_type: MarkType, u: f64, scales: MarkScales, burn_in: f64) -> Result<ExcitationSplit> {
    let data = mono_data(windows, gmm, mark_type, scales, burn_in)?;
    let (u_s, u_c) = match mark_type {
        MarkType::Unit => (1.0, 1.0),
        _ => {
            let u_s = grid_maximize(|x| loglik_or_floor(&data, &split_params(gmm, u, x, 1.0))).0;
            let u_c = grid_maximize(|x| loglik_or_floor(&data, &split_params(gmm, u, u_s, x))).0;
            (u_s, u_c)
        }
    };
    let params = split_params(gmm, u, u_s, u_c);
    let value = data.value(&params)?;
    Ok(ExcitationSplit {
        mark_type,
        u,
        u_s,
        u_c,
        phi_s: params.phi_s,
        phi_c: params.phi_c,
        loglik_per_point: value / data.n_points().max(1) as f64,
    })
}

/// Likelihood table over the three mark types and the selected one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkSelection {
    pub splits: Vec<ExcitationSplit>,
    pub chosen: MarkType,
    /// True when the best likelihood is shared by several mark types.
    pub tie: bool,
}

impl MarkSelection {
    pub fn split(&self, mark_type: MarkType) -> &ExcitationSplit {
        self.splits.iter().find(|s| s.mark_type == mark_type).expect("every mark type is fitted")
    }
}

/// Fits the split for unit, volume and price marks and keeps the best likelihood.
/// Ties go to the first of unit, volume, price.
pub fn select_mark_type(windows: &[DayWindow], gmm: &GmmEstimate, scales: MarkScales, burn_in: f64) -> Result<MarkSelection> {
    let u = fit_self_share(windows, gmm, scales, burn_in)?;
    let splits = MarkType::ALL.iter().map(|&m| fit_excitation_split(windows, gmm, m, u, scales, burn_in)).collect::<Result<Vec<_>>>()?;
    let best = splits.iter().map(|s| s.loglik_per_point).fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<&ExcitationSplit> = splits.iter().filter(|s| s.loglik_per_point == best).collect();
    let chosen = winners.first().map_or(MarkType::Unit, |s| s.mark_type);
    Ok(MarkSelection { tie: winners.len() > 1, chosen, splits })
}

/// Mono-exponential model assembled from the moments and a split.
pub fn mono_result(windows: &[DayWindow], gmm: &GmmEstimate, split: &ExcitationSplit, scales: MarkScales, burn_in: f64) -> Result<MleResult> {
    let spec = HawkesSpec::new(gmm.kappa_inf, vec![gmm.beta], vec![1.0], split.phi_s, split.phi_c, split.mark_type, scales.m1, scales.m_bar)?;
    let data = mono_data(windows, gmm, split.mark_type, scales, burn_in)?;
    let value = data.value(&KernelParams::from_spec(&spec))?;
    Ok(MleResult::new(spec, value, data.n_points(), burn_in))
}

fn sub_objective(full: &Objective, idx: &[usize], sign: f64) -> Objective {
    let n = idx.len();
    Objective {
        value: sign * full.value,
        grad: DVector::from_fn(n, |i, _| sign * full.grad[idx[i]]),
        hess: nalgebra::DMatrix::from_fn(n, n, |i, j| sign * full.hess[(idx[i], idx[j])]),
    }
}

/// Multi-exponential kernel on the fixed speed grid. The excitation shape is
/// taken from the mono model; the baseline and the weights are fitted by
/// Newton's method, pruning nonpositive weights.
pub fn fit_multi_kernel(windows: &[DayWindow], mono: &MleResult, cfg: &HawkesConfig) -> Result<MleResult> {
    cfg.validate()?;
    let base = &mono.spec;
    let iota = base.iota();
    if !(iota > 0.0) {
        return Err(Error::Degenerate("mono model has no excitation to distribute".into()));
    }
    let shape_s = [base.phi_s[0] / iota, base.phi_s[1] / iota];
    let shape_c = [base.phi_c[0] / iota, base.phi_c[1] / iota];
    let br_mono = base.branching_ratio();
    let mut betas = cfg.beta_grid.clone();
    loop {
        if betas.is_empty() {
            return Err(Error::Degenerate("every kernel weight was pruned".into()));
        }
        let data = LikelihoodData::new(windows, base.mark_type, base.m1, base.m_bar, &betas, cfg.burn_in)?;
        let p = betas.len();
        let share = 1.0 / p as f64;
        let w0 = br_mono / betas.iter().map(|b| share / b).sum::<f64>() * share;
        let mut x0 = vec![base.kappa_inf];
        x0.extend(std::iter::repeat_n(w0, p));
        let idx: Vec<usize> = std::iter::once(0).chain(5..5 + p).collect();
        let params = |x: &DVector<f64>| KernelParams { kappa_inf: x[0], phi_s: shape_s, phi_c: shape_c, weights: x.iter().skip(1).copied().collect() };
        let objective = |x: &DVector<f64>| match data.evaluate(&params(x)) {
            Ok(full) => sub_objective(&full, &idx, -1.0),
            Err(_) => Objective { value: f64::INFINITY, ..Objective::zeros(1 + p) },
        };
        let tol = 1e-10 * data.n_points().max(1) as f64;
        let res = newton::minimize_shifted(objective, |x| x[0] >= 0.0, DVector::from_vec(x0), tol, cfg.max_iter)?;
        let weights: Vec<f64> = res.param.iter().skip(1).copied().collect();
        let worst = weights.iter().enumerate().fold(None, |acc: Option<(usize, f64)>, (i, &w)| match acc {
            Some((_, m)) if w >= m => acc,
            _ => Some((i, w)),
        });
        match worst {
            Some((i, w)) if w <= 0.0 => {
                betas.remove(i);
            }
            _ => {
                let total: f64 = weights.iter().sum();
                let spec = HawkesSpec::new(
                    res.param[0],
                    betas.clone(),
                    weights.iter().map(|w| w / total).collect(),
                    [shape_s[0] * total, shape_s[1] * total],
                    [shape_c[0] * total, shape_c[1] * total],
                    base.mark_type,
                    base.m1,
                    base.m_bar,
                )?;
                return Ok(MleResult::new(spec, -res.value, data.n_points(), cfg.burn_in));
            }
        }
    }
}

/// Everything the Hawkes calibration produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HawkesCalibration {
    pub scales: MarkScales,
    pub gmm: GmmEstimate,
    pub selection: MarkSelection,
    pub mono: MleResult,
    pub multi: MleResult,
}

pub fn calibrate_hawkes(windows: &[DayWindow], cfg: &HawkesConfig) -> Result<HawkesCalibration> {
    cfg.validate()?;
    let scales = MarkScales::measure(windows)?;
    let mut counts = bin_counts(windows, cfg.bin_width)?;
    counts.normalize();
    let gmm = gmm_mono(&counts, cfg.k_max)?;
    let selection = select_mark_type(windows, &gmm, scales, cfg.burn_in)?;
    let mark = cfg.mark_override.unwrap_or(selection.chosen);
    let mono = mono_result(windows, &gmm, selection.split(mark), scales, cfg.burn_in)?;
    let multi = fit_multi_kernel(windows, &mono, cfg)?;
    Ok(HawkesCalibration { scales, gmm, selection, mono, multi })
}
