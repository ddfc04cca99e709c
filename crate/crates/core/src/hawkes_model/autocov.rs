use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::spec::HawkesSpec;
use crate::error::{Error, Result};

/// Autocovariance density of the total trade flow: sum a_j exp(-b_j |t|).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutocovParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub kappa_bar: f64,
}

impl AutocovParams {
    /// Covariance density at lag `tau != 0`.
    pub fn covariance(&self, tau: f64) -> f64 {
        self.a.iter().zip(&self.b).map(|(a, b)| a * (-b * tau.abs()).exp()).sum()
    }

    /// Covariance between counts of two bins of width `h` that are `k >= 1` bins apart.
    pub fn binned_covariance(&self, k: usize, h: f64) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| a * (-b * k as f64 * h).exp() * (2.0 * (b * h).cosh() - 2.0) / (b * b))
            .sum()
    }

    /// Variance of the count in one bin of width `h`.
    pub fn binned_variance(&self, h: f64) -> f64 {
        let mut v = 2.0 * self.kappa_bar * h;
        for (a, b) in self.a.iter().zip(&self.b) {
            v += 2.0 * a * (h / b - (1.0 - (-b * h).exp()) / (b * b));
        }
        v
    }
}

fn char_poly(x: f64, betas: &[f64], weights: &[f64], iota: f64) -> f64 {
    let full: f64 = betas.iter().map(|b| b - x).product();
    let mut partial = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let prod: f64 = betas.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, b)| b - x).product();
        partial += w * prod;
    }
    full - iota * partial
}

fn bisect(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracketing { lo, hi });
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Decay rates and amplitudes of the flow autocovariance.
///
/// The rates interlace the kernel speeds; the amplitudes solve a Cauchy system.
pub fn autocov_params(spec: &HawkesSpec) -> Result<AutocovParams> {
    let br = spec.branching_ratio();
    if br >= 1.0 {
        return Err(Error::NotStationary(br));
    }
    let iota = spec.iota();
    let betas = &spec.betas;
    let p = betas.len();
    let f = |x: f64| char_poly(x, betas, &spec.weights, iota);
    let mut b = Vec::with_capacity(p);
    let mut lo = 0.0;
    for &hi in betas {
        b.push(bisect(lo, hi, f)?);
        lo = hi;
    }
    let kappa_bar = spec.kappa_bar();
    let cauchy = DMatrix::from_fn(p, p, |i, j| 1.0 / (betas[i] * betas[i] - b[j] * b[j]));
    let rhs = DVector::from_element(p, kappa_bar);
    let ab = cauchy.lu().solve(&rhs).ok_or_else(|| Error::Singular("Cauchy matrix".into()))?;
    let a = (0..p).map(|j| ab[j] / b[j]).collect();
    Ok(AutocovParams { a, b, kappa_bar })
}
