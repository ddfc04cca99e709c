//! Binned trade counts and the method-of-moments fit of a mono-exponential kernel.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::DayWindow;

/// Trade counts per bin (rows) and day (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedCounts {
    pub counts: DMatrix<f64>,
    pub h: f64,
    pub normalized: bool,
}

impl BinnedCounts {
    pub fn rows(&self) -> usize {
        self.counts.nrows()
    }

    pub fn days(&self) -> usize {
        self.counts.ncols()
    }

    pub fn mean(&self) -> f64 {
        self.counts.mean()
    }

    /// Sample variance over all cells.
    pub fn variance(&self) -> f64 {
        let n = self.counts.len();
        let m = self.mean();
        self.counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    }

    /// Rescales each column to the global mean, leaving the global mean unchanged.
    pub fn normalize(&mut self) {
        let global = self.mean();
        for mut col in self.counts.column_iter_mut() {
            let m = col.mean();
            if m > 0.0 {
                col *= global / m;
            }
        }
        self.normalized = true;
    }
}

/// Counts trades per bin of width `h`; a trailing partial bin is dropped.
pub fn bin_counts(windows: &[DayWindow], h: f64) -> Result<BinnedCounts> {
    if windows.is_empty() {
        return Err(Error::Empty("no windows to bin".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("bin width {h} must be positive")));
    }
    let horizon = windows.iter().map(|w| w.horizon).fold(f64::INFINITY, f64::min);
    let rows = (horizon / h + 1e-9).floor() as usize;
    if rows == 0 {
        return Err(Error::Empty("window shorter than one bin".into()));
    }
    let mut counts = DMatrix::zeros(rows, windows.len());
    for (d, w) in windows.iter().enumerate() {
        for e in w.trades() {
            let l = (e.time / h).floor() as usize;
            if l < rows {
                counts[(l, d)] += 1.0;
            }
        }
    }
    Ok(BinnedCounts { counts, h, normalized: false })
}

/// Autocorrelation of the counts at lags 1..=k_max, normalized by the variance.
pub fn empirical_autocorrelation(counts: &BinnedCounts, k_max: usize) -> Result<Vec<f64>> {
    let rows = counts.rows();
    if k_max == 0 || k_max >= rows {
        return Err(Error::InvalidParameter(format!("maximum lag {k_max} must lie in 1..{rows}")));
    }
    let v = counts.variance();
    if !(v > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let m = counts.mean();
    let n = counts.days() as f64;
    Ok((1..=k_max)
        .map(|k| {
            let mut s = 0.0;
            for col in counts.counts.column_iter() {
                for l in k..rows {
                    s += col[l] * col[l - k];
                }
            }
            (s / (n * (rows - k) as f64) - m * m) / v
        })
        .collect())
}

/// Mono-exponential kernel parameters from the count moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmEstimate {
    pub beta: f64,
    pub iota: f64,
    pub kappa_inf: f64,
    pub kappa_bar: f64,
    /// beta - iota, the decay rate of the count autocorrelation.
    pub d: f64,
    pub branching_ratio: f64,
}

/// Inverts the count variance formula for a known decay rate `d`.
pub fn gmm_from_moments(mean: f64, variance: f64, d: f64, h: f64) -> Result<GmmEstimate> {
    if !(d > 0.0 && h > 0.0 && mean > 0.0) {
        return Err(Error::InvalidParameter(format!("need positive decay, bin width and mean (d = {d})")));
    }
    let kappa_bar = mean / h / 2.0;
    let z = (1.0 - (-d * h).exp()) / d;
    let ratio = variance / (2.0 * kappa_bar);
    if ratio <= z {
        return Err(Error::Unidentifiable(format!("count variance ratio {ratio} is at or below the Poisson floor {z}")));
    }
    let beta = d * ((ratio - z) / (h - z)).sqrt();
    let iota = beta - d;
    Ok(GmmEstimate { beta, iota, kappa_inf: (1.0 - iota / beta) * kappa_bar, kappa_bar, d, branching_ratio: iota / beta })
}

/// Decay rate of the autocorrelation from a least-squares fit of its logarithm.
pub fn autocorrelation_decay(acf: &[f64], h: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = acf.iter().enumerate().filter(|(_, c)| **c > 0.0).map(|(k, c)| ((k + 1) as f64, c.ln())).collect();
    if pts.len() < 2 {
        let usable: Vec<usize> = pts.iter().map(|p| p.0 as usize).collect();
        return Err(Error::Unidentifiable(format!("too few positive autocorrelation lags for the decay fit: {usable:?}")));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(-sxy / sxx / h)
}

/// Method-of-moments fit of the total trade flow with a mono-exponential kernel.
pub fn gmm_mono(counts: &BinnedCounts, k_max: usize) -> Result<GmmEstimate> {
    let acf = empirical_autocorrelation(counts, k_max)?;
    let d = autocorrelation_decay(&acf, counts.h)?;
    gmm_from_moments(counts.mean(), counts.variance(), d, counts.h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes_model::MarkedEvent;

    fn window(times: &[f64]) -> DayWindow {
        DayWindow {
            label: "w".into(),
            events: times.iter().map(|&t| MarkedEvent::trade(t, 0.0025, 1.0)).collect(),
            horizon: 2.0,
            tick_size: 0.005,
            p0: 10.0,
            mean_queue: 1.0,
        }
    }

    #[test]
    fn counts_land_in_first_and_last_bins() {
        let c = bin_counts(&[window(&[0.001, 1.999])], 1.0 / 360.0).unwrap();
        assert_eq!(c.rows(), 720);
        assert_eq!(c.counts[(0, 0)], 1.0);
        assert_eq!(c.counts[(719, 0)], 1.0);
        assert_eq!(c.counts.sum(), 2.0);
    }

    #[test]
    fn normalization_equalizes_column_means() {
        let mut c = BinnedCounts { counts: DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 3.0, 3.0]), h: 1.0, normalized: false };
        c.normalize();
        assert!((c.counts.column(0).mean() - 2.0).abs() < 1e-15);
        assert!((c.counts.column(1).mean() - 2.0).abs() < 1e-15);
        let mut same = BinnedCounts { counts: DMatrix::from_column_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]), h: 1.0, normalized: false };
        let before = same.counts.clone();
        same.normalize();
        assert_eq!(same.counts, before);
    }

    #[test]
    fn poisson_variance_means_no_excitation() {
        let (h, d) = (1.0 / 360.0, 40.0);
        let est = gmm_from_moments(0.5, 0.5, d, h).unwrap();
        assert!((est.beta - d).abs() < 1e-9);
        assert!(est.iota.abs() < 1e-9);
        assert!((est.kappa_inf - est.kappa_bar).abs() < 1e-9);
        assert!(matches!(gmm_from_moments(0.5, 0.25, d, h), Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn decay_fit_recovers_slope() {
        let h = 0.01;
        let acf: Vec<f64> = (1..=10).map(|k| 0.3 * (-7.0 * h * k as f64).exp()).collect();
        assert!((autocorrelation_decay(&acf, h).unwrap() - 7.0).abs() < 1e-10);
        assert!(autocorrelation_decay(&[-0.1, 0.2, -0.3], h).is_err());
    }
}
