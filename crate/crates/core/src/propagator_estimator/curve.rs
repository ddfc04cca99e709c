//! Price prediction and goodness of fit for any impact curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes_model::ImpactCurve;
use crate::market_data::DayWindow;
use crate::par;

use super::data::RegressionDay;

/// Piecewise-linear propagator through (t_k, g_k), flat after the last knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCurve {
    /// Knot times starting at 0.
    pub times: Vec<f64>,
    /// Values at the knots, the first one being 1.
    pub values: Vec<f64>,
}

impl PiecewiseCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::InvalidParameter("knot times and values must have the same nonzero length".into()));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("knot times must start at 0 and increase".into()));
        }
        Ok(Self { times, values })
    }
}

impl ImpactCurve for PiecewiseCurve {
    fn value(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k >= self.times.len() {
            return *self.values.last().unwrap();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1] * (1.0 - w) + self.values[k] * w
    }

    fn long_run(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Impact curve given by a closure, handy for tests and quick checks.
pub struct FnCurve<F: Fn(f64) -> f64>(pub F);

impl<F: Fn(f64) -> f64> ImpactCurve for FnCurve<F> {
    fn value(&self, t: f64) -> f64 {
        (self.0)(t)
    }

    fn long_run(&self) -> f64 {
        (self.0)(f64::MAX)
    }
}

fn price_before(window: &DayWindow, prices: &[f64], t: f64) -> f64 {
    let n = window.events.partition_point(|e| e.time <= t);
    if n == 0 {
        window.p0
    } else {
        prices[n - 1]
    }
}

fn windowed_impact(trades: &[(f64, f64)], g: &impl ImpactCurve, t: f64, delta_r: f64) -> f64 {
    let lo = trades.partition_point(|&(s, _)| s <= t - delta_r);
    let hi = trades.partition_point(|&(s, _)| s <= t);
    trades[lo..hi].iter().map(|&(s, j)| j * g.value(t - s)).sum()
}

/// P(t - delta_r) plus the impact of the trades in (t - delta_r, t].
pub fn predict_price(window: &DayWindow, g: &impl ImpactCurve, delta_r: f64, t: f64) -> Result<f64> {
    if !(t > delta_r && t < window.horizon) {
        return Err(Error::InvalidParameter(format!("prediction time {t} outside ({delta_r}, {})", window.horizon)));
    }
    let prices = window.prices();
    let trades: Vec<(f64, f64)> = window.trades().map(|e| (e.time, e.price_jump)).collect();
    Ok(price_before(window, &prices, t - delta_r) + windowed_impact(&trades, g, t, delta_r))
}

fn day_error(day: &RegressionDay, g: &(impl ImpactCurve + Sync), delta_r: f64) -> f64 {
    let trades: Vec<(f64, f64)> = day.trade_times.iter().copied().zip(day.trade_jumps.iter().copied()).collect();
    day.theta.iter().zip(&day.target).map(|(&th, y)| (windowed_impact(&trades, g, th, delta_r) - y).powi(2)).sum()
}

/// Sum of squared prediction errors over quote times in (delta_r, T), all days.
pub fn quadratic_error(windows: &[DayWindow], g: &(impl ImpactCurve + Sync), delta_r: f64) -> Result<f64> {
    let days = par::map(windows, |w| RegressionDay::new(w, delta_r));
    if days.iter().all(|d| d.theta.is_empty()) {
        return Err(Error::Empty("no quote events inside the regression range".into()));
    }
    Ok(par::map(&days, |d| day_error(d, g, delta_r)).iter().sum())
}

/// Volatility implied by the full-window residuals of the propagator model.
pub fn estimate_sigma(windows: &[DayWindow], g: &(impl ImpactCurve + Sync)) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::Empty("no windows".into()));
    }
    let sq = par::map(windows, |w| {
        let impact: f64 = w.trades().map(|e| e.price_jump * g.value(w.horizon - e.time)).sum();
        (w.end_price() - w.p0 - impact).powi(2)
    });
    let total_time: f64 = windows.iter().map(|w| w.horizon).sum();
    Ok((sq.iter().sum::<f64>() / total_time).sqrt())
}

/// One minus the error over the mean-adjusted sum of squares of the targets.
pub fn compute_r2(windows: &[DayWindow], g: &(impl ImpactCurve + Sync), delta_r: f64) -> Result<f64> {
    let set = super::data::RegressionSet::new(windows, delta_r)?;
    if set.ss_tot <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let err: f64 = par::map(&set.days, |d| day_error(d, g, delta_r)).iter().sum();
    Ok(1.0 - err / set.ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes_model::MarkedEvent;

    fn window() -> DayWindow {
        let events = vec![
            MarkedEvent::quote(0.1, 0.0025),
            MarkedEvent::trade(0.3, 0.005, 10.0),
            MarkedEvent::quote(0.4, -0.0025),
            MarkedEvent::trade(0.55, -0.0025, 10.0),
            MarkedEvent::quote(0.7, 0.0025),
        ];
        DayWindow { label: "d".into(), events, horizon: 1.0, tick_size: 0.005, p0: 10.0, mean_queue: 1.0 }
    }

    #[test]
    fn unit_curve_adds_window_jumps() {
        let w = window();
        let p = predict_price(&w, &FnCurve(|_| 1.0), 0.5, 0.7).unwrap();
        assert!((p - (10.0 + 0.0025 + 0.005 - 0.0025)).abs() < 1e-12, "{p}");
    }

    #[test]
    fn empty_window_returns_lagged_price() {
        let w = window();
        let p = predict_price(&w, &FnCurve(|_| 1.0), 0.05, 0.2).unwrap();
        assert!((p - 10.0025).abs() < 1e-12);
        assert!(predict_price(&w, &FnCurve(|_| 1.0), 0.5, 0.4).is_err());
    }

    #[test]
    fn zero_curve_error_is_sum_of_squared_increments() {
        let w = window();
        let e = quadratic_error(std::slice::from_ref(&w), &FnCurve(|_| 0.0), 0.2).unwrap();
        let prices = w.prices();
        let mut oracle = 0.0;
        for (ev, p) in w.events.iter().zip(&prices) {
            if !ev.is_trade() && ev.time > 0.2 {
                oracle += (p - price_before(&w, &prices, ev.time - 0.2)).powi(2);
            }
        }
        assert!((e - oracle).abs() < 1e-15);
    }

    #[test]
    fn piecewise_interpolates_and_stays_flat() {
        let c = PiecewiseCurve::new(vec![0.0, 0.1, 0.2], vec![1.0, 2.0, 1.5]).unwrap();
        assert!((c.value(0.05) - 1.5).abs() < 1e-12);
        assert!((c.value(0.15) - 1.75).abs() < 1e-12);
        assert_eq!(c.value(3.0), 1.5);
        assert!(PiecewiseCurve::new(vec![0.1], vec![1.0]).is_err());
    }
}
