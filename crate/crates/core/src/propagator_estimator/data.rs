//! Regression targets and per-lag features shared by the propagator fits.

use crate::error::{Error, Result};
use crate::market_data::DayWindow;
use crate::par;

/// One day reduced to what the price regression needs.
#[derive(Clone, Debug)]
pub struct RegressionDay {
    pub trade_times: Vec<f64>,
    pub trade_jumps: Vec<f64>,
    /// Quote times in (delta_r, T).
    pub theta: Vec<f64>,
    /// P(theta) - P(theta - delta_r).
    pub target: Vec<f64>,
    pub p_start: f64,
    pub p_end: f64,
    pub horizon: f64,
    /// Cumulative trade jumps, one more entry than trades.
    cum_jumps: Vec<f64>,
}

impl RegressionDay {
    pub fn new(window: &DayWindow, delta_r: f64) -> Self {
        let prices = window.prices();
        let times: Vec<f64> = window.events.iter().map(|e| e.time).collect();
        let price_at = |t: f64| {
            let n = times.partition_point(|&s| s <= t);
            if n == 0 {
                window.p0
            } else {
                prices[n - 1]
            }
        };
        let mut theta = Vec::new();
        let mut target = Vec::new();
        for (e, p) in window.events.iter().zip(&prices) {
            if !e.is_trade() && e.time > delta_r && e.time < window.horizon {
                theta.push(e.time);
                target.push(p - price_at(e.time - delta_r));
            }
        }
        let (trade_times, trade_jumps): (Vec<f64>, Vec<f64>) = window.trades().map(|e| (e.time, e.price_jump)).unzip();
        let mut cum_jumps = Vec::with_capacity(trade_jumps.len() + 1);
        cum_jumps.push(0.0);
        for j in &trade_jumps {
            cum_jumps.push(cum_jumps.last().unwrap() + j);
        }
        Self { trade_times, trade_jumps, theta, target, p_start: window.p0, p_end: window.end_price(), horizon: window.horizon, cum_jumps }
    }

    /// Number of trades with time < t (strict) or <= t.
    fn count_before(&self, t: f64, strict: bool) -> usize {
        if strict {
            self.trade_times.partition_point(|&s| s < t)
        } else {
            self.trade_times.partition_point(|&s| s <= t)
        }
    }

    /// Sums over trades with theta - delta_r < tau < theta - lag of
    /// jump * u^k * exp(-rho u), u = theta - tau, for k = 0, 1, 2.
    pub fn tail_moments(&self, rho: f64, lag: f64, delta_r: f64) -> [Vec<f64>; 3] {
        let upper = self.prefix_moments(rho, lag, true);
        let lower = self.prefix_moments(rho, delta_r, false);
        let n = self.theta.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            for k in 0..3 {
                out[k][i] = upper[k][i] - lower[k][i];
            }
        }
        out
    }

    /// For each theta, moments over trades with tau < theta - gap (or <=).
    fn prefix_moments(&self, rho: f64, gap: f64, strict: bool) -> [Vec<f64>; 3] {
        let n = self.theta.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut g = [0.0f64; 3];
        let mut s = f64::NEG_INFINITY;
        let mut next = 0;
        let shift = |g: [f64; 3], d: f64| -> [f64; 3] {
            let f = (-rho * d).exp();
            [f * g[0], f * (g[1] + d * g[0]), f * (g[2] + 2.0 * d * g[1] + d * d * g[0])]
        };
        for (i, &th) in self.theta.iter().enumerate() {
            let cut = th - gap;
            while next < self.trade_times.len() && (if strict { self.trade_times[next] < cut } else { self.trade_times[next] <= cut }) {
                let tau = self.trade_times[next];
                if s.is_finite() {
                    g = shift(g, tau - s);
                }
                g[0] += self.trade_jumps[next];
                s = tau;
                next += 1;
            }
            if s.is_finite() {
                let v = shift(g, th - s);
                out[0][i] = v[0];
                out[1][i] = v[1];
                out[2][i] = v[2];
            }
        }
        out
    }
}

/// All days of a calibration sample.
#[derive(Clone, Debug)]
pub struct RegressionSet {
    pub days: Vec<RegressionDay>,
    pub delta_r: f64,
    /// Total sum of squares of the targets around their mean.
    pub ss_tot: f64,
    pub n_targets: usize,
}

impl RegressionSet {
    pub fn new(windows: &[DayWindow], delta_r: f64) -> Result<Self> {
        let days = par::map(windows, |w| RegressionDay::new(w, delta_r));
        let n_targets: usize = days.iter().map(|d| d.theta.len()).sum();
        if n_targets == 0 {
            return Err(Error::Empty("no quote events inside the regression range".into()));
        }
        let mean = days.iter().flat_map(|d| &d.target).sum::<f64>() / n_targets as f64;
        let ss_tot = days.iter().flat_map(|d| &d.target).map(|y| (y - mean).powi(2)).sum();
        Ok(Self { days, delta_r, ss_tot, n_targets })
    }

    pub fn n_trades(&self) -> usize {
        self.days.iter().map(|d| d.trade_times.len()).sum()
    }

    /// Sum of |jump| over trades inside regression windows; zero means no regressors.
    pub fn signal_mass(&self) -> f64 {
        self.days.iter().flat_map(|d| &d.trade_jumps).map(|j| j.abs()).sum()
    }
}

/// Lag-dependent pieces of the prediction for one day.
#[derive(Clone, Debug)]
pub struct LagDay {
    /// Ramp constant: sum over u <= lag of jump (1 - u / lag).
    pub ramp_const: Vec<f64>,
    /// Ramp weight on R(lag): sum over u <= lag of jump u / lag.
    pub ramp_weight: Vec<f64>,
    /// Sum of jumps with lag < u < delta_r.
    pub tail_jumps: Vec<f64>,
}

/// Features of a regression set at a fixed adjustment lag.
#[derive(Clone, Debug)]
pub struct LagData<'a> {
    pub set: &'a RegressionSet,
    pub lag: f64,
    pub days: Vec<LagDay>,
}

impl<'a> LagData<'a> {
    pub fn new(set: &'a RegressionSet, lag: f64) -> Self {
        let days = par::map(&set.days, |d| {
            let n = d.theta.len();
            let mut day = LagDay { ramp_const: vec![0.0; n], ramp_weight: vec![0.0; n], tail_jumps: vec![0.0; n] };
            for (i, &th) in d.theta.iter().enumerate() {
                let hi = d.count_before(th, false);
                let lo = d.count_before(th - set.delta_r, false);
                let ramp_lo = if lag > 0.0 { d.count_before(th - lag, true).max(lo) } else { hi };
                for k in ramp_lo..hi {
                    let u = th - d.trade_times[k];
                    day.ramp_const[i] += d.trade_jumps[k] * (1.0 - u / lag);
                    day.ramp_weight[i] += d.trade_jumps[k] * u / lag;
                }
                day.tail_jumps[i] = d.cum_jumps[ramp_lo] - d.cum_jumps[lo];
            }
            day
        });
        Self { set, lag, days }
    }

    /// Exponential tail moments for speed `rho`, per day.
    pub fn moments(&self, rho: f64) -> Vec<[Vec<f64>; 3]> {
        par::map(&self.set.days, |d| d.tail_moments(rho, self.lag, self.set.delta_r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes_model::MarkedEvent;

    fn window() -> DayWindow {
        let mut events = Vec::new();
        let mut t = 0.0;
        for i in 0..400 {
            t += 0.0011 + 0.0007 * ((i * 7) % 5) as f64;
            let e = if i % 3 == 0 { MarkedEvent::trade(t, if i % 2 == 0 { 0.0025 } else { -0.005 }, 10.0) } else { MarkedEvent::quote(t, 0.0025) };
            events.push(e);
        }
        DayWindow { label: "t".into(), events, horizon: t + 0.01, tick_size: 0.005, p0: 10.0, mean_queue: 1.0 }
    }

    #[test]
    fn scanner_matches_direct_sums() {
        let w = window();
        let d = RegressionDay::new(&w, 0.2);
        let (rho, lag) = (37.0, 0.003);
        let m = d.tail_moments(rho, lag, 0.2);
        for (i, &th) in d.theta.iter().enumerate() {
            let mut direct = [0.0; 3];
            for (tau, j) in d.trade_times.iter().zip(&d.trade_jumps) {
                let u = th - tau;
                if u > lag && u < 0.2 {
                    for (k, v) in direct.iter_mut().enumerate() {
                        *v += j * u.powi(k as i32) * (-rho * u).exp();
                    }
                }
            }
            for k in 0..3 {
                assert!((m[k][i] - direct[k]).abs() < 1e-12, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn targets_are_windowed_increments() {
        let w = window();
        let d = RegressionDay::new(&w, 0.2);
        assert!(d.theta.iter().all(|&t| t > 0.2));
        assert_eq!(d.theta.len(), d.target.len());
    }
}
