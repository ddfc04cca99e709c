//! Replays the optimal and Poisson strategies on recorded days and summarizes daily gains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes_estimator::{calibrate_hawkes, HawkesCalibration, HawkesConfig};
use crate::hawkes_model::{HawkesSpec, IntensityState, PropagatorSpec, PropagatorState};
use crate::market_data::DayWindow;
use crate::par;
use crate::propagator_estimator::{calibrate_propagator, PropagatorCalibration, RegressionConfig};
use crate::strategy_engine::{optimal_trade, poisson_trade, ExecutionState, StrategyParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Trend and mean reversion with the multi-exponential Hawkes fit.
    HawkesMulti,
    /// Trend and mean reversion with the mono-exponential Hawkes fit.
    HawkesMono,
    /// Mean reversion only.
    Poisson,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::HawkesMulti, StrategyKind::HawkesMono, StrategyKind::Poisson];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::HawkesMulti => "multi",
            StrategyKind::HawkesMono => "mono",
            StrategyKind::Poisson => "poisson",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy {s:?}, expected multi, mono or poisson")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    /// Scales the impact and trend signals, and so the whole strategy.
    pub scale: f64,
    /// Warm-up before the first decision, hours.
    pub reg_window: f64,
    /// Quiet period after each trade-driven jump, hours. Taken from the
    /// propagator fit when absent.
    #[serde(default)]
    pub adj_lag: Option<f64>,
    /// Skip decision times closer than the adjustment lag to the last trade.
    /// Unnecessary on simulated data, where the spread closes instantly.
    pub adj_lag_filter: bool,
    /// Charge half a tick per share traded.
    pub half_tick_penalty: bool,
    /// Charge the model's own quadratic cost (trade^2 / 2q).
    pub quadratic_cost: bool,
    pub strategy: StrategyKind,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            scale: 0.001,
            reg_window: 0.5,
            adj_lag: None,
            adj_lag_filter: true,
            half_tick_penalty: false,
            quadratic_cost: false,
            strategy: StrategyKind::HawkesMulti,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::InvalidParameter(format!("scale {} outside (0, 1]", self.scale)));
        }
        if !(self.reg_window >= 0.0) || self.adj_lag.is_some_and(|l| !(l >= 0.0)) {
            return Err(Error::InvalidParameter("regression window and adjustment lag must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Decision times: quote-driven jumps in (reg_window, T), optionally at least
/// `adj_lag` after the last trade-driven jump.
pub fn build_theta_grid(window: &DayWindow, reg_window: f64, adj_lag: f64, filter: bool) -> Vec<f64> {
    let mut last_trade = f64::NEG_INFINITY;
    let mut grid = Vec::new();
    for e in &window.events {
        if e.is_trade() {
            last_trade = e.time;
        } else if e.time > reg_window && e.time < window.horizon && (!filter || e.time - last_trade > adj_lag) {
            grid.push(e.time);
        }
    }
    grid
}

/// Outcome of one replayed day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayResult {
    pub label: String,
    pub gain: f64,
    pub n_decisions: usize,
    /// Largest single trade in shares, closing trade included.
    pub max_trade: f64,
    pub traded_volume: f64,
}

/// Runs the strategy over one day starting and ending flat. Trades execute at
/// the observed midprice plus the configured costs.
pub fn run_day(window: &DayWindow, hawkes: &HawkesSpec, propagator: &PropagatorSpec, cfg: &BacktestConfig) -> Result<DayResult> {
    cfg.validate()?;
    if cfg.reg_window >= window.horizon {
        return Err(Error::InvalidParameter(format!("regression window {} not shorter than the day", cfg.reg_window)));
    }
    let params = StrategyParams::from_fits(hawkes, propagator)?;
    let adj_lag = cfg.adj_lag.unwrap_or(propagator.adj_lag);
    let mut intensity = IntensityState::stationary(hawkes, 0.0);
    let mut impact = PropagatorState::new(propagator);
    let (mut x, mut cash, mut max_trade, mut volume) = (0.0f64, 0.0, 0.0f64, 0.0);
    let mut n_decisions = 0;
    let mut last_trade = f64::NEG_INFINITY;
    let half_tick = window.tick_size / 2.0;
    let mut execute = |xi: f64, price: f64, cash: &mut f64| {
        *cash -= xi * price;
        if cfg.quadratic_cost {
            *cash -= xi * xi / (2.0 * params.q);
        }
        if cfg.half_tick_penalty {
            *cash -= half_tick * xi.abs();
        }
        max_trade = max_trade.max(xi.abs());
        volume += xi.abs();
    };
    for (e, price) in window.events.iter().zip(window.prices()) {
        if e.time >= window.horizon {
            break;
        }
        if e.is_trade() {
            intensity.observe(hawkes, e)?;
            impact.add_trade(e.time, e.price_jump);
            last_trade = e.time;
            continue;
        }
        if e.time <= cfg.reg_window || (cfg.adj_lag_filter && e.time - last_trade <= adj_lag) {
            continue;
        }
        intensity.decay_to(hawkes, e.time)?;
        let state = ExecutionState { x, d: impact.transient(e.time), delta: intensity.imbalance(), t: e.time, horizon: window.horizon };
        let xi = match cfg.strategy {
            StrategyKind::Poisson => poisson_trade(&params, &state, cfg.scale)?,
            _ => optimal_trade(&params, &state, cfg.scale)?,
        };
        execute(xi, price, &mut cash);
        x += xi;
        n_decisions += 1;
    }
    execute(-x, window.end_price(), &mut cash);
    Ok(DayResult { label: window.label.clone(), gain: cash, n_decisions, max_trade, traded_volume: volume })
}

/// Daily gain statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub gains: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    /// sqrt(n) * mean / std_dev over days, not annualized further.
    pub sharpe: f64,
    /// Share of strictly positive days.
    pub proba: f64,
    pub skew: f64,
    pub kurtosis: f64,
    pub cumulative: Vec<f64>,
}

/// Summary statistics of daily gains. The variance uses n - 1; skew and
/// kurtosis divide 1/n central moments by powers of that deviation.
pub fn aggregate_report(gains: &[f64]) -> Result<BacktestReport> {
    let n = gains.len();
    if n < 2 {
        return Err(Error::Empty(format!("{n} daily gains, need at least two")));
    }
    let nf = n as f64;
    let mean = gains.iter().sum::<f64>() / nf;
    let central = |k: i32| gains.iter().map(|g| (g - mean).powi(k)).sum::<f64>();
    let var = central(2) / (nf - 1.0);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let sd = var.sqrt();
    let cumulative = gains
        .iter()
        .scan(0.0, |acc, g| {
            *acc += g;
            Some(*acc)
        })
        .collect();
    Ok(BacktestReport {
        gains: gains.to_vec(),
        mean,
        std_dev: sd,
        sharpe: nf.sqrt() * mean / sd,
        proba: gains.iter().filter(|g| **g > 0.0).count() as f64 / nf,
        skew: central(3) / nf / sd.powi(3),
        kurtosis: central(4) / nf / var.powi(2),
        cumulative,
    })
}

/// Every day of a backtest plus the aggregate statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestRun {
    pub strategy: StrategyKind,
    pub config: BacktestConfig,
    pub days: Vec<DayResult>,
    pub report: BacktestReport,
}

pub fn run_backtest(windows: &[DayWindow], hawkes: &HawkesSpec, propagator: &PropagatorSpec, cfg: &BacktestConfig) -> Result<BacktestRun> {
    cfg.validate()?;
    let days = par::map(windows, |w| run_day(w, hawkes, propagator, cfg)).into_iter().collect::<Result<Vec<_>>>()?;
    let gains: Vec<f64> = days.iter().map(|d| d.gain).collect();
    Ok(BacktestRun { strategy: cfg.strategy, config: cfg.clone(), report: aggregate_report(&gains)?, days })
}

/// Joint calibration of the trade flow and the price impact on one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCalibration {
    pub hawkes: HawkesCalibration,
    pub propagator: PropagatorCalibration,
}

impl ModelCalibration {
    pub fn fit(windows: &[DayWindow], hawkes_cfg: &HawkesConfig, regression_cfg: &RegressionConfig) -> Result<Self> {
        Ok(Self { hawkes: calibrate_hawkes(windows, hawkes_cfg)?, propagator: calibrate_propagator(windows, regression_cfg)? })
    }

    /// Hawkes and propagator inputs of a strategy. The strategy is explicit
    /// only for a mono-exponential propagator, so that fit is always used.
    pub fn strategy_inputs(&self, kind: StrategyKind) -> Result<(&HawkesSpec, &PropagatorSpec)> {
        let prop = self.propagator.mono.spec.as_ref().ok_or_else(|| Error::Degenerate("no mono-exponential propagator fit".into()))?;
        let hawkes = match kind {
            StrategyKind::HawkesMono => &self.hawkes.mono.spec,
            _ => &self.hawkes.multi.spec,
        };
        Ok((hawkes, prop))
    }

    pub fn backtest(&self, windows: &[DayWindow], cfg: &BacktestConfig) -> Result<BacktestRun> {
        let (hawkes, prop) = self.strategy_inputs(cfg.strategy)?;
        run_backtest(windows, hawkes, prop, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_gains_have_zero_sharpe() {
        let r = aggregate_report(&[1.0, -1.0]).unwrap();
        assert_eq!(r.sharpe, 0.0);
        assert_eq!(r.proba, 0.5);
        assert_eq!(r.cumulative, vec![1.0, 0.0]);
    }

    #[test]
    fn constant_gains_are_rejected() {
        assert_eq!(aggregate_report(&[2.0, 2.0, 2.0]), Err(Error::ZeroVariance));
        assert!(matches!(aggregate_report(&[1.0]), Err(Error::Empty(_))));
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("hawkes".parse::<StrategyKind>().is_err());
    }
}
