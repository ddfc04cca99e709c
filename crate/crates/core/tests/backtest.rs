use hawkes_impact::backtest::*;
use hawkes_impact::hawkes_model::{HawkesSpec, MarkType, MarkedEvent, PropagatorSpec, SimulationConfig};
use hawkes_impact::market_data::DayWindow;
use hawkes_impact::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SEC: f64 = 1.0 / 3600.0;

fn small_sim() -> SimulationConfig {
    SimulationConfig { n_windows: 12, ..SimulationConfig::preset("sim2").unwrap() }
}

fn sim_cfg(strategy: StrategyKind) -> BacktestConfig {
    BacktestConfig { adj_lag_filter: false, strategy, ..Default::default() }
}

#[test]
fn grid_without_lag_keeps_every_quote_after_warm_up() {
    let w = &small_sim().simulate(1)[0];
    let grid = build_theta_grid(w, 0.5, 0.0, true);
    let expected: Vec<f64> = w.quotes().map(|e| e.time).filter(|t| *t > 0.5 && *t < w.horizon).collect();
    assert_eq!(grid, expected);
    assert!(!grid.is_empty());
}

#[test]
fn quote_inside_adjustment_lag_is_skipped() {
    let events = vec![MarkedEvent::trade(0.6, 0.0025, 100.0), MarkedEvent::quote(0.6 + SEC, -0.0025), MarkedEvent::quote(0.6 + 3.0 * SEC, 0.0025)];
    let w = DayWindow { label: "d".into(), events, horizon: 1.0, tick_size: 0.005, p0: 10.0, mean_queue: 1000.0 };
    assert_eq!(build_theta_grid(&w, 0.5, 2.0 * SEC, true), vec![0.6 + 3.0 * SEC]);
    assert_eq!(build_theta_grid(&w, 0.5, 2.0 * SEC, false).len(), 2);
}

#[test]
fn day_without_quotes_never_trades() {
    let sim = small_sim();
    let events = vec![MarkedEvent::trade(0.7, 0.0025, 100.0), MarkedEvent::trade(1.1, -0.005, 300.0)];
    let w = DayWindow { label: "t".into(), events, horizon: 2.0, tick_size: 0.005, p0: 10.0, mean_queue: 1000.0 };
    let day = run_day(&w, &sim.hawkes, &sim.propagator, &sim_cfg(StrategyKind::HawkesMulti)).unwrap();
    assert_eq!(day.gain, 0.0);
    assert_eq!(day.n_decisions, 0);
}

#[test]
fn tiny_scale_gives_tiny_gains() {
    let sim = small_sim();
    let w = &sim.simulate(2)[0];
    let cfg = BacktestConfig { scale: 1e-12, ..sim_cfg(StrategyKind::HawkesMulti) };
    let day = run_day(w, &sim.hawkes, &sim.propagator, &cfg).unwrap();
    assert!(day.gain.abs() < 1e-8, "{}", day.gain);
}

#[test]
fn doubling_scale_doubles_gains() {
    let sim = small_sim();
    let windows = sim.simulate(3);
    for penalty in [false, true] {
        let base = BacktestConfig { half_tick_penalty: penalty, ..sim_cfg(StrategyKind::HawkesMulti) };
        let a = run_backtest(&windows, &sim.hawkes, &sim.propagator, &base).unwrap();
        let b = run_backtest(&windows, &sim.hawkes, &sim.propagator, &BacktestConfig { scale: 2.0 * base.scale, ..base }).unwrap();
        for (x, y) in a.report.gains.iter().zip(&b.report.gains) {
            assert_eq!(2.0 * x, *y);
        }
        for (x, y) in [(a.report.sharpe, b.report.sharpe), (a.report.proba, b.report.proba), (a.report.skew, b.report.skew), (a.report.kurtosis, b.report.kurtosis)] {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}

#[test]
fn unexcited_flow_makes_hawkes_and_poisson_agree() {
    let sim = small_sim();
    let windows = sim.simulate(4);
    let flat = HawkesSpec::new(80.0, vec![60.0, 360.0], vec![0.5, 0.5], [0.0, 0.0], [0.0, 0.0], MarkType::Volume, sim.hawkes.m1, sim.hawkes.m_bar).unwrap();
    let h = run_backtest(&windows, &flat, &sim.propagator, &sim_cfg(StrategyKind::HawkesMulti)).unwrap();
    let p = run_backtest(&windows, &flat, &sim.propagator, &sim_cfg(StrategyKind::Poisson)).unwrap();
    assert_eq!(h.report.gains, p.report.gains);
}

#[test]
fn trades_stay_small_against_the_queue() {
    let sim = small_sim();
    let windows = sim.simulate(5);
    let run = run_backtest(&windows, &sim.hawkes, &sim.propagator, &sim_cfg(StrategyKind::HawkesMulti)).unwrap();
    for d in &run.days {
        assert!(d.max_trade <= 0.05 * sim.queue_size, "{} traded {}", d.label, d.max_trade);
    }
}

#[test]
fn multi_exponential_propagator_is_rejected() {
    let sim = SimulationConfig::preset("sim1").unwrap();
    let w = &sim.simulate(1)[0];
    assert!(matches!(run_day(w, &sim.hawkes, &sim.propagator, &BacktestConfig::default()), Err(Error::InvalidParameter(_))));
    let mono = PropagatorSpec::mono(2.7, 0.6, 60.0, 4.0 * SEC, 0.1).unwrap();
    assert!(run_day(w, &sim.hawkes, &mono, &BacktestConfig::default()).is_ok());
}

#[test]
fn invalid_scale_is_rejected() {
    assert!(BacktestConfig { scale: 0.0, ..Default::default() }.validate().is_err());
    assert!(BacktestConfig { scale: 1.5, ..Default::default() }.validate().is_err());
}

#[test]
fn normal_sample_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gains: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let r = aggregate_report(&gains).unwrap();
    assert!(r.skew.abs() < 0.05, "skew {}", r.skew);
    assert!((r.kurtosis - 3.0).abs() < 0.1, "kurtosis {}", r.kurtosis);
    assert!((r.proba - 0.5).abs() < 0.02);
}

proptest! {
    #[test]
    fn statistics_ignore_positive_rescaling(gains in prop::collection::vec(-10.0f64..10.0, 3..40), c in 0.01f64..100.0) {
        prop_assume!(gains.iter().any(|g| (g - gains[0]).abs() > 1e-6));
        let a = aggregate_report(&gains).unwrap();
        let scaled: Vec<f64> = gains.iter().map(|g| c * g).collect();
        let b = aggregate_report(&scaled).unwrap();
        prop_assert!((a.sharpe - b.sharpe).abs() < 1e-9 * a.sharpe.abs().max(1.0));
        prop_assert_eq!(a.proba, b.proba);
        prop_assert!((a.skew - b.skew).abs() < 1e-9 * a.skew.abs().max(1.0));
        prop_assert!((a.kurtosis - b.kurtosis).abs() < 1e-9 * a.kurtosis);
    }

    #[test]
    fn kurtosis_bounds_skew(gains in prop::collection::vec(-10.0f64..10.0, 3..40)) {
        prop_assume!(gains.iter().any(|g| (g - gains[0]).abs() > 1e-6));
        let r = aggregate_report(&gains).unwrap();
        // with 1/n moments over an (n-1) deviation the bound picks up a factor ((n-1)/n)^2
        let n = gains.len() as f64;
        let shrink = ((n - 1.0) / n).powi(2);
        prop_assert!(r.kurtosis >= (r.skew * r.skew + 1.0) * shrink - 1e-9);
        prop_assert!(r.cumulative.last().unwrap().abs() <= gains.iter().map(|g| g.abs()).sum::<f64>() + 1e-9);
    }
}
