mod common;

use common::{laws, rel_err};
use hawkes_impact::hawkes_estimator::bin_counts;
use hawkes_impact::hawkes_model::*;
use hawkes_impact::market_data::{aggregate_ms, classify_events, parse_ticks, write_ticks, DayWindow};
use hawkes_impact::strategy_engine::{exp_zeta_omega, nontrading_cost, optimal_trade, ExecutionState, StrategyParams};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn spec_strategy(max_p: usize) -> impl Strategy<Value = HawkesSpec> {
    (1..=max_p)
        .prop_flat_map(|p| {
            (
                prop::collection::vec(1.0f64..400.0, p),
                prop::collection::vec(0.05f64..1.0, p),
                0.5f64..50.0,
                prop::array::uniform4(0.0f64..1.0),
                0.05f64..0.95,
                0usize..3,
            )
        })
        .prop_map(|(mut betas, raw_w, kappa, split, br, mark)| {
            betas.sort_by(|a, b| a.partial_cmp(b).unwrap());
            betas.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let w: Vec<f64> = raw_w[..betas.len()].to_vec();
            let total: f64 = w.iter().sum();
            let weights: Vec<f64> = w.iter().map(|x| x / total).collect();
            let norm: f64 = weights.iter().zip(&betas).map(|(w, b)| w / b).sum();
            // volume marks have unit mean, so the excitation total is the sum of all four terms
            let mark_type = MarkType::ALL[mark];
            let iota = br / norm;
            let parts = [split[0] + 0.01, split[1], split[2] + 0.01, split[3]];
            let (lin, used) = if mark_type == MarkType::Unit { (0.0, parts[0] + parts[2]) } else { (1.0, parts.iter().sum()) };
            let c = iota / used;
            HawkesSpec::new(kappa, betas, weights, [c * parts[0], c * parts[1] * lin], [c * parts[2], c * parts[3] * lin], mark_type, 100.0, 0.0025).unwrap()
        })
}

fn events_strategy() -> impl Strategy<Value = Vec<MarkedEvent>> {
    prop::collection::vec((0.0f64..1.0, any::<bool>(), 1.0f64..500.0, 1u32..4), 0..40).prop_map(|mut raw| {
        raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        raw.into_iter().map(|(t, buy, v, k)| MarkedEvent::trade(t, if buy { 1.0 } else { -1.0 } * k as f64 * 0.0025, v)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_convolution(spec in spec_strategy(4), events in events_strategy(), t_end in 1.0f64..1.5) {
        let mut state = IntensityState::baseline(&spec, 0.0);
        for e in &events {
            state.observe(&spec, e).unwrap();
        }
        state.decay_to(&spec, t_end).unwrap();
        let sum = |side: f64| -> f64 {
            spec.kappa_inf
                + events
                    .iter()
                    .map(|e| {
                        let phi = if e.side() == side { spec.phi_self(spec.mark(e)) } else { spec.phi_cross(spec.mark(e)) };
                        spec.kernel_value(t_end - e.time).unwrap() * phi
                    })
                    .sum::<f64>()
        };
        prop_assert!(rel_err(state.total_plus(), sum(1.0), 1.0) < 1e-10);
        prop_assert!(rel_err(state.total_minus(), sum(-1.0), 1.0) < 1e-10);
    }

    #[test]
    fn autocovariance_roots_interlace(spec in spec_strategy(6)) {
        let ac = autocov_params(&spec).unwrap();
        let mut lo = 0.0;
        for (b, beta) in ac.b.iter().zip(&spec.betas) {
            prop_assert!(lo < *b && b < beta, "{:?} vs {:?}", ac.b, spec.betas);
            lo = *beta;
        }
        prop_assert!(ac.a.iter().all(|a| *a > 0.0), "{:?}", ac.a);
    }

    #[test]
    fn directional_ratio_never_exceeds_total(spec in spec_strategy(4)) {
        let (br, dbr) = (spec.branching_ratio(), spec.directional_branching_ratio());
        prop_assert!(dbr <= br + 1e-12);
        let no_cross = HawkesSpec { phi_c: [0.0, 0.0], ..spec.clone() };
        prop_assert!(rel_err(no_cross.directional_branching_ratio(), no_cross.branching_ratio(), 1e-12) < 1e-12);
    }

    #[test]
    fn zeta_omega_identities(entries in prop::collection::vec(-3.0f64..3.0, 1..=36)) {
        let n = (entries.len() as f64).sqrt() as usize;
        let m = DMatrix::from_column_slice(n, n, &entries[..n * n]);
        let (e, z, w) = exp_zeta_omega(&m);
        let id = DMatrix::<f64>::identity(n, n);
        let scale = 1.0 + m.norm();
        prop_assert!((&z + &m * &w - &id).amax() < 1e-12 * scale * scale);
        prop_assert!((&e - (&id - &m * &z)).amax() < 1e-12 * scale * scale);
    }

    #[test]
    fn trade_is_linear_in_scale(
        x in -1e3f64..1e3, d in -0.05f64..0.05, d1 in -100.0f64..100.0, d2 in -100.0f64..100.0,
        t in 0.0f64..1.9, s in 0.0f64..1.0,
    ) {
        let p = StrategyParams { rho: 60.0, nu: 0.4, eps: 0.4, q: 3.0e5, m1: 776.0, betas: vec![60.0, 360.0], alphas: vec![6.0, 54.0] };
        let base = ExecutionState { x, d, delta: vec![d1, d2], t, horizon: 2.0 };
        let scaled = ExecutionState { x: s * x, ..base.clone() };
        let full = optimal_trade(&p, &base, 1.0).unwrap();
        let direct = optimal_trade(&p, &ExecutionState { d: s * d, delta: vec![s * d1, s * d2], ..scaled.clone() }, 1.0).unwrap();
        prop_assert!((direct - s * full).abs() <= 1e-9 * full.abs().max(1.0));
        prop_assert!((optimal_trade(&p, &scaled, s).unwrap() - direct).abs() <= 1e-9 * direct.abs().max(1.0));
        let after = base.after_trade(&p, full);
        prop_assert!(nontrading_cost(&p, &after).unwrap() < 1e-12 * (1.0 + x * x));
    }
}

#[test]
fn mono_autocovariance_closed_form() {
    use rand::{RngExt, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let beta = 1.0 + 500.0 * rng.random::<f64>();
        let iota = beta * 0.98 * rng.random::<f64>();
        let kappa = 0.1 + 100.0 * rng.random::<f64>();
        let spec = HawkesSpec::new(kappa, vec![beta], vec![1.0], [0.6 * iota, 0.0], [0.4 * iota, 0.0], MarkType::Unit, 1.0, 1.0).unwrap();
        let ac = autocov_params(&spec).unwrap();
        let kappa_bar = kappa / (1.0 - iota / beta);
        let b = beta - iota;
        let a = (beta + b) * (beta - b) * kappa_bar / b;
        assert!(rel_err(ac.b[0], b, 1.0) < 1e-10, "{} vs {b}", ac.b[0]);
        assert!(rel_err(ac.a[0], a, 1e-12) < 1e-10, "{} vs {a}", ac.a[0]);
    }
}

#[test]
fn two_speed_autocovariance_matches_simulation() {
    let spec = HawkesSpec::new(30.0, vec![20.0, 200.0], vec![0.3, 0.7], [20.0, 5.0], [10.0, 3.0], MarkType::Volume, 100.0, 0.0025).unwrap();
    let (h, n_days, horizon) = (1.0 / 360.0, 400, 2.0);
    let windows: Vec<DayWindow> = (0..n_days)
        .map(|d| DayWindow {
            label: String::new(),
            events: simulate_flow(&spec, &laws(), horizon, 1000 + d as u64),
            horizon,
            tick_size: 0.005,
            p0: 10.0,
            mean_queue: 1.0,
        })
        .collect();
    let counts = bin_counts(&windows, h).unwrap();
    let theory = autocov_params(&spec).unwrap();
    let mean = 2.0 * theory.kappa_bar * h;
    let rows = counts.rows();
    // per-day estimates give the Monte-Carlo band
    for k in [0usize, 1, 3, 10, 30] {
        let per_day: Vec<f64> = counts
            .counts
            .column_iter()
            .map(|c| (k..rows).map(|l| (c[l] - mean) * (c[l - k] - mean)).sum::<f64>() / (rows - k) as f64)
            .collect();
        let est = per_day.iter().sum::<f64>() / n_days as f64;
        let sd = (per_day.iter().map(|x| (x - est).powi(2)).sum::<f64>() / (n_days - 1) as f64).sqrt();
        let se = sd / (n_days as f64).sqrt();
        let expected = if k == 0 { theory.binned_variance(h) } else { theory.binned_covariance(k, h) };
        assert!((est - expected).abs() < 4.0 * se, "lag {k}: {est} vs {expected} (se {se})");
    }
}

#[test]
fn unexcited_flow_is_poisson() {
    let spec = HawkesSpec::new(200.0, vec![60.0], vec![1.0], [0.0, 0.0], [0.0, 0.0], MarkType::Unit, 100.0, 0.0025).unwrap();
    let events = simulate_flow(&spec, &laws(), 50.0, 77);
    let w = DayWindow { label: String::new(), events, horizon: 50.0, tick_size: 0.005, p0: 10.0, mean_queue: 1.0 };
    let counts = bin_counts(&[w], 0.01).unwrap();
    let lam = 2.0 * 200.0 * 0.01;
    // dispersion index: sum (c - lam)^2 / lam is chi-square with n - 1 degrees of freedom
    let n = counts.counts.len() as f64;
    let stat: f64 = counts.counts.iter().map(|c| (c - lam).powi(2) / lam).sum();
    let z = (stat - (n - 1.0)) / (2.0 * (n - 1.0)).sqrt();
    assert!(z.abs() < 2.576, "dispersion z = {z}");
}

#[test]
fn martingale_parameters_give_driftless_prices() {
    let sim = SimulationConfig {
        propagator: PropagatorSpec { sigma: 0.0, ..SimulationConfig::preset("martingale").unwrap().propagator },
        horizon: 0.25,
        exact: true,
        n_windows: 10_000,
        ..SimulationConfig::preset("martingale").unwrap()
    };
    let drifts: Vec<f64> = sim.simulate(5).iter().map(|w| w.end_price() - w.p0).collect();
    let n = drifts.len() as f64;
    let mean = drifts.iter().sum::<f64>() / n;
    let se = (drifts.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
    assert!(mean.abs() < 3.0 * se, "drift {mean} with standard error {se}");
}

#[test]
fn window_jumps_add_up_to_net_change() {
    let sim = SimulationConfig { n_windows: 5, ..SimulationConfig::preset("sim1").unwrap() };
    for w in sim.simulate(3) {
        let net: f64 = w.events.iter().map(|e| e.price_jump).sum();
        assert!((w.p0 + net - w.end_price()).abs() < 1e-9);
        assert!((w.prices().last().unwrap() - w.end_price()).abs() < 1e-9);
    }
}

#[test]
fn tick_file_round_trip() {
    let sim = SimulationConfig { n_windows: 3, ..SimulationConfig::preset("sim1").unwrap() };
    for w in sim.simulate(9) {
        let mut buf = Vec::new();
        write_ticks(&w.to_ticks(), &mut buf).unwrap();
        let parsed = parse_ticks(buf.as_slice()).unwrap();
        let back = classify_events(&aggregate_ms(&parsed), w.tick_size, w.horizon, &w.label);
        let expected = w.quantized_ms();
        assert_eq!(back.events.len(), expected.events.len());
        for (a, b) in back.events.iter().zip(&expected.events) {
            assert_eq!(a.kind, b.kind);
            assert!((a.time - b.time).abs() < 1e-12);
            assert!((a.price_jump - b.price_jump).abs() < 1e-9);
            assert!((a.volume - b.volume).abs() < 1e-9 * b.volume.max(1.0));
        }
        assert!((back.p0 - w.p0).abs() < 1e-9);
        let again = classify_events(&aggregate_ms(&aggregate_ms(&parsed)), w.tick_size, w.horizon, &w.label);
        assert_eq!(again, back);
    }
}
