#![allow(dead_code)]

use hawkes_impact::hawkes_model::{simulate_flow, FlowLaws, HawkesSpec, ImpactCurve, JumpLaw, MarkType, MarkedEvent, VolumeLaw};
use hawkes_impact::market_data::DayWindow;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn flow_spec() -> HawkesSpec {
    HawkesSpec::new(60.0, vec![60.0], vec![1.0], [20.0, 5.0], [10.0, 2.0], MarkType::Volume, 100.0, 0.0025).unwrap()
}

pub fn laws() -> FlowLaws {
    FlowLaws { volume: VolumeLaw::Exponential { mean: 100.0 }, jump: JumpLaw::VolumeSteps { step: 150.0 }, half_tick: 0.0025 }
}

/// Windows whose quote prices follow the windowed model exactly:
/// P(theta) = P(theta - delta_r) + sum over (theta - delta_r, theta] of jump * G.
pub fn practical_windows(g: &impl ImpactCurve, delta_r: f64, n: usize, horizon: f64, quote_rate: f64, seed: u64) -> Vec<DayWindow> {
    (0..n)
        .map(|d| {
            let trades = simulate_flow(&flow_spec(), &laws(), horizon, seed + d as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc ^ d as u64);
            let mut quotes = Vec::new();
            let mut t = 0.0;
            loop {
                t += -(1.0 - rng.random::<f64>()).ln() / quote_rate;
                if t >= horizon {
                    break;
                }
                quotes.push(t);
            }
            let mut times: Vec<(f64, Option<f64>)> = trades.iter().map(|e| (e.time, Some(e.price_jump))).chain(quotes.iter().map(|&q| (q, None))).collect();
            times.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let p0 = 10.0;
            let mut events: Vec<MarkedEvent> = Vec::new();
            let mut prices: Vec<f64> = Vec::new();
            let mut mid = p0;
            for (time, jump) in times {
                let next = match jump {
                    Some(j) => {
                        events.push(MarkedEvent::trade(time, j, 100.0));
                        mid + j
                    }
                    None => {
                        let from = time - delta_r;
                        let n_before = events.partition_point(|e| e.time <= from);
                        let start = if n_before == 0 { p0 } else { prices[n_before - 1] };
                        let impact: f64 = events.iter().filter(|e| e.is_trade() && e.time > from).map(|e| e.price_jump * g.value(time - e.time)).sum();
                        events.push(MarkedEvent::quote(time, start + impact - mid));
                        start + impact
                    }
                };
                mid = next;
                prices.push(mid);
            }
            DayWindow { label: format!("practical-{d}"), events, horizon, tick_size: 0.005, p0, mean_queue: 1.0 }
        })
        .collect()
}

/// |a - b| relative to the larger magnitude, with an absolute floor.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
