use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::intensity::IntensityState;
use super::propagator::{PropagatorSpec, PropagatorState};
use super::spec::{HawkesSpec, MarkType, MarkedEvent};
use crate::error::{Error, Result};
use crate::market_data::DayWindow;

/// Distribution of executed trade volumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VolumeLaw {
    Exponential { mean: f64 },
    Constant { value: f64 },
}

impl VolumeLaw {
    pub fn mean(&self) -> f64 {
        match self {
            VolumeLaw::Exponential { mean } => *mean,
            VolumeLaw::Constant { value } => *value,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            VolumeLaw::Exponential { mean } => {
                // Exclude zero volumes: a trade always executes something.
                loop {
                    let v = Exp::new(1.0 / mean).expect("positive rate").sample(rng);
                    if v > 0.0 {
                        return v;
                    }
                }
            }
            VolumeLaw::Constant { value } => *value,
        }
    }
}

/// Absolute midprice jump triggered by a trade, in half-ticks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw {
    Constant { half_ticks: u32 },
    /// One half-tick plus one more per `step` shares.
    VolumeSteps { step: f64 },
}

impl JumpLaw {
    pub fn half_ticks(&self, volume: f64) -> u32 {
        match self {
            JumpLaw::Constant { half_ticks } => *half_ticks,
            JumpLaw::VolumeSteps { step } => 1 + (volume / step).floor() as u32,
        }
    }
}

/// Volume and jump laws of the simulated trade flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowLaws {
    pub volume: VolumeLaw,
    pub jump: JumpLaw,
    pub half_tick: f64,
}

/// Derives an independent seed for window `index`.
pub fn window_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates the trade flow on `[0, horizon)` by thinning.
///
/// Every component sits above its relaxation target, so the total intensity
/// only decays between events and its current value bounds the future.
pub fn simulate_flow(spec: &HawkesSpec, laws: &FlowLaws, horizon: f64, seed: u64) -> Vec<MarkedEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = IntensityState::stationary(spec, 0.0);
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let bound = state.total_plus() + state.total_minus();
        if bound <= 0.0 {
            break;
        }
        t += Exp::new(bound).expect("positive bound").sample(&mut rng);
        if t >= horizon {
            break;
        }
        state.decay_to(spec, t).expect("time increases");
        let (up, down) = (state.total_plus(), state.total_minus());
        let u: f64 = rng.random();
        if u * bound >= up + down {
            continue;
        }
        let buy = u * bound < up;
        let volume = laws.volume.sample(&mut rng);
        let jump = laws.jump.half_ticks(volume) as f64 * laws.half_tick;
        let event = MarkedEvent::trade(t, if buy { jump } else { -jump }, volume);
        state.jump(spec, &event).expect("trade event");
        out.push(event);
    }
    out
}

/// Quote clock and rounding of the simulated midprice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuoteConfig {
    /// Poisson rate of the quote clock, per hour.
    pub rate: f64,
    /// Price grid of the midprice; `None` keeps exact values.
    pub quantum: Option<f64>,
    pub p0: f64,
}

/// Interleaves quote-driven moves with the trades so the midprice tracks
/// `p0 + sum jump * G(t - tau) + sigma W_t`.
///
/// Trades move the mid by their own jump. At each tick of the quote clock the
/// mid is reset to the rounded target, emitting a quote event when it moves.
pub fn simulate_price(
    trades: &[MarkedEvent],
    prop: &PropagatorSpec,
    quotes: &QuoteConfig,
    horizon: f64,
    seed: u64,
) -> Vec<MarkedEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = PropagatorState::new(prop);
    let clock = (quotes.rate > 0.0).then(|| Exp::new(quotes.rate).expect("positive rate"));
    let mut out = Vec::with_capacity(trades.len() * 4);
    let mut mid = quotes.p0;
    let mut noise = 0.0;
    let mut last_tick = 0.0;
    let mut next_tick = clock.as_ref().map_or(f64::INFINITY, |c| c.sample(&mut rng));
    let mut k = 0;
    loop {
        let next_trade = trades.get(k).map_or(f64::INFINITY, |e| e.time);
        if next_trade >= horizon && next_tick >= horizon {
            break;
        }
        if next_trade <= next_tick {
            let e = trades[k];
            state.add_trade(e.time, e.price_jump);
            mid += e.price_jump;
            out.push(e);
            k += 1;
            continue;
        }
        let t = next_tick;
        if prop.sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            noise += prop.sigma * (t - last_tick).sqrt() * z;
        }
        last_tick = t;
        let target = quotes.p0 + state.impact(t) + noise;
        let next_mid = match quotes.quantum {
            Some(qt) => (target / qt).round() * qt,
            None => target,
        };
        let jump = match quotes.quantum {
            Some(qt) => ((next_mid - mid) / qt).round() * qt,
            None => next_mid - mid,
        };
        if jump.abs() > 1e-13 * (1.0 + mid.abs()) {
            out.push(MarkedEvent::quote(t, jump));
            mid += jump;
        }
        next_tick = t + clock.as_ref().expect("clock running").sample(&mut rng);
    }
    out
}

/// Full configuration of a simulated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub hawkes: HawkesSpec,
    pub propagator: PropagatorSpec,
    pub volume_law: VolumeLaw,
    pub jump_law: JumpLaw,
    pub tick_size: f64,
    /// Window length in hours.
    pub horizon: f64,
    pub p0: f64,
    /// Quote clock rate; defaults to ten times the stationary trade rate.
    #[serde(default)]
    pub quote_rate: Option<f64>,
    /// Keep the midprice off the half-tick grid.
    #[serde(default)]
    pub exact: bool,
    /// Mean size of the best queues written to the tick format.
    pub queue_size: f64,
    pub n_windows: usize,
}

impl SimulationConfig {
    /// Named datasets: `sim1` (noisy, two speeds), `sim2` (noiseless, one speed)
    /// and `martingale` (parameters under which the price is a martingale).
    pub fn preset(name: &str) -> Result<Self> {
        const M1: f64 = 776.0;
        const TICK: f64 = 0.005;
        let m_bar = TICK / 2.0 / (1.0 - (-2.0f64).exp());
        let base = |hawkes: HawkesSpec, propagator: PropagatorSpec| Self {
            hawkes,
            propagator,
            volume_law: VolumeLaw::Exponential { mean: M1 },
            jump_law: JumpLaw::VolumeSteps { step: 2.0 * M1 },
            tick_size: TICK,
            horizon: 2.0,
            p0: 32.4,
            quote_rate: None,
            exact: false,
            queue_size: 1398.0,
            n_windows: 150,
        };
        let secs = 1.0 / 3600.0;
        match name {
            "sim1" => Ok(base(
                HawkesSpec::new(15.0, vec![60.0, 360.0], vec![0.1, 0.9], [110.5, 19.5], [66.5, 3.5], MarkType::Volume, M1, m_bar)?,
                PropagatorSpec::new(2.70, 0.40, vec![0.5, 0.1], vec![60.0, 360.0], 4.0 * secs, 0.1, 1.0)?,
            )),
            "sim2" => Ok(base(
                HawkesSpec::new(40.0, vec![120.0, 360.0], vec![0.05, 0.95], [84.0, 36.0], [45.0, 5.0], MarkType::Volume, M1, m_bar)?,
                PropagatorSpec::mono(3.20, 0.70, 130.0, 2.0 * secs, 0.0)?,
            )),
            "martingale" => {
                let half = TICK / 2.0;
                Ok(Self {
                    volume_law: VolumeLaw::Constant { value: M1 },
                    jump_law: JumpLaw::Constant { half_ticks: 1 },
                    ..base(
                        HawkesSpec::new(15.0, vec![60.0], vec![1.0], [42.0, 0.0], [6.0, 0.0], MarkType::Unit, M1, half)?,
                        PropagatorSpec::new(1.0, 0.4, vec![0.6], vec![60.0], 0.0, 0.1, 1.0)?,
                    )
                })
            }
            other => Err(Error::InvalidParameter(format!("unknown preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hawkes.validate()?;
        self.propagator.validate()?;
        if !(self.tick_size > 0.0 && self.horizon >= 0.0 && self.queue_size >= 0.0) {
            return Err(Error::InvalidParameter("tick size, horizon and queue size must be valid".into()));
        }
        Ok(())
    }

    pub fn half_tick(&self) -> f64 {
        self.tick_size / 2.0
    }

    pub fn quote_rate(&self) -> f64 {
        self.quote_rate.unwrap_or(20.0 * self.hawkes.kappa_bar())
    }

    pub fn laws(&self) -> FlowLaws {
        FlowLaws { volume: self.volume_law.clone(), jump: self.jump_law.clone(), half_tick: self.half_tick() }
    }

    /// Simulates window `index` of the dataset seeded by `seed`.
    pub fn simulate_window(&self, seed: u64, index: usize) -> DayWindow {
        let s = window_seed(seed, index as u64);
        let trades = simulate_flow(&self.hawkes, &self.laws(), self.horizon, s);
        let quotes = QuoteConfig {
            rate: self.quote_rate(),
            quantum: (!self.exact).then(|| self.half_tick()),
            p0: self.p0,
        };
        let events = simulate_price(&trades, &self.propagator, &quotes, self.horizon, s.rotate_left(17) ^ 0x5bd1e995);
        DayWindow {
            label: format!("sim-{index:04}"),
            events,
            horizon: self.horizon,
            tick_size: self.tick_size,
            p0: self.p0,
            mean_queue: self.queue_size,
        }
    }

    /// Simulates all windows, in parallel when enabled.
    pub fn simulate(&self, seed: u64) -> Vec<DayWindow> {
        crate::par::map_range(self.n_windows, |i| self.simulate_window(seed, i))
    }
}
