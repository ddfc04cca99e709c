//! Marked Hawkes trade flow, propagator price and their Markovian states.

pub mod autocov;
pub mod intensity;
pub mod propagator;
pub mod simulate;
pub mod spec;

pub use autocov::{autocov_params, AutocovParams};
pub use intensity::{apply_trade, decay_intensity, IntensityState};
pub use propagator::{ImpactCurve, PropagatorSpec, PropagatorState};
pub use simulate::{simulate_flow, simulate_price, window_seed, FlowLaws, JumpLaw, QuoteConfig, SimulationConfig, VolumeLaw};
pub use spec::{EventKind, HawkesSpec, MarkType, MarkedEvent};
