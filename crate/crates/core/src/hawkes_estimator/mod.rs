//! Calibration of the marked Hawkes order flow.

mod fit;
mod gmm;
mod likelihood;

pub use fit::*;
pub use gmm::*;
pub use likelihood::*;
