use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a trade's size enters the excitation functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkType {
    Unit,
    Volume,
    Price,
}

impl MarkType {
    pub const ALL: [MarkType; 3] = [MarkType::Unit, MarkType::Volume, MarkType::Price];

    pub fn name(self) -> &'static str {
        match self {
            MarkType::Unit => "unit",
            MarkType::Volume => "volume",
            MarkType::Price => "price",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Trade,
    Quote,
}

/// A midprice move, driven either by a trade or by a quote update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedEvent {
    /// Hours since the window start.
    pub time: f64,
    pub kind: EventKind,
    /// Signed midprice change in currency.
    pub price_jump: f64,
    /// Executed shares, zero for quotes.
    pub volume: f64,
}

impl MarkedEvent {
    pub fn trade(time: f64, price_jump: f64, volume: f64) -> Self {
        Self { time, kind: EventKind::Trade, price_jump, volume }
    }

    pub fn quote(time: f64, price_jump: f64) -> Self {
        Self { time, kind: EventKind::Quote, price_jump, volume: 0.0 }
    }

    pub fn is_trade(&self) -> bool {
        self.kind == EventKind::Trade
    }

    /// +1 for an upward move, -1 for a downward one.
    pub fn side(&self) -> f64 {
        if self.price_jump >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn is_buy(&self) -> bool {
        self.price_jump >= 0.0
    }
}

/// Multi-exponential marked Hawkes specification for the buy/sell trade flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HawkesSpec {
    /// Baseline intensity per side, events/hour.
    pub kappa_inf: f64,
    /// Decay speeds, 1/hour, strictly increasing.
    pub betas: Vec<f64>,
    pub weights: Vec<f64>,
    /// Self-excitation (constant, linear) coefficients.
    pub phi_s: [f64; 2],
    /// Cross-excitation (constant, linear) coefficients.
    pub phi_c: [f64; 2],
    pub mark_type: MarkType,
    /// Mean trade volume.
    pub m1: f64,
    /// Mean absolute price jump of trades.
    pub m_bar: f64,
}

impl HawkesSpec {
    /// Validates and builds a spec. Weights must sum to one and the flow must be stationary.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kappa_inf: f64,
        betas: Vec<f64>,
        weights: Vec<f64>,
        phi_s: [f64; 2],
        phi_c: [f64; 2],
        mark_type: MarkType,
        m1: f64,
        m_bar: f64,
    ) -> Result<Self> {
        let spec = Self { kappa_inf, betas, weights, phi_s, phi_c, mark_type, m1, m_bar };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.betas.len();
        if p == 0 || self.weights.len() != p {
            return Err(Error::InvalidParameter("betas and weights must be nonempty and of equal length".into()));
        }
        if self.betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidParameter("decay speeds must be positive".into()));
        }
        if self.betas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("decay speeds must be strictly increasing".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, expected 1")));
        }
        if !(self.kappa_inf.is_finite() && self.kappa_inf >= 0.0) {
            return Err(Error::InvalidParameter("baseline intensity must be nonnegative".into()));
        }
        if self.phi_s.iter().chain(self.phi_c.iter()).any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidParameter("excitation coefficients must be nonnegative".into()));
        }
        if !(self.m1 > 0.0 && self.m_bar > 0.0) {
            return Err(Error::InvalidParameter("mark normalizers must be positive".into()));
        }
        let br = self.branching_ratio();
        if br >= 1.0 {
            return Err(Error::NotStationary(br));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.betas.len()
    }

    /// Mean mark: unit marks only carry the constant term.
    pub fn mean_mark(&self) -> f64 {
        match self.mark_type {
            MarkType::Unit => 0.0,
            _ => 1.0,
        }
    }

    pub fn iota_s(&self) -> f64 {
        self.phi_s[0] + self.phi_s[1] * self.mean_mark()
    }

    pub fn iota_c(&self) -> f64 {
        self.phi_c[0] + self.phi_c[1] * self.mean_mark()
    }

    pub fn iota(&self) -> f64 {
        self.iota_s() + self.iota_c()
    }

    /// Integral of the decay kernel.
    pub fn kernel_norm(&self) -> f64 {
        self.weights.iter().zip(&self.betas).map(|(w, b)| w / b).sum()
    }

    pub fn branching_ratio(&self) -> f64 {
        self.iota() * self.kernel_norm()
    }

    /// Directional branching ratio: same-sign children per trade.
    pub fn directional_branching_ratio(&self) -> f64 {
        (self.iota_s() - self.iota_c()) * self.kernel_norm()
    }

    /// Stationary mean intensity of each side.
    pub fn kappa_bar(&self) -> f64 {
        self.kappa_inf / (1.0 - self.branching_ratio())
    }

    /// Stationary mean of the scale-`i` component of either side.
    pub fn stationary_component(&self, i: usize) -> f64 {
        self.kappa_inf / self.dim() as f64 + self.iota() * self.kappa_bar() * self.weights[i] / self.betas[i]
    }

    /// Mark of a trade under this spec's mark type.
    pub fn mark(&self, event: &MarkedEvent) -> f64 {
        match self.mark_type {
            MarkType::Unit => 0.0,
            MarkType::Volume => event.volume / self.m1,
            MarkType::Price => event.price_jump.abs() / self.m_bar,
        }
    }

    pub fn phi_self(&self, mark: f64) -> f64 {
        self.phi_s[0] + self.phi_s[1] * mark
    }

    pub fn phi_cross(&self, mark: f64) -> f64 {
        self.phi_c[0] + self.phi_c[1] * mark
    }

    /// Decay kernel K(t) = sum w_i exp(-beta_i t).
    pub fn kernel_value(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidParameter(format!("kernel evaluated at negative time {t}")));
        }
        Ok(self.weights.iter().zip(&self.betas).map(|(w, b)| w * (-b * t).exp()).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> HawkesSpec {
        HawkesSpec::new(15.0, vec![60.0, 360.0], vec![0.1, 0.9], [110.5, 19.5], [66.5, 3.5], MarkType::Volume, 776.0, 0.0029)
            .unwrap()
    }

    #[test]
    fn ratios_of_reference_flow() {
        let s = spec();
        assert!((s.iota() - 200.0).abs() < 1e-12);
        assert!((s.branching_ratio() - 0.8333333333333).abs() < 1e-9);
        assert!((s.directional_branching_ratio() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn kernel_starts_at_one() {
        assert!((spec().kernel_value(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(spec().kernel_value(-1.0).is_err());
    }

    #[test]
    fn rejects_explosive_flow() {
        let r = HawkesSpec::new(1.0, vec![10.0], vec![1.0], [8.0, 0.0], [3.0, 0.0], MarkType::Unit, 1.0, 1.0);
        assert!(matches!(r, Err(Error::NotStationary(_))));
    }

    #[test]
    fn rejects_unsorted_speeds() {
        let r = HawkesSpec::new(1.0, vec![10.0, 5.0], vec![0.5, 0.5], [1.0, 0.0], [1.0, 0.0], MarkType::Unit, 1.0, 1.0);
        assert!(r.is_err());
    }

    #[test]
    fn volume_mark_is_one_at_mean() {
        let s = spec();
        let e = MarkedEvent::trade(0.1, 0.0025, 776.0);
        assert!((s.mark(&e) - 1.0).abs() < 1e-15);
    }
}
