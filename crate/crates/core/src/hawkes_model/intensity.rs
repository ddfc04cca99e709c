use serde::{Deserialize, Serialize};

use super::spec::{HawkesSpec, MarkedEvent};
use crate::error::{Error, Result};

/// Per-scale buy and sell intensity components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityState {
    pub kappa_plus: Vec<f64>,
    pub kappa_minus: Vec<f64>,
    pub last_time: f64,
}

impl IntensityState {
    /// Both sides at their stationary means.
    pub fn stationary(spec: &HawkesSpec, t: f64) -> Self {
        let comp: Vec<f64> = (0..spec.dim()).map(|i| spec.stationary_component(i)).collect();
        Self { kappa_plus: comp.clone(), kappa_minus: comp, last_time: t }
    }

    /// Both sides at the baseline, as if no trade happened before `t`.
    pub fn baseline(spec: &HawkesSpec, t: f64) -> Self {
        let base = vec![spec.kappa_inf / spec.dim() as f64; spec.dim()];
        Self { kappa_plus: base.clone(), kappa_minus: base, last_time: t }
    }

    pub fn total_plus(&self) -> f64 {
        self.kappa_plus.iter().sum()
    }

    pub fn total_minus(&self) -> f64 {
        self.kappa_minus.iter().sum()
    }

    /// Per-scale imbalances kappa_plus - kappa_minus.
    pub fn imbalance(&self) -> Vec<f64> {
        self.kappa_plus.iter().zip(&self.kappa_minus).map(|(p, m)| p - m).collect()
    }

    /// Relaxes every component towards kappa_inf / p up to time `t`.
    pub fn decay_to(&mut self, spec: &HawkesSpec, t: f64) -> Result<()> {
        if t < self.last_time {
            return Err(Error::Ordering { t, last: self.last_time });
        }
        let target = spec.kappa_inf / spec.dim() as f64;
        let dt = t - self.last_time;
        for (i, b) in spec.betas.iter().enumerate() {
            let f = (-b * dt).exp();
            self.kappa_plus[i] = target + (self.kappa_plus[i] - target) * f;
            self.kappa_minus[i] = target + (self.kappa_minus[i] - target) * f;
        }
        self.last_time = t;
        Ok(())
    }

    /// Adds the excitation of a trade already decayed to its time.
    pub fn jump(&mut self, spec: &HawkesSpec, event: &MarkedEvent) -> Result<()> {
        if !event.is_trade() {
            return Err(Error::InvalidKind);
        }
        let mark = spec.mark(event);
        let (own, other) = (spec.phi_self(mark), spec.phi_cross(mark));
        let (up, down) = if event.is_buy() { (own, other) } else { (other, own) };
        for (i, w) in spec.weights.iter().enumerate() {
            self.kappa_plus[i] += w * up;
            self.kappa_minus[i] += w * down;
        }
        Ok(())
    }

    /// Decays to the event time and applies it.
    pub fn observe(&mut self, spec: &HawkesSpec, event: &MarkedEvent) -> Result<()> {
        self.decay_to(spec, event.time)?;
        self.jump(spec, event)
    }
}

/// Functional form of [`IntensityState::decay_to`].
pub fn decay_intensity(state: &IntensityState, spec: &HawkesSpec, t: f64) -> Result<IntensityState> {
    let mut s = state.clone();
    s.decay_to(spec, t)?;
    Ok(s)
}

/// Functional form of [`IntensityState::jump`].
pub fn apply_trade(state: &IntensityState, spec: &HawkesSpec, event: &MarkedEvent) -> Result<IntensityState> {
    let mut s = state.clone();
    s.jump(spec, event)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes_model::spec::MarkType;

    fn mono(kappa_inf: f64, beta: f64, phi_s: [f64; 2], phi_c: [f64; 2], mark: MarkType) -> HawkesSpec {
        HawkesSpec::new(kappa_inf, vec![beta], vec![1.0], phi_s, phi_c, mark, 100.0, 0.0025).unwrap()
    }

    #[test]
    fn scalar_decay_oracle() {
        let s = mono(0.0, 60.0, [1.0, 0.0], [0.0, 0.0], MarkType::Unit);
        let st = IntensityState { kappa_plus: vec![10.0], kappa_minus: vec![0.0], last_time: 0.0 };
        let out = decay_intensity(&st, &s, 1.0 / 60.0).unwrap();
        assert!((out.kappa_plus[0] - 10.0 * (-1.0f64).exp()).abs() < 1e-14);
        assert!((out.kappa_plus[0] - 3.6788).abs() < 1e-4);
    }

    #[test]
    fn stationary_is_fixed_point_without_excitation() {
        let s = mono(15.0, 60.0, [0.0, 0.0], [0.0, 0.0], MarkType::Unit);
        let st = IntensityState::stationary(&s, 0.0);
        let out = decay_intensity(&st, &s, 3.7).unwrap();
        assert_eq!(out.kappa_plus, st.kappa_plus);
    }

    #[test]
    fn full_relaxation() {
        let s = mono(15.0, 60.0, [1.0, 0.0], [1.0, 0.0], MarkType::Unit);
        let st = IntensityState { kappa_plus: vec![25.0], kappa_minus: vec![15.0], last_time: 0.0 };
        let out = decay_intensity(&st, &s, 10.0).unwrap();
        assert!((out.kappa_plus[0] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn backwards_decay_is_an_error() {
        let s = mono(15.0, 60.0, [1.0, 0.0], [1.0, 0.0], MarkType::Unit);
        let st = IntensityState::baseline(&s, 1.0);
        assert!(matches!(decay_intensity(&st, &s, 0.5), Err(Error::Ordering { .. })));
    }

    #[test]
    fn unit_buy_adds_constant_terms() {
        let s = mono(15.0, 60.0, [20.0, 5.0], [7.0, 1.0], MarkType::Unit);
        let st = IntensityState::baseline(&s, 0.0);
        let out = apply_trade(&st, &s, &MarkedEvent::trade(0.0, 0.0025, 300.0)).unwrap();
        assert_eq!(out.kappa_plus[0], 15.0 + 20.0);
        assert_eq!(out.kappa_minus[0], 15.0 + 7.0);
    }

    #[test]
    fn volume_mark_at_mean_adds_both_terms() {
        let s = mono(15.0, 60.0, [20.0, 5.0], [7.0, 1.0], MarkType::Volume);
        let st = IntensityState::baseline(&s, 0.0);
        let out = apply_trade(&st, &s, &MarkedEvent::trade(0.0, -0.0025, 100.0)).unwrap();
        assert_eq!(out.kappa_minus[0], 15.0 + 25.0);
        assert_eq!(out.kappa_plus[0], 15.0 + 8.0);
    }

    #[test]
    fn zero_excitation_leaves_state() {
        let s = mono(15.0, 60.0, [0.0, 0.0], [0.0, 0.0], MarkType::Volume);
        let st = IntensityState::baseline(&s, 0.0);
        assert_eq!(apply_trade(&st, &s, &MarkedEvent::trade(0.0, 0.0025, 100.0)).unwrap(), st);
    }

    #[test]
    fn quote_is_rejected() {
        let s = mono(15.0, 60.0, [1.0, 0.0], [0.0, 0.0], MarkType::Unit);
        let st = IntensityState::baseline(&s, 0.0);
        assert_eq!(apply_trade(&st, &s, &MarkedEvent::quote(0.0, 0.0025)), Err(Error::InvalidKind));
    }
}
