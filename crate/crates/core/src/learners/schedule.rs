use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic step-size sequence.
///
/// `Polynomial` gives `α_t = α₀ (t₀ / (t₀ + t))^p`; with `p ∈ (0.5, 1]` it
/// satisfies `Σα_t = ∞`, `Σα_t² < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    Constant(f64),
    Polynomial { alpha0: f64, t0: f64, power: f64 },
}

impl StepSchedule {
    pub fn constant(alpha: f64) -> Result<Self> {
        let s = StepSchedule::Constant(alpha);
        s.validate()?;
        Ok(s)
    }

    pub fn polynomial(alpha0: f64, t0: f64, power: f64) -> Result<Self> {
        let s = StepSchedule::Polynomial { alpha0, t0, power };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant(a) => a > 0.0 && a.is_finite(),
            StepSchedule::Polynomial { alpha0, t0, power } => {
                alpha0 > 0.0 && alpha0.is_finite() && t0 > 0.0 && t0.is_finite() && power >= 0.0 && power.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid step schedule {self:?}")))
        }
    }

    #[inline]
    pub fn rate(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Constant(a) => a,
            StepSchedule::Polynomial { alpha0, t0, power } => alpha0 * (t0 / (t0 + t as f64)).powf(power),
        }
    }

    /// Decay exponent: 0 for constant schedules.
    pub fn power(&self) -> f64 {
        match *self {
            StepSchedule::Constant(_) => 0.0,
            StepSchedule::Polynomial { power, .. } => power,
        }
    }

    /// `Σα_t = ∞` and `Σα_t² < ∞`.
    pub fn is_robbins_monro(&self) -> bool {
        let p = self.power();
        p > 0.5 && p <= 1.0
    }
}
