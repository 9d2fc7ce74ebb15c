use nalgebra::DVector;

use super::{check_finite, dot, GemTransition, StepSchedule};
use crate::error::Result;

/// The semi-gradient emphasis update
/// `w ← w + α (i(S_{t+1}) + γ ρ_t x_t⊤w − x_{t+1}⊤w) x_{t+1}`.
///
/// Kept as a divergence counterexample; it is stable only when every
/// eigenvalue of `A(θ)` has positive real part (e.g. tabular features).
#[derive(Debug, Clone, PartialEq)]
pub struct SemiGradientEmphasis {
    pub w: DVector<f64>,
    pub gamma: f64,
    pub schedule: StepSchedule,
    pub t: u64,
}

impl SemiGradientEmphasis {
    pub fn new(dim: usize, gamma: f64, schedule: StepSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(Self { w: DVector::zeros(dim), gamma, schedule, t: 0 })
    }

    pub fn estimate(&self, x: &[f64]) -> f64 {
        dot(self.w.as_slice(), x)
    }

    pub fn step(&mut self, tr: &GemTransition<'_>) -> Result<()> {
        let alpha = self.schedule.rate(self.t);
        let w = self.w.as_slice();
        let delta = tr.interest_next + self.gamma * tr.rho * dot(tr.x, w) - dot(tr.x_next, w);
        for (wi, xn) in self.w.iter_mut().zip(tr.x_next) {
            *wi += alpha * delta * xn;
        }
        self.t += 1;
        check_finite(self.w.as_slice(), "semi-gradient emphasis", self.t)
    }
}
