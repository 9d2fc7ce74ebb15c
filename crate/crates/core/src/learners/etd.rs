use nalgebra::DVector;

use super::{check_finite, dot, GemState, GemTransition, StepSchedule};
use crate::error::Result;

/// Followon trace `M_t = i(S_t) + γ ρ_{t−1} M_{t−1}` with `M_{−1} = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowonTrace {
    pub gamma: f64,
    /// The most recent `M_t` (0 before the first step).
    pub value: f64,
}

impl FollowonTrace {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, value: 0.0 }
    }

    /// Advances to `M_t` given `i(S_t)` and `ρ_{t−1}`.
    #[inline]
    pub fn step(&mut self, interest: f64, rho_prev: f64) -> f64 {
        self.value = interest + self.gamma * rho_prev * self.value;
        self.value
    }
}

/// ETD(0) with its own followon trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EtdState {
    pub nu: DVector<f64>,
    pub followon: FollowonTrace,
    /// `ρ_{t−1}`; irrelevant at `t = 0` because `M_{−1} = 0`.
    pub rho_prev: f64,
    pub schedule: StepSchedule,
    pub t: u64,
}

impl EtdState {
    pub fn new(dim: usize, gamma: f64, schedule: StepSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(Self { nu: DVector::zeros(dim), followon: FollowonTrace::new(gamma), rho_prev: 0.0, schedule, t: 0 })
    }

    pub fn estimate(&self, x: &[f64]) -> f64 {
        dot(self.nu.as_slice(), x)
    }

    /// Updates `M_t` from `i(S_t)`, then
    /// `ν_{t+1} = ν_t + α M_t ρ_t (R_{t+1} + γ x_{t+1}⊤ν_t − x_t⊤ν_t) x_t`.
    pub fn step(&mut self, x: &[f64], interest: f64, rho: f64, reward: f64, x_next: &[f64]) -> Result<()> {
        let m = self.followon.step(interest, self.rho_prev);
        let alpha = self.schedule.rate(self.t);
        td_update(&mut self.nu, alpha * m * rho, self.followon.gamma, reward, x, x_next);
        self.rho_prev = rho;
        self.t += 1;
        check_finite(self.nu.as_slice(), "ETD(0)", self.t)?;
        check_finite(&[m], "followon trace", self.t)
    }
}

/// ETD(0) with the followon trace replaced by GEM's estimate `M̂_t = w_t⊤x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GemEtd {
    pub gem: GemState,
    pub nu: DVector<f64>,
    /// `α₂` for `ν`; GEM keeps its own `α₁` schedule.
    pub schedule: StepSchedule,
    pub t: u64,
}

impl GemEtd {
    pub fn new(gem: GemState, schedule: StepSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(Self { nu: DVector::zeros(gem.w.len()), gem, schedule, t: 0 })
    }

    pub fn estimate(&self, x: &[f64]) -> f64 {
        dot(self.nu.as_slice(), x)
    }

    /// `M̂_t` is read from the pre-update `w_t`; GEM steps first, then
    /// `ν_{t+1} = ν_t + α₂ M̂_t ρ_t (R_{t+1} + γ x_{t+1}⊤ν_t − x_t⊤ν_t) x_t`.
    pub fn step(&mut self, tr: &GemTransition<'_>, reward: f64) -> Result<()> {
        let m_hat = self.gem.estimate(tr.x);
        self.gem.step(tr)?;
        let alpha = self.schedule.rate(self.t);
        td_update(&mut self.nu, alpha * m_hat * tr.rho, self.gem.gamma, reward, tr.x, tr.x_next);
        self.t += 1;
        check_finite(self.nu.as_slice(), "GEM-ETD(0)", self.t)
    }
}

#[inline]
fn td_update(nu: &mut DVector<f64>, scale: f64, gamma: f64, reward: f64, x: &[f64], x_next: &[f64]) {
    let v = nu.as_slice();
    let delta = reward + gamma * dot(x_next, v) - dot(x, v);
    let step = scale * delta;
    for (n, xi) in nu.iter_mut().zip(x) {
        *n += step * xi;
    }
}
