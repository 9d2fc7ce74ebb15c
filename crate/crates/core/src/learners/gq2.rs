use nalgebra::DVector;

use super::{check_finite, dot, StepSchedule};
use crate::error::{Error, Result};

/// One transition `(S_t, A_t, R_{t+1}, S_{t+1}, A_{t+1})` as seen by GQ2.
#[derive(Debug, Clone, Copy)]
pub struct Gq2Transition<'a> {
    /// `x̃(S_t, A_t)`
    pub x: &'a [f64],
    pub reward: f64,
    /// `ρ_{t+1}`, the ratio of the already-sampled next action.
    pub rho_next: f64,
    /// `x̃(S_{t+1}, A_{t+1})`
    pub x_next: &'a [f64],
}

/// GQ2: ridge-regularized GTD2 for action values, `q_π ≈ X̃u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gq2State {
    pub kappa: DVector<f64>,
    pub u: DVector<f64>,
    pub eta: f64,
    pub gamma: f64,
    pub schedule: StepSchedule,
    pub t: u64,
}

impl Gq2State {
    /// `κ̃₀ = u₀ = 0`.
    pub fn new(dim: usize, eta: f64, gamma: f64, schedule: StepSchedule) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!("GQ2 ridge weight must be >= 0, got {eta}")));
        }
        schedule.validate()?;
        Ok(Self { kappa: DVector::zeros(dim), u: DVector::zeros(dim), eta, gamma, schedule, t: 0 })
    }

    /// Action-value estimate `u⊤x̃`.
    #[inline]
    pub fn estimate(&self, x: &[f64]) -> f64 {
        dot(self.u.as_slice(), x)
    }

    /// ```text
    /// δ_t     = R_{t+1} + γ ρ_{t+1} x̃_{t+1}⊤u_t − x̃_t⊤u_t
    /// κ̃_{t+1} = κ̃_t + α_t (δ_t − x̃_t⊤κ̃_t) x̃_t
    /// u_{t+1} = u_t + α_t ((x̃_t − γ ρ_{t+1} x̃_{t+1}) x̃_t⊤κ̃_t − η u_t)
    /// ```
    pub fn step(&mut self, tr: &Gq2Transition<'_>) -> Result<()> {
        let alpha = self.schedule.rate(self.t);
        let u = self.u.as_slice();
        let delta = tr.reward + self.gamma * tr.rho_next * dot(tr.x_next, u) - dot(tr.x, u);
        let kappa_x = dot(tr.x, self.kappa.as_slice());

        let kappa_scale = alpha * (delta - kappa_x);
        for (k, x) in self.kappa.iter_mut().zip(tr.x) {
            *k += kappa_scale * x;
        }
        let g_rho = self.gamma * tr.rho_next;
        for ((ui, x), xn) in self.u.iter_mut().zip(tr.x).zip(tr.x_next) {
            *ui += alpha * ((x - g_rho * xn) * kappa_x - self.eta * *ui);
        }
        self.t += 1;
        check_finite(self.kappa.as_slice(), "GQ2", self.t)?;
        check_finite(self.u.as_slice(), "GQ2", self.t)
    }
}
