use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_finite, dot, StepSchedule};
use crate::error::{Error, Result};

/// One transition `(S_t, A_t, S_{t+1})` as seen by GEM.
#[derive(Debug, Clone, Copy)]
pub struct GemTransition<'a> {
    /// `x(S_t)`
    pub x: &'a [f64],
    /// `ρ_t = π(A_t|S_t) / μ(A_t|S_t)`
    pub rho: f64,
    /// `i(S_{t+1})`
    pub interest_next: f64,
    /// `x(S_{t+1})`
    pub x_next: &'a [f64],
}

/// Gradient Emphasis Learning: a ridge-regularized, GTD2-style learner of the
/// emphasis `m_π ≈ Xw`, with auxiliary weights `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GemState {
    pub kappa: DVector<f64>,
    pub w: DVector<f64>,
    pub eta: f64,
    pub gamma: f64,
    pub schedule: StepSchedule,
    pub t: u64,
}

impl GemState {
    /// `κ₀ = w₀ = 0`.
    pub fn new(dim: usize, eta: f64, gamma: f64, schedule: StepSchedule) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!("GEM ridge weight must be >= 0, got {eta}")));
        }
        schedule.validate()?;
        Ok(Self { kappa: DVector::zeros(dim), w: DVector::zeros(dim), eta, gamma, schedule, t: 0 })
    }

    /// `κ₀ = 0`, `w₀ ~ N(0, I)`.
    pub fn with_normal_init<R: Rng + ?Sized>(
        dim: usize,
        eta: f64,
        gamma: f64,
        schedule: StepSchedule,
        rng: &mut R,
    ) -> Result<Self> {
        let mut state = Self::new(dim, eta, gamma, schedule)?;
        for w in state.w.iter_mut() {
            *w = rng.sample(StandardNormal);
        }
        Ok(state)
    }

    /// Emphasis estimate `w⊤x`.
    #[inline]
    pub fn estimate(&self, x: &[f64]) -> f64 {
        dot(self.w.as_slice(), x)
    }

    /// ```text
    /// δ̄_t     = i(S_{t+1}) + γ ρ_t x_t⊤w_t − x_{t+1}⊤w_t
    /// κ_{t+1} = κ_t + α_t (δ̄_t − x_{t+1}⊤κ_t) x_{t+1}
    /// w_{t+1} = w_t + α_t ((x_{t+1} − γ ρ_t x_t) x_{t+1}⊤κ_t − η w_t)
    /// ```
    pub fn step(&mut self, tr: &GemTransition<'_>) -> Result<()> {
        let alpha = self.schedule.rate(self.t);
        let w = self.w.as_slice();
        let delta = tr.interest_next + self.gamma * tr.rho * dot(tr.x, w) - dot(tr.x_next, w);
        let kappa_next = dot(tr.x_next, self.kappa.as_slice());

        let kappa_scale = alpha * (delta - kappa_next);
        let g_rho = self.gamma * tr.rho;
        let mut largest = 0.0f64;
        let eta = self.eta;
        let (kappa, w) = (self.kappa.as_mut_slice(), self.w.as_mut_slice());
        for i in 0..kappa.len() {
            let (x, xn) = (tr.x[i], tr.x_next[i]);
            kappa[i] += kappa_scale * xn;
            w[i] += alpha * ((xn - g_rho * x) * kappa_next - eta * w[i]);
            largest = largest.max(kappa[i].abs()).max(w[i].abs());
        }
        self.t += 1;
        check_finite(&[largest], "GEM", self.t)
    }
}
