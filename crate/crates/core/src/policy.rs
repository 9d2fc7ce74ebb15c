use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::TabularPolicy;

/// Softmax policy with one logit per state-action pair.
///
/// `theta[s * n_actions + a]` is the logit of action `a` in state `s`, so
/// `∇_θ log π(a|s)` is supported on the block of state `s` only.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    n_states: usize,
    n_actions: usize,
    theta: DVector<f64>,
}

impl SoftmaxPolicy {
    pub fn new(n_states: usize, n_actions: usize, theta: DVector<f64>) -> Result<Self> {
        if theta.len() != n_states * n_actions {
            return Err(Error::InvalidPolicy(format!("expected {} logits, got {}", n_states * n_actions, theta.len())));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidPolicy("logits must be finite".into()));
        }
        Ok(Self { n_states, n_actions, theta })
    }

    /// All logits zero: the uniform policy.
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, theta: DVector::zeros(n_states * n_actions) }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut DVector<f64> {
        &mut self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `π_θ(·|s)`, computed with the max-logit shift.
    pub fn action_probs(&self, s: usize) -> Vec<f64> {
        let logits = &self.theta.as_slice()[s * self.n_actions..(s + 1) * self.n_actions];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.action_probs(s)[a]
    }

    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        let logits = &self.theta.as_slice()[s * self.n_actions..(s + 1) * self.n_actions];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        logits[a] - lse
    }

    /// Snapshot as an explicit probability table.
    pub fn tabular(&self) -> TabularPolicy {
        let mut probs = DMatrix::zeros(self.n_states, self.n_actions);
        for s in 0..self.n_states {
            for (a, p) in self.action_probs(s).into_iter().enumerate() {
                probs[(s, a)] = p;
            }
        }
        TabularPolicy::new(probs).expect("softmax rows are distributions")
    }

    /// `∇_θ log π(a|s) = e_{(s,a)} − Σ_b π(b|s) e_{(s,b)}`.
    pub fn grad_log(&self, s: usize, a: usize) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        self.add_grad_log(s, a, 1.0, g.as_mut_slice());
        g
    }

    /// `out += scale · ∇_θ log π(a|s)` without allocating a full-length vector.
    pub fn add_grad_log(&self, s: usize, a: usize, scale: f64, out: &mut [f64]) {
        let base = s * self.n_actions;
        for (b, p) in self.action_probs(s).into_iter().enumerate() {
            let indicator = if b == a { 1.0 } else { 0.0 };
            out[base + b] += scale * (indicator - p);
        }
    }

    /// `θ ← θ + scale · ∇_θ log π(a|s)`.
    pub fn ascend_log(&mut self, s: usize, a: usize, scale: f64) {
        let probs = self.action_probs(s);
        let base = s * self.n_actions;
        for (b, p) in probs.into_iter().enumerate() {
            let indicator = if b == a { 1.0 } else { 0.0 };
            self.theta[base + b] += scale * (indicator - p);
        }
    }

    /// Score `ψ_θ(s, a) = ρ_θ(s, a) ∇ log π(a|s)` against behavior `mu`.
    pub fn score(&self, mu: &TabularPolicy, s: usize, a: usize) -> Result<DVector<f64>> {
        let m = mu.prob(s, a);
        if !(m > 0.0) {
            return Err(Error::ZeroBehaviorProbability { state: s, action: a });
        }
        Ok(self.grad_log(s, a) * (self.prob(s, a) / m))
    }
}
