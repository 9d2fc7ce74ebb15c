//! Shared helpers for the integration tests: random ergodic MDPs and a small
//! reference implementation of the exact quantities, written directly from
//! their definitions so it does not share code with the library oracle.
#![allow(dead_code)]

use emphatic_rl::features::FeatureMap;
use emphatic_rl::mdp::{FiniteMdp, TabularPolicy};
use emphatic_rl::policy::SoftmaxPolicy;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_simplex(n: usize, floor: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| floor + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Dense transitions (every entry positive), so every policy induces an
/// ergodic chain. Rewards are uniform on [-1, 1], interest on [0.5, 1.5].
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, rng: &mut ChaCha8Rng) -> FiniteMdp {
    let mut transition = Vec::new();
    for _ in 0..n_states * n_actions {
        transition.extend(random_simplex(n_states, 0.05, rng));
    }
    let reward = (0..n_states * n_actions * n_states).map(|_| rng.random_range(-1.0..1.0)).collect();
    let interest = DVector::from_fn(n_states, |_, _| rng.random_range(0.5..1.5));
    FiniteMdp::new(n_states, n_actions, transition, reward, gamma, interest).unwrap()
}

pub fn random_policy(n_states: usize, n_actions: usize, rng: &mut ChaCha8Rng) -> TabularPolicy {
    let mut probs = DMatrix::zeros(n_states, n_actions);
    for s in 0..n_states {
        for (a, p) in random_simplex(n_actions, 0.2, rng).into_iter().enumerate() {
            probs[(s, a)] = p;
        }
    }
    TabularPolicy::new(probs).unwrap()
}

pub fn random_softmax(n_states: usize, n_actions: usize, scale: f64, rng: &mut ChaCha8Rng) -> SoftmaxPolicy {
    let theta = DVector::from_fn(n_states * n_actions, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    });
    SoftmaxPolicy::new(n_states, n_actions, theta).unwrap()
}

/// Gaussian state features with `k` columns, plus action-block
/// state-action features.
pub fn random_features(n_states: usize, n_actions: usize, k: usize, rng: &mut ChaCha8Rng) -> FeatureMap {
    let x = DMatrix::from_fn(n_states, k, |_, _| StandardNormal.sample(rng));
    FeatureMap::with_action_blocks(x, n_actions).unwrap()
}

pub fn one_hot(n: usize, n_actions: usize) -> FeatureMap {
    FeatureMap::with_action_blocks(DMatrix::identity(n, n), n_actions).unwrap()
}

pub fn zero_hot(n: usize, n_actions: usize) -> FeatureMap {
    FeatureMap::with_action_blocks(DMatrix::from_element(n, n, 1.0) - DMatrix::identity(n, n), n_actions).unwrap()
}

/// Reference computations from the raw transition and reward tensors.
pub struct Reference<'a> {
    pub mdp: &'a FiniteMdp,
}

impl Reference<'_> {
    pub fn p(&self, pi: &TabularPolicy) -> DMatrix<f64> {
        let n = self.mdp.n_states();
        DMatrix::from_fn(n, n, |s, t| (0..self.mdp.n_actions()).map(|a| pi.prob(s, a) * self.mdp.p(s, a, t)).sum())
    }

    pub fn r(&self, pi: &TabularPolicy) -> DVector<f64> {
        let n = self.mdp.n_states();
        DVector::from_fn(n, |s, _| {
            let mut total = 0.0;
            for a in 0..self.mdp.n_actions() {
                for t in 0..n {
                    total += pi.prob(s, a) * self.mdp.p(s, a, t) * self.mdp.r(s, a, t);
                }
            }
            total
        })
    }

    /// Stationary distribution: solve `(P⊤ − I) d = 0` with the last equation
    /// replaced by `Σ d = 1`.
    pub fn stationary(&self, pi: &TabularPolicy) -> DVector<f64> {
        let n = self.mdp.n_states();
        let mut m = self.p(pi).transpose() - DMatrix::identity(n, n);
        let mut rhs = DVector::zeros(n);
        for j in 0..n {
            m[(n - 1, j)] = 1.0;
        }
        rhs[n - 1] = 1.0;
        m.lu().solve(&rhs).unwrap()
    }

    pub fn value(&self, pi: &TabularPolicy) -> DVector<f64> {
        let n = self.mdp.n_states();
        let g = self.mdp.discount();
        (DMatrix::identity(n, n) - self.p(pi) * g).lu().solve(&self.r(pi)).unwrap()
    }

    /// `D⁻¹ (I − γP⊤)⁻¹ D i` with `D` built from `mu`'s stationary distribution.
    pub fn emphasis(&self, pi: &TabularPolicy, mu: &TabularPolicy) -> DVector<f64> {
        let n = self.mdp.n_states();
        let d = self.stationary(mu);
        let g = self.mdp.discount();
        let di = d.component_mul(self.mdp.interest());
        let y = (DMatrix::identity(n, n) - self.p(pi).transpose() * g).lu().solve(&di).unwrap();
        y.component_div(&d)
    }

    pub fn objective(&self, pi: &TabularPolicy, mu: &TabularPolicy) -> f64 {
        let d = self.stationary(mu);
        d.component_mul(self.mdp.interest()).dot(&self.value(pi))
    }
}
