//! Finite MDPs, tabular policies and the matrices derived from them.
//!
//! State-action pairs are flattened as `s * n_actions + a` everywhere in the
//! crate; the same layout is used for `P̃_π`, `r̃`, `d̃_μ` and the rows of the
//! state-action feature matrix.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;

const STOCHASTIC_TOL: f64 = 1e-12;

/// A finite discounted MDP with an interest function over states.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    /// `p(s'|s,a)` stored at `(s * n_actions + a) * n_states + s'`.
    transition: Vec<f64>,
    /// `r(s,a,s')`, same layout as `transition`.
    reward: Vec<f64>,
    discount: f64,
    interest: DVector<f64>,
}

impl FiniteMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        interest: DVector<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidModel("state and action sets must be non-empty".into()));
        }
        let len = n_states * n_actions * n_states;
        if transition.len() != len || reward.len() != len {
            return Err(Error::InvalidModel(format!("transition and reward tensors must have {len} entries")));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidModel(format!("discount {discount} must lie in [0, 1)")));
        }
        if interest.len() != n_states || interest.iter().any(|&i| !(i >= 0.0) || !i.is_finite()) {
            return Err(Error::InvalidModel("interest must be finite, nonnegative, one per state".into()));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidModel("rewards must be finite".into()));
        }
        for sa in 0..n_states * n_actions {
            let row = &transition[sa * n_states..(sa + 1) * n_states];
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidModel(format!("negative transition probability in row {sa}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidModel(format!("transition row {sa} sums to {total}, not 1")));
            }
        }
        Ok(Self { n_states, n_actions, transition, reward, discount, interest })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_state_actions(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn interest(&self) -> &DVector<f64> {
        &self.interest
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + next]
    }

    #[inline]
    pub fn r(&self, s: usize, a: usize, next: usize) -> f64 {
        self.reward[(s * self.n_actions + a) * self.n_states + next]
    }

    fn next_state_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// Copy of this MDP with a different discount.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.transition.clone(),
            self.reward.clone(),
            discount,
            self.interest.clone(),
        )
    }

    /// Copy of this MDP with a different interest function.
    pub fn with_interest(&self, interest: DVector<f64>) -> Result<Self> {
        Self::new(self.n_states, self.n_actions, self.transition.clone(), self.reward.clone(), self.discount, interest)
    }

    /// Samples `S_{t+1} ~ p(·|s, a)` and returns it with `r(s, a, S_{t+1})`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (f64, usize) {
        let next = sample_categorical(self.next_state_row(s, a).iter().copied(), rng);
        (self.r(s, a, next), next)
    }
}

/// A stochastic policy given as an explicit `|S| x |A|` probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    probs: DMatrix<f64>,
}

impl TabularPolicy {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        if probs.nrows() == 0 || probs.ncols() == 0 {
            return Err(Error::InvalidPolicy("empty probability table".into()));
        }
        for (s, row) in probs.row_iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidPolicy(format!("negative probability in state {s}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidPolicy(format!("state {s} probabilities sum to {total}")));
            }
        }
        Ok(Self { probs })
    }

    /// The same action distribution in every state.
    pub fn state_independent(n_states: usize, action_probs: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_fn(n_states, action_probs.len(), |_, a| action_probs[a]))
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { probs: DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64) }
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    /// Fails unless every action has positive probability, as a behavior policy must.
    pub fn check_behavior(&self) -> Result<()> {
        for s in 0..self.n_states() {
            for a in 0..self.n_actions() {
                if !(self.prob(s, a) > 0.0) {
                    return Err(Error::ZeroBehaviorProbability { state: s, action: a });
                }
            }
        }
        Ok(())
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_categorical(self.probs.row(s).iter().copied(), rng)
    }

    pub(crate) fn check_shape(&self, mdp: &FiniteMdp) -> Result<()> {
        if self.n_states() != mdp.n_states() || self.n_actions() != mdp.n_actions() {
            return Err(Error::InvalidPolicy(format!(
                "policy is {}x{}, MDP has {} states and {} actions",
                self.n_states(),
                self.n_actions(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// One environment interaction under the behavior policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// `A ~ μ(·|s)`, `S' ~ p(·|s, A)`, `R = r(s, A, S')`.
pub fn sample_step<R: Rng + ?Sized>(mdp: &FiniteMdp, mu: &TabularPolicy, state: usize, rng: &mut R) -> Step {
    let action = mu.sample_action(state, rng);
    let (reward, next_state) = mdp.sample_transition(state, action, rng);
    Step { action, reward, next_state }
}

fn sample_categorical<R: Rng + ?Sized>(probs: impl IntoIterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // rounding: u landed in the sliver above the accumulated sum
    last_positive
}

/// `P_π(s, s') = Σ_a π(a|s) p(s'|s, a)`.
pub fn transition_matrix(mdp: &FiniteMdp, pi: &TabularPolicy) -> DMatrix<f64> {
    let n = mdp.n_states();
    DMatrix::from_fn(n, n, |s, next| (0..mdp.n_actions()).map(|a| pi.prob(s, a) * mdp.p(s, a, next)).sum())
}

/// `P̃_π((s, a), (s', a')) = p(s'|s, a) π(a'|s')`.
pub fn state_action_transition_matrix(mdp: &FiniteMdp, pi: &TabularPolicy) -> DMatrix<f64> {
    let na = mdp.n_actions();
    let n = mdp.n_state_actions();
    DMatrix::from_fn(n, n, |row, col| {
        let (s, a) = (row / na, row % na);
        let (next, next_a) = (col / na, col % na);
        mdp.p(s, a, next) * pi.prob(next, next_a)
    })
}

/// Expected one-step rewards `(r_π, r̃)`.
pub fn reward_vectors(mdp: &FiniteMdp, pi: &TabularPolicy) -> (DVector<f64>, DVector<f64>) {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let r_sa = DVector::from_fn(ns * na, |idx, _| {
        let (s, a) = (idx / na, idx % na);
        (0..ns).map(|next| mdp.p(s, a, next) * mdp.r(s, a, next)).sum()
    });
    let r_pi = DVector::from_fn(ns, |s, _| (0..na).map(|a| pi.prob(s, a) * r_sa[s * na + a]).sum());
    (r_pi, r_sa)
}

/// `ρ(s, a) = π(a|s) / μ(a|s)`.
pub fn importance_ratio(pi: &TabularPolicy, mu: &TabularPolicy, s: usize, a: usize) -> Result<f64> {
    let m = mu.prob(s, a);
    if !(m > 0.0) {
        return Err(Error::ZeroBehaviorProbability { state: s, action: a });
    }
    Ok(pi.prob(s, a) / m)
}

/// Structural classification of the chain induced by a policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainClass {
    Ergodic,
    Periodic { period: usize },
    Reducible,
}

/// Classifies a row-stochastic matrix by its positive-entry graph.
///
/// Irreducibility is strong connectivity from state 0 in both directions.
/// The period is the gcd of `level(u) + 1 - level(v)` over all edges, with
/// levels from a BFS rooted at state 0; this is exact for irreducible chains.
pub fn classify_chain(p: &DMatrix<f64>) -> ChainClass {
    let n = p.nrows();
    let reach = |forward: bool| -> Vec<Option<usize>> {
        let mut level = vec![None; n];
        level[0] = Some(0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            let lu = level[u].unwrap();
            for v in 0..n {
                let w = if forward { p[(u, v)] } else { p[(v, u)] };
                if w > 0.0 && level[v].is_none() {
                    level[v] = Some(lu + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    };
    let forward = reach(true);
    if forward.iter().any(Option::is_none) || reach(false).iter().any(Option::is_none) {
        return ChainClass::Reducible;
    }
    let mut period = 0usize;
    for u in 0..n {
        for v in 0..n {
            if p[(u, v)] > 0.0 {
                let diff = (forward[u].unwrap() + 1).abs_diff(forward[v].unwrap());
                period = gcd(period, diff);
            }
        }
    }
    if period == 1 {
        ChainClass::Ergodic
    } else {
        ChainClass::Periodic { period }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Fails unless the chain induced by `pi` is irreducible and aperiodic.
pub fn check_ergodic(mdp: &FiniteMdp, pi: &TabularPolicy) -> Result<()> {
    pi.check_shape(mdp)?;
    match classify_chain(&transition_matrix(mdp, pi)) {
        ChainClass::Ergodic => Ok(()),
        ChainClass::Periodic { period } => Err(Error::NotErgodic(format!("chain has period {period}"))),
        ChainClass::Reducible => Err(Error::NotErgodic("chain is reducible".into())),
    }
}

/// Stationary distribution of the chain induced by `pi`, by a direct solve of
/// `(P⊤ − I)d = 0` with the last equation replaced by `Σd = 1`.
///
/// Requires an irreducible chain (a unique stationary distribution). Periodic
/// chains are accepted here; use [`check_ergodic`] where mixing matters.
pub fn stationary_distribution(mdp: &FiniteMdp, pi: &TabularPolicy) -> Result<DVector<f64>> {
    pi.check_shape(mdp)?;
    let p = transition_matrix(mdp, pi);
    stationary_of(&p)
}

pub(crate) fn stationary_of(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    if classify_chain(p) == ChainClass::Reducible {
        return Err(Error::NotErgodic("chain is reducible".into()));
    }
    let n = p.nrows();
    let mut system = p.transpose() - DMatrix::identity(n, n);
    let mut rhs = DVector::zeros(n);
    system.row_mut(n - 1).fill(1.0);
    rhs[n - 1] = 1.0;
    let d = linalg::solve(&system, &rhs, "stationarity equations")?;
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NotErgodic("stationary distribution has non-positive entries".into()));
    }
    Ok(d)
}
