//! Two-timescale off-policy actors over a [`SoftmaxPolicy`]: COF-PAC (GEM
//! emphasis critic plus GQ2 value critic), ACE (followon trace) and Off-PAC
//! (no emphasis).

use nalgebra::DVector;
use rand::Rng;

use crate::environments::Environment;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::learners::{FollowonTrace, GemState, GemTransition, Gq2State, Gq2Transition, StepSchedule};
use crate::linalg;
use crate::oracle::Oracle;
use crate::policy::SoftmaxPolicy;

/// `Γ(d) = 1` for `‖d‖ < C₀`, else `(1 + C₀) / (1 + ‖d‖)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveStepsize {
    pub c0: f64,
}

impl AdaptiveStepsize {
    pub fn new(c0: f64) -> Result<Self> {
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::Config(format!("C₀ must be positive, got {c0}")));
        }
        Ok(Self { c0 })
    }

    pub fn value(&self, d: &[f64]) -> f64 {
        self.value_at_norm(linalg::norm(d))
    }

    pub fn value_at_norm(&self, norm: f64) -> f64 {
        if norm < self.c0 {
            1.0
        } else {
            (1.0 + self.c0) / (1.0 + norm)
        }
    }
}

/// Fails unless both schedules decay polynomially with the actor strictly
/// slower-stepping (`p_β > p_α`), so `Σ(β_t/α_t)^d < ∞` for large enough `d`.
pub fn validate_timescales(critic: &StepSchedule, actor: &StepSchedule) -> Result<()> {
    critic.validate()?;
    actor.validate()?;
    if !critic.is_robbins_monro() || !actor.is_robbins_monro() {
        return Err(Error::Config("both step sizes must satisfy the Robbins-Monro conditions".into()));
    }
    if actor.power() <= critic.power() {
        return Err(Error::Config(format!(
            "actor decay {} must exceed critic decay {}",
            actor.power(),
            critic.power()
        )));
    }
    Ok(())
}

/// `Δ_t = ρ_t m̂_t q̂_t ∇log π_θ(A_t|S_t)`.
pub fn actor_increment(policy: &SoftmaxPolicy, s: usize, a: usize, rho: f64, emphasis: f64, q: f64) -> DVector<f64> {
    let mut delta = DVector::zeros(policy.dim());
    policy.add_grad_log(s, a, rho * emphasis * q, delta.as_mut_slice());
    delta
}

/// `θ ← θ + β M_t ρ_t q̂(S_t, A_t) ∇log π(A_t|S_t)`.
pub fn ace_step(policy: &mut SoftmaxPolicy, followon: f64, rho: f64, q: f64, s: usize, a: usize, beta: f64) {
    policy.ascend_log(s, a, beta * followon * rho * q);
}

/// `θ ← θ + β ρ_t q̂(S_t, A_t) ∇log π(A_t|S_t)`.
pub fn offpac_step(policy: &mut SoftmaxPolicy, rho: f64, q: f64, s: usize, a: usize, beta: f64) {
    ace_step(policy, 1.0, rho, q, s, a, beta)
}

/// Where the actor's emphasis weight comes from.
#[derive(Debug, Clone)]
pub enum EmphasisSource {
    /// COF-PAC: `m̂_t = w_t⊤x_t`.
    Gem(GemState),
    /// ACE: the followon trace `M_t`.
    Followon { trace: FollowonTrace, rho_prev: f64 },
    /// Off-PAC: no reweighting.
    Unit,
}

/// Where the actor's action-value estimate comes from.
#[derive(Debug, Clone)]
pub enum ValueCritic {
    Gq2(Gq2State),
    /// Exact `q_π` recomputed for the current policy at every step.
    Exact(Box<Oracle>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorKind {
    CofPac,
    Ace,
    OffPac,
}

impl ActorKind {
    pub fn name(self) -> &'static str {
        match self {
            ActorKind::CofPac => "cofpac",
            ActorKind::Ace => "ace",
            ActorKind::OffPac => "offpac",
        }
    }
}

/// Per-step record of the actor move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorStepInfo {
    pub beta: f64,
    /// `Γ₁(w_t) Γ₂(u_t)` for COF-PAC, 1 otherwise.
    pub adaptive_factor: f64,
    /// `‖θ_{t+1} − θ_t‖`
    pub displacement: f64,
    pub emphasis: f64,
    pub q_estimate: f64,
}

/// An off-policy actor-critic learning online from behavior-policy samples.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub kind: ActorKind,
    pub policy: SoftmaxPolicy,
    pub emphasis: EmphasisSource,
    pub critic: ValueCritic,
    pub actor_schedule: StepSchedule,
    pub adaptive: AdaptiveStepsize,
    pub t: u64,
    state: usize,
    action: usize,
}

impl ActorCritic {
    /// COF-PAC (Algorithm 1) with `w₀ ~ N(0, I)`, `κ₀ = κ̃₀ = u₀ = 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn cofpac<R: Rng + ?Sized>(
        env: &Environment,
        features: &FeatureMap,
        policy: SoftmaxPolicy,
        critic_schedule: StepSchedule,
        actor_schedule: StepSchedule,
        eta: f64,
        c0: f64,
        rng: &mut R,
    ) -> Result<Self> {
        validate_timescales(&critic_schedule, &actor_schedule)?;
        if !(eta > 0.0) {
            return Err(Error::Config("COF-PAC requires η > 0".into()));
        }
        let gamma = env.mdp.discount();
        let gem = GemState::with_normal_init(features.state_dim(), eta, gamma, critic_schedule, rng)?;
        let gq2 = Gq2State::new(features.state_action_dim(), eta, gamma, critic_schedule)?;
        Self::build(
            env,
            ActorKind::CofPac,
            policy,
            EmphasisSource::Gem(gem),
            ValueCritic::Gq2(gq2),
            actor_schedule,
            c0,
            rng,
        )
    }

    /// ACE with a followon-trace emphasis and the given value critic.
    pub fn ace<R: Rng + ?Sized>(
        env: &Environment,
        policy: SoftmaxPolicy,
        critic: ValueCritic,
        actor_schedule: StepSchedule,
        rng: &mut R,
    ) -> Result<Self> {
        let emphasis = EmphasisSource::Followon { trace: FollowonTrace::new(env.mdp.discount()), rho_prev: 0.0 };
        Self::build(env, ActorKind::Ace, policy, emphasis, critic, actor_schedule, 1.0, rng)
    }

    pub fn offpac<R: Rng + ?Sized>(
        env: &Environment,
        policy: SoftmaxPolicy,
        critic: ValueCritic,
        actor_schedule: StepSchedule,
        rng: &mut R,
    ) -> Result<Self> {
        Self::build(env, ActorKind::OffPac, policy, EmphasisSource::Unit, critic, actor_schedule, 1.0, rng)
    }

    #[allow(clippy::too_many_arguments)]
    fn build<R: Rng + ?Sized>(
        env: &Environment,
        kind: ActorKind,
        policy: SoftmaxPolicy,
        emphasis: EmphasisSource,
        critic: ValueCritic,
        actor_schedule: StepSchedule,
        c0: f64,
        rng: &mut R,
    ) -> Result<Self> {
        actor_schedule.validate()?;
        if policy.n_states() != env.mdp.n_states() || policy.n_actions() != env.mdp.n_actions() {
            return Err(Error::InvalidPolicy("policy shape does not match the environment".into()));
        }
        env.behavior.check_behavior()?;
        let state = env.sample_initial_state(rng);
        let action = env.behavior.sample_action(state, rng);
        Ok(Self {
            kind,
            policy,
            emphasis,
            critic,
            actor_schedule,
            adaptive: AdaptiveStepsize::new(c0)?,
            t: 0,
            state,
            action,
        })
    }

    /// `(S_t, A_t)` about to be executed.
    pub fn current(&self) -> (usize, usize) {
        (self.state, self.action)
    }

    /// Redraws `S₀` and `A₀` from `rng`.
    pub fn reset_position<R: Rng + ?Sized>(&mut self, env: &Environment, rng: &mut R) {
        self.state = env.sample_initial_state(rng);
        self.action = env.behavior.sample_action(self.state, rng);
    }

    /// A bound `H` with `‖θ_{t+1} − θ_t‖ ≤ β_t H` for every COF-PAC step:
    /// `ρ_max (1 + C₀)² max‖x‖ max‖x̃‖ √2`, using `Γ(d)‖d‖ ≤ 1 + C₀` and
    /// `‖∇log π‖ ≤ √2`.
    pub fn displacement_bound(&self, env: &Environment, features: &FeatureMap) -> f64 {
        let ns = env.mdp.n_states();
        let na = env.mdp.n_actions();
        let min_mu = (0..ns)
            .flat_map(|s| (0..na).map(move |a| (s, a)))
            .map(|(s, a)| env.behavior.prob(s, a))
            .fold(f64::INFINITY, f64::min);
        let max_x = (0..ns).map(|s| linalg::norm(features.x(s))).fold(0.0, f64::max);
        let max_xt = (0..ns)
            .flat_map(|s| (0..na).map(move |a| (s, a)))
            .map(|(s, a)| linalg::norm(features.x_sa(s, a)))
            .fold(0.0, f64::max);
        let c = 1.0 + self.adaptive.c0;
        c * c * max_x * max_xt * std::f64::consts::SQRT_2 / min_mu
    }

    /// One iteration: execute `A_t`, sample `A_{t+1} ~ μ`, update the
    /// critics, then move the actor with the pre-update critic estimates.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        env: &Environment,
        features: &FeatureMap,
        rng: &mut R,
    ) -> Result<ActorStepInfo> {
        let (s, a) = (self.state, self.action);
        let (reward, next) = env.mdp.sample_transition(s, a, rng);
        let next_action = env.behavior.sample_action(next, rng);
        let rho = self.policy.prob(s, a) / env.behavior.prob(s, a);
        let rho_next = self.policy.prob(next, next_action) / env.behavior.prob(next, next_action);

        let x = features.x(s);
        let x_next = features.x(next);
        let interest = env.mdp.interest();

        let (emphasis, gamma_w) = match &mut self.emphasis {
            EmphasisSource::Gem(gem) => (gem.estimate(x), self.adaptive.value(gem.w.as_slice())),
            EmphasisSource::Followon { trace, rho_prev } => (trace.step(interest[s], *rho_prev), 1.0),
            EmphasisSource::Unit => (1.0, 1.0),
        };
        let (q_estimate, gamma_u) = match &self.critic {
            ValueCritic::Gq2(gq2) => {
                let g = if self.kind == ActorKind::CofPac { self.adaptive.value(gq2.u.as_slice()) } else { 1.0 };
                (gq2.estimate(features.x_sa(s, a)), g)
            }
            ValueCritic::Exact(oracle) => {
                let q = oracle.action_value_function(&self.policy.tabular())?;
                (q[s * env.mdp.n_actions() + a], 1.0)
            }
        };
        let adaptive_factor = if self.kind == ActorKind::CofPac { gamma_w * gamma_u } else { 1.0 };

        match &mut self.emphasis {
            EmphasisSource::Gem(gem) => {
                gem.step(&GemTransition { x, rho, interest_next: interest[next], x_next })?;
            }
            EmphasisSource::Followon { rho_prev, .. } => *rho_prev = rho,
            EmphasisSource::Unit => {}
        }
        if let ValueCritic::Gq2(gq2) = &mut self.critic {
            gq2.step(&Gq2Transition {
                x: features.x_sa(s, a),
                reward,
                rho_next,
                x_next: features.x_sa(next, next_action),
            })?;
        }

        let beta = self.actor_schedule.rate(self.t);
        let scale = beta * adaptive_factor * rho * emphasis * q_estimate;
        let before = self.policy.theta().clone();
        self.policy.ascend_log(s, a, scale);
        if self.policy.theta().iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { learner: self.kind.name(), step: self.t + 1 });
        }
        let displacement = (self.policy.theta() - before).norm();

        self.state = next;
        self.action = next_action;
        self.t += 1;
        Ok(ActorStepInfo { beta, adaptive_factor, displacement, emphasis, q_estimate })
    }
}

/// `‖∇J(θ)‖ − ‖b(θ)‖` at each snapshot, with its running minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSeries {
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub bias_norms: Vec<f64>,
    pub running_min: Vec<f64>,
}

/// Evaluates the stationarity gap `‖∇J(θ)‖ − ‖b(θ)‖` along a trajectory of
/// policies.
pub fn theorem3_monitor(
    oracle: &Oracle,
    snapshots: &[SoftmaxPolicy],
    features: &FeatureMap,
    eta: f64,
) -> Result<MonitorSeries> {
    let mut out = MonitorSeries { values: vec![], grad_norms: vec![], bias_norms: vec![], running_min: vec![] };
    let mut best = f64::INFINITY;
    for pi in snapshots {
        let (g, b) = stationarity_gap(oracle, pi, features, eta)?;
        let v = g - b;
        best = best.min(v);
        out.values.push(v);
        out.grad_norms.push(g);
        out.bias_norms.push(b);
        out.running_min.push(best);
    }
    Ok(out)
}

/// `(‖∇J(θ)‖, ‖b(θ)‖)`.
pub fn stationarity_gap(oracle: &Oracle, pi: &SoftmaxPolicy, features: &FeatureMap, eta: f64) -> Result<(f64, f64)> {
    let report = oracle.bias(pi, features, eta)?;
    Ok((report.grad_j.norm(), report.bias.norm()))
}
