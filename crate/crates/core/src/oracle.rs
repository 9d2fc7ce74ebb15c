//! Closed-form ground truth for finite MDPs by dense linear algebra.
//!
//! [`Oracle`] fixes an MDP and a behavior policy `μ` (and so `d_μ`, `D`,
//! `D̃`); every method then takes a target policy and returns the exact
//! quantity the learners are meant to estimate.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg;
use crate::mdp::{
    classify_chain, reward_vectors, state_action_transition_matrix, stationary_distribution, stationary_of,
    transition_matrix, ChainClass, FiniteMdp, TabularPolicy,
};
use crate::policy::SoftmaxPolicy;

#[derive(Debug, Clone)]
pub struct Oracle {
    mdp: FiniteMdp,
    mu: TabularPolicy,
    d_mu: DVector<f64>,
    d_sa: DVector<f64>,
}

/// The ridge-regularized saddle system shared by GEM and GQ2:
/// `Ḡ = [[C, A], [−A⊤, ηI]]`, `h̄ = [b; 0]`, with solution `[κ*; w*]`.
#[derive(Debug, Clone)]
pub struct GtdSystem {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Top block of `h̄`.
    pub b: DVector<f64>,
    pub eta: f64,
    pub g_bar: DMatrix<f64>,
    pub h_bar: DVector<f64>,
    /// `C` failed the rank test; `C⁺` stands in for `C⁻¹`.
    pub c_singular: bool,
    pub kappa_star: DVector<f64>,
    pub w_star: DVector<f64>,
}

impl GtdSystem {
    /// `w*(η) = (A⊤C⁻¹A + ηI)⁻¹ A⊤C⁻¹ b` for `η > 0`, or `A⁻¹b` for `η = 0`.
    pub fn solve(a: DMatrix<f64>, c: DMatrix<f64>, b: DVector<f64>, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!("ridge weight must be finite and >= 0, got {eta}")));
        }
        let k = a.ncols();
        let c_singular = linalg::is_singular(&c);
        let c_inv =
            if c_singular { linalg::pinv(&c) } else { linalg::solve_matrix(&c, &DMatrix::identity(k, k), "C")? };
        let (kappa_star, w_star) = if eta == 0.0 {
            let w = linalg::solve(&a, &b, "A(θ) with η = 0")?;
            (DVector::zeros(k), w)
        } else {
            let at_cinv = a.transpose() * &c_inv;
            let normal = &at_cinv * &a + DMatrix::identity(k, k) * eta;
            let w = linalg::solve(&normal, &(&at_cinv * &b), "A⊤C⁻¹A + ηI")?;
            let kappa = &c_inv * (&b - &a * &w);
            (kappa, w)
        };
        let mut g_bar = DMatrix::zeros(2 * k, 2 * k);
        g_bar.view_mut((0, 0), (k, k)).copy_from(&c);
        g_bar.view_mut((0, k), (k, k)).copy_from(&a);
        g_bar.view_mut((k, 0), (k, k)).copy_from(&(-a.transpose()));
        g_bar.view_mut((k, k), (k, k)).fill_with_identity();
        g_bar.view_mut((k, k), (k, k)).scale_mut(eta);
        let mut h_bar = DVector::zeros(2 * k);
        h_bar.rows_mut(0, k).copy_from(&b);
        Ok(Self { a, c, b, eta, g_bar, h_bar, c_singular, kappa_star, w_star })
    }

    /// `‖Ḡ[κ*; w*] − h̄‖`.
    pub fn residual(&self) -> f64 {
        let mut d = DVector::zeros(self.h_bar.len());
        let k = self.kappa_star.len();
        d.rows_mut(0, k).copy_from(&self.kappa_star);
        d.rows_mut(k, k).copy_from(&self.w_star);
        (&self.g_bar * d - &self.h_bar).norm()
    }
}

/// Components of the bias bound: projection residuals, distribution-shift
/// condition numbers and the smallest eigenvalues of `F_θ`, `F̃_θ`.
#[derive(Debug, Clone, Serialize)]
pub struct BiasDiagnostics {
    /// `‖m_π − Π m_π‖_D`
    pub residual_m: f64,
    /// `‖q_π − Π̃ q_π‖_D̃`
    pub residual_q: f64,
    pub f_min_eigenvalue: f64,
    pub f_tilde_min_eigenvalue: f64,
    /// `‖b(θ)‖₂`
    pub bias_norm: f64,
    /// Present only when the target chain is irreducible.
    pub target: Option<TargetDiagnostics>,
    pub target_chain: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetDiagnostics {
    pub d_theta: Vec<f64>,
    /// `κ(D^{-1/2} D_θ^{1/2})`
    pub cond_state: f64,
    /// `κ(D̃^{-1/2} D̃_θ^{1/2})`
    pub cond_state_action: f64,
}

#[derive(Debug, Clone)]
pub struct BiasReport {
    /// Limiting actor update `ĝ(θ)` under the critics' fixed points.
    pub g_hat: DVector<f64>,
    pub grad_j: DVector<f64>,
    /// `b(θ) = ∇J(θ) − ĝ(θ)`
    pub bias: DVector<f64>,
    pub diagnostics: BiasDiagnostics,
}

impl Oracle {
    pub fn new(mdp: &FiniteMdp, mu: &TabularPolicy) -> Result<Self> {
        mu.check_shape(mdp)?;
        mu.check_behavior()?;
        let d_mu = stationary_distribution(mdp, mu)?;
        let na = mdp.n_actions();
        let d_sa = DVector::from_fn(mdp.n_state_actions(), |idx, _| d_mu[idx / na] * mu.prob(idx / na, idx % na));
        Ok(Self { mdp: mdp.clone(), mu: mu.clone(), d_mu, d_sa })
    }

    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }

    pub fn behavior(&self) -> &TabularPolicy {
        &self.mu
    }

    pub fn d_mu(&self) -> &DVector<f64> {
        &self.d_mu
    }

    /// `d̃_μ(s, a) = d_μ(s) μ(a|s)`
    pub fn d_sa(&self) -> &DVector<f64> {
        &self.d_sa
    }

    fn gamma(&self) -> f64 {
        self.mdp.discount()
    }

    fn check(&self, pi: &TabularPolicy) -> Result<()> {
        pi.check_shape(&self.mdp)
    }

    /// `v_π = (I − γP_π)⁻¹ r_π`.
    pub fn value_function(&self, pi: &TabularPolicy) -> Result<DVector<f64>> {
        self.check(pi)?;
        let n = self.mdp.n_states();
        let p = transition_matrix(&self.mdp, pi);
        let (r_pi, _) = reward_vectors(&self.mdp, pi);
        linalg::solve(&(DMatrix::identity(n, n) - p * self.gamma()), &r_pi, "I − γP_π")
    }

    /// `q_π = (I − γP̃_π)⁻¹ r̃`.
    pub fn action_value_function(&self, pi: &TabularPolicy) -> Result<DVector<f64>> {
        self.check(pi)?;
        let n = self.mdp.n_state_actions();
        let p = state_action_transition_matrix(&self.mdp, pi);
        let (_, r_sa) = reward_vectors(&self.mdp, pi);
        linalg::solve(&(DMatrix::identity(n, n) - p * self.gamma()), &r_sa, "I − γP̃_π")
    }

    /// Emphasis `m_π = D⁻¹(I − γP_π⊤)⁻¹ D i`.
    pub fn emphasis(&self, pi: &TabularPolicy) -> Result<DVector<f64>> {
        self.check(pi)?;
        let n = self.mdp.n_states();
        let p = transition_matrix(&self.mdp, pi);
        let di = self.d_mu.component_mul(self.mdp.interest());
        let y = linalg::solve(&(DMatrix::identity(n, n) - p.transpose() * self.gamma()), &di, "I − γP_π⊤")?;
        Ok(y.component_div(&self.d_mu))
    }

    /// `γ D⁻¹ P_π⊤ D`, the linear part of the emphasis operator.
    pub fn reversed_operator(&self, pi: &TabularPolicy) -> Result<DMatrix<f64>> {
        self.check(pi)?;
        let p = transition_matrix(&self.mdp, pi);
        let n = self.mdp.n_states();
        Ok(DMatrix::from_fn(n, n, |s, t| self.gamma() * p[(t, s)] * self.d_mu[t] / self.d_mu[s]))
    }

    /// Emphasis operator `T̂y = i + γ D⁻¹ P_π⊤ D y`.
    pub fn hat_t(&self, pi: &TabularPolicy, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.mdp.n_states() {
            return Err(Error::Config(format!("expected a vector of length {}", self.mdp.n_states())));
        }
        Ok(self.mdp.interest() + self.reversed_operator(pi)? * y)
    }

    /// `Π = X (X⊤DX)⁺ X⊤D`.
    pub fn state_projection(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        weighted_projection(x, &self.d_mu)
    }

    /// `Π̃ = X̃ (X̃⊤D̃X̃)⁺ X̃⊤D̃`.
    pub fn state_action_projection(&self, x_sa: &DMatrix<f64>) -> DMatrix<f64> {
        weighted_projection(x_sa, &self.d_sa)
    }

    /// GEM's expected system: `A(θ) = X⊤(I − γP_θ⊤)DX`, `C = X⊤DX`,
    /// `b = X⊤Di`.
    pub fn gem_system(&self, pi: &TabularPolicy, features: &FeatureMap, eta: f64) -> Result<GtdSystem> {
        self.check(pi)?;
        let x = features.state_matrix();
        self.check_rows(x.nrows(), self.mdp.n_states())?;
        let n = self.mdp.n_states();
        let p = transition_matrix(&self.mdp, pi);
        let d = DMatrix::from_diagonal(&self.d_mu);
        let a = x.transpose() * (DMatrix::identity(n, n) - p.transpose() * self.gamma()) * &d * x;
        let c = x.transpose() * &d * x;
        let b = x.transpose() * self.d_mu.component_mul(self.mdp.interest());
        GtdSystem::solve(a, c, b, eta)
    }

    /// GQ2's expected system: `Ã(θ) = X̃⊤D̃(I − γP̃_θ)X̃`, `C̃ = X̃⊤D̃X̃`,
    /// `b = X̃⊤D̃r̃`.
    pub fn gq2_system(&self, pi: &TabularPolicy, features: &FeatureMap, eta: f64) -> Result<GtdSystem> {
        self.check(pi)?;
        let x = features.state_action_matrix();
        self.check_rows(x.nrows(), self.mdp.n_state_actions())?;
        let n = self.mdp.n_state_actions();
        let p = state_action_transition_matrix(&self.mdp, pi);
        let (_, r_sa) = reward_vectors(&self.mdp, pi);
        let d = DMatrix::from_diagonal(&self.d_sa);
        let a = x.transpose() * &d * (DMatrix::identity(n, n) - p * self.gamma()) * x;
        let c = x.transpose() * &d * x;
        let b = x.transpose() * self.d_sa.component_mul(&r_sa);
        GtdSystem::solve(a, c, b, eta)
    }

    fn check_rows(&self, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::Config(format!("feature matrix has {got} rows, expected {want}")));
        }
        Ok(())
    }

    /// Excursion objective `J = Σ_s d_μ(s) i(s) v_π(s)`.
    pub fn objective(&self, pi: &TabularPolicy) -> Result<f64> {
        let v = self.value_function(pi)?;
        Ok(self.d_mu.component_mul(self.mdp.interest()).dot(&v))
    }

    /// `(J(θ), ∇J(θ))` with `∇J = E_{d_μ, μ}[m_π(s) ψ_θ(s, a) q_π(s, a)]`.
    pub fn policy_gradient(&self, pi: &SoftmaxPolicy) -> Result<(f64, DVector<f64>)> {
        let tab = pi.tabular();
        let j = self.objective(&tab)?;
        let m = self.emphasis(&tab)?;
        let q = self.action_value_function(&tab)?;
        let na = self.mdp.n_actions();
        let grad = self.expected_actor_update(pi, |s| m[s], |s, a| q[s * na + a])?;
        Ok((j, grad))
    }

    /// `Σ_s d_μ(s) m̂(s) Σ_a μ(a|s) ψ_θ(s, a) q̂(s, a)` for arbitrary emphasis
    /// and action-value estimates.
    pub fn expected_actor_update(
        &self,
        pi: &SoftmaxPolicy,
        emphasis: impl Fn(usize) -> f64,
        q: impl Fn(usize, usize) -> f64,
    ) -> Result<DVector<f64>> {
        let mut g = DVector::zeros(pi.dim());
        for s in 0..self.mdp.n_states() {
            let weight = self.d_mu[s] * emphasis(s);
            for a in 0..self.mdp.n_actions() {
                let psi = pi.score(&self.mu, s, a)?;
                g += psi * (weight * self.mu.prob(s, a) * q(s, a));
            }
        }
        Ok(g)
    }

    /// Limiting COF-PAC update `ĝ(θ)`, the bias `b(θ) = ∇J(θ) − ĝ(θ)` and the
    /// components of its bound.
    pub fn bias(&self, pi: &SoftmaxPolicy, features: &FeatureMap, eta: f64) -> Result<BiasReport> {
        let tab = pi.tabular();
        let gem = self.gem_system(&tab, features, eta)?;
        let gq2 = self.gq2_system(&tab, features, eta)?;
        let m_hat = features.state_matrix() * &gem.w_star;
        let q_hat = features.state_action_matrix() * &gq2.w_star;
        let na = self.mdp.n_actions();
        let g_hat = self.expected_actor_update(pi, |s| m_hat[s], |s, a| q_hat[s * na + a])?;
        let (_, grad_j) = self.policy_gradient(pi)?;
        let bias = &grad_j - &g_hat;
        let diagnostics = self.bias_diagnostics(&tab, features, bias.norm())?;
        Ok(BiasReport { g_hat, grad_j, bias, diagnostics })
    }

    fn bias_diagnostics(&self, pi: &TabularPolicy, features: &FeatureMap, bias_norm: f64) -> Result<BiasDiagnostics> {
        let x = features.state_matrix();
        let x_sa = features.state_action_matrix();
        let m = self.emphasis(pi)?;
        let q = self.action_value_function(pi)?;
        let residual_m = linalg::weighted_norm(&(&m - self.state_projection(x) * &m), &self.d_mu);
        let residual_q = linalg::weighted_norm(&(&q - self.state_action_projection(x_sa) * &q), &self.d_sa);

        let p = transition_matrix(&self.mdp, pi);
        let p_sa = state_action_transition_matrix(&self.mdp, pi);
        let d = DMatrix::from_diagonal(&self.d_mu);
        let d_sa = DMatrix::from_diagonal(&self.d_sa);
        let c = x.transpose() * &d * x;
        let c_sa = x_sa.transpose() * &d_sa * x_sa;
        let f = block_2x2(&c, &(x.transpose() * p.transpose() * &d * x), &(x.transpose() * &d * &p * x), &c);
        let f_sa = block_2x2(
            &c_sa,
            &(x_sa.transpose() * &d_sa * &p_sa * x_sa),
            &(x_sa.transpose() * p_sa.transpose() * &d_sa * x_sa),
            &c_sa,
        );

        let class = classify_chain(&p);
        let target = match class {
            ChainClass::Reducible => None,
            _ => {
                let d_theta = stationary_of(&p)?;
                let na = self.mdp.n_actions();
                let ratios = |num: &DVector<f64>, den: &DVector<f64>| {
                    let r: Vec<f64> = num.iter().zip(den.iter()).map(|(a, b)| (a / b).sqrt()).collect();
                    let max = r.iter().copied().fold(0.0, f64::max);
                    let min = r.iter().copied().fold(f64::INFINITY, f64::min);
                    if min > 0.0 {
                        max / min
                    } else {
                        f64::INFINITY
                    }
                };
                let d_theta_sa = DVector::from_fn(self.mdp.n_state_actions(), |idx, _| {
                    d_theta[idx / na] * pi.prob(idx / na, idx % na)
                });
                Some(TargetDiagnostics {
                    cond_state: ratios(&d_theta, &self.d_mu),
                    cond_state_action: ratios(&d_theta_sa, &self.d_sa),
                    d_theta: d_theta.iter().copied().collect(),
                })
            }
        };
        Ok(BiasDiagnostics {
            residual_m,
            residual_q,
            f_min_eigenvalue: linalg::min_symmetric_eigenvalue(&f),
            f_tilde_min_eigenvalue: linalg::min_symmetric_eigenvalue(&f_sa),
            bias_norm,
            target,
            target_chain: format!("{class:?}"),
        })
    }

    /// `(‖P_π‖_D, ‖D⁻¹P_π⊤D‖_D)`, each as the largest singular value of the
    /// similarity transform by `D^{1/2}`.
    pub fn norm_lemma(&self, pi: &TabularPolicy) -> Result<(f64, f64)> {
        self.check(pi)?;
        let p = transition_matrix(&self.mdp, pi);
        let n = self.mdp.n_states();
        let sq = self.d_mu.map(f64::sqrt);
        let forward = DMatrix::from_fn(n, n, |s, t| sq[s] * p[(s, t)] / sq[t]);
        let reversed_op = DMatrix::from_fn(n, n, |s, t| p[(t, s)] * self.d_mu[t] / self.d_mu[s]);
        let reversed = DMatrix::from_fn(n, n, |s, t| sq[s] * reversed_op[(s, t)] / sq[t]);
        Ok((linalg::spectral_norm(&forward), linalg::spectral_norm(&reversed)))
    }

    /// Real parts of the eigenvalues of `A(θ)`, the matrix driving the
    /// expected semi-gradient emphasis update `w ← w + α(X⊤Di − A(θ)w)`.
    /// A negative real part means the expected update is unstable.
    pub fn semi_gradient_eigenvalues(&self, pi: &TabularPolicy, features: &FeatureMap) -> Result<Vec<f64>> {
        let sys = self.gem_system(pi, features, 1.0)?;
        Ok(linalg::eigenvalue_real_parts(&sys.a))
    }

    /// Every closed-form quantity for one target policy.
    pub fn report(&self, pi: &SoftmaxPolicy, features: &FeatureMap, eta: f64) -> Result<OracleReport> {
        let tab = pi.tabular();
        let (j, grad_j) = self.policy_gradient(pi)?;
        let gem = self.gem_system(&tab, features, eta)?;
        let gq2 = self.gq2_system(&tab, features, eta)?;
        let bias = self.bias(pi, features, eta)?;
        let (r_pi, r_sa) = reward_vectors(&self.mdp, &tab);
        Ok(OracleReport {
            d_mu: self.d_mu.clone(),
            d_sa: self.d_sa.clone(),
            p_pi: transition_matrix(&self.mdp, &tab),
            p_sa: state_action_transition_matrix(&self.mdp, &tab),
            r_pi,
            r_sa,
            v: self.value_function(&tab)?,
            q: self.action_value_function(&tab)?,
            m: self.emphasis(&tab)?,
            projection: self.state_projection(features.state_matrix()),
            projection_sa: self.state_action_projection(features.state_action_matrix()),
            gem,
            gq2,
            j,
            grad_j,
            bias,
        })
    }
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub d_mu: DVector<f64>,
    pub d_sa: DVector<f64>,
    pub p_pi: DMatrix<f64>,
    pub p_sa: DMatrix<f64>,
    pub r_pi: DVector<f64>,
    pub r_sa: DVector<f64>,
    pub v: DVector<f64>,
    pub q: DVector<f64>,
    pub m: DVector<f64>,
    pub projection: DMatrix<f64>,
    pub projection_sa: DMatrix<f64>,
    pub gem: GtdSystem,
    pub gq2: GtdSystem,
    pub j: f64,
    pub grad_j: DVector<f64>,
    pub bias: BiasReport,
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn mat_json(m: &DMatrix<f64>) -> Value {
    json!(m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

impl OracleReport {
    /// Flat `(key, value)` records, matrices as arrays of rows.
    pub fn records(&self) -> Vec<(&'static str, Value)> {
        vec![
            ("d_mu", vec_json(&self.d_mu)),
            ("d_sa", vec_json(&self.d_sa)),
            ("P_pi", mat_json(&self.p_pi)),
            ("P_sa", mat_json(&self.p_sa)),
            ("r_pi", vec_json(&self.r_pi)),
            ("r_sa", vec_json(&self.r_sa)),
            ("v_pi", vec_json(&self.v)),
            ("q_pi", vec_json(&self.q)),
            ("m_pi", vec_json(&self.m)),
            ("Pi", mat_json(&self.projection)),
            ("Pi_sa", mat_json(&self.projection_sa)),
            ("A", mat_json(&self.gem.a)),
            ("C", mat_json(&self.gem.c)),
            ("C_singular", json!(self.gem.c_singular)),
            ("G_bar", mat_json(&self.gem.g_bar)),
            ("h_bar", vec_json(&self.gem.h_bar)),
            ("w_star", vec_json(&self.gem.w_star)),
            ("A_sa", mat_json(&self.gq2.a)),
            ("C_sa", mat_json(&self.gq2.c)),
            ("C_sa_singular", json!(self.gq2.c_singular)),
            ("G_sa", mat_json(&self.gq2.g_bar)),
            ("h_sa", vec_json(&self.gq2.h_bar)),
            ("u_star", vec_json(&self.gq2.w_star)),
            ("J", json!(self.j)),
            ("grad_J", vec_json(&self.grad_j)),
            ("g_hat", vec_json(&self.bias.g_hat)),
            ("bias", vec_json(&self.bias.bias)),
            ("bias_diagnostics", serde_json::to_value(&self.bias.diagnostics).unwrap_or(Value::Null)),
        ]
    }
}

fn weighted_projection(x: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    let d = DMatrix::from_diagonal(weights);
    let gram = x.transpose() * &d * x;
    x * linalg::pinv(&gram) * x.transpose() * d
}

fn block_2x2(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, k) = a.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * k);
    out.view_mut((0, 0), (r, k)).copy_from(a);
    out.view_mut((0, k), (r, k)).copy_from(b);
    out.view_mut((r, 0), (r, k)).copy_from(c);
    out.view_mut((r, k), (r, k)).copy_from(d);
    out
}

/// `‖v − v_π‖_D`.
pub fn rmsve(v: &DVector<f64>, v_pi: &DVector<f64>, d_mu: &DVector<f64>) -> Result<f64> {
    if v.len() != v_pi.len() || v.len() != d_mu.len() {
        return Err(Error::Config("rmsve inputs must have equal lengths".into()));
    }
    Ok(linalg::weighted_norm(&(v - v_pi), d_mu))
}
