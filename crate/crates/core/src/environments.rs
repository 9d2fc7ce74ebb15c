//! Baird's counterexample (seven states, `dashed`/`solid` actions) and its
//! four feature sets.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{FiniteMdp, TabularPolicy};
use crate::policy::SoftmaxPolicy;

pub const BAIRD_STATES: usize = 7;
pub const DASHED: usize = 0;
pub const SOLID: usize = 1;
/// Index of the state every `solid` action leads to ("state 7").
pub const BAIRD_HUB: usize = 6;
pub const DEFAULT_GAMMA: f64 = 0.99;

/// An MDP bundled with its behavior policy and initial-state distribution.
#[derive(Debug, Clone)]
pub struct Environment {
    pub mdp: FiniteMdp,
    pub behavior: TabularPolicy,
    pub initial: Vec<f64>,
}

impl Environment {
    pub fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (s, &p) in self.initial.iter().enumerate() {
            acc += p;
            if u < acc {
                return s;
            }
        }
        self.initial.len() - 1
    }
}

/// Baird's counterexample: `dashed` moves uniformly to states 1–6 with reward
/// +1, `solid` moves to state 7 with reward 0. The behavior policy picks
/// `dashed` with probability 6/7, interest is 1 everywhere and the initial
/// state is uniform.
pub fn build_baird(gamma: f64) -> Result<Environment> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("discount {gamma} must lie in [0, 1)")));
    }
    let n = BAIRD_STATES;
    let mut transition = vec![0.0; n * 2 * n];
    let mut reward = vec![0.0; n * 2 * n];
    for s in 0..n {
        for next in 0..BAIRD_HUB {
            transition[(s * 2 + DASHED) * n + next] = 1.0 / 6.0;
            reward[(s * 2 + DASHED) * n + next] = 1.0;
        }
        transition[(s * 2 + SOLID) * n + BAIRD_HUB] = 1.0;
    }
    let mdp = FiniteMdp::new(n, 2, transition, reward, gamma, DVector::from_element(n, 1.0))?;
    let behavior = TabularPolicy::state_independent(n, &[6.0 / 7.0, 1.0 / 7.0])?;
    Ok(Environment { mdp, behavior, initial: vec![1.0 / n as f64; n] })
}

/// Target policy taking `solid` with probability `p_solid` in every state.
pub fn baird_target(p_solid: f64) -> Result<TabularPolicy> {
    if !(0.0..=1.0).contains(&p_solid) {
        return Err(Error::Config(format!("solid probability {p_solid} must lie in [0, 1]")));
    }
    TabularPolicy::state_independent(BAIRD_STATES, &[1.0 - p_solid, p_solid])
}

/// Softmax policy with `P(solid) = p_solid` in every state.
pub fn baird_softmax(p_solid: f64) -> Result<SoftmaxPolicy> {
    if !(p_solid > 0.0 && p_solid < 1.0) {
        return Err(Error::Config(format!("softmax needs 0 < p_solid < 1, got {p_solid}")));
    }
    let gap = (p_solid / (1.0 - p_solid)).ln();
    let theta = DVector::from_fn(BAIRD_STATES * 2, |i, _| if i % 2 == SOLID { gap } else { 0.0 });
    SoftmaxPolicy::new(BAIRD_STATES, 2, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureVariant {
    /// Sutton & Barto's 8-dimensional features.
    Original,
    OneHot,
    /// Complement of one-hot: `x(s_k) = 1 − e_k`.
    ZeroHot,
    /// Original features with state 7 aliased to state 6 and the two
    /// resulting constant coordinates dropped.
    Aliased,
}

impl FeatureVariant {
    pub const ALL: [FeatureVariant; 4] =
        [FeatureVariant::Original, FeatureVariant::OneHot, FeatureVariant::ZeroHot, FeatureVariant::Aliased];

    pub fn name(self) -> &'static str {
        match self {
            FeatureVariant::Original => "original",
            FeatureVariant::OneHot => "onehot",
            FeatureVariant::ZeroHot => "zerohot",
            FeatureVariant::Aliased => "aliased",
        }
    }

    /// `X` for Baird's seven states.
    pub fn state_features(self) -> DMatrix<f64> {
        let n = BAIRD_STATES;
        match self {
            FeatureVariant::Original => original_features(),
            FeatureVariant::OneHot => DMatrix::identity(n, n),
            FeatureVariant::ZeroHot => DMatrix::from_fn(n, n, |r, c| if r == c { 0.0 } else { 1.0 }),
            FeatureVariant::Aliased => {
                let mut x = original_features();
                let row6 = x.row(BAIRD_HUB - 1).into_owned();
                x.row_mut(BAIRD_HUB).copy_from(&row6);
                x.columns(0, 6).into_owned()
            }
        }
    }
}

impl fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "original" => Ok(FeatureVariant::Original),
            "onehot" | "one-hot" => Ok(FeatureVariant::OneHot),
            "zerohot" | "zero-hot" => Ok(FeatureVariant::ZeroHot),
            "aliased" => Ok(FeatureVariant::Aliased),
            other => Err(Error::Config(format!("unknown feature variant '{other}'"))),
        }
    }
}

fn original_features() -> DMatrix<f64> {
    let mut x = DMatrix::zeros(BAIRD_STATES, 8);
    for s in 0..BAIRD_HUB {
        x[(s, s)] = 2.0;
        x[(s, 7)] = 1.0;
    }
    x[(BAIRD_HUB, 6)] = 1.0;
    x[(BAIRD_HUB, 7)] = 2.0;
    x
}

/// State features of `variant` plus action-block state-action features.
pub fn state_action_features(variant: FeatureVariant) -> FeatureMap {
    FeatureMap::with_action_blocks(variant.state_features(), 2).expect("Baird features are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{reward_vectors, transition_matrix};

    #[test]
    fn dimensions_per_variant() {
        let dims: Vec<usize> = FeatureVariant::ALL.iter().map(|v| v.state_features().ncols()).collect();
        assert_eq!(dims, vec![8, 7, 7, 6]);
    }

    #[test]
    fn original_features_match_the_published_table() {
        let x = FeatureVariant::Original.state_features();
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![2., 0., 0., 0., 0., 0., 0., 1.]);
        assert_eq!(x.row(6).iter().copied().collect::<Vec<_>>(), vec![0., 0., 0., 0., 0., 0., 1., 2.]);
    }

    #[test]
    fn zero_hot_first_state() {
        let x = FeatureVariant::ZeroHot.state_features();
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![0., 1., 1., 1., 1., 1., 1.]);
    }

    #[test]
    fn aliased_hub_copies_state_six() {
        let x = FeatureVariant::Aliased.state_features();
        assert_eq!(x.row(5), x.row(6));
        assert_eq!(x.row(6).iter().copied().collect::<Vec<_>>(), vec![0., 0., 0., 0., 0., 2.]);
    }

    #[test]
    fn state_action_blocks() {
        let f = state_action_features(FeatureVariant::OneHot);
        let xs = f.x_sa(2, SOLID);
        assert_eq!(xs.iter().position(|&v| v == 1.0), Some(7 + 2));
        assert_eq!(xs.iter().filter(|&&v| v != 0.0).count(), 1);

        for v in FeatureVariant::ALL {
            let f = state_action_features(v);
            for s in 0..BAIRD_STATES {
                let d: f64 = f.x_sa(s, DASHED).iter().zip(f.x_sa(s, SOLID)).map(|(a, b)| a * b).sum();
                assert_eq!(d, 0.0);
            }
        }

        let f = state_action_features(FeatureVariant::Original);
        assert_eq!(&f.x_sa(0, DASHED)[..8], &[2., 0., 0., 0., 0., 0., 0., 1.]);
        assert!(f.x_sa(0, DASHED)[8..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn baird_dynamics() {
        let env = build_baird(0.99).unwrap();
        let all_solid = transition_matrix(&env.mdp, &baird_target(1.0).unwrap());
        let all_dashed = transition_matrix(&env.mdp, &baird_target(0.0).unwrap());
        let mixed = transition_matrix(&env.mdp, &baird_target(0.1).unwrap());
        for s in 0..7 {
            for next in 0..7 {
                assert_eq!(all_solid[(s, next)], if next == 6 { 1.0 } else { 0.0 });
                assert!((all_dashed[(s, next)] - if next == 6 { 0.0 } else { 1.0 / 6.0 }).abs() < 1e-15);
                assert!((mixed[(s, next)] - if next == 6 { 0.1 } else { 0.15 }).abs() < 1e-15);
            }
        }
        let (r_pi, r_sa) = reward_vectors(&env.mdp, &baird_target(0.05).unwrap());
        assert!(r_pi.iter().all(|r| (r - 0.95).abs() < 1e-15));
        for s in 0..7 {
            assert!((r_sa[s * 2 + DASHED] - 1.0).abs() < 1e-15);
            assert_eq!(r_sa[s * 2 + SOLID], 0.0);
        }
        assert!(build_baird(1.0).is_err());
    }

    #[test]
    fn softmax_target_matches_tabular_target() {
        let pi = baird_softmax(0.1).unwrap().tabular();
        let expected = baird_target(0.1).unwrap();
        assert!((pi.probs() - expected.probs()).norm() < 1e-15);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in FeatureVariant::ALL {
            assert_eq!(v.name().parse::<FeatureVariant>().unwrap(), v);
        }
        assert!("bogus".parse::<FeatureVariant>().is_err());
    }
}
