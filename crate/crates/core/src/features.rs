use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Linear features for states (`X`, `|S| x K₁`) and state-action pairs
/// (`X̃`, `|S||A| x K₂`, rows in `s * |A| + a` order).
///
/// Rows are cached as contiguous slices for the learners' inner loops.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    state: DMatrix<f64>,
    state_action: DMatrix<f64>,
    state_rows: Vec<Vec<f64>>,
    state_action_rows: Vec<Vec<f64>>,
    n_actions: usize,
}

impl FeatureMap {
    pub fn new(state: DMatrix<f64>, state_action: DMatrix<f64>) -> Result<Self> {
        if state.nrows() == 0 || state.ncols() == 0 {
            return Err(Error::InvalidModel("empty state feature matrix".into()));
        }
        if !state_action.nrows().is_multiple_of(state.nrows()) || state_action.ncols() == 0 {
            return Err(Error::InvalidModel(format!(
                "state-action feature rows ({}) must be a multiple of the state count ({})",
                state_action.nrows(),
                state.nrows()
            )));
        }
        if state.iter().chain(state_action.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("features must be finite".into()));
        }
        let n_actions = state_action.nrows() / state.nrows();
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(Self { state_rows: rows(&state), state_action_rows: rows(&state_action), state, state_action, n_actions })
    }

    /// State-action features built as `x̃(s, a) = e_a ⊗ x(s)`: action `a`
    /// owns the coordinate block `[a K₁, (a + 1) K₁)`.
    pub fn with_action_blocks(state: DMatrix<f64>, n_actions: usize) -> Result<Self> {
        let (ns, k1) = state.shape();
        let state_action = DMatrix::from_fn(ns * n_actions, k1 * n_actions, |row, col| {
            let (s, a) = (row / n_actions, row % n_actions);
            if col / k1 == a {
                state[(s, col % k1)]
            } else {
                0.0
            }
        });
        Self::new(state, state_action)
    }

    pub fn state_matrix(&self) -> &DMatrix<f64> {
        &self.state
    }

    pub fn state_action_matrix(&self) -> &DMatrix<f64> {
        &self.state_action
    }

    /// `K₁`
    pub fn state_dim(&self) -> usize {
        self.state.ncols()
    }

    /// `K₂`
    pub fn state_action_dim(&self) -> usize {
        self.state_action.ncols()
    }

    #[inline]
    pub fn x(&self, s: usize) -> &[f64] {
        &self.state_rows[s]
    }

    #[inline]
    pub fn x_sa(&self, s: usize, a: usize) -> &[f64] {
        &self.state_action_rows[s * self.n_actions + a]
    }
}
