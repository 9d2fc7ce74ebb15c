//! Online linear stochastic-approximation learners.
//!
//! Every learner is a plain value; `step` mutates it in place from one
//! sampled transition and fails with [`Error::Divergence`] as soon as an
//! iterate leaves the finite range.

mod etd;
mod gem;
mod gq2;
mod schedule;
mod semi_gradient;

pub use etd::{EtdState, FollowonTrace, GemEtd};
pub use gem::{GemState, GemTransition};
pub use gq2::{Gq2State, Gq2Transition};
pub use schedule::StepSchedule;
pub use semi_gradient::SemiGradientEmphasis;

use crate::error::{Error, Result};

/// Iterates whose magnitude exceeds this are treated as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[inline]
pub(crate) fn check_finite(values: &[f64], learner: &'static str, step: u64) -> Result<()> {
    if values.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_THRESHOLD) {
        Ok(())
    } else {
        Err(Error::Divergence { learner, step })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
