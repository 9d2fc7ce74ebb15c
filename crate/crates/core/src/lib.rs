//! Off-policy emphasis learning and two-timescale actor-critic on finite
//! MDPs.
//!
//! * [`mdp`], [`policy`], [`features`]: the finite model and its derived
//!   matrices.
//! * [`environments`]: Baird's counterexample and its feature sets.
//! * [`oracle`]: exact emphasis, values, fixed points, policy gradient and
//!   bias by dense linear algebra.
//! * [`learners`]: GEM, GQ2, ETD(0), GEM-ETD(0) and the semi-gradient
//!   emphasis update.
//! * [`actor_critic`]: COF-PAC, ACE and Off-PAC.
//! * [`harness`]: seeded experiment runners, aggregation and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actor_critic;
pub mod environments;
pub mod error;
pub mod features;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod mdp;
pub mod oracle;
pub mod policy;

pub use error::{Error, Result};
