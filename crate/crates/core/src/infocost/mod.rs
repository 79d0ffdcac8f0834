//! Exact information-cost measures of k-pass algorithms on small instances.
//!
//! A [`JointTable`] holds the exact law of (input, random tape, transcript)
//! obtained by enumerating every input under a product distribution and every
//! random tape. Mutual informations are computed from its marginals in bits.

mod joint;
mod mic;

pub use joint::{build_joint, Atom, InfoError, JointTable, ProductDist, Var};
pub use mic::{independence_terms, mic, mic_cond, one_pass_ic, variance_reduction, MicReport, MicTerm};

/// Joint tables over `f64` masses.
pub type JointTableF64 = JointTable<f64>;
/// Joint tables over `f32` masses.
pub type JointTableF32 = JointTable<f32>;
/// Joint tables over exact rationals.
pub type ExactJointTable = JointTable<crate::Exact>;
