//! Multi-pass streaming algorithms for the needle and coin problems.
//!
//! * [`streams`]: input generators with reproducible, position-keyed seeding.
//! * [`kpass`]: k-pass algorithms as explicit state machines with transcripts.
//! * [`apr`]: a three-counter approximate-sum algorithm with low state entropy.
//! * [`needle`]: one-pass needle detectors and a collision baseline.
//! * [`simulate`]: k-pass to one-pass simulation and the mostly-equal protocol.
//! * [`infocost`]: exact information-cost measures on enumerable instances.
//! * [`harness`]: experiment configuration, trial runner, reports and plots.

pub mod apr;
pub mod enumerate;
pub mod harness;
pub mod infocost;
pub mod kpass;
pub mod needle;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod stats;
pub mod streams;

pub use scalar::{Exact, Prob, Real};
