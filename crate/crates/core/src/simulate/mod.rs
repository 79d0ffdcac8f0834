//! Simulating a k-pass algorithm by a one-pass one, and the mostly-equal
//! communication protocol, on instances small enough to enumerate.
//!
//! The one-pass imitation first samples the end states of the first `k - 1`
//! passes, then walks the stream once. At step `j` it looks up
//! `β_j = Pr[X_j = 1 | M(≤k, j-1), M_<k] - 1/2`, nudges the true bit towards
//! that conditional (a `-1` becomes `1` with probability `2β_j` when
//! `β_j > 0`, a `1` becomes `-1` with probability `-2β_j` otherwise), and
//! samples the next state column from the exact posterior.

mod im;
mod oracle;
mod protocol;

pub use im::{
    expected_modifications, im_joint_table, im_law, im_run, im_simulate, native_law, o_simulate, o_simulate_instances, simulated_law,
    SimOutcome, SimStep, SimTranscript,
};
pub use oracle::{build_conditional_oracle, ConditionalOracle, StepKey};
pub use protocol::{mostlyeq_protocol, Message, ProtocolError, ProtocolRun};
