//! Simulation and analysis toolkit for reactive systems modeled as jump
//! Markov processes: reaction-network parsing, truncated master-equation
//! solves, exact stochastic simulation with channel-labeled trajectories,
//! and path-entropy statistics (fluctuation-theorem fits, symmetry tests).

pub mod cme;
pub mod network;
pub mod pathentropy;
pub mod ssa;

pub(crate) mod par;
pub(crate) mod util;

/// True when the crate was built with the `parallel` feature.
pub fn parallelism_enabled() -> bool {
    cfg!(feature = "parallel")
}
