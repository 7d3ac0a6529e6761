//! Numerical laboratory for the Kuramoto model with singular, regularized and
//! adaptively weighted couplings.
//!
//! The crate is organised in five layers:
//!
//! * [`kernel`] — plasticity functions, interaction kernels, derivatives,
//!   antiderivatives and the gradient-flow potential;
//! * [`state`] — phase configurations, collision clusters and trajectories;
//! * [`filippov`] — set-valued right-hand sides at collisions, H-representation
//!   membership and sticking predicates;
//! * [`dynamics`] — integrators, event-driven collision handling and sweeps;
//! * [`analysis`] — equilibria, linear stability and bound checkers.

pub mod analysis;
pub mod dynamics;
pub mod filippov;
pub mod kernel;
mod quad;
pub mod state;

pub use analysis::{BoundReport, Slack, StabilityReport, Verdict};
pub use dynamics::{AdaptiveState, IntegratorConfig, Method};
pub use filippov::{FrequencyPolytope, RelativeFrequencyMatrix, SkewMatrix};
pub use kernel::{KernelKind, KernelValue, ModelParams, Regime, Side};
pub use state::{
    ClusterPartition, EventKind, EventRecord, NaturalFrequencies, PhaseState, Trajectory,
};

/// Version string embedded in every emitted artifact.
pub const VERSION: &str = concat!("swk ", env!("CARGO_PKG_VERSION"));
