//! Branching genealogy on the address tree, particle positions under the
//! stirring flow, the thinned (collision-suppressed) layer, and the
//! collision-pattern estimators built on the same construction.

pub mod branching;
pub mod collision;
pub mod coupled;
pub mod stirring;
pub mod tree;

pub use branching::{evolve_psi, BranchingRun};
pub use collision::{
    collision_lower_bound_asymptotic, collision_lower_bound_finite_n, collision_window,
    estimate_event_e, estimate_event_i, estimate_event_j, event_e_probability,
    extinction_criterion, extinction_criterion_from_estimate, CollisionEstimate, CriterionVerdict,
};
pub use coupled::{evolve_coupled, CoupledOptions, CoupledRun, EventRecord, InvariantViolation};
pub use stirring::{ParticleId, StirringEngine};
pub use tree::TreeAddress;
