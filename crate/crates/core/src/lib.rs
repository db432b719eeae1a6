//! Event-driven Monte Carlo simulators and estimators for the contact
//! process with stirring on Z^d and the auxiliary processes used to
//! analyze it.
//!
//! The pieces fit together like this:
//!
//! * [`stream`] — reproducible random sources keyed by
//!   `(master seed, label)`; every clock in every simulator is a label.
//! * [`lattice`] — Z^d sites and the fixed direction ordering.
//! * [`dist`] — positive holding-time distributions for renewal
//!   experiments.
//! * [`exclusion`] — the two-particle exclusion difference walk and its
//!   free comparison: excursion means, exact event-driven local times.
//! * [`green`] — the d=3 lattice Green constant by graded quadrature,
//!   cross-checked by an independent walk simulation.
//! * [`renewal`] — two-type renewal pairs sharing one heavy-tailed
//!   sequence: u-state time ratios, window-gap statistics, pathwise
//!   bounds.
//! * [`genealogy`] — the coupled construction: branching layer on the
//!   address tree, particle positions under a lazily materialized
//!   stirring flow, the collision-thinned layer with hard invariant
//!   audits, and the collision-pattern probability estimators.
//! * [`contact`] — direct simulation of the lattice process from its
//!   rates: survival estimation and the finite-horizon critical-value
//!   bracket.
//! * [`suite`] — the acceptance bundle with every tolerance pinned.
//! * [`report`] / [`csv`] — estimate records, replication plumbing, and
//!   the output row schemas.

pub mod contact;
pub mod csv;
pub mod dist;
pub mod exclusion;
pub mod genealogy;
pub mod green;
pub mod lattice;
pub mod renewal;
pub mod report;
pub mod stream;
pub mod suite;
