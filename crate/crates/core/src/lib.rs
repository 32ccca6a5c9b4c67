//! Simulation and verification toolkit for a multilevel interlacing
//! particle system with push-block interactions driven by Jack-polynomial
//! weights, its limiting zero range process with source and sink, the
//! equivalent discrete beta-ensemble, and the closed-form equilibrium
//! asymptotics of the particle cloud's right edge.
//!
//! Module map:
//! - [`partitions`]: Young diagrams, interlacing, Gelfand-Tsetlin patterns
//!   and coordinate systems.
//! - [`jack`]: log-space evaluation of the polynomial specialization
//!   formulas everything else is built from.
//! - [`measures`]: exact fixed-time weights, enumeration oracles, exact
//!   samplers, and finite-size expectation identities.
//! - [`dynamics`]: the event-driven simulation engine with incremental
//!   rate maintenance.
//! - [`zrp`]: the limiting zero range process.
//! - [`asymptotics`]: negative-binomial gap law, equilibrium density and
//!   Stieltjes transform.
//! - [`harness`]: seeded pass/fail experiments with machine-readable
//!   reports.
//! - [`rng`]: reproducible counter-based random streams.

pub mod asymptotics;
pub mod dynamics;
pub mod harness;
pub mod jack;
pub mod measures;
pub mod partitions;
pub mod rng;
pub mod zrp;
