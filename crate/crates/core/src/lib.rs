//! Kinematic-wave (LWR) network simulation for signalized junctions.
//!
//! Links are solved through their Moskowitz function `N(t, x)` with the
//! generalized Lax-Hopf formula under weak initial/upstream/downstream value
//! conditions. Junctions couple links through demand and supply, using either
//! the on-and-off signal model (binary green/red gate) or the continuum model
//! (constant split multiplying the effective supply).
//!
//! Modules:
//! - [`fundamental`]: flow-density laws and their transforms.
//! - [`laxhopf`]: single-link Moskowitz evaluation, demand, supply.
//! - [`network`]: signals, junction laws, scenarios, the time-stepped driver.
//! - [`ltm`]: discrete link transmission model for triangular diagrams.
//! - [`analysis`]: error bounds and the convergence / spillback experiments.

pub mod analysis;
pub mod error;
pub mod fundamental;
pub mod laxhopf;
pub mod ltm;
pub mod network;
pub mod profile;

pub use error::{Error, Result};
pub use fundamental::{FdKind, FundamentalDiagram};
