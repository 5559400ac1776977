//! Signal split optimization as mixed-integer linear programs.
//!
//! [`build_model`] turns a triangular-diagram scenario into a program over
//! the link transmission model, [`solve_bb`] solves it with a built-in
//! simplex and branch and bound, and [`enumerate_oracle`] cross-checks the
//! result by simulating every split combination.

pub mod bb;
pub mod build;
pub mod error;
pub mod instances;
pub mod lp_format;
pub mod model;
pub mod oracle;
pub mod simplex;
pub mod solution;

pub use bb::{solve_bb, solve_bb_guided, solve_bb_with, BbOptions, BbResult, BbStatus};
pub use build::{build_model, BuiltModel, MilpOptions};
pub use error::{MilpError, Result};
pub use lp_format::{export_lp, import_lp, parse_lp, to_lp_string};
pub use model::{linearize_min, LinExpr, MilpModel, Sense, VarKind};
pub use oracle::{enumerate_oracle, evaluate_splits, replay, ReplayReport};
pub use simplex::{solve_lp, LpSolution, LpStatus};
pub use solution::{optimize, Optimized, SignalSplits, SolveStatus, SplitSolution};
