//! Solver-agnostic linear models: the single-level and maximum covering
//! formulations, the growth-function baseline, LP export and an external
//! solver adapter.

pub mod bounds;
pub mod external;
pub mod gf;
pub mod lp;
pub mod mc;
pub mod model;
pub mod sl;
pub mod upper;

use thiserror::Error;

pub use bounds::{
    compute_bounds, compute_bounds_with, BigMBounds, BlockBounds, BoundOptions, BoundViolation,
};
pub use external::{solve_external, SolveOutcome, SolveStatus, SolverConfig, SOLVER_ENV};
pub use gf::{build_gf, gf_h_name, gf_x_name, gf_y_name};
pub use lp::{export_lp, parse_lp, write_lp};
pub use mc::{build_mc, build_mc_period};
pub use model::{Constraint, MilpModel, ObjectiveSense, RowSense, VarKind, Variable};
pub use sl::{build_sl, expected_sl_rows, SlOptions};
pub use upper::{schedule_from_values, start_values, x_name};

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid LP name `{0}`")]
    BadName(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("variable `{name}` has bounds [{lower}, {upper}]")]
    BadBounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("row `{0}` is empty in a model without variables")]
    EmptyRow(String),
    #[error("LP line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("solution file: {0}")]
    Solution(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("big-M bounds fail verification: {0}")]
    UnsoundBounds(String),
    #[error("growth function: {0}")]
    Growth(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
