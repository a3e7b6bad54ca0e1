//! Multi-period placement of EV charging outlets under simulated
//! discrete-choice demand.
//!
//! The crate covers the whole pipeline: synthetic networks and dataset
//! generation ([`datasets`]), simulated utility errors ([`simulation`]), the
//! coverage tensor and objective ([`covering`]), MILP model building and an
//! external solver adapter ([`milp`]), exhaustive enumeration for small
//! instances ([`exact`]), greedy, GRASP and rolling-horizon heuristics
//! ([`heuristics`]) and the growth-function baseline ([`growth`]).
//!
//! ```
//! use evsite::covering::CoverageTensor;
//! use evsite::datasets::tiny_instance;
//! use evsite::heuristics::{greedy, GreedyConfig, ScoreMode};
//!
//! let inst = tiny_instance(1, 0);
//! let cov = CoverageTensor::build(&inst);
//! let run = greedy(&inst, &cov, &GreedyConfig { mode: ScoreMode::Myopic });
//! assert!(run.schedule.is_feasible(&inst));
//! assert!(run.value >= 0.0);
//! ```

// `!(a < b)` is used on purpose so NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bitset;
pub mod covering;
pub mod datasets;
pub mod exact;
pub mod growth;
pub mod heuristics;
pub mod instance;
pub mod milp;
pub mod network;
pub mod report;
pub mod simulation;
pub mod solution;
pub mod util;

pub use covering::CoverageTensor;
pub use instance::{DatasetKind, Instance};
pub use network::Network;
pub use solution::{Schedule, Solution};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    struct Intro;
    #[doc = include_str!("../../../book/src/instances.md")]
    struct Instances;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/covering.md")]
    struct Covering;
    #[doc = include_str!("../../../book/src/formulations.md")]
    struct Formulations;
    #[doc = include_str!("../../../book/src/heuristics.md")]
    struct Heuristics;
    #[doc = include_str!("../../../book/src/growth.md")]
    struct Growth;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
