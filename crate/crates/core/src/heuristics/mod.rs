//! Greedy, GRASP and rolling-horizon heuristics.
//!
//! All heuristics work on a [`Schedule`] and only ever emit feasible ones.
//! Each run returns a [`HeuristicResult`] whose trace lists accepted moves.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::solution::Schedule;

mod construct;
pub mod grasp;
pub mod greedy;
pub mod local_search;
pub mod rolling;

pub use grasp::{grasp, grasp_construct, grasp_filter, FilterDecision, GraspConfig, RclRule};
pub use greedy::{greedy, GreedyConfig};
pub use local_search::{local_search, local_search_traced, ImprovementMode, LocalSearchConfig};
pub use rolling::{
    period_time_limits, rolling_horizon, Allocation, PeriodSolver, RollingHorizonConfig,
};

/// Which periods a candidate outlet is scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Only the current period.
    Myopic,
    /// The current period and every later one.
    Hyperoptic,
}

impl std::str::FromStr for ScoreMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "myopic" | "m" => Ok(ScoreMode::Myopic),
            "hyperoptic" | "h" => Ok(ScoreMode::Hyperoptic),
            other => Err(format!(
                "unknown score mode `{other}` (myopic or hyperoptic)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    /// One outlet placed by a constructive pass.
    Outlet,
    Add,
    Transfer,
    Split,
    /// A GRASP candidate went through local search.
    Candidate,
    /// A GRASP candidate was skipped by the filter.
    Filtered,
    /// A period fixed by the rolling horizon.
    Period,
}

/// One trace line. `period` is 1-based; `score` is the move's own score
/// (gain, candidate value or time limit) and `f` the objective afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: MoveKind,
    pub period: usize,
    pub station: Option<usize>,
    /// Outlets at `station` in `period` after the move.
    pub k: Option<u32>,
    /// Second station of a Transfer or Split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<usize>,
    pub score: f64,
    pub f: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Construction or search ran to its natural end.
    Completed,
    MaxSolutions,
    MaxFiltered,
    TimeLimit,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Completed => "completed",
            Termination::MaxSolutions => "max-solutions",
            Termination::MaxFiltered => "max-filtered",
            Termination::TimeLimit => "time-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicResult {
    pub schedule: Schedule,
    pub value: f64,
    pub wall_time_s: f64,
    pub trace: Vec<TraceEvent>,
    pub seed: Option<u64>,
    pub termination: Termination,
    /// Candidates that went through local search (GRASP only).
    pub examined: usize,
    /// Candidates skipped by the filter (GRASP only).
    pub filtered: usize,
}

impl HeuristicResult {
    /// Writes the trace as JSON lines.
    pub fn write_trace(&self, mut out: impl Write) -> std::io::Result<()> {
        for ev in &self.trace {
            serde_json::to_writer(&mut out, ev)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub(crate) struct Clock(Instant);

impl Clock {
    pub(crate) fn start() -> Self {
        Clock(Instant::now())
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
