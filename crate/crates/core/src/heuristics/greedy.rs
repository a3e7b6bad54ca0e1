//! Greedy construction: one outlet at a time, best score first.

use serde::{Deserialize, Serialize};

use crate::covering::CoverageTensor;
use crate::instance::Instance;

use super::construct::{argmax, Builder};
use super::{Clock, HeuristicResult, ScoreMode, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub mode: ScoreMode,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            mode: ScoreMode::Myopic,
        }
    }
}

/// Starts from the initial outlets and, period by period, adds the outlet
/// with the best score until nothing affordable improves it. Ties go to the
/// lowest station index.
pub fn greedy(inst: &Instance, cov: &CoverageTensor, config: &GreedyConfig) -> HeuristicResult {
    let clock = Clock::start();
    let mut trace = Vec::new();
    let schedule = Builder::new(inst, cov, config.mode).run(&clock, &mut trace, argmax);
    let value = cov.value(&schedule);
    HeuristicResult {
        schedule,
        value,
        wall_time_s: clock.elapsed(),
        trace,
        seed: None,
        termination: Termination::Completed,
        examined: 0,
        filtered: 0,
    }
}
