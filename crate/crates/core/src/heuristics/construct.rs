//! The outlet-by-outlet constructive loop shared by greedy and GRASP.

use crate::covering::CoverageTensor;
use crate::instance::Instance;
use crate::solution::{Schedule, BUDGET_TOLERANCE};

use super::{Clock, MoveKind, ScoreMode, TraceEvent};

/// One budget-feasible single-outlet addition and its score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub station: usize,
    pub k: u32,
    pub score: f64,
}

pub(crate) struct Builder<'a> {
    inst: &'a Instance,
    cov: &'a CoverageTensor,
    mode: ScoreMode,
    pub schedule: Schedule,
    /// Covered words of every period under the current schedule.
    covered: Vec<Vec<u64>>,
    /// Objective of every period under the current schedule.
    period_values: Vec<f64>,
}

impl<'a> Builder<'a> {
    pub fn new(inst: &'a Instance, cov: &'a CoverageTensor, mode: ScoreMode) -> Self {
        let schedule = Schedule::initial(inst);
        let covered = (0..inst.horizon)
            .map(|t| cov.covered_words(t, &schedule.levels[t]))
            .collect();
        let period_values = (0..inst.horizon)
            .map(|t| cov.period_value(t, &schedule.levels[t]))
            .collect();
        Builder {
            inst,
            cov,
            mode,
            schedule,
            covered,
            period_values,
        }
    }

    pub fn value(&self) -> f64 {
        self.period_values.iter().sum()
    }

    fn score(&self, t: usize, j: usize, k: u32) -> f64 {
        let last = match self.mode {
            ScoreMode::Myopic => t + 1,
            ScoreMode::Hyperoptic => self.inst.horizon,
        };
        (t..last)
            .filter(|&tp| self.schedule.levels[tp][j] < k)
            .map(|tp| self.cov.gain(tp, &self.covered[tp], j, k))
            .sum()
    }

    /// Budget-feasible single-outlet additions in period `t`, by station.
    pub fn candidates(&self, t: usize) -> Vec<Candidate> {
        let spent = self.schedule.spend(self.inst, t);
        let budget = self.inst.costs.budgets[t];
        (0..self.inst.n_stations())
            .filter_map(|j| {
                let k = self.schedule.levels[t][j] + 1;
                if k > self.inst.max_outlets(j)
                    || spent + self.inst.costs.cost(j, k, t) > budget + BUDGET_TOLERANCE
                {
                    return None;
                }
                Some(Candidate {
                    station: j,
                    k,
                    score: self.score(t, j, k),
                })
            })
            .collect()
    }

    /// Places outlet `k` at station `j` in period `t` and keeps it afterwards.
    pub fn apply(&mut self, t: usize, j: usize, k: u32) {
        for tp in t..self.inst.horizon {
            if self.schedule.levels[tp][j] < k {
                self.schedule.levels[tp][j] = k;
                let range = self.cov.index().period_range(tp);
                for (c, b) in self.covered[tp]
                    .iter_mut()
                    .zip(&self.cov.words(j, k)[range])
                {
                    *c |= b;
                }
                self.period_values[tp] = self.cov.period_value(tp, &self.schedule.levels[tp]);
            }
        }
    }

    /// Runs the period loop; `pick` chooses among the candidates of a period
    /// or returns `None` to close it.
    pub fn run(
        mut self,
        clock: &Clock,
        trace: &mut Vec<TraceEvent>,
        mut pick: impl FnMut(&[Candidate]) -> Option<Candidate>,
    ) -> Schedule {
        for t in 0..self.inst.horizon {
            loop {
                let cands = self.candidates(t);
                let Some(c) = pick(&cands) else { break };
                self.apply(t, c.station, c.k);
                trace.push(TraceEvent {
                    kind: MoveKind::Outlet,
                    period: t + 1,
                    station: Some(c.station),
                    k: Some(c.k),
                    partner: None,
                    score: c.score,
                    f: self.value(),
                    elapsed_s: clock.elapsed(),
                });
            }
        }
        self.schedule
    }
}

/// Highest-scoring candidate with a positive score; the first one (lowest
/// station index) wins ties.
pub(crate) fn argmax(cands: &[Candidate]) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for c in cands {
        if c.score > 0.0 && best.is_none_or(|b| c.score > b.score) {
            best = Some(*c);
        }
    }
    best
}
