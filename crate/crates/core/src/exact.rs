//! Exhaustive search over every feasible outlet schedule.
//!
//! Schedules are visited in lexicographic order of their per-period outlet
//! vectors `(levels[0], levels[1], …)`. Partial schedules that overspend a
//! period are cut as soon as they appear.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::CoverageTensor;
use crate::instance::Instance;
use crate::solution::{Schedule, BUDGET_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBudget {
    pub max_configurations: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_configurations: 10_000_000,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error(
        "enumeration refused: more than {cap} feasible schedules \
         (unpruned state space {state_space} schedules)"
    )]
    TooLarge { state_space: u128, cap: u64 },
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Number of schedules satisfying bounds and persistence, ignoring budgets:
/// Π_j C(m_j − x0_j + T, T).
pub fn state_space_size(inst: &Instance) -> u128 {
    let t = inst.horizon as u64;
    inst.stations
        .iter()
        .map(|s| binomial(u64::from(s.max_outlets - s.initial_outlets) + t, t))
        .fold(1u128, |acc, v| acc.saturating_mul(v))
}

/// Counts feasible schedules, stopping once the count passes `cap`.
pub fn count_feasible(inst: &Instance, cap: u64) -> u64 {
    let mut levels = Schedule::initial(inst).levels;
    let mut count = 0u64;
    count_rec(inst, &mut levels, 0, 0, 0.0, cap, &mut count);
    count
}

fn count_rec(
    inst: &Instance,
    levels: &mut [Vec<u32>],
    t: usize,
    j: usize,
    spent: f64,
    cap: u64,
    count: &mut u64,
) {
    if *count > cap {
        return;
    }
    if t == inst.horizon {
        *count += 1;
        return;
    }
    if j == inst.n_stations() {
        if t + 1 < inst.horizon {
            let row = levels[t].clone();
            levels[t + 1].copy_from_slice(&row);
        }
        count_rec(inst, levels, t + 1, 0, 0.0, cap, count);
        return;
    }
    let start = if t == 0 {
        inst.stations[j].initial_outlets
    } else {
        levels[t - 1][j]
    };
    let mut cost = 0.0;
    for level in start..=inst.max_outlets(j) {
        if level > start {
            cost += inst.costs.cost(j, level, t);
        }
        if spent + cost > inst.costs.budgets[t] + BUDGET_TOLERANCE {
            break;
        }
        levels[t][j] = level;
        count_rec(inst, levels, t, j + 1, spent + cost, cap, count);
    }
    levels[t][j] = start;
}

/// Iterator over feasible schedules in lexicographic order.
pub struct FeasibleSchedules<'a> {
    inst: &'a Instance,
    cur: Schedule,
    first_free_period: usize,
    started: bool,
    done: bool,
}

impl<'a> FeasibleSchedules<'a> {
    fn with_prefix(inst: &'a Instance, first: Option<&[u32]>) -> Self {
        let mut cur = Schedule::initial(inst);
        let mut first_free_period = 0;
        if let Some(v) = first {
            for t in 0..inst.horizon {
                cur.levels[t].copy_from_slice(v);
            }
            first_free_period = 1;
        }
        FeasibleSchedules {
            inst,
            cur,
            first_free_period,
            started: false,
            done: false,
        }
    }

    /// Tries to bump position (t, j) by one outlet and reset everything after
    /// it to the cheapest completion.
    fn bump(&mut self, t: usize, j: usize) -> bool {
        let inst = self.inst;
        let level = self.cur.levels[t][j];
        if level >= inst.max_outlets(j) {
            return false;
        }
        let mut spent: f64 = (0..j).map(|jj| self.cur.station_spend(inst, t, jj)).sum();
        let prev = self.cur.previous(inst, t, j);
        spent += inst.costs.step_cost(j, prev, level + 1, t);
        if spent > inst.costs.budgets[t] + BUDGET_TOLERANCE {
            return false;
        }
        self.cur.levels[t][j] = level + 1;
        for jj in j + 1..inst.n_stations() {
            self.cur.levels[t][jj] = self.cur.previous(inst, t, jj);
        }
        for tt in t + 1..inst.horizon {
            let row = self.cur.levels[tt - 1].clone();
            self.cur.levels[tt] = row;
        }
        true
    }
}

impl Iterator for FeasibleSchedules<'_> {
    type Item = Schedule;

    fn next(&mut self) -> Option<Schedule> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.cur.clone());
        }
        let m = self.inst.n_stations();
        for t in (self.first_free_period..self.inst.horizon).rev() {
            for j in (0..m).rev() {
                if self.bump(t, j) {
                    return Some(self.cur.clone());
                }
            }
        }
        self.done = true;
        None
    }
}

fn check_budget(inst: &Instance, budget: EnumerationBudget) -> Result<(), ExactError> {
    let state_space = state_space_size(inst);
    if state_space <= u128::from(budget.max_configurations) {
        return Ok(());
    }
    if count_feasible(inst, budget.max_configurations) > budget.max_configurations {
        return Err(ExactError::TooLarge {
            state_space,
            cap: budget.max_configurations,
        });
    }
    Ok(())
}

/// Every feasible schedule exactly once, after checking the size cap.
pub fn enumerate_feasible(
    inst: &Instance,
    budget: EnumerationBudget,
) -> Result<FeasibleSchedules<'_>, ExactError> {
    check_budget(inst, budget)?;
    Ok(FeasibleSchedules::with_prefix(inst, None))
}

/// Feasible outlet vectors for the first period, in lexicographic order.
fn first_period_vectors(inst: &Instance) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut v: Vec<u32> = inst.stations.iter().map(|s| s.initial_outlets).collect();
    period_vectors(inst, 0, &v.clone(), &mut v, 0, 0.0, &mut out);
    out
}

fn period_vectors(
    inst: &Instance,
    t: usize,
    prev: &[u32],
    v: &mut Vec<u32>,
    j: usize,
    spent: f64,
    out: &mut Vec<Vec<u32>>,
) {
    if j == v.len() {
        out.push(v.clone());
        return;
    }
    let mut cost = 0.0;
    for level in prev[j]..=inst.max_outlets(j) {
        if level > prev[j] {
            cost += inst.costs.cost(j, level, t);
        }
        if spent + cost > inst.costs.budgets[t] + BUDGET_TOLERANCE {
            break;
        }
        v[j] = level;
        period_vectors(inst, t, prev, v, j + 1, spent + cost, out);
    }
    v[j] = prev[j];
}

/// Feasible outlet vectors for period `t` given the previous period's
/// counts, in lexicographic order.
pub fn feasible_period_vectors(inst: &Instance, t: usize, prev: &[u32]) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut v = prev.to_vec();
    period_vectors(inst, t, prev, &mut v, 0, 0.0, &mut out);
    out
}

/// The schedule maximizing the objective; ties go to the first schedule in
/// enumeration order.
pub fn brute_force_optimum(
    inst: &Instance,
    cov: &CoverageTensor,
    budget: EnumerationBudget,
) -> Result<(Schedule, f64), ExactError> {
    check_budget(inst, budget)?;
    let firsts = first_period_vectors(inst);
    let best = firsts
        .par_iter()
        .enumerate()
        .map(|(p, first)| {
            let mut best: Option<(Schedule, f64)> = None;
            for s in FeasibleSchedules::with_prefix(inst, Some(first)) {
                let v = cov.value(&s);
                if best.as_ref().is_none_or(|(_, b)| v > *b) {
                    best = Some((s, v));
                }
            }
            (p, best.expect("prefix itself is feasible"))
        })
        .reduce_with(|a, b| {
            let ((pa, (sa, va)), (pb, (sb, vb))) = (a, b);
            if vb > va || (vb == va && pb < pa) {
                (pb, (sb, vb))
            } else {
                (pa, (sa, va))
            }
        })
        .expect("the initial schedule is always feasible");
    Ok(best.1)
}

/// Best outlet vector for period `t` alone, given the previous counts.
/// Ties go to the lexicographically first vector.
pub fn best_single_period(
    inst: &Instance,
    cov: &CoverageTensor,
    t: usize,
    prev: &[u32],
    budget: EnumerationBudget,
) -> Result<(Vec<u32>, f64), ExactError> {
    let size: u128 = (0..inst.n_stations())
        .map(|j| u128::from(inst.max_outlets(j) - prev[j] + 1))
        .product();
    if size > u128::from(budget.max_configurations) {
        return Err(ExactError::TooLarge {
            state_space: size,
            cap: budget.max_configurations,
        });
    }
    let mut best: Option<(Vec<u32>, f64)> = None;
    for v in feasible_period_vectors(inst, t, prev) {
        let value = cov.period_value(t, &v);
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((v, value));
        }
    }
    Ok(best.expect("keeping the previous counts is feasible"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::tiny_instance;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(3, 1), 3);
        assert_eq!(binomial(5, 0), 1);
    }

    #[test]
    fn iterator_is_lexicographic_and_feasible() {
        for seed in 0..10 {
            let inst = tiny_instance(seed, 0);
            let all: Vec<Schedule> = enumerate_feasible(&inst, EnumerationBudget::default())
                .unwrap()
                .collect();
            assert_eq!(all.len() as u64, count_feasible(&inst, u64::MAX));
            for w in all.windows(2) {
                assert!(w[0].levels < w[1].levels);
            }
            assert!(all.iter().all(|s| s.is_feasible(&inst)));
        }
    }

    #[test]
    fn refuses_past_cap() {
        let inst = tiny_instance(3, 3);
        let cap = EnumerationBudget {
            max_configurations: 1,
        };
        let err = enumerate_feasible(&inst, cap).err().unwrap();
        assert!(matches!(err, ExactError::TooLarge { cap: 1, .. }));
    }
}
