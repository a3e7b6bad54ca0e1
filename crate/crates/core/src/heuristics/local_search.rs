//! Local search with Add, Transfer and Split moves.
//!
//! Periods are visited in order. Within a period, station loops repeat until
//! a loop stops improving or improves by less than `min_rel_gain`
//! (relative), then the search moves on. A move only touches periods `t..T`
//! so candidates are compared on that tail alone.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::covering::CoverageTensor;
use crate::instance::Instance;
use crate::solution::{Schedule, BUDGET_TOLERANCE};

use super::{Clock, MoveKind, TraceEvent};

/// Smallest tail increase that counts as an improvement.
const IMPROVEMENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImprovementMode {
    /// Apply the first improving move found.
    #[default]
    First,
    /// Apply the best move over all stations once per loop.
    Best,
}

impl std::str::FromStr for ImprovementMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "first" => Ok(ImprovementMode::First),
            "best" => Ok(ImprovementMode::Best),
            other => Err(format!(
                "unknown improvement mode `{other}` (first or best)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchConfig {
    pub improvement: ImprovementMode,
    pub min_rel_gain: f64,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        LocalSearchConfig {
            improvement: ImprovementMode::First,
            min_rel_gain: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Move {
    Add(usize),
    Transfer(usize, usize),
    Split(usize, usize),
}

impl Move {
    fn kind(self) -> MoveKind {
        match self {
            Move::Add(_) => MoveKind::Add,
            Move::Transfer(..) => MoveKind::Transfer,
            Move::Split(..) => MoveKind::Split,
        }
    }

    fn stations(self) -> (usize, Option<usize>) {
        match self {
            Move::Add(j) => (j, None),
            Move::Transfer(j, jp) | Move::Split(j, jp) => (j, Some(jp)),
        }
    }
}

/// Raises station `j` from `from` as far as `money` allows in period `t`.
/// Returns the new level and the money left.
fn buy(inst: &Instance, j: usize, t: usize, from: u32, mut money: f64) -> (u32, f64) {
    let mut level = from;
    while level < inst.max_outlets(j) {
        let c = inst.costs.cost(j, level + 1, t);
        if c > money + BUDGET_TOLERANCE {
            break;
        }
        money -= c;
        level += 1;
    }
    (level, money.max(0.0))
}

/// Add: one more outlet at `j` from period `t` on.
pub(crate) fn add_move(inst: &Instance, x: &Schedule, t: usize, j: usize) -> Option<Schedule> {
    let k = x.levels[t][j] + 1;
    if k > inst.max_outlets(j) {
        return None;
    }
    let mut y = x.clone();
    for tp in t..inst.horizon {
        y.levels[tp][j] = y.levels[tp][j].max(k);
    }
    (y.spend(inst, t) <= inst.costs.budgets[t] + BUDGET_TOLERANCE).then_some(y)
}

/// Transfer: from period `t` on, station `j` falls back to its level before
/// `t` and everything spent on it goes to `jp` instead. Whatever `jp` cannot
/// absorb is spent on `j` again; the rest stays unspent.
pub(crate) fn transfer_move(
    inst: &Instance,
    x: &Schedule,
    t: usize,
    j: usize,
    jp: usize,
) -> Option<Schedule> {
    if j == jp
        || x.levels[t][j] == 0
        || (t..inst.horizon).all(|tp| x.station_spend(inst, tp, j) == 0.0)
    {
        return None;
    }
    let mut y = x.clone();
    for tp in t..inst.horizon {
        let pool = x.station_spend(inst, tp, j) + x.station_spend(inst, tp, jp);
        let (lp, rest) = buy(inst, jp, tp, y.previous(inst, tp, jp), pool);
        let (l, _) = buy(inst, j, tp, y.previous(inst, tp, j), rest);
        y.levels[tp][jp] = lp;
        y.levels[tp][j] = l;
    }
    Some(y)
}

/// Split: from period `t` on, the money spent on `j` and `jp` is pooled and
/// halved between them, each starting from its level before `t`. Only valid
/// when both end up with at least one outlet in period `t`.
pub(crate) fn split_move(
    inst: &Instance,
    x: &Schedule,
    t: usize,
    j: usize,
    jp: usize,
) -> Option<Schedule> {
    if j == jp {
        return None;
    }
    let mut y = x.clone();
    let mut any = false;
    for tp in t..inst.horizon {
        let pool = x.station_spend(inst, tp, j) + x.station_spend(inst, tp, jp);
        any |= pool > 0.0;
        let (l, _) = buy(inst, j, tp, y.previous(inst, tp, j), pool / 2.0);
        let (lp, _) = buy(inst, jp, tp, y.previous(inst, tp, jp), pool / 2.0);
        y.levels[tp][j] = l;
        y.levels[tp][jp] = lp;
    }
    (any && y.levels[t][j] >= 1 && y.levels[t][jp] >= 1).then_some(y)
}

pub(crate) fn apply_move(inst: &Instance, x: &Schedule, t: usize, mv: Move) -> Option<Schedule> {
    let y = match mv {
        Move::Add(j) => add_move(inst, x, t, j),
        Move::Transfer(j, jp) => transfer_move(inst, x, t, j, jp),
        Move::Split(j, jp) => split_move(inst, x, t, j, jp),
    }?;
    // anything infeasible is dropped here, never applied
    (y != *x && y.is_feasible(inst)).then_some(y)
}

fn moves_of(m: usize, j: usize) -> impl Iterator<Item = Move> {
    std::iter::once(Move::Add(j))
        .chain(
            (0..m)
                .filter(move |&jp| jp != j)
                .map(move |jp| Move::Transfer(j, jp)),
        )
        .chain((j + 1..m).map(move |jp| Move::Split(j, jp)))
}

struct State<'a> {
    inst: &'a Instance,
    cov: &'a CoverageTensor,
    x: Schedule,
    period_values: Vec<f64>,
}

impl State<'_> {
    fn total(&self) -> f64 {
        self.period_values.iter().sum()
    }

    fn tail(values: &[f64], t: usize) -> f64 {
        values[t..].iter().sum()
    }

    fn tail_values(&self, y: &Schedule, t: usize) -> Vec<f64> {
        let mut v = self.period_values.clone();
        for (tp, slot) in v.iter_mut().enumerate().skip(t) {
            if y.levels[tp] != self.x.levels[tp] {
                *slot = self.cov.period_value(tp, &y.levels[tp]);
            }
        }
        v
    }

    /// Evaluates `mv`; returns the new schedule and period values if it
    /// improves the tail.
    fn try_move(&self, t: usize, mv: Move) -> Option<(Schedule, Vec<f64>, f64)> {
        let y = apply_move(self.inst, &self.x, t, mv)?;
        let values = self.tail_values(&y, t);
        let gain = Self::tail(&values, t) - Self::tail(&self.period_values, t);
        (gain > IMPROVEMENT_EPS).then_some((y, values, gain))
    }
}

/// Improves a copy of `x` and returns it with its objective. The result is
/// never worse than `x`.
pub fn local_search(
    inst: &Instance,
    cov: &CoverageTensor,
    x: &Schedule,
    config: &LocalSearchConfig,
) -> (Schedule, f64) {
    search(
        inst,
        cov,
        x,
        config,
        None,
        &Clock::start(),
        None,
        &mut |_, _| {},
    )
}

/// [`local_search`] that also returns one trace line per accepted move.
pub fn local_search_traced(
    inst: &Instance,
    cov: &CoverageTensor,
    x: &Schedule,
    config: &LocalSearchConfig,
    on_accept: &mut dyn FnMut(&Schedule, f64),
) -> (Schedule, f64, Vec<TraceEvent>) {
    let mut trace = Vec::new();
    let (y, f) = search(
        inst,
        cov,
        x,
        config,
        None,
        &Clock::start(),
        Some(&mut trace),
        on_accept,
    );
    (y, f, trace)
}

/// [`local_search`] with a callback on every accepted move and an optional
/// trace and deadline.
#[allow(clippy::too_many_arguments)]
pub(crate) fn search(
    inst: &Instance,
    cov: &CoverageTensor,
    x: &Schedule,
    config: &LocalSearchConfig,
    deadline: Option<Instant>,
    clock: &Clock,
    mut trace: Option<&mut Vec<TraceEvent>>,
    on_accept: &mut dyn FnMut(&Schedule, f64),
) -> (Schedule, f64) {
    let mut st = State {
        inst,
        cov,
        x: x.clone(),
        period_values: (0..inst.horizon)
            .map(|t| cov.period_value(t, &x.levels[t]))
            .collect(),
    };
    let m = inst.n_stations();
    let late = || deadline.is_some_and(|d| Instant::now() >= d);
    let mut accept =
        |st: &mut State, t: usize, mv: Move, y: Schedule, values: Vec<f64>, gain: f64| {
            st.x = y;
            st.period_values = values;
            let f = st.total();
            on_accept(&st.x, f);
            if let Some(tr) = trace.as_deref_mut() {
                let (j, partner) = mv.stations();
                tr.push(TraceEvent {
                    kind: mv.kind(),
                    period: t + 1,
                    station: Some(j),
                    k: Some(st.x.levels[t][j]),
                    partner,
                    score: gain,
                    f,
                    elapsed_s: clock.elapsed(),
                });
            }
        };
    'periods: for t in 0..inst.horizon {
        loop {
            let before = st.total();
            let mut improved = false;
            match config.improvement {
                ImprovementMode::First => {
                    for j in 0..m {
                        for mv in moves_of(m, j) {
                            if let Some((y, values, gain)) = st.try_move(t, mv) {
                                accept(&mut st, t, mv, y, values, gain);
                                improved = true;
                            }
                        }
                        if late() {
                            break 'periods;
                        }
                    }
                }
                ImprovementMode::Best => {
                    let mut best: Option<(Move, Schedule, Vec<f64>, f64)> = None;
                    for j in 0..m {
                        for mv in moves_of(m, j) {
                            if let Some((y, values, gain)) = st.try_move(t, mv) {
                                if best.as_ref().is_none_or(|b| gain > b.3) {
                                    best = Some((mv, y, values, gain));
                                }
                            }
                        }
                        if late() {
                            break;
                        }
                    }
                    if let Some((mv, y, values, gain)) = best {
                        accept(&mut st, t, mv, y, values, gain);
                        improved = true;
                    }
                    if late() {
                        break 'periods;
                    }
                }
            }
            if !improved {
                break;
            }
            let after = st.total();
            if before > 0.0 && (after - before) / before < config.min_rel_gain {
                break;
            }
        }
    }
    let f = st.total();
    (st.x, f)
}
