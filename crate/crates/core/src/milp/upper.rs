//! Outlet variables and the rows shared by every station model: budgets,
//! the outlet ladder and persistence.

use std::collections::BTreeMap;

use crate::instance::Instance;
use crate::solution::Schedule;

use super::model::{MilpModel, RowSense, VarKind};
use super::MilpError;

/// `x_j_k_t` with 1-based station, outlet and period.
pub fn x_name(j: usize, k: u32, t: usize) -> String {
    format!("x_{}_{}_{}", j + 1, k, t + 1)
}

/// Indices of the outlet variables, `idx[t][j][k-1]`, for the periods a
/// model covers.
#[derive(Debug, Clone, PartialEq)]
pub struct OutletVars {
    pub periods: Vec<usize>,
    pub idx: Vec<Vec<Vec<usize>>>,
}

impl OutletVars {
    pub fn get(&self, t: usize, j: usize, k: u32) -> usize {
        let p = self
            .periods
            .iter()
            .position(|&p| p == t)
            .expect("period in model");
        self.idx[p][j][k as usize - 1]
    }
}

/// Outlet variables and upper-level rows for all periods. Initial outlets
/// become lower bounds on the first period.
pub fn add_upper_level(model: &mut MilpModel, inst: &Instance) -> Result<OutletVars, MilpError> {
    let init: Vec<u32> = inst.stations.iter().map(|s| s.initial_outlets).collect();
    let mut vars = OutletVars {
        periods: Vec::new(),
        idx: Vec::new(),
    };
    for t in 0..inst.horizon {
        let prev = if t == 0 { Some(init.as_slice()) } else { None };
        add_period(model, inst, t, prev, &mut vars)?;
    }
    Ok(vars)
}

/// Outlet variables and rows of period `t` alone, with the previous counts
/// fixed to `prev`.
pub fn add_single_period(
    model: &mut MilpModel,
    inst: &Instance,
    t: usize,
    prev: &[u32],
) -> Result<OutletVars, MilpError> {
    let mut vars = OutletVars {
        periods: Vec::new(),
        idx: Vec::new(),
    };
    add_period(model, inst, t, Some(prev), &mut vars)?;
    Ok(vars)
}

fn add_period(
    model: &mut MilpModel,
    inst: &Instance,
    t: usize,
    fixed_prev: Option<&[u32]>,
    vars: &mut OutletVars,
) -> Result<(), MilpError> {
    let m = inst.n_stations();
    let mut row = Vec::with_capacity(m);
    for j in 0..m {
        let mut ks = Vec::new();
        for k in 1..=inst.max_outlets(j) {
            let lower = match fixed_prev {
                Some(prev) if k <= prev[j] => 1.0,
                _ => 0.0,
            };
            ks.push(model.add_var(x_name(j, k, t), lower, 1.0, VarKind::Binary)?);
        }
        row.push(ks);
    }
    // budget: Σ c (x^t − x^{t−1}) ≤ B^t
    let mut terms = Vec::new();
    let mut rhs = inst.costs.budgets[t];
    for j in 0..m {
        for k in 1..=inst.max_outlets(j) {
            let c = inst.costs.cost(j, k, t);
            terms.push((row[j][k as usize - 1], c));
            match fixed_prev {
                Some(prev) => {
                    if k <= prev[j] {
                        rhs += c;
                    }
                }
                None => terms.push((
                    vars.idx.last().expect("previous period")[j][k as usize - 1],
                    -c,
                )),
            }
        }
    }
    model.add_row(format!("budget_{}", t + 1), terms, RowSense::Le, rhs)?;
    for j in 0..m {
        for k in 2..=inst.max_outlets(j) {
            let (a, b) = (row[j][k as usize - 1], row[j][k as usize - 2]);
            model.add_row(
                format!("ladder_{}_{}_{}", j + 1, k, t + 1),
                vec![(a, 1.0), (b, -1.0)],
                RowSense::Le,
                0.0,
            )?;
        }
    }
    if fixed_prev.is_none() {
        let prev = vars.idx.last().expect("previous period");
        for j in 0..m {
            for k in 1..=inst.max_outlets(j) {
                let (a, b) = (row[j][k as usize - 1], prev[j][k as usize - 1]);
                model.add_row(
                    format!("keep_{}_{}_{}", j + 1, k, t + 1),
                    vec![(a, 1.0), (b, -1.0)],
                    RowSense::Ge,
                    0.0,
                )?;
            }
        }
    }
    vars.periods.push(t);
    vars.idx.push(row);
    Ok(())
}

/// Outlet counts read back from solver values: the number of `x_j_k_t`
/// above one half. Periods absent from `values` keep the initial counts.
pub fn schedule_from_values(inst: &Instance, values: &BTreeMap<String, f64>) -> Schedule {
    let mut s = Schedule::initial(inst);
    for t in 0..inst.horizon {
        for j in 0..inst.n_stations() {
            let n = (1..=inst.max_outlets(j))
                .filter(|&k| values.get(&x_name(j, k, t)).is_some_and(|v| *v > 0.5))
                .count() as u32;
            s.levels[t][j] = s.levels[t][j].max(n);
        }
    }
    s
}

/// Solver start values for the outlet variables of `periods`.
pub fn start_values(inst: &Instance, x: &Schedule, periods: &[usize]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for &t in periods {
        for j in 0..inst.n_stations() {
            for k in 1..=inst.max_outlets(j) {
                out.insert(x_name(j, k, t), if k <= x.levels[t][j] { 1.0 } else { 0.0 });
            }
        }
    }
    out
}
