//! The single-level model: upper-level rows, Big-M utility rows and the
//! linearized choice of the best alternative for every triplet.
//!
//! Names, all 1-based: `u_j_t_i_r` and `w_j_t_i_r` with `j = 0` for the
//! opt-out and `j = station + 1` otherwise, and `alpha_t_i_r`. Triplets
//! settled by home charging are left out; home charging is otherwise
//! dropped, so the opt-out is the only exogenous alternative.

use serde::{Deserialize, Serialize};

use crate::covering::CoverageTensor;
use crate::instance::Instance;

use super::bounds::{BigMBounds, BoundViolation};
use super::model::{MilpModel, ObjectiveSense, RowSense, VarKind};
use super::upper::add_upper_level;
use super::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlOptions {
    /// Declare the choice variables continuous in [0, 1].
    pub relax_w: bool,
}

pub fn u_name(j: usize, t: usize, i: usize, r: usize) -> String {
    format!("u_{}_{}_{}_{}", j, t + 1, i + 1, r + 1)
}

pub fn sl_w_name(j: usize, t: usize, i: usize, r: usize) -> String {
    format!("w_{}_{}_{}_{}", j, t + 1, i + 1, r + 1)
}

pub fn alpha_name(t: usize, i: usize, r: usize) -> String {
    format!("alpha_{}_{}_{}", t + 1, i + 1, r + 1)
}

/// Builds the minimisation model. Refuses when the bounds fail
/// verification.
pub fn build_sl(
    inst: &Instance,
    cov: &CoverageTensor,
    bounds: &BigMBounds,
    options: SlOptions,
) -> Result<MilpModel, MilpError> {
    let violations: Vec<BoundViolation> = bounds.verify();
    if let Some(v) = violations.first() {
        return Err(MilpError::UnsoundBounds(format!(
            "{} violation(s); first at period {} class {}: {}",
            violations.len(),
            v.t + 1,
            v.i + 1,
            v.what
        )));
    }
    if bounds.blocks.len() != inst.horizon {
        return Err(MilpError::Shape(
            "bounds computed for another instance".into(),
        ));
    }
    let mut model = MilpModel::new(
        format!("sl-{}-{}", inst.meta.dataset_kind, inst.meta.index),
        ObjectiveSense::Minimize,
    );
    let x = add_upper_level(&mut model, inst)?;
    let w_kind = if options.relax_w {
        VarKind::Continuous
    } else {
        VarKind::Binary
    };
    let mut objective = Vec::new();
    for t in 0..inst.horizon {
        for i in 0..inst.n_classes() {
            let block = inst.block(i, t);
            let bb = bounds.block(t, i);
            let weight = inst.population(i, t) / inst.scenarios(i) as f64;
            for r in 0..inst.scenarios(i) {
                if cov.is_forced(t, i, r) {
                    continue;
                }
                let suffix = format!("{}_{}_{}", t + 1, i + 1, r + 1);
                let alpha = model.free(alpha_name(t, i, r))?;
                // (station id for names, u, w, big-M)
                let mut alts = Vec::with_capacity(1 + block.stations.len());
                let u0 = model.free(u_name(0, t, i, r))?;
                let w0 = model.add_var(sl_w_name(0, t, i, r), 0.0, 1.0, w_kind)?;
                objective.push((w0, weight));
                model.add_row(
                    format!("util_0_{suffix}"),
                    vec![(u0, 1.0)],
                    RowSense::Eq,
                    bb.u0[r],
                )?;
                alts.push((0usize, u0, w0, bb.mu_optout[r]));
                for (s, st) in block.stations.iter().enumerate() {
                    let j = st.station as usize;
                    let a = bb.a_lower.expect("block has stations");
                    let nu = bb.nu[r][s];
                    let base = bb.base[r][s];
                    let u = model.free(u_name(j + 1, t, i, r))?;
                    let w = model.add_var(sl_w_name(j + 1, t, i, r), 0.0, 1.0, w_kind)?;
                    let x1 = x.get(t, j, 1);
                    let name = |p: &str| format!("{p}_{}_{suffix}", j + 1);
                    model.add_row(name("closed_lb"), vec![(u, 1.0)], RowSense::Ge, a)?;
                    model.add_row(
                        name("closed_ub"),
                        vec![(u, 1.0), (x1, -nu)],
                        RowSense::Le,
                        a,
                    )?;
                    let mut lb = vec![(u, 1.0)];
                    let mut ub = vec![(u, 1.0)];
                    for (k, beta) in (1u32..).zip(&st.increments) {
                        let xk = x.get(t, j, k);
                        if k == 1 {
                            lb.push((xk, -beta - nu));
                        } else {
                            lb.push((xk, -beta));
                        }
                        ub.push((xk, -beta));
                    }
                    model.add_row(name("open_lb"), lb, RowSense::Ge, base - nu)?;
                    model.add_row(name("open_ub"), ub, RowSense::Le, base)?;
                    alts.push((j + 1, u, w, bb.mu_station[r][s]));
                }
                for &(j, u, w, mu) in &alts {
                    model.add_row(
                        format!("best_{j}_{suffix}"),
                        vec![(u, 1.0), (alpha, -1.0), (w, -mu)],
                        RowSense::Ge,
                        -mu,
                    )?;
                }
                model.add_row(
                    format!("choice_{suffix}"),
                    alts.iter().map(|a| (a.2, 1.0)).collect(),
                    RowSense::Eq,
                    1.0,
                )?;
                for &(j, u, _, _) in &alts {
                    model.add_row(
                        format!("amax_{j}_{suffix}"),
                        vec![(alpha, 1.0), (u, -1.0)],
                        RowSense::Ge,
                        0.0,
                    )?;
                }
            }
        }
    }
    model.set_objective(objective, 0.0);
    Ok(model)
}

/// Row count predicted from the instance alone, for cross-checking.
pub fn expected_sl_rows(inst: &Instance, cov: &CoverageTensor) -> usize {
    let m = inst.n_stations();
    let ladder: usize = (0..m)
        .map(|j| inst.max_outlets(j).saturating_sub(1) as usize)
        .sum();
    let outlets: usize = (0..m).map(|j| inst.max_outlets(j) as usize).sum();
    let mut rows = inst.horizon * (1 + ladder) + inst.horizon.saturating_sub(1) * outlets;
    for t in 0..inst.horizon {
        for i in 0..inst.n_classes() {
            let c = inst.block(i, t).stations.len();
            let free = (0..inst.scenarios(i))
                .filter(|&r| !cov.is_forced(t, i, r))
                .count();
            // opt-out utility, 4 per station, 2 + |C| for the choice
            rows += free * (1 + 4 * c + 2 * (1 + c) + 1);
        }
    }
    rows
}
