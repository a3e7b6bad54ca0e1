//! The maximum covering model.

use crate::covering::CoverageTensor;
use crate::instance::Instance;

use super::model::{MilpModel, ObjectiveSense, RowSense, VarKind};
use super::upper::{add_single_period, add_upper_level, OutletVars};
use super::MilpError;

/// `w_t_i_r`, 1-based.
pub fn w_name(t: usize, i: usize, r: usize) -> String {
    format!("w_{}_{}_{}", t + 1, i + 1, r + 1)
}

/// Maximise covered population. Binary `x`, `w ∈ [0, 1]`, one covering row
/// per triplet that home charging does not already settle; settled triplets
/// enter the objective as a constant.
pub fn build_mc(inst: &Instance, cov: &CoverageTensor) -> Result<MilpModel, MilpError> {
    check(inst, cov)?;
    let mut model = MilpModel::new(
        format!("mc-{}-{}", inst.meta.dataset_kind, inst.meta.index),
        ObjectiveSense::Maximize,
    );
    let x = add_upper_level(&mut model, inst)?;
    let periods: Vec<usize> = (0..inst.horizon).collect();
    covering_rows(&mut model, inst, cov, &x, &periods)?;
    Ok(model)
}

/// Period `t` alone with the previous outlet counts fixed: the rolling
/// horizon subproblem.
pub fn build_mc_period(
    inst: &Instance,
    cov: &CoverageTensor,
    t: usize,
    prev: &[u32],
) -> Result<MilpModel, MilpError> {
    check(inst, cov)?;
    if t >= inst.horizon || prev.len() != inst.n_stations() {
        return Err(MilpError::Shape(format!(
            "period {} / {} previous counts",
            t + 1,
            prev.len()
        )));
    }
    let mut model = MilpModel::new(
        format!(
            "mc-{}-{}-period-{}",
            inst.meta.dataset_kind,
            inst.meta.index,
            t + 1
        ),
        ObjectiveSense::Maximize,
    );
    let x = add_single_period(&mut model, inst, t, prev)?;
    covering_rows(&mut model, inst, cov, &x, &[t])?;
    Ok(model)
}

fn check(inst: &Instance, cov: &CoverageTensor) -> Result<(), MilpError> {
    if cov.horizon() != inst.horizon || cov.n_stations() != inst.n_stations() {
        return Err(MilpError::Shape(
            "coverage tensor built for another instance".into(),
        ));
    }
    Ok(())
}

fn covering_rows(
    model: &mut MilpModel,
    inst: &Instance,
    cov: &CoverageTensor,
    x: &OutletVars,
    periods: &[usize],
) -> Result<(), MilpError> {
    let mut objective = Vec::new();
    let mut constant = 0.0;
    for &t in periods {
        for i in 0..inst.n_classes() {
            let weight = inst.population(i, t) / inst.scenarios(i) as f64;
            for r in 0..inst.scenarios(i) {
                if cov.is_forced(t, i, r) {
                    constant += weight;
                    continue;
                }
                let w = model.add_var(w_name(t, i, r), 0.0, 1.0, VarKind::Continuous)?;
                objective.push((w, weight));
                let mut terms = Vec::new();
                for j in 0..inst.n_stations() {
                    if let Some(k0) = cov.min_k_to_cover(j, t, i, r) {
                        for k in k0..=inst.max_outlets(j) {
                            terms.push((x.get(t, j, k), 1.0));
                        }
                    }
                }
                terms.push((w, -1.0));
                model.add_row(
                    format!("cover_{}_{}_{}", t + 1, i + 1, r + 1),
                    terms,
                    RowSense::Ge,
                    0.0,
                )?;
            }
        }
    }
    model.set_objective(objective, constant);
    Ok(())
}
