//! The `compare-gf` verb: growth-function model against the covering model
//! on the same instances.

use std::path::Path;

use anyhow::{bail, Context, Result};
use evsite::growth::{
    adjust_solution_max_outlets, evaluate_under_mc, generate_growth_function, gf_node_evs,
    gf_objective, gf_optimal_by_enumeration, mc_node_evs, node_geojson, write_node_table,
    GfInstance, GfParams, GfSolution, GrowthFunction,
};
use evsite::milp::{build_gf, gf_x_name, solve_external, SolverConfig};
use evsite::report::spread;
use evsite::util::write_atomic;
use evsite::{CoverageTensor, Instance, Schedule};
use rayon::prelude::*;
use serde::Serialize;

use crate::manifest::Manifest;
use crate::solve::{run_one, Method, SolveConfig};

/// Opening plans tried by enumeration before the MILP is needed.
pub const GF_ENUMERATION_CAP: u128 = 2_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub instance: String,
    /// The GF optimum's own objective (final-year EVs in the GF model).
    pub gf_objective: f64,
    pub gf: f64,
    pub gf_adjusted: f64,
    pub mc: f64,
    pub mc_method: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnSummary {
    pub column: String,
    pub p5: f64,
    pub median: f64,
    pub p95: f64,
}

pub struct CompareConfig {
    pub solve: SolveConfig,
    /// Method producing the covering-model solutions.
    pub mc_method: Method,
    /// Method producing the candidate the growth function is fitted to.
    pub candidate_method: Method,
    pub growth: Option<GrowthFunction>,
    pub params: GfParams,
}

fn solve_gf(gf: &GfInstance, solver: Option<&SolverConfig>) -> Result<GfSolution> {
    match gf_optimal_by_enumeration(gf, GF_ENUMERATION_CAP) {
        Ok((sol, _)) => Ok(sol),
        Err(e) => {
            let Some(solver) = solver else {
                bail!("{e}; an external solver is needed for this size");
            };
            let model = build_gf(gf)?;
            let out = solve_external(&model, Some(solver), None)?;
            if !out.has_solution() {
                bail!("GF model: {}", out.status);
            }
            let outlets = (0..gf.horizon)
                .map(|t| {
                    (0..gf.n_sites())
                        .map(|j| out.value(&gf_x_name(j, t)).round() as u32)
                        .collect()
                })
                .collect();
            Ok(GfSolution { outlets })
        }
    }
}

fn write_nodes(out_dir: &Path, stem: &str, inst: &Instance, evs: &[f64]) -> Result<()> {
    let mut buf = Vec::new();
    write_node_table(inst, evs, &mut buf)?;
    write_atomic(&out_dir.join(format!("{stem}.csv")), &buf)?;
    let geo = serde_json::to_string(&node_geojson(inst, evs))?;
    write_atomic(&out_dir.join(format!("{stem}.geojson")), geo.as_bytes())?;
    Ok(())
}

pub fn compare_gf(
    manifest_path: &Path,
    cfg: &CompareConfig,
    out_dir: &Path,
) -> Result<Vec<CompareRow>> {
    let (manifest, dir) = Manifest::load(manifest_path)?;
    if manifest.instances.is_empty() {
        bail!("manifest has no instances");
    }
    let instances = manifest
        .instances
        .iter()
        .map(|e| manifest.load_instance(&dir, e))
        .collect::<Result<Vec<_>>>()?;
    let nodes_dir = out_dir.join("nodes");
    std::fs::create_dir_all(&nodes_dir)?;

    let growth = match &cfg.growth {
        Some(g) => g.clone(),
        None => {
            let first = &manifest.instances[0];
            let cand = run_one(&first.name, &instances[0], cfg.candidate_method, &cfg.solve);
            let x: Schedule = cand.schedule.with_context(|| {
                format!("no candidate: {}", cand.row.skipped.unwrap_or_default())
            })?;
            let (g, totals) = generate_growth_function(&instances, &x)?;
            log::info!("growth function fitted to cumulative totals {totals:?}");
            g
        }
    };
    let mut buf = Vec::new();
    growth.write_csv(&mut buf)?;
    write_atomic(&out_dir.join("growth.csv"), &buf)?;

    let rows = manifest
        .instances
        .par_iter()
        .zip(instances.par_iter())
        .map(|(entry, inst)| -> Result<CompareRow> {
            let cov = CoverageTensor::build(inst);
            let gf = GfInstance::from_instance(inst, &cfg.params, growth.clone())?;
            let sol = solve_gf(&gf, cfg.solve.solver.as_ref())?;
            let x_gf = sol.to_schedule();
            let adjusted = adjust_solution_max_outlets(inst, &x_gf);
            let mc = run_one(&entry.name, inst, cfg.mc_method, &cfg.solve);
            let x_mc = mc.schedule.with_context(|| {
                format!(
                    "{}: no MC solution: {}",
                    entry.name,
                    mc.row.skipped.unwrap_or_default()
                )
            })?;
            let name = &entry.name;
            write_nodes(
                &nodes_dir,
                &format!("{name}_gf"),
                inst,
                &gf_node_evs(&gf, &sol),
            )?;
            write_nodes(
                &nodes_dir,
                &format!("{name}_gf_under_mc"),
                inst,
                &mc_node_evs(inst, &cov, &x_gf),
            )?;
            write_nodes(
                &nodes_dir,
                &format!("{name}_mc"),
                inst,
                &mc_node_evs(inst, &cov, &x_mc),
            )?;
            let row = CompareRow {
                instance: name.clone(),
                gf_objective: gf_objective(&gf, &sol),
                gf: evaluate_under_mc(&cov, &x_gf),
                gf_adjusted: evaluate_under_mc(&cov, &adjusted),
                mc: cov.value(&x_mc),
                mc_method: cfg.mc_method.name().to_string(),
            };
            log::info!(
                "{name}: GF objective {:.3}, same outlets under MC {:.3}",
                row.gf_objective,
                row.gf
            );
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    write_atomic(&out_dir.join("comparison.csv"), &w.into_inner()?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for s in summarize(&rows) {
        w.serialize(s)?;
    }
    write_atomic(&out_dir.join("comparison_summary.csv"), &w.into_inner()?)?;
    Ok(rows)
}

/// 5th percentile, median and 95th percentile of each column.
pub fn summarize(rows: &[CompareRow]) -> Vec<ColumnSummary> {
    type Column = (&'static str, fn(&CompareRow) -> f64);
    let cols: [Column; 3] = [
        ("GF", |r| r.gf),
        ("GF (Adjusted)", |r| r.gf_adjusted),
        ("MC", |r| r.mc),
    ];
    cols.iter()
        .filter_map(|(name, get)| {
            let v: Vec<f64> = rows.iter().map(get).collect();
            spread(&v).map(|(p5, median, p95)| ColumnSummary {
                column: name.to_string(),
                p5,
                median,
                p95,
            })
        })
        .collect()
}
