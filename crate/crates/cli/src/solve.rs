//! The `solve` verb: one method over every instance of a manifest.

use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use evsite::exact::{brute_force_optimum, EnumerationBudget};
use evsite::heuristics::{
    grasp, greedy, rolling_horizon, Allocation, GraspConfig, GreedyConfig, HeuristicResult,
    PeriodSolver, RollingHorizonConfig, ScoreMode,
};
use evsite::milp::{
    build_mc, build_sl, compute_bounds, schedule_from_values, solve_external, SolverConfig,
};
use evsite::report::RunRow;
use evsite::util::write_atomic;
use evsite::{CoverageTensor, Instance, Schedule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactEnum,
    McExternal,
    SlExternal,
    GreedyM,
    GreedyH,
    GraspM,
    GraspH,
    RhEven,
    RhGeom,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ExactEnum => "exact-enum",
            Method::McExternal => "mc-external",
            Method::SlExternal => "sl-external",
            Method::GreedyM => "greedy-m",
            Method::GreedyH => "greedy-h",
            Method::GraspM => "grasp-m",
            Method::GraspH => "grasp-h",
            Method::RhEven => "rh-even",
            Method::RhGeom => "rh-geom",
        }
    }

    fn mode(self) -> ScoreMode {
        match self {
            Method::GreedyH | Method::GraspH => ScoreMode::Hyperoptic,
            _ => ScoreMode::Myopic,
        }
    }

    fn allocation(self) -> Allocation {
        match self {
            Method::RhGeom => Allocation::Geometric,
            _ => Allocation::Even,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub time_limit_s: f64,
    pub solver: Option<SolverConfig>,
    pub seed: u64,
    pub alpha: Option<f64>,
    /// Overrides the method's own score mode.
    pub mode: Option<ScoreMode>,
    /// Overrides the method's own allocation.
    pub allocation: Option<Allocation>,
    pub enumeration: EnumerationBudget,
}

/// What one instance produced.
pub struct Outcome {
    pub row: RunRow,
    pub schedule: Option<Schedule>,
    pub result: Option<HeuristicResult>,
}

fn skipped(name: &str, method: Method, reason: String) -> Outcome {
    Outcome {
        row: RunRow {
            instance: name.to_string(),
            method: method.name().to_string(),
            f: None,
            gap: None,
            wall_time_s: 0.0,
            termination: "skipped".into(),
            skipped: Some(reason),
        },
        schedule: None,
        result: None,
    }
}

fn from_heuristic(name: &str, method: Method, res: HeuristicResult) -> Outcome {
    Outcome {
        row: RunRow {
            instance: name.to_string(),
            method: method.name().to_string(),
            f: Some(res.value),
            gap: None,
            wall_time_s: res.wall_time_s,
            termination: res.termination.to_string(),
            skipped: None,
        },
        schedule: Some(res.schedule.clone()),
        result: Some(res),
    }
}

pub fn run_one(name: &str, inst: &Instance, method: Method, cfg: &SolveConfig) -> Outcome {
    let cov = CoverageTensor::build(inst);
    let mode = cfg.mode.unwrap_or(method.mode());
    let seed = evsite::util::mix_all(&[cfg.seed, u64::from(inst.meta.index)]);
    match method {
        Method::GreedyM | Method::GreedyH => {
            from_heuristic(name, method, greedy(inst, &cov, &GreedyConfig { mode }))
        }
        Method::GraspM | Method::GraspH => {
            let mut gc = GraspConfig {
                mode,
                time_limit_s: cfg.time_limit_s,
                seed,
                ..GraspConfig::default()
            };
            if let Some(a) = cfg.alpha {
                gc.alpha = a;
            }
            from_heuristic(name, method, grasp(inst, &cov, &gc))
        }
        Method::RhEven | Method::RhGeom => {
            let rc = RollingHorizonConfig {
                allocation: cfg.allocation.unwrap_or(method.allocation()),
                total_time_limit_s: cfg.time_limit_s,
                ..RollingHorizonConfig::default()
            };
            let solver = match &cfg.solver {
                Some(s) => PeriodSolver::external(s.clone()),
                None => PeriodSolver::enumeration(),
            };
            match rolling_horizon(inst, &cov, &rc, &solver) {
                Ok(res) => from_heuristic(name, method, res),
                Err(e) => skipped(name, method, e.to_string()),
            }
        }
        Method::ExactEnum => {
            let clock = std::time::Instant::now();
            match brute_force_optimum(inst, &cov, cfg.enumeration) {
                Ok((x, f)) => Outcome {
                    row: RunRow {
                        instance: name.to_string(),
                        method: method.name().to_string(),
                        f: Some(f),
                        gap: None,
                        wall_time_s: clock.elapsed().as_secs_f64(),
                        termination: "optimal".into(),
                        skipped: None,
                    },
                    schedule: Some(x),
                    result: None,
                },
                Err(e) => skipped(name, method, e.to_string()),
            }
        }
        Method::McExternal | Method::SlExternal => {
            let Some(solver) = &cfg.solver else {
                return skipped(
                    name,
                    method,
                    "no solver command (set --solver-cmd or EVSITE_SOLVER_CMD)".into(),
                );
            };
            let model = if method == Method::McExternal {
                build_mc(inst, &cov)
            } else {
                build_sl(inst, &cov, &compute_bounds(inst), Default::default())
            };
            let out = model.and_then(|m| {
                solve_external(&m, Some(&solver.with_time_limit(cfg.time_limit_s)), None)
            });
            match out {
                Ok(out) if out.has_solution() => {
                    let x = schedule_from_values(inst, &out.values);
                    Outcome {
                        row: RunRow {
                            instance: name.to_string(),
                            method: method.name().to_string(),
                            f: Some(cov.value(&x)),
                            gap: None,
                            wall_time_s: out.wall_time_s,
                            termination: out.status.to_string(),
                            skipped: None,
                        },
                        schedule: Some(x),
                        result: None,
                    }
                }
                Ok(out) => skipped(name, method, out.status.to_string()),
                Err(e) => skipped(name, method, e.to_string()),
            }
        }
    }
}

/// Runs `method` on every instance and writes `runs.csv`, one schedule per
/// instance under `solutions/` and heuristic traces under `traces/`.
/// Returns the rows in manifest order.
pub fn solve(
    manifest_path: &Path,
    method: Method,
    cfg: &SolveConfig,
    out_dir: &Path,
) -> Result<Vec<RunRow>> {
    let (manifest, dir) = Manifest::load(manifest_path)?;
    std::fs::create_dir_all(out_dir.join("solutions"))?;
    std::fs::create_dir_all(out_dir.join("traces"))?;
    let rows = manifest
        .instances
        .par_iter()
        .map(|entry| -> Result<RunRow> {
            let inst = manifest.load_instance(&dir, entry)?;
            log::info!("{} on {}", method.name(), entry.name);
            let outcome = run_one(&entry.name, &inst, method, cfg);
            if let Some(x) = &outcome.schedule {
                let path = out_dir
                    .join("solutions")
                    .join(format!("{}.json", entry.name));
                write_atomic(&path, serde_json::to_string(x)?.as_bytes())?;
            }
            if let Some(res) = &outcome.result {
                let mut buf = Vec::new();
                res.write_trace(&mut buf)?;
                write_atomic(
                    &out_dir.join("traces").join(format!("{}.jsonl", entry.name)),
                    &buf,
                )?;
            }
            Ok(outcome.row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    evsite::report::write_rows(&rows, &mut buf).context("writing runs")?;
    write_atomic(&out_dir.join("runs.csv"), &buf)?;
    Ok(rows)
}
