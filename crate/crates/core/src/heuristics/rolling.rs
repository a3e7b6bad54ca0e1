//! Rolling horizon: one single-period covering model per period, each fixed
//! before moving on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::CoverageTensor;
use crate::exact::{best_single_period, EnumerationBudget, ExactError};
use crate::instance::Instance;
use crate::milp::{
    build_mc_period, schedule_from_values, solve_external, start_values, MilpError, SolveStatus,
    SolverConfig,
};
use crate::solution::Schedule;

use super::{Clock, HeuristicResult, MoveKind, Termination, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Allocation {
    /// The total limit split evenly over periods.
    Even,
    /// The first period gets `geometric_first_s`, each later one half the
    /// previous, never more than what is left.
    Geometric,
}

impl std::str::FromStr for Allocation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "even" => Ok(Allocation::Even),
            "geometric" | "geom" => Ok(Allocation::Geometric),
            other => Err(format!("unknown allocation `{other}` (even or geometric)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingHorizonConfig {
    pub allocation: Allocation,
    pub total_time_limit_s: f64,
    pub geometric_first_s: f64,
}

impl Default for RollingHorizonConfig {
    fn default() -> Self {
        RollingHorizonConfig {
            allocation: Allocation::Even,
            total_time_limit_s: 7200.0,
            geometric_first_s: 3600.0,
        }
    }
}

/// Planned per-period limits. They never sum past the total.
pub fn period_time_limits(config: &RollingHorizonConfig, horizon: usize) -> Vec<f64> {
    let total = config.total_time_limit_s.max(0.0);
    match config.allocation {
        Allocation::Even => vec![total / horizon.max(1) as f64; horizon],
        Allocation::Geometric => {
            let mut left = total;
            (0..horizon)
                .map(|t| {
                    let l = (config.geometric_first_s * 0.5f64.powi(t as i32)).min(left);
                    left -= l;
                    l
                })
                .collect()
        }
    }
}

/// How each single-period model is solved. The external solver is tried
/// first when configured; enumeration takes over when it is absent or
/// fails, as long as the period fits the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSolver {
    pub external: Option<SolverConfig>,
    pub enumeration: EnumerationBudget,
}

impl PeriodSolver {
    pub fn enumeration() -> Self {
        PeriodSolver {
            external: None,
            enumeration: EnumerationBudget::default(),
        }
    }

    pub fn external(config: SolverConfig) -> Self {
        PeriodSolver {
            external: Some(config),
            enumeration: EnumerationBudget::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RollingError {
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(
        "period {period}: solver reported `{status}` and enumeration is not possible: {source}"
    )]
    Unsolved {
        period: usize,
        status: SolveStatus,
        source: ExactError,
    },
}

pub fn rolling_horizon(
    inst: &Instance,
    cov: &CoverageTensor,
    config: &RollingHorizonConfig,
    solver: &PeriodSolver,
) -> Result<HeuristicResult, RollingError> {
    let clock = Clock::start();
    let plan = period_time_limits(config, inst.horizon);
    let mut x = Schedule::initial(inst);
    let mut trace = Vec::new();
    let mut hit_limit = false;
    for t in 0..inst.horizon {
        let prev: Vec<u32> = if t == 0 {
            inst.stations.iter().map(|s| s.initial_outlets).collect()
        } else {
            x.levels[t - 1].clone()
        };
        let left = (config.total_time_limit_s - clock.elapsed()).max(0.0);
        let limit = plan[t].min(left);
        let mut status = SolveStatus::NotConfigured;
        let mut levels = None;
        if let Some(ext) = &solver.external {
            let model = build_mc_period(inst, cov, t, &prev)?;
            let mut warm = x.clone();
            warm.levels[t] = prev.clone();
            let start = start_values(inst, &warm, &[t]);
            let out = solve_external(&model, Some(&ext.with_time_limit(limit)), Some(&start))?;
            if out.status == SolveStatus::FeasibleTimeout {
                hit_limit = true;
            }
            if out.has_solution() {
                let got = schedule_from_values(inst, &out.values).levels[t].clone();
                levels = Some(
                    got.iter()
                        .zip(&prev)
                        .map(|(a, b)| *a.max(b))
                        .collect::<Vec<u32>>(),
                );
            } else {
                log::warn!(
                    "period {}: solver reported `{}`, enumerating instead",
                    t + 1,
                    out.status
                );
            }
            status = out.status;
        }
        let levels = match levels {
            Some(l) => l,
            None => {
                best_single_period(inst, cov, t, &prev, solver.enumeration)
                    .map_err(|source| RollingError::Unsolved {
                        period: t + 1,
                        status: status.clone(),
                        source,
                    })?
                    .0
            }
        };
        for tp in t..inst.horizon {
            x.levels[tp] = levels.clone();
        }
        if !x.is_feasible(inst) {
            return Err(MilpError::Solution(format!(
                "period {} solution violates the budget or bounds",
                t + 1
            ))
            .into());
        }
        trace.push(TraceEvent {
            kind: MoveKind::Period,
            period: t + 1,
            station: None,
            k: None,
            partner: None,
            score: limit,
            f: cov.value(&x),
            elapsed_s: clock.elapsed(),
        });
    }
    let value = cov.value(&x);
    Ok(HeuristicResult {
        schedule: x,
        value,
        wall_time_s: clock.elapsed(),
        trace,
        seed: None,
        termination: if hit_limit {
            Termination::TimeLimit
        } else {
            Termination::Completed
        },
        examined: 0,
        filtered: 0,
    })
}
