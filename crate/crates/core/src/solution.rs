//! Outlet decisions.
//!
//! [`Solution`] is the binary ladder `x[j][k][t]` ("station j has at least k
//! outlets in period t"). Every feasible ladder is equivalent to a
//! [`Schedule`] of outlet counts per period, which is what the solvers
//! manipulate.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;

/// Slack allowed when comparing spend against a budget.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SolutionError {
    #[error("solution shape does not match the instance: {0}")]
    Shape(String),
    #[error("ladder violated at station {j}, outlet {k}, period {t}")]
    Ladder { j: usize, k: u32, t: usize },
    #[error("persistence violated at station {j}, outlet {k}, period {t}")]
    Persistence { j: usize, k: u32, t: usize },
    #[error("period {t} out of range 1..={horizon}")]
    Period { t: usize, horizon: usize },
}

/// Binary ladder `x[j][k-1][t]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<Vec<Vec<bool>>>,
}

/// Outlet count per period and station, `levels[t][j]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub levels: Vec<Vec<u32>>,
}

impl Solution {
    /// All-zero ladder (valid only when every station starts empty).
    pub fn zeros(inst: &Instance) -> Self {
        Solution {
            x: inst
                .stations
                .iter()
                .map(|s| vec![vec![false; inst.horizon]; s.max_outlets as usize])
                .collect(),
        }
    }

    fn check_shape(&self, inst: &Instance) -> Result<(), SolutionError> {
        if self.x.len() != inst.n_stations() {
            return Err(SolutionError::Shape(format!(
                "{} stations, expected {}",
                self.x.len(),
                inst.n_stations()
            )));
        }
        for (j, rows) in self.x.iter().enumerate() {
            if rows.len() != inst.max_outlets(j) as usize {
                return Err(SolutionError::Shape(format!(
                    "station {j}: {} outlet rows",
                    rows.len()
                )));
            }
            if rows.iter().any(|r| r.len() != inst.horizon) {
                return Err(SolutionError::Shape(format!(
                    "station {j}: wrong period count"
                )));
            }
        }
        Ok(())
    }

    /// Outlet count implied by a ladder-valid column.
    fn count(&self, j: usize, t: usize) -> u32 {
        self.x[j].iter().take_while(|row| row[t]).count() as u32
    }

    /// Converts to a schedule, failing on the first ladder or persistence
    /// violation. Periods and outlets in errors are 1-based.
    pub fn to_schedule(&self, inst: &Instance) -> Result<Schedule, SolutionError> {
        self.check_shape(inst)?;
        let mut levels = vec![vec![0u32; inst.n_stations()]; inst.horizon];
        for (j, rows) in self.x.iter().enumerate() {
            for t in 0..inst.horizon {
                let n = self.count(j, t);
                if let Some(k) = rows.iter().skip(n as usize).position(|r| r[t]) {
                    return Err(SolutionError::Ladder {
                        j,
                        k: n + k as u32 + 1,
                        t: t + 1,
                    });
                }
                let prev = if t == 0 {
                    inst.stations[j].initial_outlets
                } else {
                    levels[t - 1][j]
                };
                if n < prev {
                    return Err(SolutionError::Persistence {
                        j,
                        k: n + 1,
                        t: t + 1,
                    });
                }
                levels[t][j] = n;
            }
        }
        Ok(Schedule { levels })
    }
}

impl Schedule {
    /// Every station kept at its initial outlet count.
    pub fn initial(inst: &Instance) -> Self {
        let start: Vec<u32> = inst.stations.iter().map(|s| s.initial_outlets).collect();
        Schedule {
            levels: vec![start; inst.horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    /// Outlets at station `j` just before period `t`.
    pub fn previous(&self, inst: &Instance, t: usize, j: usize) -> u32 {
        if t == 0 {
            inst.stations[j].initial_outlets
        } else {
            self.levels[t - 1][j]
        }
    }

    /// Money spent on station `j` in period `t`.
    pub fn station_spend(&self, inst: &Instance, t: usize, j: usize) -> f64 {
        let prev = self.previous(inst, t, j);
        let cur = self.levels[t][j];
        if cur <= prev {
            0.0
        } else {
            inst.costs.step_cost(j, prev, cur, t)
        }
    }

    /// Money spent in period `t`.
    pub fn spend(&self, inst: &Instance, t: usize) -> f64 {
        (0..inst.n_stations())
            .map(|j| self.station_spend(inst, t, j))
            .sum()
    }

    pub fn to_solution(&self, inst: &Instance) -> Solution {
        let mut sol = Solution::zeros(inst);
        for (t, row) in self.levels.iter().enumerate() {
            for (j, &level) in row.iter().enumerate() {
                for k in 0..level.min(inst.max_outlets(j)) as usize {
                    sol.x[j][k][t] = true;
                }
            }
        }
        sol
    }

    /// Bounds, persistence and budgets all hold.
    pub fn is_feasible(&self, inst: &Instance) -> bool {
        self.check(inst).is_empty()
    }

    /// Every violated constraint of the schedule (1-based periods).
    pub fn check(&self, inst: &Instance) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.levels.len() != inst.horizon
            || self.levels.iter().any(|r| r.len() != inst.n_stations())
        {
            out.push(Violation::Shape(
                "schedule dimensions do not match the instance".into(),
            ));
            return out;
        }
        for t in 0..inst.horizon {
            for j in 0..inst.n_stations() {
                let level = self.levels[t][j];
                if level > inst.max_outlets(j) {
                    out.push(Violation::Ladder {
                        j,
                        k: level,
                        t: t + 1,
                    });
                }
                let prev = self.previous(inst, t, j);
                if level < prev {
                    out.push(Violation::Persistence {
                        j,
                        k: prev,
                        t: t + 1,
                    });
                }
            }
            if out.is_empty() {
                let spend = self.spend(inst, t);
                if spend > inst.costs.budgets[t] + BUDGET_TOLERANCE {
                    out.push(Violation::Budget {
                        t: t + 1,
                        spend,
                        budget: inst.costs.budgets[t],
                    });
                }
            }
        }
        out
    }

    /// Total outlets installed in the final period.
    pub fn final_outlets(&self) -> u32 {
        self.levels.last().map(|r| r.iter().sum()).unwrap_or(0)
    }
}

/// A violated constraint. Periods and outlet numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Shape(String),
    Budget { t: usize, spend: f64, budget: f64 },
    Ladder { j: usize, k: u32, t: usize },
    Persistence { j: usize, k: u32, t: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every budget, ladder and persistence violation of `x`.
pub fn validate_solution(inst: &Instance, x: &Solution) -> FeasibilityReport {
    let mut violations = Vec::new();
    if let Err(e) = x.check_shape(inst) {
        violations.push(Violation::Shape(e.to_string()));
        return FeasibilityReport { violations };
    }
    for (j, rows) in x.x.iter().enumerate() {
        for t in 0..inst.horizon {
            for k in 1..rows.len() {
                if rows[k][t] && !rows[k - 1][t] {
                    violations.push(Violation::Ladder {
                        j,
                        k: k as u32 + 1,
                        t: t + 1,
                    });
                }
            }
            for (k, row) in rows.iter().enumerate() {
                let before = if t == 0 {
                    (k as u32) < inst.stations[j].initial_outlets
                } else {
                    row[t - 1]
                };
                if before && !row[t] {
                    violations.push(Violation::Persistence {
                        j,
                        k: k as u32 + 1,
                        t: t + 1,
                    });
                }
            }
        }
    }
    for t in 0..inst.horizon {
        let spend = raw_cost(inst, x, t);
        if spend > inst.costs.budgets[t] + BUDGET_TOLERANCE {
            violations.push(Violation::Budget {
                t: t + 1,
                spend,
                budget: inst.costs.budgets[t],
            });
        }
    }
    FeasibilityReport { violations }
}

fn raw_cost(inst: &Instance, x: &Solution, t: usize) -> f64 {
    let mut total = 0.0;
    for (j, rows) in x.x.iter().enumerate() {
        for (k, row) in rows.iter().enumerate() {
            let before = if t == 0 {
                (k as u32) < inst.stations[j].initial_outlets
            } else {
                row[t - 1]
            };
            let delta = f64::from(u8::from(row[t])) - f64::from(u8::from(before));
            total += inst.costs.cost(j, k as u32 + 1, t) * delta;
        }
    }
    total
}

/// Σ_j Σ_k c[j][k][t]·(x[j][k][t] − x[j][k][t−1]) for a 1-based period `t`.
pub fn solution_cost(inst: &Instance, x: &Solution, t: usize) -> Result<f64, SolutionError> {
    if t == 0 || t > inst.horizon {
        return Err(SolutionError::Period {
            t,
            horizon: inst.horizon,
        });
    }
    x.to_schedule(inst)?;
    Ok(raw_cost(inst, x, t - 1))
}

/// Draws a random feasible schedule: in each period outlets are added one at
/// a time at random stations until a random stopping point or until nothing
/// more fits.
pub fn random_feasible_schedule<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Schedule {
    let mut sched = Schedule::initial(inst);
    let m = inst.n_stations();
    for t in 0..inst.horizon {
        if t > 0 {
            let prev = sched.levels[t - 1].clone();
            sched.levels[t] = prev;
        }
        let mut spent = 0.0;
        let stop_p = rng.random::<f64>();
        loop {
            let options: Vec<usize> = (0..m)
                .filter(|&j| {
                    let level = sched.levels[t][j];
                    level < inst.max_outlets(j)
                        && spent + inst.costs.cost(j, level + 1, t)
                            <= inst.costs.budgets[t] + BUDGET_TOLERANCE
                })
                .collect();
            if options.is_empty() || rng.random::<f64>() < stop_p * 0.5 {
                break;
            }
            let j = options[rng.random_range(0..options.len())];
            spent += inst.costs.cost(j, sched.levels[t][j] + 1, t);
            sched.levels[t][j] += 1;
        }
    }
    sched
}
