//! Runs an external MILP solver on an exported LP file.
//!
//! The solver is a shell command template. `{lp_path}`, `{sol_path}` and
//! `{time_limit}` are substituted, and `{start_path}` becomes a file of
//! `name value` lines when a start is given (or nothing otherwise). Every run
//! happens in its own temporary directory.
//!
//! Two solution styles are read: HiGHS files (a `Model status` line, then
//! `# Columns` followed by `name value` lines) and CBC files (a first line
//! like `Optimal - objective value 12`, then `index name value [reduced]`
//! lines). Plain `name value` pairs are accepted as a last resort.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::lp::write_lp;
use super::model::MilpModel;
use super::MilpError;

/// Environment variable holding the default solver command template.
pub const SOLVER_ENV: &str = "EVSITE_SOLVER_CMD";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub command: String,
    pub time_limit_s: f64,
    /// Copy the LP and solution files here after the run.
    pub keep_dir: Option<PathBuf>,
}

impl SolverConfig {
    pub fn new(command: impl Into<String>, time_limit_s: f64) -> Self {
        SolverConfig {
            command: command.into(),
            time_limit_s,
            keep_dir: None,
        }
    }

    /// The command from [`SOLVER_ENV`], if set and not blank.
    pub fn from_env(time_limit_s: f64) -> Option<Self> {
        std::env::var(SOLVER_ENV)
            .ok()
            .filter(|c| !c.trim().is_empty())
            .map(|c| SolverConfig::new(c, time_limit_s))
    }

    /// Template for the bundled HiGHS wrapper script.
    pub fn highs_script(script: &Path, time_limit_s: f64) -> Self {
        SolverConfig::new(
            format!(
                "python3 {} {{lp_path}} {{sol_path}} {{time_limit}} {{start_path}}",
                shell_quote(&script.display().to_string())
            ),
            time_limit_s,
        )
    }

    pub fn with_time_limit(&self, time_limit_s: f64) -> Self {
        SolverConfig {
            time_limit_s,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped by the time limit with an incumbent.
    FeasibleTimeout,
    Infeasible,
    Error(String),
    /// No solver command was given.
    NotConfigured,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveStatus::Optimal => f.write_str("optimal"),
            SolveStatus::FeasibleTimeout => f.write_str("feasible-timeout"),
            SolveStatus::Infeasible => f.write_str("infeasible"),
            SolveStatus::Error(e) => write!(f, "error: {e}"),
            SolveStatus::NotConfigured => f.write_str("external solver not configured"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Objective recomputed from the returned values.
    pub objective: Option<f64>,
    /// Objective as reported by the solver, when it reports one.
    pub reported_objective: Option<f64>,
    pub values: BTreeMap<String, f64>,
    pub wall_time_s: f64,
}

impl SolveOutcome {
    fn bare(status: SolveStatus, wall_time_s: f64) -> Self {
        SolveOutcome {
            status,
            objective: None,
            reported_objective: None,
            values: BTreeMap::new(),
            wall_time_s,
        }
    }

    pub fn has_solution(&self) -> bool {
        matches!(
            self.status,
            SolveStatus::Optimal | SolveStatus::FeasibleTimeout
        )
    }

    pub fn value(&self, name: &str) -> f64 {
        self.values.get(name).copied().unwrap_or(0.0)
    }

    /// Values in model order; names missing from the solution read as 0.
    pub fn dense(&self, model: &MilpModel) -> Vec<f64> {
        model
            .variables
            .iter()
            .map(|v| self.value(&v.name))
            .collect()
    }
}

/// Single-quotes `s` for `sh`.
fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Parsed solution file.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub values: BTreeMap<String, f64>,
}

fn highs_status(line: &str, primal_feasible: bool) -> SolveStatus {
    let l = line.trim().to_ascii_lowercase();
    if l == "optimal" {
        SolveStatus::Optimal
    } else if l.contains("infeasible") {
        SolveStatus::Infeasible
    } else if (l.contains("time limit") || l.contains("limit reached") || l.contains("interrupt"))
        && primal_feasible
    {
        SolveStatus::FeasibleTimeout
    } else if l.contains("time limit") {
        SolveStatus::Error("time limit reached without an incumbent".into())
    } else {
        SolveStatus::Error(format!("solver status `{}`", line.trim()))
    }
}

fn parse_highs(text: &str) -> Result<SolutionFile, MilpError> {
    let lines: Vec<&str> = text.lines().collect();
    let status_line = lines
        .iter()
        .position(|l| l.trim() == "Model status")
        .and_then(|p| lines.get(p + 1))
        .ok_or_else(|| MilpError::Solution("missing model status".into()))?;
    let mut values = BTreeMap::new();
    let mut objective = None;
    let mut feasible = false;
    if let Some(p) = lines
        .iter()
        .position(|l| l.trim() == "# Primal solution values")
    {
        feasible = lines.get(p + 1).is_some_and(|l| l.trim() == "Feasible");
        let mut k = p + 1;
        while k < lines.len() && !lines[k].starts_with("# Columns") {
            if let Some(v) = lines[k].strip_prefix("Objective ") {
                objective = v.trim().parse().ok();
            }
            k += 1;
        }
        let n: usize = lines
            .get(k)
            .and_then(|l| l.trim_start_matches("# Columns").trim().parse().ok())
            .unwrap_or(0);
        for l in lines.iter().skip(k + 1).take(n) {
            let mut it = l.split_whitespace();
            if let (Some(name), Some(v)) = (it.next(), it.next()) {
                let v: f64 = v
                    .parse()
                    .map_err(|_| MilpError::Solution(format!("bad value line `{l}`")))?;
                values.insert(name.to_string(), v);
            }
        }
    }
    Ok(SolutionFile {
        status: highs_status(status_line, feasible && !values.is_empty()),
        objective,
        values,
    })
}

fn parse_cbc(text: &str) -> Result<SolutionFile, MilpError> {
    let mut lines = text.lines();
    let head = lines.next().unwrap_or("").trim();
    let lower = head.to_ascii_lowercase();
    let objective = lower
        .rsplit_once("objective value")
        .and_then(|(_, v)| v.trim().parse().ok());
    let mut values = BTreeMap::new();
    for l in lines {
        let toks: Vec<&str> = l.split_whitespace().filter(|t| *t != "**").collect();
        if toks.len() >= 3 && toks[0].parse::<usize>().is_ok() {
            let v: f64 = toks[2]
                .parse()
                .map_err(|_| MilpError::Solution(format!("bad value line `{l}`")))?;
            values.insert(toks[1].to_string(), v);
        }
    }
    let status = if lower.starts_with("optimal") {
        SolveStatus::Optimal
    } else if lower.contains("infeasible") {
        SolveStatus::Infeasible
    } else if lower.starts_with("stopped") && objective.is_some() && !values.is_empty() {
        SolveStatus::FeasibleTimeout
    } else {
        SolveStatus::Error(format!("solver status `{head}`"))
    };
    Ok(SolutionFile {
        status,
        objective,
        values,
    })
}

fn parse_pairs(text: &str) -> Result<SolutionFile, MilpError> {
    let mut values = BTreeMap::new();
    for l in text.lines() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if let [name, v] = toks.as_slice() {
            if let Ok(v) = v.parse::<f64>() {
                values.insert(name.to_string(), v);
            }
        }
    }
    if values.is_empty() {
        return Err(MilpError::Solution("no values found".into()));
    }
    Ok(SolutionFile {
        status: SolveStatus::Optimal,
        objective: None,
        values,
    })
}

/// Reads either supported solution style.
pub fn parse_solution(text: &str) -> Result<SolutionFile, MilpError> {
    if text.lines().any(|l| l.trim() == "Model status") {
        parse_highs(text)
    } else if text
        .lines()
        .next()
        .is_some_and(|l| l.to_ascii_lowercase().contains("objective value"))
    {
        parse_cbc(text)
    } else {
        parse_pairs(text)
    }
}

/// Exports `model`, runs the solver and reads its answer. Without a config
/// the status is [`SolveStatus::NotConfigured`].
pub fn solve_external(
    model: &MilpModel,
    config: Option<&SolverConfig>,
    start: Option<&BTreeMap<String, f64>>,
) -> Result<SolveOutcome, MilpError> {
    let clock = Instant::now();
    let Some(config) = config else {
        return Ok(SolveOutcome::bare(SolveStatus::NotConfigured, 0.0));
    };
    let text = write_lp(model)?;
    let dir = tempfile::tempdir().map_err(MilpError::Io)?;
    let lp_path = dir.path().join("model.lp");
    let sol_path = dir.path().join("model.sol");
    std::fs::write(&lp_path, text).map_err(MilpError::Io)?;
    let start_arg = match start {
        Some(values) => {
            let path = dir.path().join("start.txt");
            let mut body = String::new();
            for (k, v) in values {
                body.push_str(&format!("{k} {v}\n"));
            }
            std::fs::write(&path, body).map_err(MilpError::Io)?;
            shell_quote(&path.display().to_string())
        }
        None => String::new(),
    };
    let cmd = config
        .command
        .replace("{lp_path}", &shell_quote(&lp_path.display().to_string()))
        .replace("{sol_path}", &shell_quote(&sol_path.display().to_string()))
        .replace(
            "{time_limit}",
            &super::lp::fmt_num(config.time_limit_s.max(0.0)),
        )
        .replace("{start_path}", &start_arg);
    log::debug!("running solver: {cmd}");
    let output = match Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .current_dir(dir.path())
        .output()
    {
        Ok(o) => o,
        Err(e) => {
            return Ok(SolveOutcome::bare(
                SolveStatus::Error(format!("cannot start solver: {e}")),
                clock.elapsed().as_secs_f64(),
            ))
        }
    };
    if let Some(keep) = &config.keep_dir {
        std::fs::create_dir_all(keep).map_err(MilpError::Io)?;
        for p in [&lp_path, &sol_path] {
            if p.exists() {
                std::fs::copy(p, keep.join(p.file_name().expect("file"))).map_err(MilpError::Io)?;
            }
        }
    }
    let wall = clock.elapsed().as_secs_f64();
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let tail: String = stderr
            .lines()
            .rev()
            .take(5)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect::<Vec<_>>()
            .join(" | ");
        return Ok(SolveOutcome::bare(
            SolveStatus::Error(format!("solver exited with {}: {tail}", output.status)),
            wall,
        ));
    }
    let text = match std::fs::read_to_string(&sol_path) {
        Ok(t) => t,
        Err(_) => {
            return Ok(SolveOutcome::bare(
                SolveStatus::Error("solver wrote no solution file".into()),
                wall,
            ))
        }
    };
    let sol = parse_solution(&text)?;
    for name in sol.values.keys() {
        if model.var(name).is_none() {
            return Err(MilpError::UnknownVariable(name.clone()));
        }
    }
    let mut outcome = SolveOutcome {
        status: sol.status,
        objective: None,
        reported_objective: sol.objective,
        values: sol.values,
        wall_time_s: wall,
    };
    if outcome.has_solution() {
        outcome.objective = Some(model.objective_value(&outcome.dense(model)));
    }
    Ok(outcome)
}
