#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

use evsite::milp::SolverConfig;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The solver from the environment, else the bundled HiGHS wrapper when
/// the `highspy` module imports.
pub fn solver(time_limit_s: f64) -> Option<SolverConfig> {
    if let Some(c) = SolverConfig::from_env(time_limit_s) {
        return Some(c);
    }
    let ok = Command::new("python3")
        .args(["-c", "import highspy"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false);
    ok.then(|| {
        SolverConfig::highs_script(
            &workspace_root().join("scripts/highs_solve.py"),
            time_limit_s,
        )
    })
}
