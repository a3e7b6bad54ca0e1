//! `evsite`: generate datasets, solve them, compare models and report.

mod compare;
mod manifest;
mod solve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use evsite::exact::EnumerationBudget;
use evsite::growth::{GfInstance, GfParams, GrowthFunction};
use evsite::heuristics::{Allocation, ScoreMode};
use evsite::milp::{
    build_gf, build_mc, build_sl, compute_bounds, write_lp, SolverConfig, VarKind, SOLVER_ENV,
};
use evsite::report::{fill_gaps, read_rows, summarize, write_rows, write_summary};
use evsite::util::write_atomic;
use evsite::{CoverageTensor, DatasetKind, Instance};

use compare::{compare_gf, CompareConfig};
use solve::{solve, Method, SolveConfig};

#[derive(Parser)]
#[command(
    name = "evsite",
    version,
    about = "Multi-period EV charging outlet placement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Seconds; heuristics use wall clock, external solves pass it on.
    #[arg(long, global = true, default_value_t = 7200.0)]
    time_limit: f64,
    /// Solver command template with {lp_path} {sol_path} {time_limit} {start_path}.
    #[arg(long, global = true, env = SOLVER_ENV)]
    solver_cmd: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// GRASP restricted candidate list parameter.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Overrides the score mode of greedy and GRASP methods (myopic or hyperoptic).
    #[arg(long, global = true)]
    mode: Option<ScoreMode>,
    /// Overrides the rolling-horizon time allocation (even or geometric).
    #[arg(long, global = true)]
    allocation: Option<Allocation>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Formulation {
    Mc,
    Sl,
    Gf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and its manifest.
    Generate {
        #[arg(long)]
        kind: DatasetKind,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Network CSV; a synthetic network is drawn from the seed otherwise.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one method on every instance of a manifest.
    Solve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge run files, fill gaps and summarize per method.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Growth-function model against the covering model.
    CompareGf {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Growth function CSV; fitted to a candidate solution otherwise.
        #[arg(long)]
        growth: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "grasp-m")]
        mc_method: Method,
        #[arg(long, value_enum, default_value = "greedy-h")]
        candidate_method: Method,
    },
    /// Write a model in LP format and print its size.
    Export {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        formulation: Formulation,
        #[arg(long)]
        out: PathBuf,
        /// Growth function CSV, required for `gf`.
        #[arg(long)]
        growth: Option<PathBuf>,
    },
}

impl Cli {
    fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            time_limit_s: self.time_limit,
            solver: self
                .solver_cmd
                .as_deref()
                .filter(|c| !c.trim().is_empty())
                .map(|c| SolverConfig::new(c, self.time_limit)),
            seed: self.seed,
            alpha: self.alpha,
            mode: self.mode,
            allocation: self.allocation,
            enumeration: EnumerationBudget::default(),
        }
    }
}

fn export(
    instance: &Path,
    formulation: Formulation,
    out: &Path,
    growth: Option<&Path>,
) -> Result<()> {
    let inst =
        Instance::load(instance).with_context(|| format!("loading {}", instance.display()))?;
    let model = match formulation {
        Formulation::Mc => build_mc(&inst, &CoverageTensor::build(&inst))?,
        Formulation::Sl => build_sl(
            &inst,
            &CoverageTensor::build(&inst),
            &compute_bounds(&inst),
            Default::default(),
        )?,
        Formulation::Gf => {
            let Some(path) = growth else {
                bail!("the gf formulation needs a growth function (--growth)");
            };
            let g = GrowthFunction::load(path)?;
            build_gf(&GfInstance::from_instance(&inst, &GfParams::default(), g)?)?
        }
    };
    write_atomic(out, write_lp(&model)?.as_bytes())?;
    println!(
        "variables {} (binary {}, integer {}, continuous {}) constraints {}",
        model.n_vars(),
        model.count_kind(VarKind::Binary),
        model.count_kind(VarKind::Integer),
        model.count_kind(VarKind::Continuous),
        model.n_rows()
    );
    Ok(())
}

fn report(runs: &[PathBuf], out: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for p in runs {
        let f = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        rows.extend(read_rows(f)?);
    }
    fill_gaps(&mut rows);
    let summary = summarize(&rows)?;
    std::fs::create_dir_all(out)?;
    let mut buf = Vec::new();
    write_rows(&rows, &mut buf)?;
    write_atomic(&out.join("rows.csv"), &buf)?;
    let mut buf = Vec::new();
    write_summary(&summary, &mut buf)?;
    write_atomic(&out.join("summary.csv"), &buf)?;
    for s in &summary {
        let g = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<12} solved {:>3} skipped {:>3} gap p5 {} mean {} p95 {} best {:>3} time {}s",
            s.method,
            s.solved,
            s.skipped,
            g(s.gap_p5),
            g(s.gap_mean),
            g(s.gap_p95),
            s.n_best,
            g(s.time_mean_s)
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Generate {
            kind,
            count,
            network,
            out,
        } => {
            let m = manifest::generate(*kind, network.as_deref(), cli.seed, *count, out)?;
            println!(
                "{} instances written to {}",
                m.instances.len(),
                out.display()
            );
        }
        Command::Solve {
            manifest,
            method,
            out,
        } => {
            let rows = solve(manifest, *method, &cli.solve_config(), out)?;
            let skipped = rows.iter().filter(|r| r.skipped.is_some()).count();
            println!(
                "{}: {} solved, {} skipped",
                method.name(),
                rows.len() - skipped,
                skipped
            );
            if skipped > 0 {
                for r in rows.iter().filter(|r| r.skipped.is_some()) {
                    eprintln!(
                        "skipped {}: {}",
                        r.instance,
                        r.skipped.as_deref().unwrap_or("")
                    );
                }
                return Ok(ExitCode::from(2));
            }
        }
        Command::Report { runs, out } => report(runs, out)?,
        Command::CompareGf {
            manifest,
            out,
            growth,
            mc_method,
            candidate_method,
        } => {
            let growth = growth.as_deref().map(GrowthFunction::load).transpose()?;
            let cfg = CompareConfig {
                solve: cli.solve_config(),
                mc_method: *mc_method,
                candidate_method: *candidate_method,
                growth,
                params: GfParams::default(),
            };
            let rows = compare_gf(manifest, &cfg, out)?;
            for s in compare::summarize(&rows) {
                println!(
                    "{:<14} p5 {:.3} median {:.3} p95 {:.3}",
                    s.column, s.p5, s.median, s.p95
                );
            }
        }
        Command::Export {
            instance,
            formulation,
            out,
            growth,
        } => export(instance, *formulation, out, growth.as_deref())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
