use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evsite::milp::parse_lp;
use evsite::report::{read_rows, RunRow};
use evsite::{CoverageTensor, Instance};

fn evsite(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evsite"))
        .args(args)
        .env_remove("EVSITE_SOLVER_CMD")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = evsite(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn rows(path: PathBuf) -> Vec<RunRow> {
    read_rows(std::fs::File::open(path).unwrap()).unwrap()
}

fn tiny_manifest(dir: &Path, count: &str, seed: &str) -> PathBuf {
    let out = dir.join(format!("tiny-{count}-{seed}"));
    ok(&[
        "generate",
        "--kind",
        "tiny",
        "--count",
        count,
        "--seed",
        seed,
        "--out",
        p(&out),
    ]);
    out
}

#[test]
fn empty_generation_writes_an_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_manifest(dir.path(), "0", "1");
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["instances"].as_array().unwrap().len(), 0);
}

#[test]
fn generation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&[
            "generate",
            "--kind",
            "simple",
            "--count",
            "2",
            "--seed",
            "5",
            "--out",
            p(out),
        ]);
    }
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 4, "{names:?}");
    for n in names {
        assert_eq!(
            std::fs::read(a.join(&n)).unwrap(),
            std::fs::read(b.join(&n)).unwrap(),
            "{n:?}"
        );
    }
    let c = dir.path().join("c");
    ok(&[
        "generate",
        "--kind",
        "simple",
        "--count",
        "1",
        "--seed",
        "6",
        "--out",
        p(&c),
    ]);
    assert_ne!(
        std::fs::read(a.join("simple-000.json")).unwrap(),
        std::fs::read(c.join("simple-000.json")).unwrap()
    );
}

#[test]
fn unknown_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = evsite(&["generate", "--kind", "suburban", "--out", p(dir.path())]);
    assert!(!out.status.success());
}

#[test]
fn external_method_without_solver_skips_every_instance() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny_manifest(dir.path(), "3", "2");
    let out_dir = dir.path().join("mc");
    let out = evsite(&[
        "solve",
        "--manifest",
        p(&m),
        "--method",
        "mc-external",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let rows = rows(out_dir.join("runs.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows
        .iter()
        .all(|r| r.f.is_none() && r.skipped.as_deref().is_some_and(|s| s.contains("solver"))));
}

#[test]
fn heuristic_gaps_against_enumeration_are_nonnegative() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny_manifest(dir.path(), "8", "3");
    let mut files = Vec::new();
    for method in ["exact-enum", "greedy-m", "greedy-h", "grasp-m"] {
        let out = dir.path().join(method);
        ok(&[
            "solve",
            "--manifest",
            p(&m),
            "--method",
            method,
            "--time-limit",
            "5",
            "--out",
            p(&out),
        ]);
        assert_eq!(std::fs::read_dir(out.join("solutions")).unwrap().count(), 8);
        files.push(out.join("runs.csv"));
    }
    let rep = dir.path().join("report");
    let mut args = vec!["report"];
    args.extend(files.iter().map(|f| p(f)));
    args.extend(["--out", p(&rep)]);
    ok(&args);
    let all = rows(rep.join("rows.csv"));
    assert_eq!(all.len(), 32);
    for r in &all {
        let gap = r.gap.unwrap();
        assert!(gap >= 0.0, "{r:?}");
        if r.method == "exact-enum" {
            assert_eq!(gap, 0.0);
        }
    }

    // shuffled input gives the same summary
    let rev = dir.path().join("report-rev");
    let mut args = vec!["report"];
    args.extend(files.iter().rev().map(|f| p(f)));
    args.extend(["--out", p(&rev)]);
    ok(&args);
    assert_eq!(
        std::fs::read(rep.join("summary.csv")).unwrap(),
        std::fs::read(rev.join("summary.csv")).unwrap()
    );
}

#[test]
fn grasp_runs_repeat_with_the_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny_manifest(dir.path(), "3", "4");
    let mut solutions = Vec::new();
    for out in ["r1", "r2"] {
        let out = dir.path().join(out);
        ok(&[
            "solve",
            "--manifest",
            p(&m),
            "--method",
            "grasp-h",
            "--seed",
            "11",
            "--alpha",
            "0.7",
            "--out",
            p(&out),
        ]);
        solutions.push(std::fs::read(out.join("solutions").join("tiny-001.json")).unwrap());
    }
    assert_eq!(solutions[0], solutions[1]);
}

#[test]
fn even_rolling_horizon_records_a_quarter_of_the_limit_per_period() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("simple");
    ok(&[
        "generate",
        "--kind",
        "simple",
        "--count",
        "1",
        "--seed",
        "2",
        "--out",
        p(&m),
    ]);
    let out = dir.path().join("rh");
    ok(&[
        "solve",
        "--manifest",
        p(&m),
        "--method",
        "rh-even",
        "--time-limit",
        "7200",
        "--out",
        p(&out),
    ]);
    let trace = std::fs::read_to_string(out.join("traces").join("simple-000.jsonl")).unwrap();
    let periods: Vec<serde_json::Value> = trace
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|e| e["kind"] == "period")
        .collect();
    assert_eq!(periods.len(), 4);
    for e in periods {
        assert!((e["score"].as_f64().unwrap() - 1800.0).abs() < 1.0, "{e}");
    }
}

#[test]
fn exported_models_have_the_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny_manifest(dir.path(), "1", "6");
    let inst_path = m.join("tiny-000.json");
    let inst = Instance::load(&inst_path).unwrap();
    let cov = CoverageTensor::build(&inst);
    let forced = cov
        .index()
        .triplets()
        .filter(|&(t, i, r)| cov.is_forced(t, i, r))
        .count();

    let mc_path = dir.path().join("mc.lp");
    let stdout = ok(&[
        "export",
        "--instance",
        p(&inst_path),
        "--formulation",
        "mc",
        "--out",
        p(&mc_path),
    ]);
    assert!(stdout.starts_with("variables "), "{stdout}");
    let mc = parse_lp(&std::fs::read_to_string(&mc_path).unwrap()).unwrap();
    let cover_rows = mc
        .constraints
        .iter()
        .filter(|c| c.name.starts_with("cover_"))
        .count();
    assert_eq!(cover_rows, inst.n_triplets() - forced);

    let sl_path = dir.path().join("sl.lp");
    ok(&[
        "export",
        "--instance",
        p(&inst_path),
        "--formulation",
        "sl",
        "--out",
        p(&sl_path),
    ]);
    let sl = parse_lp(&std::fs::read_to_string(&sl_path).unwrap()).unwrap();
    assert!(sl.n_rows() > mc.n_rows());

    let gf_path = dir.path().join("gf.lp");
    let out = evsite(&[
        "export",
        "--instance",
        p(&inst_path),
        "--formulation",
        "gf",
        "--out",
        p(&gf_path),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("growth"));
    let growth = dir.path().join("growth.csv");
    std::fs::write(&growth, "q_lo,q_hi,slope,intercept\n0,1,1,0.05\n").unwrap();
    ok(&[
        "export",
        "--instance",
        p(&inst_path),
        "--formulation",
        "gf",
        "--growth",
        p(&growth),
        "--out",
        p(&gf_path),
    ]);
    assert!(
        parse_lp(&std::fs::read_to_string(&gf_path).unwrap())
            .unwrap()
            .n_rows()
            > 0
    );
}

#[test]
fn report_needs_rows() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("runs.csv");
    std::fs::write(&empty, "").unwrap();
    let out = evsite(&["report", p(&empty), "--out", p(&dir.path().join("rep"))]);
    assert!(!out.status.success());
}

#[test]
fn gf_comparison_columns_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny_manifest(dir.path(), "1", "9");
    let out = dir.path().join("cmp");
    ok(&[
        "compare-gf",
        "--manifest",
        p(&m),
        "--mc-method",
        "exact-enum",
        "--out",
        p(&out),
    ]);
    let mut r = csv::Reader::from_path(out.join("comparison.csv")).unwrap();
    let recs: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 1);
    let col = |i: usize| recs[0][i].parse::<f64>().unwrap();
    let (gf, adjusted, mc) = (col(2), col(3), col(4));
    assert!(adjusted >= gf - 1e-9 && mc >= gf - 1e-9, "{:?}", recs[0]);
    for stem in ["tiny-000_gf", "tiny-000_gf_under_mc", "tiny-000_mc"] {
        assert!(out.join("nodes").join(format!("{stem}.csv")).exists());
        let geo: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out.join("nodes").join(format!("{stem}.geojson"))).unwrap(),
        )
        .unwrap();
        assert_eq!(geo["type"], "FeatureCollection");
    }
    let summary = std::fs::read_to_string(out.join("comparison_summary.csv")).unwrap();
    assert!(summary.starts_with("column,p5,median,p95"));
}
