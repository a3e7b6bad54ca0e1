mod common;

use evsite::covering::CoverageTensor;
use evsite::datasets::tiny_instance;
use evsite::exact::{brute_force_optimum, EnumerationBudget};
use evsite::milp::{
    build_mc, build_sl, compute_bounds, expected_sl_rows, parse_lp, schedule_from_values,
    solve_external, write_lp, SlOptions, SolveStatus, VarKind,
};

#[test]
fn mc_row_count_is_non_forced_triplets() {
    for seed in 0..10 {
        let inst = tiny_instance(seed, 0);
        let cov = CoverageTensor::build(&inst);
        let mc = build_mc(&inst, &cov).unwrap();
        let covering = mc
            .constraints
            .iter()
            .filter(|c| c.name.starts_with("cover_"))
            .count();
        assert_eq!(covering, cov.index().n_triplets() - cov.home().forced_count);
        let sl = build_sl(&inst, &cov, &compute_bounds(&inst), SlOptions::default()).unwrap();
        assert_eq!(sl.n_rows(), expected_sl_rows(&inst, &cov));
        assert!(sl.n_rows() > mc.n_rows());
    }
}

#[test]
fn lp_text_round_trips() {
    let inst = tiny_instance(3, 2);
    let cov = CoverageTensor::build(&inst);
    for model in [
        build_mc(&inst, &cov).unwrap(),
        build_sl(&inst, &cov, &compute_bounds(&inst), SlOptions::default()).unwrap(),
    ] {
        let text = write_lp(&model).unwrap();
        let back = parse_lp(&text).unwrap();
        assert_eq!(back.n_vars(), model.n_vars());
        assert_eq!(back.n_rows(), model.n_rows());
        assert_eq!(
            back.count_kind(VarKind::Binary),
            model.count_kind(VarKind::Binary)
        );
        let again = write_lp(&back).unwrap();
        for (n, (a, b)) in again.lines().zip(text.lines()).enumerate() {
            assert_eq!(a, b, "line {}", n + 1);
        }
        assert_eq!(again.lines().count(), text.lines().count());
    }
}

#[test]
fn solver_optima_match_brute_force() {
    let Some(solver) = common::solver(60.0) else {
        eprintln!("no external solver; skipped");
        return;
    };
    for seed in 0..3 {
        let inst = tiny_instance(seed, 0);
        let cov = CoverageTensor::build(&inst);
        let (_, best) = brute_force_optimum(&inst, &cov, EnumerationBudget::default()).unwrap();
        let mc = build_mc(&inst, &cov).unwrap();
        let out = solve_external(&mc, Some(&solver), None).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        let f_mc = out.objective.unwrap();
        assert!((f_mc - best).abs() < 1e-6, "mc {f_mc} vs {best}");
        let x = schedule_from_values(&inst, &out.values);
        assert!((cov.value(&x) - best).abs() < 1e-6);
        let sl = build_sl(&inst, &cov, &compute_bounds(&inst), SlOptions::default()).unwrap();
        let out = solve_external(&sl, Some(&solver), None).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        let f_sl = out.objective.unwrap();
        assert!(
            (f_mc + f_sl - inst.total_mass()).abs() < 1e-6,
            "mc {f_mc} + sl {f_sl} vs {}",
            inst.total_mass()
        );
    }
}
