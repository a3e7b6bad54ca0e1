//! Hand-built instances with known answers.

mod common;

use evsite::covering::CoverageTensor;
use evsite::exact::{brute_force_optimum, EnumerationBudget};
use evsite::growth::{
    adjust_solution_max_outlets, gf_objective, gf_optimal_by_enumeration, gf_recursion, GfInstance,
    GfParams, GfSolution, GrowthFunction, Segment,
};
use evsite::heuristics::{
    greedy, rolling_horizon, GreedyConfig, PeriodSolver, RollingHorizonConfig,
};
use evsite::instance::{
    ChoiceBlock, CostBudget, DatasetKind, ErrorTensor, Instance, InstanceMeta, Station,
    StationTerm, UserClass,
};
use evsite::milp::{
    build_gf, build_mc, build_sl, compute_bounds, parse_lp, solve_external, write_lp, MilpModel,
    ObjectiveSense, RowSense, SlOptions, SolveStatus, VarKind,
};
use evsite::network::{HousingMix, Network, Node};
use evsite::solution::Schedule;

fn node(id: u32, x: f64, population: f64) -> Node {
    Node {
        id,
        x_km: x,
        y_km: 0.0,
        population,
        city_center: id == 0,
        housing_mix: HousingMix {
            single: 1.0,
            attached: 0.0,
            apartment: 0.0,
        },
        income_mix: None,
    }
}

/// One class at node 0 choosing between the opt-out and `ascs.len()`
/// stations, each with `m` outlets adding `beta` apiece. `eps[r]` lists the
/// opt-out error then one error per station.
fn hand_instance(
    ascs: &[f64],
    m: u32,
    beta: f64,
    budget: f64,
    horizon: usize,
    eps: &[Vec<f64>],
) -> Instance {
    let n = ascs.len();
    let network = Network::new(vec![node(0, 0.0, 100.0)], vec![]).unwrap();
    let stations = (0..n)
        .map(|j| Station {
            id: j as u32,
            node_id: 0,
            max_outlets: m,
            initial_outlets: 0,
            level3: false,
        })
        .collect();
    let class = UserClass {
        id: 0,
        home_node: 0,
        populations: vec![10.0; horizon],
        has_home_charging: false,
        income_bracket: None,
        scenario_count: eps.len() as u32,
        consideration_radius_km: None,
    };
    let block = ChoiceBlock {
        optout_asc: 0.0,
        home_asc: None,
        stations: ascs
            .iter()
            .enumerate()
            .map(|(j, &asc)| StationTerm {
                station: j as u32,
                asc,
                increments: vec![beta; m as usize],
            })
            .collect(),
    };
    let costs = CostBudget {
        outlet_cost: vec![vec![vec![100.0; horizon]; m as usize]; n],
        budgets: vec![budget; horizon],
    };
    let errors: Vec<f64> = (0..horizon)
        .flat_map(|_| eps.iter().flatten().copied())
        .collect();
    Instance::new(
        InstanceMeta {
            dataset_kind: DatasetKind::Tiny,
            seed: 0,
            index: 0,
        },
        horizon,
        network,
        stations,
        vec![class],
        costs,
        vec![vec![block; horizon]],
        ErrorTensor::new(errors),
    )
    .unwrap()
}

#[test]
fn sl_hand_instance_has_eleven_rows() {
    let inst = hand_instance(&[-1.0], 1, 0.5, 100.0, 1, &[vec![0.0, 0.2]]);
    let cov = CoverageTensor::build(&inst);
    let sl = build_sl(&inst, &cov, &compute_bounds(&inst), SlOptions::default()).unwrap();
    assert_eq!(sl.n_rows(), 11);
    let back = parse_lp(&write_lp(&sl).unwrap()).unwrap();
    assert_eq!((back.n_rows(), back.n_vars()), (sl.n_rows(), sl.n_vars()));
    assert_eq!(back.sense, Some(ObjectiveSense::Minimize));
}

#[test]
fn singleton_bounds() {
    let inst = hand_instance(&[-1.0], 2, 0.5, 100.0, 1, &[vec![0.3, 0.2]]);
    let b = compute_bounds(&inst);
    let block = b.block(0, 0);
    assert_eq!(block.a_lower, Some(-1.0 + 0.2));
    assert!((block.nu[0][0] - 1.0).abs() < 1e-12);
    // opt-out: largest utility bound minus its own utility
    assert!((block.mu_optout[0] - (block.b[0][0].max(0.3) - 0.3)).abs() < 1e-12);
    assert!(b.verify().is_empty());
}

#[test]
fn one_outlet_covering_everything_saturates() {
    let eps: Vec<Vec<f64>> = (0..5).map(|r| vec![0.1 * r as f64, -0.2, 0.0]).collect();
    let inst = hand_instance(&[50.0, -50.0], 1, 0.1, 100.0, 2, &eps);
    let cov = CoverageTensor::build(&inst);
    let (x, f) = brute_force_optimum(&inst, &cov, EnumerationBudget::default()).unwrap();
    assert!((f - inst.total_mass()).abs() < 1e-9);
    assert_eq!(x.levels[0], vec![1, 0]);
    let g = greedy(&inst, &cov, &GreedyConfig::default());
    assert_eq!((g.trace[0].period, g.trace[0].station), (1, Some(0)));
    assert!((g.value - f).abs() < 1e-9);
}

#[test]
fn single_period_rolling_horizon_is_the_direct_optimum() {
    for seed in 0..20 {
        let inst = evsite::datasets::tiny_instance(seed, 4);
        if inst.horizon != 1 {
            continue;
        }
        let cov = CoverageTensor::build(&inst);
        let (_, best) = brute_force_optimum(&inst, &cov, EnumerationBudget::default()).unwrap();
        let rh = rolling_horizon(
            &inst,
            &cov,
            &RollingHorizonConfig::default(),
            &PeriodSolver::enumeration(),
        )
        .unwrap();
        assert!((rh.value - best).abs() < 1e-9);
    }
}

#[test]
fn two_variable_lp_golden() {
    let mut m = MilpModel::new("toy", ObjectiveSense::Maximize);
    let a = m.add_var("a", 0.0, 1.0, VarKind::Binary).unwrap();
    let b = m.add_var("b", 0.0, 4.0, VarKind::Continuous).unwrap();
    m.add_row("cap", vec![(a, 3.0), (b, 1.5)], RowSense::Le, 6.0)
        .unwrap();
    m.set_objective(vec![(b, 1.0), (a, 2.0)], 0.5);
    let want = "\\ toy\nMaximize\n obj: 2 a + b + 0.5\nSubject To\n cap: 3 a + 1.5 b <= 6\nBounds\n 0 <= b <= 4\nBinary\n a\nEnd\n";
    let got = write_lp(&m).unwrap();
    let words = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    assert_eq!(words(&got), words(want), "{got}");
    assert!(m.add_var("a", 0.0, 1.0, VarKind::Binary).is_err());
}

#[test]
fn growth_points_from_cumulative_counts() {
    // new EVs 100, 50, 30, 20 on a population of 1000
    let counts = [100.0, 150.0, 180.0, 200.0];
    let mut acc = 0.0;
    let points: Vec<f64> = counts
        .iter()
        .map(|c| {
            acc += c;
            acc / 1000.0
        })
        .collect();
    assert_eq!(points, vec![0.1, 0.25, 0.43, 0.63]);
    let g = GrowthFunction::from_points(&points).unwrap();
    assert_eq!(g.segments.len(), 5);
    let z = g.iterate(1000.0, 4);
    for (a, b) in z.iter().zip([100.0, 250.0, 430.0, 630.0]) {
        assert!((a - b).abs() < 1e-9);
    }
}

fn gf_toy(budget: f64) -> GfInstance {
    let inst = hand_instance(&[0.0, 0.0, 0.0], 6, 0.1, budget, 4, &[vec![0.0; 4]]);
    let g = GrowthFunction::from_points(&[0.05, 0.12, 0.2, 0.3]).unwrap();
    let mut gf = GfInstance::from_instance(&inst, &GfParams::default(), g).unwrap();
    gf.budgets = vec![budget; 4];
    gf
}

#[test]
fn adjusted_solution_examples() {
    let inst = hand_instance(&[0.0, 0.0, 0.0], 6, 0.1, 400.0, 4, &[vec![0.0; 4]]);
    let gf = GfSolution {
        outlets: vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 0, 1], vec![0, 0, 1]],
    };
    let adj = adjust_solution_max_outlets(&inst, &gf.to_schedule());
    assert_eq!(
        adj.levels,
        vec![vec![0, 0, 0], vec![0, 0, 6], vec![0, 0, 6], vec![0, 0, 6]]
    );
    let none = Schedule::initial(&inst);
    assert_eq!(adjust_solution_max_outlets(&inst, &none), none);
}

#[test]
fn linear_growth_adds_a_fixed_share() {
    let c = 0.02;
    let mut gf = gf_toy(400.0);
    gf.growth = GrowthFunction {
        segments: vec![Segment {
            q_lo: 0.0,
            q_hi: 1.0,
            slope: 1.0,
            intercept: c,
        }],
    };
    let sol = GfSolution {
        outlets: vec![vec![1, 0, 0]; 4],
    };
    let h = gf_recursion(&gf, &sol);
    let reach = gf.catchment_population(0);
    for (t, row) in h.iter().enumerate() {
        assert!((row[0] - reach * c * (t + 1) as f64).abs() < 1e-9);
        assert_eq!(row[1], 0.0);
    }
}

#[test]
fn zero_budget_gf_has_no_users() {
    let gf = gf_toy(0.0);
    let (sol, f) = gf_optimal_by_enumeration(&gf, 1 << 20).unwrap();
    assert_eq!(f, 0.0);
    assert!(sol.outlets.iter().flatten().all(|&k| k == 0));
}

#[test]
fn gf_milp_is_at_least_the_recursion_optimum() {
    let Some(solver) = common::solver(120.0) else {
        eprintln!("no external solver; skipped");
        return;
    };
    let gf = gf_toy(150.0);
    let (sol, f) = gf_optimal_by_enumeration(&gf, 1 << 20).unwrap();
    assert!((gf_objective(&gf, &sol) - f).abs() < 1e-12);
    let model = build_gf(&gf).unwrap();
    let out = solve_external(&model, Some(&solver), None).unwrap();
    assert_eq!(out.status, SolveStatus::Optimal);
    assert!(
        out.objective.unwrap() >= f - 1e-6,
        "{:?} < {f}",
        out.objective
    );
}

#[test]
fn infeasible_toy_is_reported() {
    let Some(solver) = common::solver(30.0) else {
        eprintln!("no external solver; skipped");
        return;
    };
    let inst = hand_instance(&[0.0], 1, 0.1, 50.0, 1, &[vec![0.0, 0.0]]);
    let cov = CoverageTensor::build(&inst);
    let mut mc = build_mc(&inst, &cov).unwrap();
    let x = mc.var("x_1_1_1").unwrap();
    mc.add_row("force_open", vec![(x, 1.0)], RowSense::Ge, 1.0)
        .unwrap();
    let out = solve_external(&mc, Some(&solver), None).unwrap();
    assert_eq!(out.status, SolveStatus::Infeasible);
}

#[test]
fn zero_budget_sl_objective_is_the_unforced_mass() {
    let Some(solver) = common::solver(60.0) else {
        eprintln!("no external solver; skipped");
        return;
    };
    let mut inst = evsite::datasets::tiny_instance(5, 5);
    inst.costs.budgets.iter_mut().for_each(|b| *b = 0.0);
    let cov = CoverageTensor::build(&inst);
    let sl = build_sl(&inst, &cov, &compute_bounds(&inst), SlOptions::default()).unwrap();
    let out = solve_external(&sl, Some(&solver), None).unwrap();
    assert_eq!(out.status, SolveStatus::Optimal);
    assert!((out.objective.unwrap() - (inst.total_mass() - cov.forced_mass())).abs() < 1e-6);
}
