//! GRASP: randomized greedy construction, a filter, then local search.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covering::CoverageTensor;
use crate::instance::Instance;
use crate::solution::Schedule;
use crate::util::mix_all;

use super::construct::{argmax, Builder, Candidate};
use super::local_search::{search, ImprovementMode, LocalSearchConfig};
use super::{Clock, HeuristicResult, MoveKind, ScoreMode, Termination, TraceEvent};

/// How the restricted candidate list is cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RclRule {
    /// score ≥ α·best
    #[default]
    Value,
    /// score ≥ best − α·(best − worst)
    Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspConfig {
    pub alpha: f64,
    pub mode: ScoreMode,
    pub rcl: RclRule,
    pub max_solutions: usize,
    pub max_filtered: usize,
    pub time_limit_s: f64,
    pub improvement: ImprovementMode,
    /// Local searches run before the filter switches on.
    pub filter_warmup: usize,
    pub local_search_min_rel_gain: f64,
    pub seed: u64,
}

impl Default for GraspConfig {
    fn default() -> Self {
        GraspConfig {
            alpha: 0.85,
            mode: ScoreMode::Myopic,
            rcl: RclRule::Value,
            max_solutions: 300,
            max_filtered: 500,
            time_limit_s: 7200.0,
            improvement: ImprovementMode::First,
            filter_warmup: 10,
            local_search_min_rel_gain: 1e-4,
            seed: 0,
        }
    }
}

fn pick_rcl<R: Rng + ?Sized>(
    cands: &[Candidate],
    alpha: f64,
    rule: RclRule,
    rng: &mut R,
) -> Option<Candidate> {
    if alpha >= 1.0 {
        return argmax(cands);
    }
    let positive: Vec<Candidate> = cands.iter().copied().filter(|c| c.score > 0.0).collect();
    let best = positive
        .iter()
        .map(|c| c.score)
        .fold(f64::NEG_INFINITY, f64::max);
    let worst = positive
        .iter()
        .map(|c| c.score)
        .fold(f64::INFINITY, f64::min);
    if positive.is_empty() {
        return None;
    }
    let threshold = match rule {
        RclRule::Value => alpha * best,
        RclRule::Range => best - alpha * (best - worst),
    };
    let rcl: Vec<Candidate> = positive
        .into_iter()
        .filter(|c| c.score >= threshold)
        .collect();
    Some(rcl[rng.random_range(0..rcl.len())])
}

/// Greedy loop that picks uniformly among near-best outlets. With `alpha = 1`
/// it is exactly [`super::greedy`] and draws nothing from `rng`.
pub fn grasp_construct<R: Rng + ?Sized>(
    inst: &Instance,
    cov: &CoverageTensor,
    alpha: f64,
    mode: ScoreMode,
    rng: &mut R,
) -> Schedule {
    construct_with(inst, cov, alpha, mode, RclRule::Value, rng)
}

/// [`grasp_construct`] with an explicit candidate-list rule.
pub fn construct_with<R: Rng + ?Sized>(
    inst: &Instance,
    cov: &CoverageTensor,
    alpha: f64,
    mode: ScoreMode,
    rule: RclRule,
    rng: &mut R,
) -> Schedule {
    let mut trace = Vec::new();
    Builder::new(inst, cov, mode).run(&Clock::start(), &mut trace, |c| {
        pick_rcl(c, alpha, rule, rng)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Filter,
}

/// Skips a candidate whose value scaled by the largest relative gain seen so
/// far still cannot beat the incumbent. `None` means the warmup is not over.
pub fn grasp_filter(
    candidate_f: f64,
    incumbent_f: f64,
    max_observed_rel_increase: Option<f64>,
) -> FilterDecision {
    match max_observed_rel_increase {
        Some(m) if candidate_f * m <= incumbent_f => FilterDecision::Filter,
        _ => FilterDecision::Keep,
    }
}

/// Per-iteration RNG stream.
fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_all(&[seed, iteration]))
}

pub fn grasp(inst: &Instance, cov: &CoverageTensor, config: &GraspConfig) -> HeuristicResult {
    let clock = Clock::start();
    let deadline =
        Instant::now().checked_add(Duration::from_secs_f64(config.time_limit_s.clamp(0.0, 1e9)));
    let ls = LocalSearchConfig {
        improvement: config.improvement,
        min_rel_gain: config.local_search_min_rel_gain,
    };
    let mut incumbent: Option<(Schedule, f64)> = None;
    let mut trace = Vec::new();
    let (mut examined, mut filtered) = (0usize, 0usize);
    let mut max_rel = 1.0f64;
    let mut iteration = 0u64;
    let termination = loop {
        if examined >= config.max_solutions {
            break Termination::MaxSolutions;
        }
        if filtered >= config.max_filtered {
            break Termination::MaxFiltered;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break Termination::TimeLimit;
        }
        let mut rng = iteration_rng(config.seed, iteration);
        iteration += 1;
        let cand = construct_with(inst, cov, config.alpha, config.mode, config.rcl, &mut rng);
        let f0 = cov.value(&cand);
        let decision = match &incumbent {
            Some((_, inc)) => grasp_filter(
                f0,
                *inc,
                (examined >= config.filter_warmup).then_some(max_rel),
            ),
            None => FilterDecision::Keep,
        };
        if decision == FilterDecision::Filter {
            filtered += 1;
            trace.push(TraceEvent {
                kind: MoveKind::Filtered,
                period: inst.horizon,
                station: None,
                k: None,
                partner: None,
                score: f0,
                f: incumbent.as_ref().map_or(0.0, |x| x.1),
                elapsed_s: clock.elapsed(),
            });
            continue;
        }
        let (y, f) = search(
            inst,
            cov,
            &cand,
            &ls,
            deadline,
            &clock,
            None,
            &mut |_, _| {},
        );
        examined += 1;
        if f0 > 0.0 {
            max_rel = max_rel.max(f / f0);
        }
        if incumbent.as_ref().is_none_or(|(_, inc)| f > *inc) {
            incumbent = Some((y, f));
        }
        trace.push(TraceEvent {
            kind: MoveKind::Candidate,
            period: inst.horizon,
            station: None,
            k: None,
            partner: None,
            score: f0,
            f: incumbent.as_ref().map_or(0.0, |x| x.1),
            elapsed_s: clock.elapsed(),
        });
    };
    let (schedule, value) = incumbent.unwrap_or_else(|| {
        let s = Schedule::initial(inst);
        let v = cov.value(&s);
        (s, v)
    });
    HeuristicResult {
        schedule,
        value,
        wall_time_s: clock.elapsed(),
        trace,
        seed: Some(config.seed),
        termination,
        examined,
        filtered,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::tiny_instance;
    use crate::heuristics::{greedy, GreedyConfig};

    #[test]
    fn filter_examples() {
        assert_eq!(
            grasp_filter(100.0, 120.0, Some(1.10)),
            FilterDecision::Filter
        );
        assert_eq!(grasp_filter(120.0, 120.0, Some(1.10)), FilterDecision::Keep);
        assert_eq!(grasp_filter(1.0, 120.0, None), FilterDecision::Keep);
    }

    #[test]
    fn alpha_one_is_greedy() {
        for seed in 0..6 {
            let inst = tiny_instance(seed, 3);
            let cov = CoverageTensor::build(&inst);
            for mode in [ScoreMode::Myopic, ScoreMode::Hyperoptic] {
                let g = greedy(&inst, &cov, &GreedyConfig { mode });
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                assert_eq!(
                    grasp_construct(&inst, &cov, 1.0, mode, &mut rng),
                    g.schedule
                );
            }
        }
    }

    #[test]
    fn reproducible_and_dominates_greedy() {
        let inst = tiny_instance(11, 0);
        let cov = CoverageTensor::build(&inst);
        let cfg = GraspConfig {
            max_solutions: 20,
            seed: 3,
            ..Default::default()
        };
        let a = grasp(&inst, &cov, &cfg);
        let b = grasp(&inst, &cov, &cfg);
        assert_eq!(a.schedule, b.schedule);
        let strip = |r: &HeuristicResult| {
            r.trace
                .iter()
                .map(|e| (e.kind, e.score, e.f))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert!(a.schedule.is_feasible(&inst));

        let one = GraspConfig {
            alpha: 1.0,
            max_solutions: 1,
            ..Default::default()
        };
        let g = greedy(&inst, &cov, &GreedyConfig::default());
        assert!(grasp(&inst, &cov, &one).value >= g.value);
    }

    #[test]
    fn termination_matches_binding_limit() {
        let inst = tiny_instance(2, 5);
        let cov = CoverageTensor::build(&inst);
        let r = grasp(
            &inst,
            &cov,
            &GraspConfig {
                max_solutions: 3,
                ..Default::default()
            },
        );
        assert_eq!(r.termination, Termination::MaxSolutions);
        assert_eq!(r.examined, 3);
        let r = grasp(
            &inst,
            &cov,
            &GraspConfig {
                time_limit_s: 0.0,
                ..Default::default()
            },
        );
        assert_eq!(r.termination, Termination::TimeLimit);
        let r = grasp(
            &inst,
            &cov,
            &GraspConfig {
                max_filtered: 0,
                ..Default::default()
            },
        );
        assert_eq!(r.termination, Termination::MaxFiltered);
    }
}
