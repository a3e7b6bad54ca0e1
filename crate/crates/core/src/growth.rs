//! Growth-function baseline: a piecewise-linear map from this year's EV
//! share to next year's, built from covering-model results, and an
//! intracity station model driven by it.
//!
//! The function is fitted through the averaged cumulative yearly coverage
//! `p_1 ≤ … ≤ p_T` (as shares of the census population) using the knots
//! `(0, p_1), (p_1, p_2), …, (p_{T−1}, p_T)`, then one knot extrapolating the
//! last slope (clamped to `[p_T, 1]`) and finally `(1, 1)`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::CoverageTensor;
use crate::instance::Instance;
use crate::solution::{Schedule, BUDGET_TOLERANCE};

#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("yearly points must be nondecreasing shares in [0, 1], got {0:?}")]
    BadPoints(Vec<f64>),
    #[error("share {z} maps to both {a} and {b}; a zero-growth year followed by growth cannot be expressed")]
    Conflict { z: f64, a: f64, b: f64 },
    #[error("segments do not tile [0, 1]: {0}")]
    Tiling(String),
    #[error("instances do not share one network, station set and horizon")]
    Mismatch,
    #[error("no instances given")]
    Empty,
    #[error("enumeration of {0} opening schedules refused")]
    TooLarge(u128),
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("growth file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `g(z) = intercept + slope·z` on `[q_lo, q_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub q_lo: f64,
    pub q_hi: f64,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFunction {
    pub segments: Vec<Segment>,
}

impl GrowthFunction {
    /// Fits the function through yearly cumulative shares.
    pub fn from_points(points: &[f64]) -> Result<Self, GrowthError> {
        let ok = !points.is_empty()
            && points.iter().all(|p| (0.0..=1.0).contains(p))
            && points.windows(2).all(|w| w[0] <= w[1]);
        if !ok {
            return Err(GrowthError::BadPoints(points.to_vec()));
        }
        let n = points.len();
        let mut knots: Vec<(f64, f64)> = Vec::with_capacity(n + 2);
        knots.push((0.0, points[0]));
        for w in points.windows(2) {
            knots.push((w[0], w[1]));
        }
        let last = points[n - 1];
        let prev = if n >= 2 { points[n - 2] } else { 0.0 };
        let increment = last - prev;
        let ext = if n >= 3 && points[n - 2] > points[n - 3] {
            let slope = (last - prev) / (prev - points[n - 3]);
            last + slope * (last - prev)
        } else {
            // no earlier slope to extend: keep the last yearly increment
            last + increment.max(if n == 1 { last } else { 0.0 })
        };
        knots.push((last, ext.clamp(last, 1.0)));
        knots.push((1.0, 1.0));
        let mut dedup: Vec<(f64, f64)> = Vec::with_capacity(knots.len());
        for k in knots {
            match dedup.last() {
                Some(&(z, g)) if z == k.0 => {
                    if g != k.1 {
                        return Err(GrowthError::Conflict { z, a: g, b: k.1 });
                    }
                }
                _ => dedup.push(k),
            }
        }
        let segments = dedup
            .windows(2)
            .map(|w| {
                let ((z0, g0), (z1, g1)) = (w[0], w[1]);
                let slope = (g1 - g0) / (z1 - z0);
                Segment {
                    q_lo: z0,
                    q_hi: z1,
                    slope,
                    intercept: g0 - slope * z0,
                }
            })
            .collect();
        let g = GrowthFunction { segments };
        g.check()?;
        Ok(g)
    }

    /// Tiling of [0, 1], continuity, monotonicity and `g(z) ≥ z`.
    pub fn check(&self) -> Result<(), GrowthError> {
        let s = &self.segments;
        let bad = |m: String| Err(GrowthError::Tiling(m));
        if s.is_empty() {
            return bad("no segments".into());
        }
        if s[0].q_lo != 0.0 || s[s.len() - 1].q_hi != 1.0 {
            return bad("domain is not [0, 1]".into());
        }
        for (n, seg) in s.iter().enumerate() {
            if !(seg.q_lo < seg.q_hi) || seg.slope < -1e-12 {
                return bad(format!("segment {n} is empty or decreasing"));
            }
            for z in [seg.q_lo, seg.q_hi] {
                if seg.eval(z) < z - 1e-9 {
                    return bad(format!("segment {n} falls below the identity at {z}"));
                }
            }
        }
        for (n, w) in s.windows(2).enumerate() {
            if w[0].q_hi != w[1].q_lo {
                return bad(format!("gap or overlap after segment {n}"));
            }
            if (w[0].eval(w[0].q_hi) - w[1].eval(w[1].q_lo)).abs() > 1e-9 {
                return bad(format!("jump after segment {n}"));
            }
        }
        Ok(())
    }

    /// `g(z)`; shares above 1 map to themselves.
    pub fn eval(&self, z: f64) -> f64 {
        if z >= 1.0 {
            return z;
        }
        let z = z.max(0.0);
        let seg = self
            .segments
            .iter()
            .find(|s| z <= s.q_hi)
            .unwrap_or(&self.segments[self.segments.len() - 1]);
        seg.eval(z)
    }

    /// Yearly totals under full coverage: `Z_t = r·g(Z_{t−1}/r)`, `Z_0 = 0`.
    pub fn iterate(&self, r: f64, years: usize) -> Vec<f64> {
        let mut z = 0.0;
        (0..years)
            .map(|_| {
                z = r * self.eval(z / r);
                z
            })
            .collect()
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "q_lo,q_hi,slope,intercept")?;
        for s in &self.segments {
            writeln!(out, "{},{},{},{}", s.q_lo, s.q_hi, s.slope, s.intercept)?;
        }
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<Self, GrowthError> {
        let mut segments = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| GrowthError::Parse {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            let [q_lo, q_hi, slope, intercept] = v[..] else {
                return Err(GrowthError::Parse {
                    line: n + 1,
                    message: format!("expected 4 fields, got {}", v.len()),
                });
            };
            segments.push(Segment {
                q_lo,
                q_hi,
                slope,
                intercept,
            });
        }
        let g = GrowthFunction { segments };
        g.check()?;
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self, GrowthError> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }
}

impl Segment {
    pub fn eval(&self, z: f64) -> f64 {
        self.intercept + self.slope * z
    }
}

fn same_layout(a: &Instance, b: &Instance) -> bool {
    a.horizon == b.horizon && a.network == b.network && a.stations == b.stations
}

/// Census population of the instances' network.
pub fn census_population(inst: &Instance) -> f64 {
    inst.network.total_population()
}

/// Averaged cumulative yearly coverage of `x` over `instances` (absolute
/// EV counts), with the coverage tensors built on the fly.
pub fn averaged_cumulative_coverage(
    instances: &[Instance],
    x: &Schedule,
) -> Result<Vec<f64>, GrowthError> {
    let first = instances.first().ok_or(GrowthError::Empty)?;
    if instances.iter().any(|i| !same_layout(first, i)) {
        return Err(GrowthError::Mismatch);
    }
    let per: Vec<Vec<f64>> = instances
        .par_iter()
        .map(|inst| {
            let cov = CoverageTensor::build(inst);
            let mut acc = 0.0;
            (0..inst.horizon)
                .map(|t| {
                    acc += cov.period_value(t, &x.levels[t]);
                    acc
                })
                .collect()
        })
        .collect();
    let n = per.len() as f64;
    Ok((0..first.horizon)
        .map(|t| per.iter().map(|p| p[t]).sum::<f64>() / n)
        .collect())
}

/// Growth function from a candidate schedule evaluated on every instance.
/// Also returns the averaged cumulative totals it was fitted to.
pub fn generate_growth_function(
    instances: &[Instance],
    x: &Schedule,
) -> Result<(GrowthFunction, Vec<f64>), GrowthError> {
    let totals = averaged_cumulative_coverage(instances, x)?;
    let r = census_population(&instances[0]);
    let points: Vec<f64> = totals.iter().map(|v| v / r).collect();
    Ok((GrowthFunction::from_points(&points)?, totals))
}

/// Station-model constants. Costs are per outlet and per opening.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfParams {
    pub outlet_cost: f64,
    pub opening_cost: f64,
    /// Share of EV users charging at home.
    pub home_fraction: f64,
    /// Users added per outlet each year; `None` is unlimited.
    pub capacity_per_outlet: Option<f64>,
    pub radius_km: f64,
}

impl Default for GfParams {
    fn default() -> Self {
        GfParams {
            outlet_cost: 50.0,
            opening_cost: 100.0,
            home_fraction: 0.566,
            capacity_per_outlet: None,
            radius_km: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfInstance {
    pub horizon: usize,
    pub node_ids: Vec<u32>,
    /// Census population per node.
    pub node_population: Vec<f64>,
    pub total_population: f64,
    /// Node positions willing to charge at each site.
    pub catchments: Vec<Vec<usize>>,
    pub max_outlets: Vec<u32>,
    pub initial_outlets: Vec<u32>,
    pub outlet_cost: f64,
    pub opening_cost: Vec<f64>,
    pub budgets: Vec<f64>,
    pub home_fraction: f64,
    pub capacity: Vec<Option<f64>>,
    pub growth: GrowthFunction,
}

impl GfInstance {
    /// Sites are the instance's stations; catchments are nodes within the
    /// radius by shortest path.
    pub fn from_instance(
        inst: &Instance,
        params: &GfParams,
        growth: GrowthFunction,
    ) -> Result<Self, GrowthError> {
        let net = &inst.network;
        let mut catchments = Vec::with_capacity(inst.n_stations());
        for s in &inst.stations {
            let d = net
                .shortest_path_distances(s.node_id)
                .map_err(|e| GrowthError::Schedule(e.to_string()))?;
            catchments.push(
                (0..net.len())
                    .filter(|&p| d[p] <= params.radius_km)
                    .collect(),
            );
        }
        Ok(GfInstance {
            horizon: inst.horizon,
            node_ids: net.nodes.iter().map(|n| n.id).collect(),
            node_population: net.nodes.iter().map(|n| n.population).collect(),
            total_population: net.total_population(),
            catchments,
            max_outlets: inst.stations.iter().map(|s| s.max_outlets).collect(),
            initial_outlets: inst.stations.iter().map(|s| s.initial_outlets).collect(),
            outlet_cost: params.outlet_cost,
            opening_cost: vec![params.opening_cost; inst.n_stations()],
            budgets: inst.costs.budgets.clone(),
            home_fraction: params.home_fraction,
            capacity: vec![params.capacity_per_outlet; inst.horizon],
            growth,
        })
    }

    /// One free site whose catchment is every node, unlimited capacity.
    pub fn full_coverage(inst: &Instance, growth: GrowthFunction) -> Self {
        let net = &inst.network;
        GfInstance {
            horizon: inst.horizon,
            node_ids: net.nodes.iter().map(|n| n.id).collect(),
            node_population: net.nodes.iter().map(|n| n.population).collect(),
            total_population: net.total_population(),
            catchments: vec![(0..net.len()).collect()],
            max_outlets: vec![1],
            initial_outlets: vec![0],
            outlet_cost: 0.0,
            opening_cost: vec![0.0],
            budgets: vec![0.0; inst.horizon],
            home_fraction: GfParams::default().home_fraction,
            capacity: vec![None; inst.horizon],
            growth,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.catchments.len()
    }

    /// Population willing to charge at site `j`.
    pub fn catchment_population(&self, j: usize) -> f64 {
        self.catchments[j]
            .iter()
            .map(|&p| self.node_population[p])
            .sum()
    }
}

/// Outlet counts per year and site, `outlets[t][j]`; a site is open when it
/// has at least one outlet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfSolution {
    pub outlets: Vec<Vec<u32>>,
}

impl GfSolution {
    pub fn is_open(&self, t: usize, j: usize) -> bool {
        self.outlets[t][j] > 0
    }

    /// Budget, bounds and persistence.
    pub fn check(&self, gf: &GfInstance) -> Result<(), GrowthError> {
        if self.outlets.len() != gf.horizon || self.outlets.iter().any(|r| r.len() != gf.n_sites())
        {
            return Err(GrowthError::Schedule("dimensions".into()));
        }
        for t in 0..gf.horizon {
            let mut spend = 0.0;
            for j in 0..gf.n_sites() {
                let prev = if t == 0 {
                    gf.initial_outlets[j]
                } else {
                    self.outlets[t - 1][j]
                };
                let cur = self.outlets[t][j];
                if cur < prev || cur > gf.max_outlets[j] {
                    return Err(GrowthError::Schedule(format!(
                        "site {} year {}: {prev} -> {cur}",
                        j + 1,
                        t + 1
                    )));
                }
                spend += gf.outlet_cost * f64::from(cur - prev);
                if prev == 0 && cur > 0 {
                    spend += gf.opening_cost[j];
                }
            }
            if spend > gf.budgets[t] + BUDGET_TOLERANCE {
                return Err(GrowthError::Schedule(format!(
                    "year {} spends {spend} over {}",
                    t + 1,
                    gf.budgets[t]
                )));
            }
        }
        Ok(())
    }

    /// The covering-model schedule with the same outlet counts.
    pub fn to_schedule(&self) -> Schedule {
        Schedule {
            levels: self.outlets.clone(),
        }
    }
}

/// EV users per site and year from the forward recursion
/// `H_j^t = min(cap_j^t, R_j, H_j^{t−1} + (R_j/r)·(r·g(Z/r) − Z))` for open
/// sites, with `Z = Σ_j H_j^{t−1}` and `R_j` the catchment population.
/// Closed sites keep what they had. Site totals are not capped by the city
/// population when catchments overlap.
pub fn gf_recursion(gf: &GfInstance, sol: &GfSolution) -> Vec<Vec<f64>> {
    let r = gf.total_population;
    let reach: Vec<f64> = (0..gf.n_sites())
        .map(|j| gf.catchment_population(j))
        .collect();
    let mut h = vec![0.0; gf.n_sites()];
    let mut out = Vec::with_capacity(gf.horizon);
    for t in 0..gf.horizon {
        let z: f64 = h.iter().sum();
        let growth = (r * gf.growth.eval(z / r) - z).max(0.0);
        for j in 0..gf.n_sites() {
            if !sol.is_open(t, j) {
                continue;
            }
            let mut v = (h[j] + reach[j] / r * growth).min(reach[j]);
            if let Some(a) = gf.capacity[t] {
                v = v
                    .min(a * f64::from(sol.outlets[t][j]) / gf.home_fraction)
                    .max(h[j]);
            }
            h[j] = v;
        }
        out.push(h.clone());
    }
    out
}

/// Final-year EV users, the model's objective.
pub fn gf_objective(gf: &GfInstance, sol: &GfSolution) -> f64 {
    gf_recursion(gf, sol)
        .last()
        .map(|h| h.iter().sum())
        .unwrap_or(0.0)
}

/// Best opening plan by enumeration: each site opens in some year (with
/// one outlet) or never. Ties keep the first plan found. Extra outlets never
/// help without a capacity limit, so this is exact in that case.
pub fn gf_optimal_by_enumeration(
    gf: &GfInstance,
    cap: u128,
) -> Result<(GfSolution, f64), GrowthError> {
    let m = gf.n_sites();
    let choices = gf.horizon as u128 + 1;
    let total = choices.checked_pow(m as u32).unwrap_or(u128::MAX);
    if total > cap {
        return Err(GrowthError::TooLarge(total));
    }
    let mut best: Option<(GfSolution, f64)> = None;
    let mut open_at = vec![0usize; m];
    for code in 0..total {
        let mut c = code;
        for slot in open_at.iter_mut() {
            *slot = (c % choices) as usize;
            c /= choices;
        }
        let outlets: Vec<Vec<u32>> = (0..gf.horizon)
            .map(|t| {
                (0..m)
                    .map(|j| {
                        let opened = open_at[j] != 0 && t + 1 >= open_at[j];
                        if opened {
                            gf.initial_outlets[j].max(1)
                        } else {
                            gf.initial_outlets[j]
                        }
                    })
                    .collect()
            })
            .collect();
        let sol = GfSolution { outlets };
        if sol.check(gf).is_err() {
            continue;
        }
        let f = gf_objective(gf, &sol);
        if best.as_ref().is_none_or(|(_, b)| f > *b) {
            best = Some((sol, f));
        }
    }
    Ok(best.expect("opening nothing is feasible"))
}

/// Every opened station raised to its maximum outlets from its opening year
/// on. Budgets are ignored on purpose; the result is for comparison only.
pub fn adjust_solution_max_outlets(inst: &Instance, x: &Schedule) -> Schedule {
    let mut y = x.clone();
    for row in &mut y.levels {
        for (j, level) in row.iter_mut().enumerate() {
            if *level > 0 {
                *level = inst.max_outlets(j);
            }
        }
    }
    y
}

/// `f(x)` under the covering model; the comparison workflow's evaluator.
pub fn evaluate_under_mc(cov: &CoverageTensor, x: &Schedule) -> f64 {
    cov.value(x)
}

/// EVs per network node (census order) by the final year under the
/// covering model: covered mass of each class summed over years and booked
/// at the class's home node.
pub fn mc_node_evs(inst: &Instance, cov: &CoverageTensor, x: &Schedule) -> Vec<f64> {
    let mut out = vec![0.0; inst.network.len()];
    let index = cov.index();
    for t in 0..inst.horizon {
        let words = cov.covered_words(t, &x.levels[t]);
        let start = index.period_range(t).start;
        for (i, class) in inst.classes.iter().enumerate() {
            let range = index.block_words(t, i);
            let local = range.start - start..range.end - start;
            let mass: f64 = words[local]
                .iter()
                .zip(&index.weights()[range])
                .map(|(w, weight)| f64::from(w.count_ones()) * weight)
                .sum();
            if let Some(p) = inst.network.position(class.home_node) {
                out[p] += mass;
            }
        }
    }
    out
}

/// EVs per node in the final year under the growth model, each site's users
/// spread over its catchment by population.
pub fn gf_node_evs(gf: &GfInstance, sol: &GfSolution) -> Vec<f64> {
    let mut out = vec![0.0; gf.node_ids.len()];
    if let Some(h) = gf_recursion(gf, sol).last() {
        for (j, &users) in h.iter().enumerate() {
            let reach = gf.catchment_population(j);
            if reach <= 0.0 {
                continue;
            }
            for &p in &gf.catchments[j] {
                out[p] += users * gf.node_population[p] / reach;
            }
        }
    }
    out
}

/// `node_id,population,evs,ev_percent` rows.
pub fn write_node_table(inst: &Instance, evs: &[f64], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "node_id,population,evs,ev_percent")?;
    for (node, ev) in inst.network.nodes.iter().zip(evs) {
        let pct = if node.population > 0.0 {
            100.0 * ev / node.population
        } else {
            0.0
        };
        writeln!(out, "{},{},{},{}", node.id, node.population, ev, pct)?;
    }
    Ok(())
}

/// Nodes as GeoJSON points in km coordinates with EV properties.
pub fn node_geojson(inst: &Instance, evs: &[f64]) -> serde_json::Value {
    let features: Vec<serde_json::Value> = inst
        .network
        .nodes
        .iter()
        .zip(evs)
        .map(|(n, ev)| {
            serde_json::json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [n.x_km, n.y_km]},
                "properties": {
                    "id": n.id,
                    "population": n.population,
                    "evs": ev,
                    "ev_percent": if n.population > 0.0 { 100.0 * ev / n.population } else { 0.0 },
                },
            })
        })
        .collect();
    serde_json::json!({"type": "FeatureCollection", "features": features})
}
