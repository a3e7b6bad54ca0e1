//! Utilities, the coverage tensor and the objective.
//!
//! Station `j` with `k ≥ 1` outlets covers triplet (t, i, r) when the class
//! considers `j` and `u_jik ≥ u_0` (ties cover). The station utility at `k`
//! outlets is always computed as `(β_1 + … + β_k + κ) + ε`, summed left to
//! right, so every caller sees bit-identical values.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bitset::{self, TripletIndex};
use crate::instance::Instance;
use crate::solution::{Schedule, Solution, SolutionError};

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("station {j} is not considered by class {i} in period {t}")]
    NotConsidered { j: usize, i: usize, t: usize },
    #[error("outlet count {k} outside 0..={max} for station {j}")]
    Outlets { j: usize, k: u32, max: u32 },
    #[error(
        "class {i} considers no station in period {t}, so the closed-station bound is undefined"
    )]
    NoStations { i: usize, t: usize },
    #[error("schedule does not match the instance: {0}")]
    Shape(String),
    #[error("period {t} outside 1..={horizon}")]
    Period { t: usize, horizon: usize },
    #[error("gap needs a positive reference value, got {0}")]
    NonPositiveBest(f64),
    #[error(transparent)]
    Solution(#[from] SolutionError),
    #[error("coverage cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `κ_0 + ε_0` for triplet (t, i, r); periods are 0-based.
pub fn optout_utility(inst: &Instance, t: usize, i: usize, r: usize) -> f64 {
    inst.block(i, t).optout_asc + inst.errors_at(t, i, r)[0]
}

/// Home-charging utility, if the class has that alternative.
pub fn home_utility(inst: &Instance, t: usize, i: usize, r: usize) -> Option<f64> {
    inst.block(i, t)
        .home_asc
        .map(|h| h + inst.errors_at(t, i, r)[1])
}

/// `κ + ε` of every considered station: the utility floor without outlets.
fn base_utility(inst: &Instance, t: usize, i: usize, r: usize, term: usize) -> f64 {
    let block = inst.block(i, t);
    block.stations[term].asc + inst.errors_at(t, i, r)[block.first_station_alt() + term]
}

/// `min {κ_j + ε_j : j considered, every scenario}`: the utility given to a
/// closed station. `None` when the class considers no station.
pub fn closed_station_utility(inst: &Instance, i: usize, t: usize) -> Option<f64> {
    let block = inst.block(i, t);
    let mut lo: Option<f64> = None;
    for r in 0..inst.scenarios(i) {
        for s in 0..block.stations.len() {
            let v = base_utility(inst, t, i, r, s);
            lo = Some(lo.map_or(v, |l: f64| l.min(v)));
        }
    }
    lo
}

fn utility_at(increments: &[f64], asc: f64, eps: f64, k: usize) -> f64 {
    let mut sum = 0.0;
    for b in &increments[..k] {
        sum += b;
    }
    (sum + asc) + eps
}

/// `u_jik` for triplet (t, i, r). At `k = 0` the station counts as closed and
/// the closed-station bound is returned.
pub fn station_utility_at_k(
    inst: &Instance,
    t: usize,
    i: usize,
    r: usize,
    j: usize,
    k: u32,
) -> Result<f64, CoverError> {
    let block = inst.block(i, t);
    let term = block
        .station_term(j)
        .ok_or(CoverError::NotConsidered { j, i, t })?;
    let max = inst.max_outlets(j);
    if k > max {
        return Err(CoverError::Outlets { j, k, max });
    }
    if k == 0 {
        return closed_station_utility(inst, i, t).ok_or(CoverError::NoStations { i, t });
    }
    let st = &block.stations[term];
    let eps = inst.errors_at(t, i, r)[block.first_station_alt() + term];
    Ok(utility_at(&st.increments, st.asc, eps, k as usize))
}

/// Utilities of station `j` for `k = 0..=m_j` (entry 0 is the closed bound).
pub fn utility_ladder(
    inst: &Instance,
    t: usize,
    i: usize,
    r: usize,
    j: usize,
) -> Result<Vec<f64>, CoverError> {
    (0..=inst.max_outlets(j))
        .map(|k| station_utility_at_k(inst, t, i, r, j, k))
        .collect()
}

/// Smallest `k` with `u(k) ≥ threshold`, by binary search over the
/// nondecreasing ladder.
fn first_covering_k(increments: &[f64], asc: f64, eps: f64, threshold: f64) -> Option<u32> {
    let m = increments.len();
    if m == 0 || utility_at(increments, asc, eps, m) < threshold {
        return None;
    }
    let (mut lo, mut hi) = (1usize, m);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if utility_at(increments, asc, eps, mid) >= threshold {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo as u32)
}

/// Triplets settled by home charging before any station decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomePreprocessing {
    /// Bits of triplets whose home utility is at least the opt-out utility.
    pub forced: Vec<u64>,
    pub forced_count: usize,
    /// Triplets whose home alternative can never be chosen and was dropped.
    pub dropped_count: usize,
}

/// Splits home-charging triplets into forced (home at least as good as the
/// opt-out, so an EV is bought whatever the stations do) and ordinary ones
/// (home alternative dropped). Afterwards only the opt-out remains exogenous.
pub fn preprocess_home_charging(inst: &Instance, index: &TripletIndex) -> HomePreprocessing {
    let mut forced = vec![0u64; index.n_words()];
    let (mut forced_count, mut dropped_count) = (0, 0);
    for (t, i, r) in index.triplets() {
        if let Some(home) = home_utility(inst, t, i, r) {
            if home >= optout_utility(inst, t, i, r) {
                bitset::set(&mut forced, index.locate(t, i, r));
                forced_count += 1;
            } else {
                dropped_count += 1;
            }
        }
    }
    HomePreprocessing {
        forced,
        forced_count,
        dropped_count,
    }
}

/// Coverage bits `a[j][k]` over the triplet index plus forced triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTensor {
    index: TripletIndex,
    /// `bits[j][k-1]`: triplets covered by station j with k outlets.
    bits: Vec<Vec<Vec<u64>>>,
    home: HomePreprocessing,
}

/// Objective value and its per-period terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub total: f64,
    pub per_period: Vec<f64>,
}

impl CoverageTensor {
    /// Computes all coverage bits. Work is split by class.
    pub fn build(inst: &Instance) -> Self {
        let index = TripletIndex::new(inst);
        let home = preprocess_home_charging(inst, &index);
        let m = inst.n_stations();
        // per class: (station, k_min, t, r) entries
        let hits: Vec<Vec<(usize, u32, usize, usize)>> = (0..inst.n_classes())
            .into_par_iter()
            .map(|i| {
                let mut out = Vec::new();
                for t in 0..inst.horizon {
                    let block = inst.block(i, t);
                    let first = block.first_station_alt();
                    for r in 0..inst.scenarios(i) {
                        let eps = inst.errors_at(t, i, r);
                        let u0 = block.optout_asc + eps[0];
                        for (s, term) in block.stations.iter().enumerate() {
                            if let Some(k) =
                                first_covering_k(&term.increments, term.asc, eps[first + s], u0)
                            {
                                out.push((term.station as usize, k, t, r));
                            }
                        }
                    }
                }
                out
            })
            .collect();
        let mut bits: Vec<Vec<Vec<u64>>> = (0..m)
            .map(|j| vec![vec![0u64; index.n_words()]; inst.max_outlets(j) as usize])
            .collect();
        for (i, class_hits) in hits.into_iter().enumerate() {
            for (j, kmin, t, r) in class_hits {
                let loc = index.locate(t, i, r);
                for k in kmin..=inst.max_outlets(j) {
                    bitset::set(&mut bits[j][k as usize - 1], loc);
                }
            }
        }
        CoverageTensor { index, bits, home }
    }

    pub fn index(&self) -> &TripletIndex {
        &self.index
    }

    pub fn n_stations(&self) -> usize {
        self.bits.len()
    }

    pub fn max_outlets(&self, j: usize) -> u32 {
        self.bits[j].len() as u32
    }

    pub fn horizon(&self) -> usize {
        self.index.horizon()
    }

    /// Coverage words of station `j` at `k ≥ 1` outlets.
    pub fn words(&self, j: usize, k: u32) -> &[u64] {
        &self.bits[j][k as usize - 1]
    }

    pub fn forced(&self) -> &[u64] {
        &self.home.forced
    }

    pub fn home(&self) -> &HomePreprocessing {
        &self.home
    }

    pub fn is_forced(&self, t: usize, i: usize, r: usize) -> bool {
        bitset::test(&self.home.forced, self.index.locate(t, i, r))
    }

    /// `a[j][k][(t, i, r)]`; zero for `k = 0` and beyond `m_j`.
    pub fn covers(&self, j: usize, k: u32, t: usize, i: usize, r: usize) -> bool {
        k >= 1
            && k <= self.max_outlets(j)
            && bitset::test(self.words(j, k), self.index.locate(t, i, r))
    }

    /// Smallest covering outlet count, read off the bits.
    pub fn min_k_to_cover(&self, j: usize, t: usize, i: usize, r: usize) -> Option<u32> {
        (1..=self.max_outlets(j)).find(|&k| self.covers(j, k, t, i, r))
    }

    /// Weighted mass of forced triplets.
    pub fn forced_mass(&self) -> f64 {
        (0..self.horizon())
            .map(|t| {
                self.index
                    .weighted_count(&self.home.forced, self.index.period_range(t))
            })
            .sum()
    }

    /// Covered population in period `t` with outlet counts `levels`.
    pub fn period_value(&self, t: usize, levels: &[u32]) -> f64 {
        let open: Vec<&[u64]> = levels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0)
            .map(|(j, &l)| self.words(j, l))
            .collect();
        let forced = &self.home.forced;
        let weights = self.index.weights();
        let mut total = 0.0;
        for w in self.index.period_range(t) {
            let mut acc = forced[w];
            for bits in &open {
                acc |= bits[w];
            }
            total += f64::from(acc.count_ones()) * weights[w];
        }
        total
    }

    /// Covered-triplet words of period `t`, forced triplets included.
    pub fn covered_words(&self, t: usize, levels: &[u32]) -> Vec<u64> {
        let range = self.index.period_range(t);
        let mut acc = self.home.forced[range.clone()].to_vec();
        for (j, &l) in levels.iter().enumerate() {
            if l > 0 {
                for (a, b) in acc.iter_mut().zip(&self.words(j, l)[range.clone()]) {
                    *a |= b;
                }
            }
        }
        acc
    }

    /// Population newly covered in period `t` if station `j` had `k` outlets,
    /// given the period's covered words (as from [`Self::covered_words`]).
    pub fn gain(&self, t: usize, covered: &[u64], j: usize, k: u32) -> f64 {
        let range = self.index.period_range(t);
        let weights = &self.index.weights()[range.clone()];
        let bits = &self.words(j, k)[range];
        let mut total = 0.0;
        for ((b, c), w) in bits.iter().zip(covered).zip(weights) {
            total += f64::from((b & !c).count_ones()) * w;
        }
        total
    }

    fn check_schedule(&self, x: &Schedule) -> Result<(), CoverError> {
        if x.levels.len() != self.horizon() {
            return Err(CoverError::Shape(format!(
                "{} periods, expected {}",
                x.levels.len(),
                self.horizon()
            )));
        }
        for row in &x.levels {
            if row.len() != self.n_stations() {
                return Err(CoverError::Shape(format!(
                    "{} stations, expected {}",
                    row.len(),
                    self.n_stations()
                )));
            }
            for (j, &l) in row.iter().enumerate() {
                if l > self.max_outlets(j) {
                    return Err(CoverError::Outlets {
                        j,
                        k: l,
                        max: self.max_outlets(j),
                    });
                }
            }
        }
        Ok(())
    }

    /// `f(x) = Σ (N/R)·min(1, Σ a·x)` with forced triplets always counted.
    pub fn evaluate(&self, x: &Schedule) -> Result<Evaluation, CoverError> {
        self.check_schedule(x)?;
        let per_period: Vec<f64> = (0..self.horizon())
            .map(|t| self.period_value(t, &x.levels[t]))
            .collect();
        Ok(Evaluation {
            total: per_period.iter().sum(),
            per_period,
        })
    }

    /// [`Self::evaluate`] on a binary ladder.
    pub fn evaluate_solution(
        &self,
        inst: &Instance,
        x: &Solution,
    ) -> Result<Evaluation, CoverError> {
        self.evaluate(&x.to_schedule(inst)?)
    }

    /// Objective total; panics on shape mismatch. For solver inner loops.
    pub fn value(&self, x: &Schedule) -> f64 {
        (0..self.horizon())
            .map(|t| self.period_value(t, &x.levels[t]))
            .sum()
    }

    /// Myopic score: the period-`t` term of the objective (1-based `t`).
    pub fn score_myopic(&self, x: &Schedule, t: usize) -> Result<f64, CoverError> {
        self.check_period(t)?;
        self.check_schedule(x)?;
        Ok(self.period_value(t - 1, &x.levels[t - 1]))
    }

    /// Hyperoptic score: periods `t..=T` with the period-`t` outlets kept in
    /// every later period (1-based `t`).
    pub fn score_hyperoptic(&self, x: &Schedule, t: usize) -> Result<f64, CoverError> {
        self.check_period(t)?;
        self.check_schedule(x)?;
        let now = &x.levels[t - 1];
        Ok((t - 1..self.horizon())
            .map(|tp| {
                let held: Vec<u32> = x.levels[tp]
                    .iter()
                    .zip(now)
                    .map(|(a, b)| *a.max(b))
                    .collect();
                self.period_value(tp, &held)
            })
            .sum())
    }

    fn check_period(&self, t: usize) -> Result<(), CoverError> {
        if t == 0 || t > self.horizon() {
            Err(CoverError::Period {
                t,
                horizon: self.horizon(),
            })
        } else {
            Ok(())
        }
    }

    /// Population covered when every station has all its outlets.
    pub fn saturation_value(&self) -> f64 {
        let full: Vec<u32> = (0..self.n_stations())
            .map(|j| self.max_outlets(j))
            .collect();
        (0..self.horizon())
            .map(|t| self.period_value(t, &full))
            .sum()
    }
}

/// Relative gap in percent, `100·(best − value)/best`.
pub fn gap(best: f64, value: f64) -> Result<f64, CoverError> {
    if !(best > 0.0) {
        return Err(CoverError::NonPositiveBest(best));
    }
    Ok(100.0 * (best - value) / best)
}

const CACHE_MAGIC: &[u8; 8] = b"EVCOV001";

/// Fingerprint of an instance: SHA-256 of its JSON serialization.
pub fn instance_hash(inst: &Instance) -> [u8; 32] {
    Sha256::digest(inst.to_json().as_bytes()).into()
}

impl CoverageTensor {
    /// Writes the tensor as a cache file.
    ///
    /// Layout, all integers little-endian:
    /// `"EVCOV001"`, 32-byte instance hash, u64 station count, u64 word
    /// count, one u64 outlet count per station, then the words of
    /// `a[j][k]` for j ascending and k ascending, then the forced words,
    /// then u64 forced count and u64 dropped count.
    pub fn write_cache(&self, inst: &Instance, path: &Path) -> Result<(), CoverError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&instance_hash(inst));
        let put = |buf: &mut Vec<u8>, v: u64| buf.extend_from_slice(&v.to_le_bytes());
        put(&mut buf, self.bits.len() as u64);
        put(&mut buf, self.index.n_words() as u64);
        for rows in &self.bits {
            put(&mut buf, rows.len() as u64);
        }
        for rows in &self.bits {
            for row in rows {
                row.iter().for_each(|w| put(&mut buf, *w));
            }
        }
        self.home.forced.iter().for_each(|w| put(&mut buf, *w));
        put(&mut buf, self.home.forced_count as u64);
        put(&mut buf, self.home.dropped_count as u64);
        crate::util::write_atomic(path, &buf)?;
        Ok(())
    }

    /// Reads a cache file written for exactly this instance. Returns
    /// `Ok(None)` when the hash does not match.
    pub fn read_cache(inst: &Instance, path: &Path) -> Result<Option<Self>, CoverError> {
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        let bad = |what: &str| CoverError::Cache(what.to_string());
        if data.len() < 40 || &data[..8] != CACHE_MAGIC {
            return Err(bad("not a coverage cache file"));
        }
        if data[8..40] != instance_hash(inst) {
            return Ok(None);
        }
        let mut words = data[40..]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()));
        if data[40..].len() % 8 != 0 {
            return Err(bad("truncated"));
        }
        let mut next = || words.next().ok_or_else(|| bad("truncated"));
        let index = TripletIndex::new(inst);
        let m = next()? as usize;
        let n_words = next()? as usize;
        if m != inst.n_stations() || n_words != index.n_words() {
            return Err(bad("dimensions do not match the instance"));
        }
        let mut ks = Vec::with_capacity(m);
        for j in 0..m {
            let k = next()? as usize;
            if k != inst.max_outlets(j) as usize {
                return Err(bad("outlet counts do not match the instance"));
            }
            ks.push(k);
        }
        let mut bits = Vec::with_capacity(m);
        for &k in &ks {
            let mut rows = Vec::with_capacity(k);
            for _ in 0..k {
                rows.push(
                    (0..n_words)
                        .map(|_| next())
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            bits.push(rows);
        }
        let forced = (0..n_words)
            .map(|_| next())
            .collect::<Result<Vec<_>, _>>()?;
        let forced_count = next()? as usize;
        let dropped_count = next()? as usize;
        Ok(Some(CoverageTensor {
            index,
            bits,
            home: HomePreprocessing {
                forced,
                forced_count,
                dropped_count,
            },
        }))
    }

    /// Loads the cache at `path` if it matches, else builds and rewrites it.
    pub fn load_or_build(inst: &Instance, path: &Path) -> Result<Self, CoverError> {
        if path.exists() {
            if let Ok(Some(cov)) = Self::read_cache(inst, path) {
                return Ok(cov);
            }
        }
        let cov = Self::build(inst);
        cov.write_cache(inst, path)?;
        Ok(cov)
    }
}

/// Writes `value` and `per_period` as a short text line; used in logs.
pub fn describe(eval: &Evaluation, mut out: impl Write) -> std::io::Result<()> {
    write!(out, "f = {:.6} (", eval.total)?;
    for (t, v) in eval.per_period.iter().enumerate() {
        if t > 0 {
            write!(out, ", ")?;
        }
        write!(out, "t{}: {:.6}", t + 1, v)?;
    }
    write!(out, ")")
}
