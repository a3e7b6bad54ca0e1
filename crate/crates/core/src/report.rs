//! Run rows and their per-method summary: nearest-rank percentiles, mean,
//! median and the number of instances where a method matched the best
//! known value.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two values this close count as the same objective.
pub const BEST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no rows to report")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One method on one instance. Skipped runs carry no value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub instance: String,
    pub method: String,
    pub f: Option<f64>,
    /// Percent below the best value any method found on the instance.
    pub gap: Option<f64>,
    pub wall_time_s: f64,
    pub termination: String,
    pub skipped: Option<String>,
}

/// `p`-th percentile by nearest rank: the value at rank `⌈p·n/100⌉` of the
/// sorted sample (rank 1 for `p = 0`).
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

/// Summed in sorted order so row order cannot change the last bit.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Middle value, or the average of the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Fills `gap` on every solved row against the best value per instance.
/// Instances whose best value is not positive get no gap.
pub fn fill_gaps(rows: &mut [RunRow]) {
    let best = best_per_instance(rows);
    for row in rows.iter_mut() {
        row.gap = match (row.f, best.get(&row.instance)) {
            (Some(f), Some(&b)) if b > 0.0 => Some(100.0 * (b - f) / b),
            _ => None,
        };
    }
}

pub fn best_per_instance(rows: &[RunRow]) -> BTreeMap<String, f64> {
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for row in rows {
        if let Some(f) = row.f {
            let e = best.entry(row.instance.clone()).or_insert(f);
            if f > *e {
                *e = f;
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub solved: usize,
    pub skipped: usize,
    pub gap_p5: Option<f64>,
    pub gap_mean: Option<f64>,
    pub gap_median: Option<f64>,
    pub gap_p95: Option<f64>,
    pub n_best: usize,
    pub time_mean_s: Option<f64>,
}

/// Per-method aggregates, methods in name order. Gaps are recomputed from
/// the values, so row order and stale gap fields do not matter.
pub fn summarize(rows: &[RunRow]) -> Result<Vec<MethodSummary>, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut rows = rows.to_vec();
    fill_gaps(&mut rows);
    let best = best_per_instance(&rows);
    let mut by_method: BTreeMap<&str, Vec<&RunRow>> = BTreeMap::new();
    for row in &rows {
        by_method.entry(row.method.as_str()).or_default().push(row);
    }
    Ok(by_method
        .into_iter()
        .map(|(method, rs)| {
            let gaps: Vec<f64> = rs.iter().filter_map(|r| r.gap).collect();
            let times: Vec<f64> = rs.iter().filter(|r| r.f.is_some()).map(|r| r.wall_time_s).collect();
            MethodSummary {
                method: method.to_string(),
                solved: rs.iter().filter(|r| r.f.is_some()).count(),
                skipped: rs.iter().filter(|r| r.f.is_none()).count(),
                gap_p5: percentile(&gaps, 5.0),
                gap_mean: mean(&gaps),
                gap_median: median(&gaps),
                gap_p95: percentile(&gaps, 95.0),
                n_best: rs
                    .iter()
                    .filter(|r| matches!((r.f, best.get(&r.instance)), (Some(f), Some(b)) if (b - f).abs() <= BEST_TOLERANCE))
                    .count(),
                time_mean_s: mean(&times),
            }
        })
        .collect())
}

pub fn write_rows(rows: &[RunRow], out: impl Write) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows(input: impl Read) -> Result<Vec<RunRow>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<Result<Vec<RunRow>, _>>()?;
    Ok(rows)
}

pub fn write_summary(summary: &[MethodSummary], out: impl Write) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    for s in summary {
        w.serialize(s)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// 5th percentile, median and 95th percentile of a sample, for the
/// comparison tables.
pub fn spread(values: &[f64]) -> Option<(f64, f64, f64)> {
    Some((
        percentile(values, 5.0)?,
        median(values)?,
        percentile(values, 95.0)?,
    ))
}
