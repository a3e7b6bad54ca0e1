//! Big-M constants for the single-level model.
//!
//! Per (t, i): `ā` is the smallest `κ + ε` over considered stations and
//! scenarios. Per (t, i, r) and station: `b = Σβ + κ + ε`, `ν = b − ā`.
//! `μ` is the largest utility bound of the triplet minus the alternative's
//! own floor (`κ_0 + ε_0` for the opt-out, `ā` for stations).

use serde::{Deserialize, Serialize};

use crate::instance::Instance;

/// Margin used when `ā` has to be pushed under the opt-out utility.
pub const A_LOWER_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoundOptions {
    /// Use `min (β_1 + κ + ε)` for `ā` instead of `min (κ + ε)`.
    pub strengthened: bool,
}

/// Bounds of one (t, i) block. Station vectors follow the block's station
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBounds {
    /// `None` when the class considers no station.
    pub a_lower: Option<f64>,
    /// `κ_0 + ε_0` per scenario.
    pub u0: Vec<f64>,
    /// `κ + ε` per scenario and station.
    pub base: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
    pub mu_optout: Vec<f64>,
    pub mu_station: Vec<Vec<f64>>,
    /// `ā` had to be lowered below the smallest opt-out utility.
    pub lowered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMBounds {
    pub options: BoundOptions,
    /// `blocks[t][i]`.
    pub blocks: Vec<Vec<BlockBounds>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    pub t: usize,
    pub i: usize,
    pub r: Option<usize>,
    pub what: String,
}

pub fn compute_bounds(inst: &Instance) -> BigMBounds {
    compute_bounds_with(inst, BoundOptions::default())
}

pub fn compute_bounds_with(inst: &Instance, options: BoundOptions) -> BigMBounds {
    let blocks = (0..inst.horizon)
        .map(|t| {
            (0..inst.n_classes())
                .map(|i| block_bounds(inst, t, i, options))
                .collect()
        })
        .collect();
    BigMBounds { options, blocks }
}

fn block_bounds(inst: &Instance, t: usize, i: usize, options: BoundOptions) -> BlockBounds {
    let block = inst.block(i, t);
    let first = block.first_station_alt();
    let n_r = inst.scenarios(i);
    let mut u0 = Vec::with_capacity(n_r);
    let mut base = Vec::with_capacity(n_r);
    let mut b = Vec::with_capacity(n_r);
    for r in 0..n_r {
        let eps = inst.errors_at(t, i, r);
        u0.push(block.optout_asc + eps[0]);
        let row: Vec<f64> = block
            .stations
            .iter()
            .enumerate()
            .map(|(s, st)| st.asc + eps[first + s])
            .collect();
        b.push(
            block
                .stations
                .iter()
                .zip(&row)
                .map(|(st, base)| st.increments.iter().sum::<f64>() + base)
                .collect::<Vec<f64>>(),
        );
        base.push(row);
    }
    let mut a_lower = base
        .iter()
        .flat_map(|row| {
            row.iter().zip(&block.stations).map(|(v, st)| {
                if options.strengthened {
                    v + st.increments.first().copied().unwrap_or(0.0)
                } else {
                    *v
                }
            })
        })
        .reduce(f64::min);
    let mut lowered = false;
    if let Some(a) = a_lower {
        let min_u0 = u0.iter().copied().fold(f64::INFINITY, f64::min);
        if a >= min_u0 {
            let new = min_u0 - A_LOWER_MARGIN;
            log::warn!("class {} period {}: closed-station bound {a} not below opt-out utility {min_u0}; lowered to {new}", i + 1, t + 1);
            a_lower = Some(new);
            lowered = true;
        }
    }
    let a = a_lower.unwrap_or(f64::NAN);
    let nu: Vec<Vec<f64>> = b
        .iter()
        .map(|row| row.iter().map(|v| v - a).collect())
        .collect();
    let mut mu_optout = Vec::with_capacity(n_r);
    let mut mu_station = Vec::with_capacity(n_r);
    for r in 0..n_r {
        let top = b[r].iter().copied().fold(u0[r], f64::max);
        mu_optout.push(top - u0[r]);
        mu_station.push(vec![top - a; block.stations.len()]);
    }
    BlockBounds {
        a_lower,
        u0,
        base,
        b,
        nu,
        mu_optout,
        mu_station,
        lowered,
    }
}

impl BigMBounds {
    pub fn block(&self, t: usize, i: usize) -> &BlockBounds {
        &self.blocks[t][i]
    }

    /// Every (t, i) whose `ā` was lowered.
    pub fn lowered(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (t, row) in self.blocks.iter().enumerate() {
            for (i, b) in row.iter().enumerate() {
                if b.lowered {
                    out.push((t, i));
                }
            }
        }
        out
    }

    /// Checks `ā < u_0`, `ā ≤ b`, `ν ≥ 0` and `μ ≥ 0` everywhere.
    pub fn verify(&self) -> Vec<BoundViolation> {
        let mut out = Vec::new();
        for (t, row) in self.blocks.iter().enumerate() {
            for (i, bb) in row.iter().enumerate() {
                let Some(a) = bb.a_lower else { continue };
                for r in 0..bb.u0.len() {
                    let mut bad = |what: String| {
                        out.push(BoundViolation {
                            t,
                            i,
                            r: Some(r),
                            what,
                        });
                    };
                    if !(a < bb.u0[r]) {
                        bad(format!(
                            "closed-station bound {a} not below opt-out utility {}",
                            bb.u0[r]
                        ));
                    }
                    for (s, (&b, &nu)) in bb.b[r].iter().zip(&bb.nu[r]).enumerate() {
                        if !(a <= b) || !(nu >= 0.0) {
                            bad(format!("station term {s}: upper bound {b} below {a}"));
                        }
                        if !(bb.mu_station[r][s] >= 0.0) {
                            bad(format!("station term {s}: negative big-M"));
                        }
                    }
                    if !(bb.mu_optout[r] >= 0.0) {
                        bad("negative opt-out big-M".into());
                    }
                }
            }
        }
        out
    }
}
