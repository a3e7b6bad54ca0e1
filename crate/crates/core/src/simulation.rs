//! Simulated utility errors.
//!
//! Each alternative's error is `factor_sd[n]·ξ[n] + ζ`, where `n` is the
//! alternative's nest, `ξ` is one normal draw per nest shared by all its
//! alternatives, and `ζ` is an independent Gumbel draw per alternative.
//!
//! Every triplet (t, i, r) owns its own ChaCha stream keyed by
//! `(base_seed, instance index)` and `(i, t, r)`, so tensors are identical no
//! matter how the work is scheduled. Within a stream the draws are taken in a
//! fixed order: one `ξ` per nest (nest 0 first), then one `ζ` per alternative
//! in block order.

use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{ChoiceBlock, ErrorTensor, UserClass};
use crate::util::{mix64, mix_all};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("alternative `{0}` has no nest")]
    MissingNest(String),
    #[error("nest {nest} referenced but only {count} factor deviations given")]
    UnknownNest { nest: usize, count: usize },
    #[error("nest spec: {0}")]
    BadParameter(String),
}

/// `location − scale·ln(−ln u)`: the Gumbel quantile at `u ∈ (0, 1)`.
#[inline]
pub fn gumbel_from_uniform(u: f64, location: f64, scale: f64) -> f64 {
    location - scale * (-u.ln()).ln()
}

/// One Gumbel(location, scale) draw by inverse CDF.
pub fn gumbel_draw<R: Rng + ?Sized>(rng: &mut R, location: f64, scale: f64) -> f64 {
    let u: f64 = Open01.sample(rng);
    gumbel_from_uniform(u, location, scale)
}

/// Nest assignment and scales of the error-components model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestSpec {
    pub optout_nest: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_nest: Option<usize>,
    /// Nest of each station, by station index.
    pub station_nest: Vec<usize>,
    /// Standard deviation of each nest's factor.
    pub factor_sd: Vec<f64>,
    pub normal_scale: f64,
    pub gumbel_location: f64,
    pub gumbel_scale: f64,
}

impl NestSpec {
    /// Opt-out alone, every station in one shared nest.
    pub fn two_nest(n_stations: usize) -> Self {
        NestSpec {
            optout_nest: 0,
            home_nest: None,
            station_nest: vec![1; n_stations],
            factor_sd: vec![1.0, 1.0],
            normal_scale: 1.0,
            gumbel_location: 0.0,
            gumbel_scale: 3.0,
        }
    }

    /// Opt-out, home charging and stations in three separate nests.
    pub fn three_nest(n_stations: usize) -> Self {
        NestSpec {
            optout_nest: 0,
            home_nest: Some(1),
            station_nest: vec![2; n_stations],
            factor_sd: vec![1.0, 1.0, 1.0],
            normal_scale: 1.0,
            gumbel_location: 0.0,
            gumbel_scale: 3.0,
        }
    }

    pub fn n_nests(&self) -> usize {
        self.factor_sd.len()
    }

    fn check(&self) -> Result<(), SimError> {
        if !(self.gumbel_scale > 0.0 && self.normal_scale > 0.0) {
            return Err(SimError::BadParameter("scales must be positive".into()));
        }
        if self.factor_sd.iter().any(|s| !(*s > 0.0)) {
            return Err(SimError::BadParameter(
                "factor deviations must be positive".into(),
            ));
        }
        let count = self.factor_sd.len();
        let nests = std::iter::once(self.optout_nest)
            .chain(self.home_nest)
            .chain(self.station_nest.iter().copied());
        for nest in nests {
            if nest >= count {
                return Err(SimError::UnknownNest { nest, count });
            }
        }
        Ok(())
    }

    /// Nest of every alternative of a block, in block order.
    fn block_nests(&self, block: &ChoiceBlock) -> Result<Vec<usize>, SimError> {
        let mut out = Vec::with_capacity(block.n_alternatives());
        out.push(self.optout_nest);
        if block.home_asc.is_some() {
            out.push(
                self.home_nest
                    .ok_or_else(|| SimError::MissingNest("home".into()))?,
            );
        }
        for term in &block.stations {
            let nest = self
                .station_nest
                .get(term.station as usize)
                .ok_or_else(|| SimError::MissingNest(format!("station {}", term.station)))?;
            out.push(*nest);
        }
        Ok(out)
    }
}

/// Which components enter the tensor. Draws are consumed identically in
/// every mode, so modes can be compared scenario by scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DrawMode {
    #[default]
    Full,
    /// Only the shared nest factors; Gumbel terms are drawn but dropped.
    FactorsOnly,
}

/// Seed material for one instance's error draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorKey {
    pub base_seed: u64,
    pub instance: u32,
}

impl ErrorKey {
    /// Independent stream for triplet (t, i, r).
    pub fn stream(&self, i: usize, t: usize, r: usize) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        let mut word = mix_all(&[self.base_seed, u64::from(self.instance), 0xe770]);
        for chunk in seed.chunks_mut(8) {
            word = mix64(word);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(mix_all(&[i as u64, t as u64, r as u64]));
        rng
    }
}

/// Draws `ε` for every class, period, scenario and alternative.
pub fn draw_errors(
    classes: &[UserClass],
    choices: &[Vec<ChoiceBlock>],
    nests: &NestSpec,
    key: ErrorKey,
    mode: DrawMode,
) -> Result<ErrorTensor, SimError> {
    nests.check()?;
    let per_class: Vec<Vec<f64>> = classes
        .par_iter()
        .zip(choices.par_iter())
        .enumerate()
        .map(|(i, (class, blocks))| {
            let mut out = Vec::new();
            for (t, block) in blocks.iter().enumerate() {
                let alt_nests = nests.block_nests(block)?;
                for r in 0..class.scenario_count as usize {
                    let mut rng = key.stream(i, t, r);
                    draw_triplet(&mut rng, nests, &alt_nests, mode, &mut out);
                }
            }
            Ok(out)
        })
        .collect::<Result<_, SimError>>()?;
    Ok(ErrorTensor::new(per_class.concat()))
}

fn draw_triplet(
    rng: &mut ChaCha8Rng,
    nests: &NestSpec,
    alt_nests: &[usize],
    mode: DrawMode,
    out: &mut Vec<f64>,
) {
    let xi: Vec<f64> = (0..nests.n_nests())
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * nests.normal_scale
        })
        .collect();
    for &nest in alt_nests {
        let zeta = gumbel_draw(rng, nests.gumbel_location, nests.gumbel_scale);
        let factor = nests.factor_sd[nest] * xi[nest];
        out.push(match mode {
            DrawMode::Full => factor + zeta,
            DrawMode::FactorsOnly => factor,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::StationTerm;

    #[test]
    fn gumbel_fixed_point() {
        let u = (-1.0f64).exp();
        assert_eq!(gumbel_from_uniform(u, 2.5, 3.0), 2.5);
    }

    fn block(stations: &[u32], home: bool) -> ChoiceBlock {
        ChoiceBlock {
            optout_asc: 4.5,
            home_asc: home.then_some(5.0),
            stations: stations
                .iter()
                .map(|&s| StationTerm {
                    station: s,
                    asc: 1.0,
                    increments: vec![0.281],
                })
                .collect(),
        }
    }

    fn class(r: u32, home: bool) -> UserClass {
        UserClass {
            id: 0,
            home_node: 0,
            populations: vec![1.0],
            has_home_charging: home,
            income_bracket: None,
            scenario_count: r,
            consideration_radius_km: None,
        }
    }

    #[test]
    fn same_nest_shares_factor_when_gumbel_dropped() {
        let classes = [class(20, false)];
        let choices = [vec![block(&[0, 1], false)]];
        let key = ErrorKey {
            base_seed: 4,
            instance: 0,
        };
        let eps = draw_errors(
            &classes,
            &choices,
            &NestSpec::two_nest(2),
            key,
            DrawMode::FactorsOnly,
        )
        .unwrap();
        for r in 0..20 {
            let s = &eps.values[r * 3..r * 3 + 3];
            assert_eq!(s[1], s[2]);
            assert_ne!(s[0], s[1]);
        }
        // the full tensor differs from the factor part only by the Gumbel terms
        let full = draw_errors(
            &classes,
            &choices,
            &NestSpec::two_nest(2),
            key,
            DrawMode::Full,
        )
        .unwrap();
        assert_ne!(full, eps);
    }

    #[test]
    fn deterministic_and_keyed() {
        let classes = [class(5, true), class(7, false)];
        let choices = [vec![block(&[0], true)], vec![block(&[0, 1], false)]];
        let key = ErrorKey {
            base_seed: 9,
            instance: 2,
        };
        let spec = NestSpec::three_nest(2);
        let a = draw_errors(&classes, &choices, &spec, key, DrawMode::Full).unwrap();
        let b = draw_errors(&classes, &choices, &spec, key, DrawMode::Full).unwrap();
        assert_eq!(a, b);
        let other = ErrorKey { instance: 3, ..key };
        assert_ne!(
            a,
            draw_errors(&classes, &choices, &spec, other, DrawMode::Full).unwrap()
        );
    }

    #[test]
    fn home_alternative_needs_a_nest() {
        let classes = [class(2, true)];
        let choices = [vec![block(&[0], true)]];
        let key = ErrorKey {
            base_seed: 0,
            instance: 0,
        };
        let err = draw_errors(
            &classes,
            &choices,
            &NestSpec::two_nest(1),
            key,
            DrawMode::Full,
        )
        .unwrap_err();
        assert_eq!(err, SimError::MissingNest("home".into()));
    }
}
