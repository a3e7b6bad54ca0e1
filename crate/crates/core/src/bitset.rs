//! Flat bit index over triplets (t, i, r).
//!
//! Triplets are ordered period-major, then class, then scenario. Each (t, i)
//! block starts on a fresh 64-bit word, so every word belongs to a single
//! class and period and carries one weight N_i^t / R_i. A weighted popcount
//! over a word range is then exactly the covered population.

use serde::{Deserialize, Serialize};

use crate::instance::Instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletIndex {
    horizon: usize,
    scenarios: Vec<usize>,
    /// First word of block (t, i), `block_start[t][i]`.
    block_start: Vec<Vec<usize>>,
    /// Word range of each period.
    period_range: Vec<(usize, usize)>,
    /// Weight of every word.
    weights: Vec<f64>,
}

impl TripletIndex {
    pub fn new(inst: &Instance) -> Self {
        let scenarios: Vec<usize> = (0..inst.n_classes()).map(|i| inst.scenarios(i)).collect();
        let mut block_start = Vec::with_capacity(inst.horizon);
        let mut period_range = Vec::with_capacity(inst.horizon);
        let mut weights = Vec::new();
        for t in 0..inst.horizon {
            let first = weights.len();
            let mut row = Vec::with_capacity(scenarios.len());
            for (i, &r) in scenarios.iter().enumerate() {
                row.push(weights.len());
                let w = inst.population(i, t) / r as f64;
                weights.extend(std::iter::repeat_n(w, r.div_ceil(64)));
            }
            block_start.push(row);
            period_range.push((first, weights.len()));
        }
        TripletIndex {
            horizon: inst.horizon,
            scenarios,
            block_start,
            period_range,
            weights,
        }
    }

    pub fn n_words(&self) -> usize {
        self.weights.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_classes(&self) -> usize {
        self.scenarios.len()
    }

    pub fn scenarios(&self, i: usize) -> usize {
        self.scenarios[i]
    }

    /// Number of triplets, Σ_i R_i · T.
    pub fn n_triplets(&self) -> usize {
        self.scenarios.iter().sum::<usize>() * self.horizon
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn period_range(&self, t: usize) -> std::ops::Range<usize> {
        let (a, b) = self.period_range[t];
        a..b
    }

    /// Word and bit mask of triplet (t, i, r).
    #[inline]
    pub fn locate(&self, t: usize, i: usize, r: usize) -> (usize, u64) {
        (self.block_start[t][i] + r / 64, 1u64 << (r % 64))
    }

    pub fn block_words(&self, t: usize, i: usize) -> std::ops::Range<usize> {
        let start = self.block_start[t][i];
        start..start + self.scenarios[i].div_ceil(64)
    }

    /// Visits every triplet in index order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.horizon).flat_map(move |t| {
            (0..self.scenarios.len())
                .flat_map(move |i| (0..self.scenarios[i]).map(move |r| (t, i, r)))
        })
    }

    /// Σ popcount(word)·weight over `range`.
    #[inline]
    pub fn weighted_count(&self, words: &[u64], range: std::ops::Range<usize>) -> f64 {
        let mut total = 0.0;
        for (w, weight) in words[range.clone()].iter().zip(&self.weights[range]) {
            total += f64::from(w.count_ones()) * weight;
        }
        total
    }
}

/// Sets bit (word, mask) in `words`.
#[inline]
pub fn set(words: &mut [u64], (word, mask): (usize, u64)) {
    words[word] |= mask;
}

#[inline]
pub fn test(words: &[u64], (word, mask): (usize, u64)) -> bool {
    words[word] & mask != 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::tiny_instance;

    #[test]
    fn blocks_are_word_aligned_and_cover_all_triplets() {
        let inst = tiny_instance(4, 2);
        let idx = TripletIndex::new(&inst);
        assert_eq!(idx.n_triplets(), inst.n_triplets());
        assert_eq!(idx.triplets().count(), inst.n_triplets());
        let mut seen = std::collections::HashSet::new();
        for (t, i, r) in idx.triplets() {
            let (w, m) = idx.locate(t, i, r);
            assert!(idx.period_range(t).contains(&w));
            assert!(idx.block_words(t, i).contains(&w));
            assert!(seen.insert((w, m)));
        }
        let all = vec![u64::MAX; idx.n_words()];
        // with every valid bit set the weighted count is the population
        let mut full = vec![0u64; idx.n_words()];
        for (t, i, r) in idx.triplets() {
            set(&mut full, idx.locate(t, i, r));
        }
        let total: f64 = (0..inst.horizon)
            .map(|t| idx.weighted_count(&full, idx.period_range(t)))
            .sum();
        assert!((total - inst.total_mass()).abs() < 1e-9);
        assert!(idx.weighted_count(&all, 0..idx.n_words()) >= total);
    }
}
