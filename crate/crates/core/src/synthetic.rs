//! Explicit joint distributions over (center word, window contents).
//!
//! A `SubsetJointModel` assigns a probability to every (center k, subset S)
//! pair: "a window centered at k contains exactly the word set S". All the
//! conditionals the error decomposition consumes follow by enumeration, with
//! no estimation involved, which makes the model the reference input for
//! identity checks: on full support every term is finite and the
//! decomposition must balance exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::paraphrase::ParaphraseDistribution;
use crate::pmi::SparsePmiMatrix;

/// Joint table p(center k, present-word subset S) over a small universe.
/// Words double as centers; subsets range over all 2^n bitmasks.
#[derive(Debug, Clone)]
pub struct SubsetJointModel {
    pub n: usize,
    /// probs[k][s], normalized to sum 1 over all (k, s).
    probs: Vec<Vec<f64>>,
}

impl SubsetJointModel {
    pub fn new(mut probs: Vec<Vec<f64>>) -> Self {
        let n = probs.len();
        assert!(n >= 2 && n <= 16, "universe must hold 2..=16 words");
        assert!(probs.iter().all(|row| row.len() == 1 << n));
        let total: f64 = probs.iter().flatten().sum();
        assert!(total > 0.0);
        for row in probs.iter_mut() {
            for p in row.iter_mut() {
                *p /= total;
            }
        }
        SubsetJointModel { n, probs }
    }

    /// Random model with strictly positive mass on every (center, subset).
    pub fn random_full_support(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs = (0..n)
            .map(|_| (0..1usize << n).map(|_| rng.gen_range(0.05..1.0)).collect())
            .collect();
        Self::new(probs)
    }

    /// Model where word presences are independent given the center:
    /// p(S | k) = prod_{w in S} q[k][w] * prod_{w not in S} (1 - q[k][w]).
    /// Conditional dependence terms vanish on such a model.
    pub fn conditionally_independent(center_weights: &[f64], presence: &[Vec<f64>]) -> Self {
        let n = center_weights.len();
        assert_eq!(presence.len(), n);
        let probs = (0..n)
            .map(|k| {
                (0..1usize << n)
                    .map(|s| {
                        let mut p = center_weights[k];
                        for w in 0..n {
                            let q = presence[k][w];
                            p *= if s >> w & 1 == 1 { q } else { 1.0 - q };
                        }
                        p
                    })
                    .collect()
            })
            .collect();
        Self::new(probs)
    }

    pub fn p_center(&self, k: u32) -> f64 {
        self.probs[k as usize].iter().sum()
    }

    /// P(word i present | center k).
    pub fn p_word_given_center(&self, i: u32, k: u32) -> f64 {
        let row = &self.probs[k as usize];
        let mask = 1usize << i;
        let joint: f64 =
            row.iter().enumerate().filter(|(s, _)| s & mask != 0).map(|(_, &p)| p).sum();
        joint / self.p_center(k)
    }

    /// P(both of {i, j} present | center k).
    pub fn p_pair_given_center(&self, i: u32, j: u32, k: u32) -> f64 {
        let row = &self.probs[k as usize];
        let mask = (1usize << i) | (1usize << j);
        let joint: f64 =
            row.iter().enumerate().filter(|(s, _)| s & mask == mask).map(|(_, &p)| p).sum();
        joint / self.p_center(k)
    }

    pub fn p_word(&self, i: u32) -> f64 {
        (0..self.n as u32).map(|k| self.p_word_given_center(i, k) * self.p_center(k)).sum()
    }

    pub fn p_pair(&self, i: u32, j: u32) -> f64 {
        (0..self.n as u32).map(|k| self.p_pair_given_center(i, j, k) * self.p_center(k)).sum()
    }

    /// P(center k | both of {i, j} present).
    pub fn p_center_given_pair(&self, k: u32, i: u32, j: u32) -> f64 {
        self.p_pair_given_center(i, j, k) * self.p_center(k) / self.p_pair(i, j)
    }

    /// PMI(x, c) = ln p(x | c) / p(x), as a matrix with word rows and center
    /// columns. Zero-probability cells are simply absent.
    pub fn pmi_matrix(&self) -> SparsePmiMatrix {
        let mut entries = Vec::new();
        for x in 0..self.n as u32 {
            let px = self.p_word(x);
            for c in 0..self.n as u32 {
                let pxc = self.p_word_given_center(x, c);
                if pxc > 0.0 && px > 0.0 {
                    entries.push((x, c, (pxc / px).ln()));
                }
            }
        }
        SparsePmiMatrix::from_entries(self.n, entries, 0)
    }

    /// Package the conditionals of one pair for the error decomposition.
    pub fn distribution(&self, a: u32, b: u32) -> ParaphraseDistribution {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        assert!(i != j);
        let centers: Vec<u32> = (0..self.n as u32).collect();
        let center_given_pair: Vec<(u32, f64)> = centers
            .iter()
            .map(|&k| (k, self.p_center_given_pair(k, i, j)))
            .filter(|&(_, p)| p > 0.0)
            .collect();
        let pair_given_center: Vec<(u32, f64)> = centers
            .iter()
            .map(|&k| (k, self.p_pair_given_center(i, j, k)))
            .filter(|&(_, p)| p > 0.0)
            .collect();
        let word_given_center = [i, j].map(|w| {
            centers
                .iter()
                .map(|&k| (k, self.p_word_given_center(w, k)))
                .filter(|&(_, p)| p > 0.0)
                .collect::<Vec<(u32, f64)>>()
        });
        ParaphraseDistribution {
            pair: (i, j),
            vocab_len: self.n,
            center_given_pair,
            pair_given_center,
            word_given_center,
            p_pair: self.p_pair(i, j),
            p_words: [self.p_word(i), self.p_word(j)],
        }
    }
}
