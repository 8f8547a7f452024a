//! Windowed co-occurrence counting.
//!
//! Two stores are built from a token stream: word-context pair counts (the
//! PMI numerators) and centered triplet counts N(w_i, w_j, w_k) — the pair
//! {w_i, w_j} co-occurring anywhere in the window centered at w_k. Counting
//! is data-parallel over center-position shards; shard results merge into a
//! result identical to a single-shard run.

mod pair_index;
mod spill;
pub mod store_io;

pub use pair_index::PairIndex;
pub use spill::SpillCounter;

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::{TokenStream, Vocabulary};
use crate::util::shard_ranges;

/// Largest supported pair universe. The packed key layout keeps the pair
/// index in the high 40 bits, far above what this bound ever produces, but
/// the public contract stops at 2^16 words.
pub const MAX_UNIVERSE: u32 = 1 << 16;
/// Center ids occupy the low 24 bits of a packed triplet key.
pub const MAX_CENTER_ID: u32 = 1 << 24;
const CENTER_BITS: u32 = 24;

#[derive(Debug, Error)]
pub enum CountError {
    #[error("pair universe of {requested} words exceeds the supported maximum {max}")]
    UniverseTooLarge { requested: u32, max: u32 },
    #[error("vocabulary of {len} words exceeds the packed center-id space ({max})")]
    VocabularyTooLarge { len: usize, max: usize },
    #[error("incompatible stores: {0}")]
    Incompatible(String),
    #[error("count overflow: a u32 cell exceeded 2^32-1")]
    CountOverflow,
    #[error("empty candidate pair list: well-defined fraction is undefined")]
    EmptyCandidates,
    #[error("window radius must be >= 1")]
    BadRadius,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed count store: {0}")]
    Format(String),
}

/// Knobs shared by both counting passes.
#[derive(Debug, Clone)]
pub struct CountingOptions {
    pub window_radius: u32,
    /// Shard count for parallel counting; 1 forces the sequential path.
    pub shards: usize,
    /// In-memory budget per shard counter before spilling sorted runs.
    pub memory_budget_bytes: usize,
    pub spill_dir: Option<PathBuf>,
}

impl Default for CountingOptions {
    fn default() -> Self {
        CountingOptions {
            window_radius: 5,
            shards: 1,
            memory_budget_bytes: 1 << 30,
            spill_dir: None,
        }
    }
}

/// Sparse (word, context) counts with marginals.
///
/// Keys are `(word << 32) | context`, sorted; zero entries are absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCounts {
    pub(crate) keys: Vec<u64>,
    pub(crate) counts: Vec<u32>,
    pub row_marginals: Vec<u64>,
    pub col_marginals: Vec<u64>,
    pub total: u64,
    pub vocab_fingerprint: u64,
    pub window_radius: u32,
}

#[inline]
fn pair_key(word: u32, ctx: u32) -> u64 {
    ((word as u64) << 32) | ctx as u64
}

impl PairCounts {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn vocab_len(&self) -> usize {
        self.row_marginals.len()
    }

    pub fn get(&self, word: u32, ctx: u32) -> u64 {
        match self.keys.binary_search(&pair_key(word, ctx)) {
            Ok(pos) => self.counts[pos] as u64,
            Err(_) => 0,
        }
    }

    /// Stored (context, count) entries for one word row, ascending context id.
    pub fn row(&self, word: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        let lo = self.keys.partition_point(|&k| k < pair_key(word, 0));
        let hi = self.keys.partition_point(|&k| (k >> 32) <= word as u64);
        (lo..hi).map(move |p| ((self.keys[p] & 0xffff_ffff) as u32, self.counts[p]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.keys
            .iter()
            .zip(self.counts.iter())
            .map(|(&k, &c)| ((k >> 32) as u32, (k & 0xffff_ffff) as u32, c))
    }

    fn from_sorted(
        keys: Vec<u64>,
        counts: Vec<u32>,
        vocab_len: usize,
        vocab_fingerprint: u64,
        window_radius: u32,
    ) -> Self {
        let mut row_marginals = vec![0u64; vocab_len];
        let mut col_marginals = vec![0u64; vocab_len];
        let mut total = 0u64;
        for (&k, &c) in keys.iter().zip(counts.iter()) {
            let w = (k >> 32) as usize;
            let x = (k & 0xffff_ffff) as usize;
            row_marginals[w] += c as u64;
            col_marginals[x] += c as u64;
            total += c as u64;
        }
        PairCounts { keys, counts, row_marginals, col_marginals, total, vocab_fingerprint, window_radius }
    }

    /// Keywise sum of two compatible stores.
    pub fn merge(&self, other: &PairCounts) -> Result<PairCounts, CountError> {
        if self.vocab_fingerprint != other.vocab_fingerprint {
            return Err(CountError::Incompatible("vocabulary fingerprints differ".into()));
        }
        if self.window_radius != other.window_radius {
            return Err(CountError::Incompatible("window radii differ".into()));
        }
        let merged = spill::merge_sorted_pairs(vec![
            (self.keys.clone(), self.counts.clone()),
            (other.keys.clone(), other.counts.clone()),
        ])?;
        Ok(PairCounts::from_sorted(
            merged.0,
            merged.1,
            self.vocab_len(),
            self.vocab_fingerprint,
            self.window_radius,
        ))
    }
}

/// Sparse centered-triplet counts N(w_i, w_j, w_k).
///
/// Keys are `(pair_index << 24) | center`, sorted, i.e. grouped by pair and
/// ascending center within a pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletCounts {
    pub(crate) keys: Vec<u64>,
    pub(crate) counts: Vec<u32>,
    pub pair_index: PairIndex,
    /// Windows per center word: one increment per center position.
    pub center_marginals: Vec<u64>,
    /// Total center positions (= token stream length).
    pub total_windows: u64,
    /// Sum of all triplet counts.
    pub total_triplets: u64,
    pub vocab_fingerprint: u64,
    pub window_radius: u32,
}

impl TripletCounts {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn vocab_len(&self) -> usize {
        self.center_marginals.len()
    }

    pub fn universe(&self) -> u32 {
        self.pair_index.universe()
    }

    pub fn get(&self, a: u32, b: u32, center: u32) -> u64 {
        if a == b || a.max(b) >= self.universe() {
            return 0;
        }
        let key = (self.pair_index.encode(a, b) << CENTER_BITS) | center as u64;
        match self.keys.binary_search(&key) {
            Ok(pos) => self.counts[pos] as u64,
            Err(_) => 0,
        }
    }

    fn column_range(&self, l: u64) -> std::ops::Range<usize> {
        let lo = self.keys.partition_point(|&k| k < (l << CENTER_BITS));
        let hi = self.keys.partition_point(|&k| (k >> CENTER_BITS) <= l);
        lo..hi
    }

    /// All (center, count) entries for a canonical pair, ascending center.
    pub fn pair_column(&self, a: u32, b: u32) -> Vec<(u32, u32)> {
        if a == b || a.max(b) >= self.universe() {
            return Vec::new();
        }
        let r = self.column_range(self.pair_index.encode(a, b));
        r.map(|p| ((self.keys[p] & ((1 << CENTER_BITS) - 1)) as u32, self.counts[p])).collect()
    }

    /// N(W) = Σ_k N(w_i, w_j, w_k).
    pub fn pair_total(&self, a: u32, b: u32) -> u64 {
        if a == b || a.max(b) >= self.universe() {
            return 0;
        }
        let r = self.column_range(self.pair_index.encode(a, b));
        r.map(|p| self.counts[p] as u64).sum()
    }

    pub fn is_well_defined(&self, a: u32, b: u32) -> bool {
        self.pair_total(a, b) > 0
    }

    /// Σ_j N(w, j, ·) per center: the triplet tensor marginalized over the
    /// partner word, as sorted sparse (center, sum) entries.
    pub fn word_partial_by_center(&self, word: u32) -> Vec<(u32, f64)> {
        let mut acc: rustc_hash::FxHashMap<u32, u64> = rustc_hash::FxHashMap::default();
        for partner in 0..self.universe() {
            if partner == word {
                continue;
            }
            let r = self.column_range(self.pair_index.encode(word, partner));
            for p in r {
                let center = (self.keys[p] & ((1 << CENTER_BITS) - 1)) as u32;
                *acc.entry(center).or_insert(0) += self.counts[p] as u64;
            }
        }
        let mut out: Vec<(u32, f64)> = acc.into_iter().map(|(k, v)| (k, v as f64)).collect();
        out.sort_unstable_by_key(|e| e.0);
        out
    }

    /// Σ_j Σ_k N(w, j, k) for every universe word, in one pass.
    pub fn word_event_totals(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.universe() as usize];
        let mut row = 0u32;
        let mut next_row_start = self.pair_index.row_start(1);
        for (&key, &c) in self.keys.iter().zip(self.counts.iter()) {
            let l = key >> CENTER_BITS;
            while l >= next_row_start {
                row += 1;
                next_row_start = if row + 1 < self.universe() {
                    self.pair_index.row_start(row + 1)
                } else {
                    u64::MAX
                };
            }
            let (i, j) = (row, (l - self.pair_index.row_start(row)) as u32 + row + 1);
            out[i as usize] += c as u64;
            out[j as usize] += c as u64;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, u32, u32)> + '_ {
        self.keys.iter().zip(self.counts.iter()).map(move |(&k, &c)| {
            let (i, j) = self.pair_index.decode(k >> CENTER_BITS);
            (i, j, (k & ((1 << CENTER_BITS) - 1)) as u32, c)
        })
    }

    pub fn merge(&self, other: &TripletCounts) -> Result<TripletCounts, CountError> {
        if self.vocab_fingerprint != other.vocab_fingerprint {
            return Err(CountError::Incompatible("vocabulary fingerprints differ".into()));
        }
        if self.window_radius != other.window_radius {
            return Err(CountError::Incompatible("window radii differ".into()));
        }
        if self.universe() != other.universe() {
            return Err(CountError::Incompatible("pair universes differ".into()));
        }
        let (keys, counts) = spill::merge_sorted_pairs(vec![
            (self.keys.clone(), self.counts.clone()),
            (other.keys.clone(), other.counts.clone()),
        ])?;
        let mut center_marginals = self.center_marginals.clone();
        for (m, o) in center_marginals.iter_mut().zip(other.center_marginals.iter()) {
            *m += o;
        }
        let total_triplets = counts.iter().map(|&c| c as u64).sum();
        Ok(TripletCounts {
            keys,
            counts,
            pair_index: self.pair_index,
            center_marginals,
            total_windows: self.total_windows + other.total_windows,
            total_triplets,
            vocab_fingerprint: self.vocab_fingerprint,
            window_radius: self.window_radius,
        })
    }
}

/// Count (center, context) pairs: every position u with 0 < |u-t| <= radius
/// contributes +1 to (token[t], token[u]).
pub fn count_pairs(
    tokens: &TokenStream,
    vocab: &Vocabulary,
    opts: &CountingOptions,
) -> Result<PairCounts, CountError> {
    if opts.window_radius == 0 {
        return Err(CountError::BadRadius);
    }
    let fp = vocab.fingerprint();
    let parts = count_sharded(tokens, opts, |range, counter| {
        let ids = &tokens.ids;
        let r = opts.window_radius as usize;
        for t in range {
            let lo = t.saturating_sub(r);
            let hi = (t + r).min(ids.len().saturating_sub(1));
            for u in lo..=hi {
                if u != t {
                    counter.add(pair_key(ids[t], ids[u]), 1)?;
                }
            }
        }
        Ok(())
    })?;
    let (keys, counts) = spill::merge_sorted_pairs(parts)?;
    Ok(PairCounts::from_sorted(keys, counts, vocab.len(), fp, opts.window_radius))
}

/// Count centered triplets over the given pair universe (word ids
/// `0..universe_k`, i.e. the top-k most frequent words).
///
/// For each center position t: the center marginal of token[t] is
/// incremented once, and every unordered pair of distinct context positions
/// u != v (within the radius, both != t) whose words are distinct universe
/// members contributes +1 to N(word[u], word[v], word[t]). Repeated words at
/// distinct positions count once per position pair.
pub fn count_triplets(
    tokens: &TokenStream,
    vocab: &Vocabulary,
    universe_k: u32,
    opts: &CountingOptions,
) -> Result<TripletCounts, CountError> {
    if opts.window_radius == 0 {
        return Err(CountError::BadRadius);
    }
    if universe_k > MAX_UNIVERSE {
        return Err(CountError::UniverseTooLarge { requested: universe_k, max: MAX_UNIVERSE });
    }
    if vocab.len() > MAX_CENTER_ID as usize {
        return Err(CountError::VocabularyTooLarge {
            len: vocab.len(),
            max: MAX_CENTER_ID as usize,
        });
    }
    let fp = vocab.fingerprint();
    let pair_index = PairIndex::new(universe_k);
    let n_shards = opts.shards.max(1);
    let ranges = shard_ranges(tokens.len(), n_shards);

    let run_shard = |range: std::ops::Range<usize>| -> Result<ShardResult, CountError> {
        let ids = &tokens.ids;
        let r = opts.window_radius as usize;
        let mut counter =
            SpillCounter::new(opts.memory_budget_bytes / n_shards.max(1), opts.spill_dir.clone());
        let mut centers = vec![0u64; vocab.len()];
        let mut in_window: Vec<u32> = Vec::with_capacity(2 * r);
        for t in range {
            centers[ids[t] as usize] += 1;
            let lo = t.saturating_sub(r);
            let hi = (t + r).min(ids.len().saturating_sub(1));
            in_window.clear();
            for u in lo..=hi {
                if u != t && ids[u] < universe_k {
                    in_window.push(ids[u]);
                }
            }
            let center = ids[t] as u64;
            for a in 0..in_window.len() {
                for b in (a + 1)..in_window.len() {
                    let (wi, wj) = (in_window[a], in_window[b]);
                    if wi != wj {
                        counter.add((pair_index.encode(wi, wj) << CENTER_BITS) | center, 1)?;
                    }
                }
            }
        }
        let sorted = counter.finalize()?;
        Ok(ShardResult { sorted, centers })
    };

    let shard_results = run_shards(ranges, run_shard)?;
    let mut center_marginals = vec![0u64; vocab.len()];
    let mut parts = Vec::with_capacity(shard_results.len());
    for sr in shard_results {
        for (m, c) in center_marginals.iter_mut().zip(sr.centers.iter()) {
            *m += c;
        }
        parts.push(sr.sorted);
    }
    let (keys, counts) = spill::merge_sorted_pairs(parts)?;
    let total_windows = center_marginals.iter().sum();
    let total_triplets = counts.iter().map(|&c| c as u64).sum();
    Ok(TripletCounts {
        keys,
        counts,
        pair_index,
        center_marginals,
        total_windows,
        total_triplets,
        vocab_fingerprint: fp,
        window_radius: opts.window_radius,
    })
}

struct ShardResult {
    sorted: (Vec<u64>, Vec<u32>),
    centers: Vec<u64>,
}

fn count_sharded<F>(
    tokens: &TokenStream,
    opts: &CountingOptions,
    body: F,
) -> Result<Vec<(Vec<u64>, Vec<u32>)>, CountError>
where
    F: Fn(std::ops::Range<usize>, &mut SpillCounter) -> Result<(), CountError> + Sync,
{
    let n_shards = opts.shards.max(1);
    let ranges = shard_ranges(tokens.len(), n_shards);
    let run = |range: std::ops::Range<usize>| -> Result<(Vec<u64>, Vec<u32>), CountError> {
        let mut counter =
            SpillCounter::new(opts.memory_budget_bytes / n_shards, opts.spill_dir.clone());
        body(range, &mut counter)?;
        counter.finalize()
    };
    run_shards(ranges, run)
}

#[cfg(feature = "parallel")]
fn run_shards<T: Send>(
    ranges: Vec<std::ops::Range<usize>>,
    run: impl Fn(std::ops::Range<usize>) -> Result<T, CountError> + Sync + Send,
) -> Result<Vec<T>, CountError> {
    use rayon::prelude::*;
    if ranges.len() == 1 {
        return Ok(vec![run(ranges.into_iter().next().unwrap())?]);
    }
    ranges.into_par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_shards<T: Send>(
    ranges: Vec<std::ops::Range<usize>>,
    run: impl Fn(std::ops::Range<usize>) -> Result<T, CountError> + Sync + Send,
) -> Result<Vec<T>, CountError> {
    ranges.into_iter().map(run).collect()
}

/// Fraction of candidate pairs that co-occur at least once, i.e. have
/// N(W) > 0. Pairs are canonicalized; a pair with equal words or a word
/// outside the universe counts as not well-defined.
pub fn well_defined_fraction(
    triplets: &TripletCounts,
    candidate_pairs: &[(u32, u32)],
) -> Result<f64, CountError> {
    if candidate_pairs.is_empty() {
        return Err(CountError::EmptyCandidates);
    }
    let defined = candidate_pairs.iter().filter(|&&(a, b)| triplets.is_well_defined(a, b)).count();
    Ok(defined as f64 / candidate_pairs.len() as f64)
}

#[cfg(test)]
mod tests;
