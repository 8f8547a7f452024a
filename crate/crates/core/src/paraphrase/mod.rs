//! Probability estimators and the five-term error decomposition for analogy
//! paraphrase pairs.
//!
//! For an analogy a : b :: a* : b* with pairs W = {a, b*} and W* = {a*, b},
//! the PMI rows of the four words decompose as
//!
//! ```text
//! PMI_b* - PMI_b - PMI_a* + PMI_a
//!     = -rho(W,W*) - sigma(W) + sigma(W*) + (tau(W) - tau(W*))·1
//! ```
//!
//! with elementwise terms over centers c:
//!
//! ```text
//! rho(c)   = ln p(c|W*) / p(c|W)
//! sigma(c) = ln p(W|c) / (p(w_i|c)·p(w_j|c))
//! tau      = ln p(W)   / (p(w_i)·p(w_j))
//! ```
//!
//! The sign arrangement above is fixed by requiring the identity to balance
//! exactly on full-support joint distributions (`decomposition_residual`
//! vanishes); published statements of the decomposition disagree among
//! themselves on the rho/sigma/tau signs, so the identity is the anchor.
//!
//! Log ratios over estimated probabilities hit zeros: ln(+inf) is replaced
//! by -ln(eps), ln(0) by ln(eps), and ln(0/0) by 0, with eps = 1e-15 by
//! default. Substitution counts are reported alongside every vector.

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::bats::AnalogyInstance;
use crate::cooccur::TripletCounts;
use crate::pmi::{PmiError, SparsePmiMatrix};
use crate::sparse::OffsetSparseVec;

/// Default clipping constant; -ln(1e-15) ≈ 34.54.
pub const DEFAULT_EPSILON: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum ParaphraseError {
    #[error("pair ({0}, {1}) never co-occurs: conditionals are undefined")]
    PairNotWellDefined(u32, u32),
    #[error("a paraphrase pair needs two distinct words")]
    DegeneratePair,
    #[error("word {word} outside the pair universe of {universe}")]
    OutOfUniverse { word: u32, universe: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("analogy has a degenerate pair (shared word between records)")]
    DegenerateAnalogy,
    #[error(transparent)]
    Pmi(#[from] PmiError),
}

/// Relative-frequency conditionals for one pair W = {w_i, w_j}.
///
/// Sparse vectors are sorted by center id. Probabilities here are estimator
/// outputs: position-pair counting can push p(W|c) above 1 for pathological
/// pairs (a word repeated inside one window); normal analogy pairs stay in
/// [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ParaphraseDistribution {
    /// Canonical (i, j), i < j.
    pub pair: (u32, u32),
    /// Length of the conditional vectors (full vocabulary size).
    pub vocab_len: usize,
    /// p(w_k | W), sums to 1 over the support.
    pub center_given_pair: Vec<(u32, f64)>,
    /// p(W | w_k), same support as `center_given_pair`.
    pub pair_given_center: Vec<(u32, f64)>,
    /// p(w_i | w_k) for w_i = pair.0 and pair.1.
    pub word_given_center: [Vec<(u32, f64)>; 2],
    /// p(W).
    pub p_pair: f64,
    /// p(w_i), p(w_j).
    pub p_words: [f64; 2],
}

/// Build the estimators for one pair from the triplet store:
/// p(w_k|W) = N(w_i,w_j,w_k)/N(W), p(W|w_k) = N(w_i,w_j,w_k)/N(w_k as
/// center), and the word conditionals/marginals by marginalizing the triplet
/// tensor over the partner word. The center marginal p(w_k) itself is
/// available as `triplets.center_marginals[k] / triplets.total_windows`.
pub fn estimate_distribution(
    triplets: &TripletCounts,
    pair: (u32, u32),
) -> Result<ParaphraseDistribution, ParaphraseError> {
    let (i, j) = canonical_pair(pair.0, pair.1)?;
    for w in [i, j] {
        if w >= triplets.universe() {
            return Err(ParaphraseError::OutOfUniverse { word: w, universe: triplets.universe() });
        }
    }
    let column = triplets.pair_column(i, j);
    let n_pair: u64 = column.iter().map(|&(_, c)| c as u64).sum();
    if n_pair == 0 {
        return Err(ParaphraseError::PairNotWellDefined(i, j));
    }
    let total_windows = triplets.total_windows as f64;
    let center_given_pair: Vec<(u32, f64)> =
        column.iter().map(|&(k, c)| (k, c as f64 / n_pair as f64)).collect();
    let pair_given_center: Vec<(u32, f64)> = column
        .iter()
        .map(|&(k, c)| (k, c as f64 / triplets.center_marginals[k as usize] as f64))
        .collect();
    let word_given_center = [i, j].map(|w| scaled_word_conditional(triplets, w));
    let p_words = [0, 1].map(|idx| {
        word_given_center[idx]
            .iter()
            .map(|&(k, p)| p * triplets.center_marginals[k as usize] as f64 / total_windows)
            .sum()
    });
    Ok(ParaphraseDistribution {
        pair: (i, j),
        vocab_len: triplets.vocab_len(),
        center_given_pair,
        pair_given_center,
        word_given_center,
        p_pair: n_pair as f64 / total_windows,
        p_words,
    })
}

fn scaled_word_conditional(triplets: &TripletCounts, w: u32) -> Vec<(u32, f64)> {
    triplets
        .word_partial_by_center(w)
        .into_iter()
        .map(|(k, s)| (k, s / triplets.center_marginals[k as usize] as f64))
        .collect()
}

fn canonical_pair(a: u32, b: u32) -> Result<(u32, u32), ParaphraseError> {
    match a.cmp(&b) {
        std::cmp::Ordering::Less => Ok((a, b)),
        std::cmp::Ordering::Equal => Err(ParaphraseError::DegeneratePair),
        std::cmp::Ordering::Greater => Ok((b, a)),
    }
}

/// Counts of clipping substitutions applied while assembling a vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClipStats {
    /// ln(+inf) -> -ln(eps).
    pub pos_clips: u64,
    /// ln(0) -> ln(eps).
    pub neg_clips: u64,
    /// ln(0/0) -> 0 (includes every element absent from both supports).
    pub zero_zero: u64,
}

impl ClipStats {
    pub fn merge(&mut self, other: &ClipStats) {
        self.pos_clips += other.pos_clips;
        self.neg_clips += other.neg_clips;
        self.zero_zero += other.zero_zero;
    }
}

#[inline]
fn clipped_log_ratio(num: f64, den: f64, epsilon: f64, stats: &mut ClipStats) -> f64 {
    match (num > 0.0, den > 0.0) {
        (true, true) => (num / den).ln(),
        (true, false) => {
            stats.pos_clips += 1;
            -epsilon.ln()
        }
        (false, true) => {
            stats.neg_clips += 1;
            epsilon.ln()
        }
        (false, false) => {
            stats.zero_zero += 1;
            0.0
        }
    }
}

/// Elementwise clipped ln(num/den) over two sorted sparse vectors of length
/// `dim`. Elements outside both supports are ln(0/0) -> 0 and are counted
/// into `zero_zero` without being materialized.
fn clipped_log_ratio_vec(
    num: &[(u32, f64)],
    den: &[(u32, f64)],
    dim: usize,
    epsilon: f64,
) -> (OffsetSparseVec, ClipStats) {
    let mut stats = ClipStats::default();
    let mut entries = Vec::with_capacity(num.len() + den.len());
    let mut a = 0;
    let mut b = 0;
    let mut touched = 0usize;
    while a < num.len() || b < den.len() {
        let ka = num.get(a).map(|e| e.0);
        let kb = den.get(b).map(|e| e.0);
        let (k, n, d) = match (ka, kb) {
            (Some(x), Some(y)) if x == y => {
                let e = (x, num[a].1, den[b].1);
                a += 1;
                b += 1;
                e
            }
            (Some(x), Some(y)) if x < y => {
                let e = (x, num[a].1, 0.0);
                a += 1;
                e
            }
            (Some(_), Some(y)) => {
                let e = (y, 0.0, den[b].1);
                b += 1;
                e
            }
            (Some(x), None) => {
                let e = (x, num[a].1, 0.0);
                a += 1;
                e
            }
            (None, Some(y)) => {
                let e = (y, 0.0, den[b].1);
                b += 1;
                e
            }
            (None, None) => unreachable!(),
        };
        touched += 1;
        let v = clipped_log_ratio(n, d, epsilon, &mut stats);
        if v != 0.0 {
            entries.push((k, v));
        }
    }
    stats.zero_zero += (dim - touched) as u64;
    (OffsetSparseVec::from_entries(dim, entries), stats)
}

/// rho(W, W*): elementwise ln p(c|W*) / p(c|W) with clipping.
pub fn paraphrase_error(
    dist_w: &ParaphraseDistribution,
    dist_w_star: &ParaphraseDistribution,
    epsilon: f64,
) -> Result<(OffsetSparseVec, ClipStats), ParaphraseError> {
    if dist_w.vocab_len != dist_w_star.vocab_len {
        return Err(ParaphraseError::DimensionMismatch(
            "distributions built over different vocabularies".into(),
        ));
    }
    Ok(clipped_log_ratio_vec(
        &dist_w_star.center_given_pair,
        &dist_w.center_given_pair,
        dist_w.vocab_len,
        epsilon,
    ))
}

/// sigma(W) vector and tau(W) scalar with clipping.
pub fn dependence_errors(
    dist: &ParaphraseDistribution,
    epsilon: f64,
) -> (OffsetSparseVec, f64, ClipStats) {
    // Denominator: p(w_i|c) * p(w_j|c) on the intersection of supports.
    let den = product_of_sparse(&dist.word_given_center[0], &dist.word_given_center[1]);
    let (sigma, mut stats) =
        clipped_log_ratio_vec(&dist.pair_given_center, &den, dist.vocab_len, epsilon);
    let tau = clipped_log_ratio(dist.p_pair, dist.p_words[0] * dist.p_words[1], epsilon, &mut stats);
    (sigma, tau, stats)
}

fn product_of_sparse(x: &[(u32, f64)], y: &[(u32, f64)]) -> Vec<(u32, f64)> {
    let mut out = Vec::with_capacity(x.len().min(y.len()));
    let mut b = 0;
    for &(k, vx) in x {
        while b < y.len() && y[b].0 < k {
            b += 1;
        }
        if b < y.len() && y[b].0 == k {
            out.push((k, vx * y[b].1));
        }
    }
    out
}

/// The five error terms of one analogy.
#[derive(Debug, Clone)]
pub struct ErrorDecomposition {
    pub rho: OffsetSparseVec,
    pub sigma_w: OffsetSparseVec,
    pub sigma_w_star: OffsetSparseVec,
    pub tau_w: f64,
    pub tau_w_star: f64,
    pub clip: ClipStats,
    pub dim: usize,
}

impl ErrorDecomposition {
    /// Dependence part of the analogy defect:
    /// -sigma(W) + sigma(W*) + (tau(W) - tau(W*))·1.
    pub fn dependence_sum(&self) -> OffsetSparseVec {
        let mut v = OffsetSparseVec::sum(&[&self.sigma_w.scaled(-1.0), &self.sigma_w_star]);
        v.offset += self.tau_w - self.tau_w_star;
        v
    }

    /// All five terms: -rho + dependence_sum, i.e. the full defect
    /// PMI_b* - PMI_b - PMI_a* + PMI_a on exact distributions.
    pub fn all_errors_sum(&self) -> OffsetSparseVec {
        OffsetSparseVec::sum(&[&self.rho.scaled(-1.0), &self.dependence_sum()])
    }
}

/// Compute all five terms for pairs W and W*.
pub fn decompose(
    dist_w: &ParaphraseDistribution,
    dist_w_star: &ParaphraseDistribution,
    epsilon: f64,
) -> Result<ErrorDecomposition, ParaphraseError> {
    let (rho, mut clip) = paraphrase_error(dist_w, dist_w_star, epsilon)?;
    let (sigma_w, tau_w, s1) = dependence_errors(dist_w, epsilon);
    let (sigma_w_star, tau_w_star, s2) = dependence_errors(dist_w_star, epsilon);
    clip.merge(&s1);
    clip.merge(&s2);
    Ok(ErrorDecomposition {
        rho,
        sigma_w,
        sigma_w_star,
        tau_w,
        tau_w_star,
        clip,
        dim: dist_w.vocab_len,
    })
}

/// Residual of the resolved identity:
/// PMI_b* - PMI_b - PMI_a* + PMI_a + rho + sigma(W) - sigma(W*)
/// - (tau(W) - tau(W*))·1. Exactly zero on full-support distributions.
pub fn decomposition_residual(
    words: (u32, u32, u32, u32), // (a, a_star, b, b_star)
    pmi: &SparsePmiMatrix,
    dec: &ErrorDecomposition,
) -> Result<OffsetSparseVec, ParaphraseError> {
    if pmi.dim() != dec.dim {
        return Err(ParaphraseError::DimensionMismatch(format!(
            "pmi dim {} vs decomposition dim {}",
            pmi.dim(),
            dec.dim
        )));
    }
    let (a, a_star, b, b_star) = words;
    let row = |w: u32, sign: f64| -> Result<OffsetSparseVec, ParaphraseError> {
        let (cols, vals) = pmi.row(w)?;
        Ok(OffsetSparseVec::from_entries(
            dec.dim,
            cols.iter().zip(vals.iter()).map(|(&c, &v)| (c, sign * v)).collect(),
        ))
    };
    let pmi_combo = OffsetSparseVec::sum(&[
        &row(b_star, 1.0)?,
        &row(b, -1.0)?,
        &row(a_star, -1.0)?,
        &row(a, 1.0)?,
    ]);
    let mut residual = OffsetSparseVec::sum(&[
        &pmi_combo,
        &dec.rho,
        &dec.sigma_w,
        &dec.sigma_w_star.scaled(-1.0),
    ]);
    residual.offset -= dec.tau_w - dec.tau_w_star;
    Ok(residual)
}

/// Norms of one analogy's error terms.
#[derive(Debug, Clone)]
pub struct AnalogyDetail {
    pub category: String,
    pub words: (u32, u32, u32, u32), // (a, a_star, b, b_star)
    pub well_defined: bool,
    pub paraphrase_norm: f64,
    pub dependence_norm: f64,
    pub all_norm: f64,
    pub clip: ClipStats,
    /// Max-abs of the identity residual against the PMI matrix, when one was
    /// supplied. Reported, not asserted: corpus estimators do not satisfy
    /// the exact identity.
    pub residual_max_abs: Option<f64>,
}

/// One category row: mean and median L2 norms over well-defined analogies.
#[derive(Debug, Clone)]
pub struct CategoryNormRow {
    pub code: String,
    pub n_enumerated: usize,
    pub n_well_defined: usize,
    pub mean_paraphrase: f64,
    pub median_paraphrase: f64,
    pub mean_dependence: f64,
    pub median_dependence: f64,
    pub mean_all: f64,
    pub median_all: f64,
}

/// Word-conditional cache shared across the analogies of a run.
pub struct WordStatsCache {
    map: FxHashMap<u32, (Vec<(u32, f64)>, f64)>,
}

impl WordStatsCache {
    pub fn build(triplets: &TripletCounts, words: impl IntoIterator<Item = u32>) -> Self {
        let mut unique: Vec<u32> = words.into_iter().collect();
        unique.sort_unstable();
        unique.dedup();
        unique.retain(|&w| w < triplets.universe());
        let stats = compute_word_stats(triplets, &unique);
        WordStatsCache { map: unique.into_iter().zip(stats).collect() }
    }

    fn get(&self, w: u32) -> Option<&(Vec<(u32, f64)>, f64)> {
        self.map.get(&w)
    }
}

fn word_stat(triplets: &TripletCounts, w: u32) -> (Vec<(u32, f64)>, f64) {
    let cond = scaled_word_conditional(triplets, w);
    let total_windows = triplets.total_windows as f64;
    let p: f64 = cond
        .iter()
        .map(|&(k, v)| v * triplets.center_marginals[k as usize] as f64 / total_windows)
        .sum();
    (cond, p)
}

#[cfg(feature = "parallel")]
fn compute_word_stats(triplets: &TripletCounts, words: &[u32]) -> Vec<(Vec<(u32, f64)>, f64)> {
    use rayon::prelude::*;
    words.par_iter().map(|&w| word_stat(triplets, w)).collect()
}

#[cfg(not(feature = "parallel"))]
fn compute_word_stats(triplets: &TripletCounts, words: &[u32]) -> Vec<(Vec<(u32, f64)>, f64)> {
    words.iter().map(|&w| word_stat(triplets, w)).collect()
}

/// Distribution assembly that reuses cached word conditionals.
fn distribution_cached(
    triplets: &TripletCounts,
    pair: (u32, u32),
    cache: &WordStatsCache,
) -> Result<ParaphraseDistribution, ParaphraseError> {
    let (i, j) = canonical_pair(pair.0, pair.1)?;
    for w in [i, j] {
        if w >= triplets.universe() {
            return Err(ParaphraseError::OutOfUniverse { word: w, universe: triplets.universe() });
        }
    }
    let column = triplets.pair_column(i, j);
    let n_pair: u64 = column.iter().map(|&(_, c)| c as u64).sum();
    if n_pair == 0 {
        return Err(ParaphraseError::PairNotWellDefined(i, j));
    }
    let total_windows = triplets.total_windows as f64;
    let center_given_pair: Vec<(u32, f64)> =
        column.iter().map(|&(k, c)| (k, c as f64 / n_pair as f64)).collect();
    let pair_given_center: Vec<(u32, f64)> = column
        .iter()
        .map(|&(k, c)| (k, c as f64 / triplets.center_marginals[k as usize] as f64))
        .collect();
    let (wi, pi) = cache.get(i).cloned().expect("cache must cover pair words");
    let (wj, pj) = cache.get(j).cloned().expect("cache must cover pair words");
    Ok(ParaphraseDistribution {
        pair: (i, j),
        vocab_len: triplets.vocab_len(),
        center_given_pair,
        pair_given_center,
        word_given_center: [wi, wj],
        p_pair: n_pair as f64 / total_windows,
        p_words: [pi, pj],
    })
}

fn analogy_detail(
    category: &str,
    an: &AnalogyInstance,
    triplets: &TripletCounts,
    pmi: Option<&SparsePmiMatrix>,
    epsilon: f64,
    cache: &WordStatsCache,
) -> AnalogyDetail {
    let words = (an.a, an.a_star, an.b, an.b_star);
    let undefined = AnalogyDetail {
        category: category.to_string(),
        words,
        well_defined: false,
        paraphrase_norm: f64::NAN,
        dependence_norm: f64::NAN,
        all_norm: f64::NAN,
        clip: ClipStats::default(),
        residual_max_abs: None,
    };
    let (Some(pw), Some(pws)) = (an.pair_w, an.pair_w_star) else {
        return undefined;
    };
    let Ok(dist_w) = distribution_cached(triplets, pw, cache) else {
        return undefined;
    };
    let Ok(dist_ws) = distribution_cached(triplets, pws, cache) else {
        return undefined;
    };
    let Ok(dec) = decompose(&dist_w, &dist_ws, epsilon) else {
        return undefined;
    };
    let residual_max_abs =
        pmi.and_then(|m| decomposition_residual(words, m, &dec).ok().map(|r| r.max_abs()));
    AnalogyDetail {
        category: category.to_string(),
        words,
        well_defined: true,
        paraphrase_norm: dec.rho.norm2(),
        dependence_norm: dec.dependence_sum().norm2(),
        all_norm: dec.all_errors_sum().norm2(),
        clip: dec.clip,
        residual_max_abs,
    }
}

fn median(values: &mut Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-category mean/median error norms over well-defined analogies, plus
/// the per-analogy detail records.
pub fn category_norm_table(
    categories: &[(String, Vec<AnalogyInstance>)],
    triplets: &TripletCounts,
    pmi: Option<&SparsePmiMatrix>,
    epsilon: f64,
) -> (Vec<CategoryNormRow>, Vec<AnalogyDetail>) {
    let mut rows = Vec::with_capacity(categories.len());
    let mut details = Vec::new();
    for (code, analogies) in categories {
        let words = analogies.iter().flat_map(|an| {
            an.pair_w
                .iter()
                .flat_map(|&(i, j)| [i, j])
                .chain(an.pair_w_star.iter().flat_map(|&(i, j)| [i, j]))
                .collect::<Vec<u32>>()
        });
        let cache = WordStatsCache::build(triplets, words);
        let cat_details = map_analogies(analogies, |an| {
            analogy_detail(code, an, triplets, pmi, epsilon, &cache)
        });
        let mut par: Vec<f64> = Vec::new();
        let mut dep: Vec<f64> = Vec::new();
        let mut all: Vec<f64> = Vec::new();
        for d in &cat_details {
            if d.well_defined {
                par.push(d.paraphrase_norm);
                dep.push(d.dependence_norm);
                all.push(d.all_norm);
            }
        }
        let mean = |v: &[f64]| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        rows.push(CategoryNormRow {
            code: code.clone(),
            n_enumerated: analogies.len(),
            n_well_defined: par.len(),
            mean_paraphrase: mean(&par),
            mean_dependence: mean(&dep),
            mean_all: mean(&all),
            median_paraphrase: median(&mut par),
            median_dependence: median(&mut dep),
            median_all: median(&mut all),
        });
        details.extend(cat_details);
    }
    (rows, details)
}

#[cfg(feature = "parallel")]
fn map_analogies<F: Fn(&AnalogyInstance) -> AnalogyDetail + Sync>(
    analogies: &[AnalogyInstance],
    f: F,
) -> Vec<AnalogyDetail> {
    use rayon::prelude::*;
    analogies.par_iter().map(|an| f(an)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_analogies<F: Fn(&AnalogyInstance) -> AnalogyDetail + Sync>(
    analogies: &[AnalogyInstance],
    f: F,
) -> Vec<AnalogyDetail> {
    analogies.iter().map(|an| f(an)).collect()
}
