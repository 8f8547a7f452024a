//! Linearity probe: per-word Pearson correlation between trained word
//! vectors and the embedding-space image of their PMI rows under C†.

use thiserror::Error;

use crate::pinv::{approximate_embedding, pseudo_inverse_of_contexts, PinvError, PseudoInverse};
use crate::pmi::{PmiError, SparsePmiMatrix};
use crate::sgns::EmbeddingPair;
use crate::util::pearson;

#[derive(Debug, Error)]
pub enum LinearityError {
    #[error(transparent)]
    Pinv(#[from] PinvError),
    #[error(transparent)]
    Pmi(#[from] PmiError),
    #[error("embeddings and PMI matrix disagree on vocabulary size: {0} vs {1}")]
    VocabMismatch(usize, usize),
    #[error("no words to probe")]
    Empty,
}

/// Per-word Pearson correlations plus summary statistics. Words whose
/// vectors have zero variance get no r; they are excluded from the summary
/// and counted in `missing`.
#[derive(Debug, Clone)]
pub struct CorrelationReport {
    pub per_word: Vec<(u32, Option<f64>)>,
    pub mean: f64,
    /// Population variance of the defined correlations.
    pub variance: f64,
    pub missing: usize,
}

impl CorrelationReport {
    pub fn defined(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.per_word.iter().filter_map(|&(id, r)| r.map(|r| (id, r)))
    }

    /// Fixed-width histogram over [-1, 1]; returns (bin_left, count) rows.
    pub fn histogram(&self, bin_width: f64) -> Vec<(f64, u64)> {
        let nbins = (2.0 / bin_width).ceil() as usize;
        let mut counts = vec![0u64; nbins];
        for (_, r) in self.defined() {
            let mut b = ((r + 1.0) / bin_width) as usize;
            if b >= nbins {
                b = nbins - 1;
            }
            counts[b] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(b, c)| (-1.0 + b as f64 * bin_width, c))
            .collect()
    }
}

/// Probe the given word ids: r(word) = pearson(w_x, (PMI_x as row) · C†).
pub fn correlation_report(
    embeddings: &EmbeddingPair,
    pmi: &SparsePmiMatrix,
    word_ids: &[u32],
    svd_cutoff: f64,
) -> Result<CorrelationReport, LinearityError> {
    if embeddings.vocab_len() != pmi.dim() {
        return Err(LinearityError::VocabMismatch(embeddings.vocab_len(), pmi.dim()));
    }
    if word_ids.is_empty() {
        return Err(LinearityError::Empty);
    }
    let pinv = pseudo_inverse_of_contexts(&embeddings.contexts, svd_cutoff)?;
    let per_word = probe_words(embeddings, pmi, word_ids, &pinv)?;
    let defined: Vec<f64> = per_word.iter().filter_map(|&(_, r)| r).collect();
    let missing = per_word.len() - defined.len();
    let (mean, variance) = if defined.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let n = defined.len() as f64;
        let mean = defined.iter().sum::<f64>() / n;
        let var = defined.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        (mean, var)
    };
    Ok(CorrelationReport { per_word, mean, variance, missing })
}

fn probe_one(
    embeddings: &EmbeddingPair,
    pmi: &SparsePmiMatrix,
    pinv: &PseudoInverse,
    id: u32,
) -> Result<(u32, Option<f64>), LinearityError> {
    let (cols, vals) = pmi.row(id)?;
    let approx = approximate_embedding(pinv, cols, vals)?;
    let truth: Vec<f64> = embeddings.words.col(id).iter().map(|&v| v as f64).collect();
    Ok((id, pearson(&truth, &approx)))
}

#[cfg(feature = "parallel")]
fn probe_words(
    embeddings: &EmbeddingPair,
    pmi: &SparsePmiMatrix,
    word_ids: &[u32],
    pinv: &PseudoInverse,
) -> Result<Vec<(u32, Option<f64>)>, LinearityError> {
    use rayon::prelude::*;
    word_ids.par_iter().map(|&id| probe_one(embeddings, pmi, pinv, id)).collect()
}

#[cfg(not(feature = "parallel"))]
fn probe_words(
    embeddings: &EmbeddingPair,
    pmi: &SparsePmiMatrix,
    word_ids: &[u32],
    pinv: &PseudoInverse,
) -> Result<Vec<(u32, Option<f64>)>, LinearityError> {
    word_ids.iter().map(|&id| probe_one(embeddings, pmi, pinv, id)).collect()
}
