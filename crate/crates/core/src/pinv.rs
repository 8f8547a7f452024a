//! Moore-Penrose pseudo-inverse of the context matrix, via thin SVD.
//!
//! Singular values below `cutoff * sigma_max` are treated as zero. The
//! product is stored transposed (d x |V|) so that mapping a sparse PMI row
//! into embedding space walks contiguous columns.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::sgns::ColMatrix;

/// Relative singular-value cutoff used when none is specified.
pub const DEFAULT_SVD_CUTOFF: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PinvError {
    #[error("matrix contains non-finite values")]
    NonFinite,
    #[error("SVD did not converge")]
    SvdFailed,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// C† of a d x n matrix C, kept transposed: `pinv_t` is d x n with
/// `pinv_t[:, k]` = row k of C†.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub pinv_t: DMatrix<f64>,
    pub source_rows: usize,
    pub source_cols: usize,
    /// Relative cutoff that was applied.
    pub cutoff: f64,
    /// Number of singular values kept.
    pub rank: usize,
}

impl PseudoInverse {
    /// C† as an n x d matrix (for tests and dense algebra).
    pub fn dense(&self) -> DMatrix<f64> {
        self.pinv_t.transpose()
    }
}

/// Compute C† with the given relative singular-value cutoff.
pub fn pseudo_inverse(c: &DMatrix<f64>, cutoff: f64) -> Result<PseudoInverse, PinvError> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(PinvError::NonFinite);
    }
    let (d, n) = c.shape();
    let svd = c.clone().try_svd(true, true, f64::EPSILON, 0).ok_or(PinvError::SvdFailed)?;
    let u = svd.u.ok_or(PinvError::SvdFailed)?; // d x r
    let v_t = svd.v_t.ok_or(PinvError::SvdFailed)?; // r x n
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0f64, f64::max);
    let threshold = cutoff * sigma_max;
    let mut rank = 0usize;
    let inv_sigma: Vec<f64> = sigma
        .iter()
        .map(|&s| {
            if s > threshold && s > 0.0 {
                rank += 1;
                1.0 / s
            } else {
                0.0
            }
        })
        .collect();
    // C† = V Σ⁺ Uᵀ, so C†ᵀ = U Σ⁺ Vᵀ.
    let mut u_scaled = u; // d x r
    for (j, &is) in inv_sigma.iter().enumerate() {
        for i in 0..u_scaled.nrows() {
            u_scaled[(i, j)] *= is;
        }
    }
    let pinv_t = u_scaled * v_t; // d x n
    Ok(PseudoInverse { pinv_t, source_rows: d, source_cols: n, cutoff, rank })
}

/// Convenience: pseudo-inverse of an f32 column matrix (context embeddings).
pub fn pseudo_inverse_of_contexts(
    contexts: &ColMatrix,
    cutoff: f64,
) -> Result<PseudoInverse, PinvError> {
    let d = contexts.d;
    let n = contexts.n;
    let c = DMatrix::from_fn(d, n, |r, col| contexts.col(col as u32)[r] as f64);
    pseudo_inverse(&c, cutoff)
}

/// Image of a sparse PMI row under C†: `(PMI_x as row) · C†`, returned as a
/// dense d-vector. A zero row maps to the zero vector.
pub fn approximate_embedding(
    pinv: &PseudoInverse,
    cols: &[u32],
    vals: &[f64],
) -> Result<Vec<f64>, PinvError> {
    if cols.len() != vals.len() {
        return Err(PinvError::DimensionMismatch("cols/vals length".into()));
    }
    let d = pinv.source_rows;
    let mut out = vec![0.0; d];
    for (&k, &v) in cols.iter().zip(vals.iter()) {
        if k as usize >= pinv.source_cols {
            return Err(PinvError::DimensionMismatch(format!(
                "pmi index {k} outside context matrix width {}",
                pinv.source_cols
            )));
        }
        let col = pinv.pinv_t.column(k as usize);
        for i in 0..d {
            out[i] += v * col[i];
        }
    }
    Ok(out)
}
