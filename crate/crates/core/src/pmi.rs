//! Sparse PMI matrix from windowed pair counts.
//!
//! Entry (i, j) is ln p(w_i, c_j) - ln p(w_i) - ln p(c_j) over relative
//! frequencies. Unattested pairs would be -inf; they are represented as
//! exact 0 (absent), so the matrix stays sparse and finite.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::cooccur::PairCounts;

#[derive(Debug, Error)]
pub enum PmiError {
    #[error("empty counts: grand total is zero")]
    EmptyCounts,
    #[error("word id {id} outside vocabulary of {len}")]
    OutOfRange { id: u32, len: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed pmi file: {0}")]
    Format(String),
}

/// |V| x |V| sparse matrix in CSR form. All stored values are finite;
/// lookups of absent entries return 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePmiMatrix {
    row_ptr: Vec<u64>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    pub vocab_fingerprint: u64,
}

impl SparsePmiMatrix {
    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Stored (context, value) entries of one row, ascending context id.
    pub fn row(&self, word: u32) -> Result<(&[u32], &[f64]), PmiError> {
        if word as usize >= self.dim() {
            return Err(PmiError::OutOfRange { id: word, len: self.dim() });
        }
        let lo = self.row_ptr[word as usize] as usize;
        let hi = self.row_ptr[word as usize + 1] as usize;
        Ok((&self.cols[lo..hi], &self.vals[lo..hi]))
    }

    /// Value at (i, j); 0 for unattested pairs.
    pub fn value(&self, i: u32, j: u32) -> f64 {
        let Ok((cols, vals)) = self.row(i) else { return 0.0 };
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// Dense copy of one row (length |V|); absent entries are 0.
    pub fn row_dense(&self, word: u32) -> Result<Vec<f64>, PmiError> {
        let (cols, vals) = self.row(word)?;
        let mut out = vec![0.0; self.dim()];
        for (&c, &v) in cols.iter().zip(vals.iter()) {
            out[c as usize] = v;
        }
        Ok(out)
    }

    /// Build from sorted-by-(row, col) entries. Entries must be finite.
    pub fn from_entries(
        dim: usize,
        entries: impl IntoIterator<Item = (u32, u32, f64)>,
        vocab_fingerprint: u64,
    ) -> Self {
        let mut items: Vec<(u32, u32, f64)> = entries.into_iter().collect();
        items.sort_unstable_by_key(|&(i, j, _)| ((i as u64) << 32) | j as u64);
        let mut row_ptr = vec![0u64; dim + 1];
        let mut cols = Vec::with_capacity(items.len());
        let mut vals = Vec::with_capacity(items.len());
        for (i, j, v) in items {
            debug_assert!(v.is_finite());
            row_ptr[i as usize + 1] += 1;
            cols.push(j);
            vals.push(v);
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparsePmiMatrix { row_ptr, cols, vals, vocab_fingerprint }
    }
}

/// PMI over relative frequencies of the pair counts. Every attested pair
/// gets a stored entry (possibly exactly 0 under independence); unattested
/// pairs are absent, i.e. 0.
pub fn build_pmi(counts: &PairCounts) -> Result<SparsePmiMatrix, PmiError> {
    if counts.total == 0 {
        return Err(PmiError::EmptyCounts);
    }
    let n = counts.total as f64;
    let dim = counts.vocab_len();
    let mut row_ptr = vec![0u64; dim + 1];
    let mut cols = Vec::with_capacity(counts.len());
    let mut vals = Vec::with_capacity(counts.len());
    for (i, j, c) in counts.iter() {
        let p_ij = c as f64 / n;
        let p_i = counts.row_marginals[i as usize] as f64 / n;
        let p_j = counts.col_marginals[j as usize] as f64 / n;
        row_ptr[i as usize + 1] += 1;
        cols.push(j);
        vals.push((p_ij / (p_i * p_j)).ln());
    }
    for r in 0..dim {
        row_ptr[r + 1] += row_ptr[r];
    }
    Ok(SparsePmiMatrix { row_ptr, cols, vals, vocab_fingerprint: counts.vocab_fingerprint })
}

const MAGIC: &[u8; 8] = b"PARAPMI\0";
const KIND_PMI: u32 = 3;

pub fn save_pmi(pmi: &SparsePmiMatrix, path: &Path) -> Result<(), PmiError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&KIND_PMI.to_le_bytes())?;
    w.write_all(&pmi.vocab_fingerprint.to_le_bytes())?;
    w.write_all(&(pmi.dim() as u64).to_le_bytes())?;
    w.write_all(&(pmi.nnz() as u64).to_le_bytes())?;
    for i in 0..pmi.dim() as u32 {
        let (cols, vals) = pmi.row(i).unwrap();
        for (&j, &v) in cols.iter().zip(vals.iter()) {
            let key = ((i as u64) << 32) | j as u64;
            w.write_all(&key.to_le_bytes())?;
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_pmi(path: &Path) -> Result<SparsePmiMatrix, PmiError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(PmiError::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != KIND_PMI {
        return Err(PmiError::Format("wrong store kind".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let vocab_fingerprint = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let dim = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let nnz = u64::from_le_bytes(b8) as usize;
    let mut entries = Vec::with_capacity(nnz);
    let mut rec = [0u8; 16];
    for _ in 0..nnz {
        r.read_exact(&mut rec)?;
        let key = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let val = f64::from_bits(u64::from_le_bytes(rec[8..16].try_into().unwrap()));
        entries.push(((key >> 32) as u32, (key & 0xffff_ffff) as u32, val));
    }
    Ok(SparsePmiMatrix::from_entries(dim, entries, vocab_fingerprint))
}
