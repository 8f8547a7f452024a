//! Sparse vectors with an optional constant offset.
//!
//! Error-term vectors over the full vocabulary are mostly zero, except for a
//! scalar term broadcast to every element. `OffsetSparseVec` represents
//! `v[i] = offset + delta[i]` where `delta` is sparse, so norms and sums over
//! tens of thousands of elements stay cheap.

/// `dim`-length vector whose value at index `i` is `offset + delta(i)`,
/// with `delta` stored as sorted `(index, value)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetSparseVec {
    pub dim: usize,
    pub offset: f64,
    /// Sorted by index, no duplicate indices. Entries with value 0 are allowed
    /// but pruned by constructors.
    pub entries: Vec<(u32, f64)>,
}

impl OffsetSparseVec {
    pub fn zeros(dim: usize) -> Self {
        OffsetSparseVec { dim, offset: 0.0, entries: Vec::new() }
    }

    /// Build from unsorted entries; sorts, checks for duplicates, drops zeros.
    pub fn from_entries(dim: usize, mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_unstable_by_key(|e| e.0);
        entries.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        entries.retain(|e| e.1 != 0.0);
        debug_assert!(entries.iter().all(|e| (e.0 as usize) < dim));
        OffsetSparseVec { dim, offset: 0.0, entries }
    }

    pub fn value_at(&self, idx: u32) -> f64 {
        match self.entries.binary_search_by_key(&idx, |e| e.0) {
            Ok(pos) => self.offset + self.entries[pos].1,
            Err(_) => self.offset,
        }
    }

    pub fn nnz_explicit(&self) -> usize {
        self.entries.len()
    }

    /// Squared L2 norm over the full `dim` elements, including the offset on
    /// implicit entries.
    pub fn norm2_sq(&self) -> f64 {
        let mut s = 0.0;
        for &(_, d) in &self.entries {
            let v = self.offset + d;
            s += v * v;
        }
        let implicit = (self.dim - self.entries.len()) as f64;
        s + implicit * self.offset * self.offset
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        // The offset only shows up as a value where no explicit entry sits.
        let mut m = if self.entries.len() < self.dim { self.offset.abs() } else { 0.0 };
        for &(_, d) in &self.entries {
            m = m.max((self.offset + d).abs());
        }
        m
    }

    pub fn scaled(&self, factor: f64) -> Self {
        OffsetSparseVec {
            dim: self.dim,
            offset: self.offset * factor,
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }

    /// Elementwise sum of vectors of equal dimension.
    pub fn sum(parts: &[&OffsetSparseVec]) -> Self {
        assert!(!parts.is_empty());
        let dim = parts[0].dim;
        assert!(parts.iter().all(|p| p.dim == dim), "dimension mismatch");
        let offset = parts.iter().map(|p| p.offset).sum();
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for p in parts {
            entries.extend_from_slice(&p.entries);
        }
        let mut v = Self::from_entries(dim, entries);
        v.offset = offset;
        v
    }

    /// Densify (for oracles and small tests only).
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![self.offset; self.dim];
        for &(i, d) in &self.entries {
            out[i as usize] += d;
        }
        out
    }
}
