//! Dense indexing of canonical word pairs (i, j) with i < j < k.
//!
//! Pairs are laid out row-major: all pairs starting with word 0 first, then
//! word 1, and so on. Index order therefore equals lexicographic (i, j)
//! order, which keeps a store sorted by pair index also sorted by pair.

/// Bijection between canonical pairs over word ids `0..k` and `0..k(k-1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairIndex {
    k: u32,
}

impl PairIndex {
    pub fn new(universe_k: u32) -> Self {
        PairIndex { k: universe_k }
    }

    pub fn universe(&self) -> u32 {
        self.k
    }

    /// Total number of canonical pairs, k(k-1)/2.
    pub fn len(&self) -> u64 {
        let k = self.k as u64;
        k * (k - 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.k < 2
    }

    /// Index of the first pair whose smaller word is `i`.
    pub fn row_start(&self, i: u32) -> u64 {
        let k = self.k as u64;
        let i = i as u64;
        // sum_{x<i} (k-1-x)
        i * (2 * k - i - 1) / 2
    }

    /// Pair index for (i, j); canonicalizes order. Panics if i == j or out of range.
    pub fn encode(&self, a: u32, b: u32) -> u64 {
        assert!(a != b, "a paraphrase pair has two distinct words");
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        assert!(j < self.k, "word id {j} outside pair universe {}", self.k);
        self.row_start(i) + (j - i - 1) as u64
    }

    /// Inverse of `encode`.
    pub fn decode(&self, l: u64) -> (u32, u32) {
        debug_assert!(l < self.len());
        // Binary search the row: largest i with row_start(i) <= l.
        let mut lo = 0u32;
        let mut hi = self.k - 1;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.row_start(mid) <= l {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let i = lo;
        let j = i + 1 + (l - self.row_start(i)) as u32;
        (i, j)
    }
}
