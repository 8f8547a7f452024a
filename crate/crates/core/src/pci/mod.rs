//! Paraphrase Conditional Information matrix and exact nearest-paraphrase
//! ranking.
//!
//! Columns are canonical word pairs from the top-k universe, rows are center
//! words; the entry is ln p(W_ij | w_k), present wherever the triplet count
//! is nonzero. The difference between two columns is a paraphrase error
//! vector, so the Euclidean distance between columns is the paraphrase error
//! norm. Rank queries scan all attested columns exactly: columns sharing
//! support with the query get a sparse dot product through a row-major
//! inverted index, all others are handled in bulk through a sorted norm
//! cache. No dense |pairs| x |V| matrix is ever materialized.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::bats::AnalogyInstance;
use crate::cooccur::{PairIndex, TripletCounts};

#[derive(Debug, Error)]
pub enum PciError {
    #[error("pair ({0}, {1}) has no attested column")]
    EmptyColumn(u32, u32),
    #[error("word {word} outside the pair universe of {universe}")]
    OutOfUniverse { word: u32, universe: u32 },
    #[error("a paraphrase pair needs two distinct words")]
    DegeneratePair,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed pci file: {0}")]
    Format(String),
}

/// Sparse CSC store: `cols[p]` owns `rows/vals[start..end)` where `end` is
/// the next column's start (or the array length).
#[derive(Debug, Clone, PartialEq)]
pub struct PciMatrix {
    cols: Vec<(u64, u64)>, // (pair index l, start offset)
    rows: Vec<u32>,
    vals: Vec<f32>,
    /// Squared L2 norm per attested column.
    norms2: Vec<f64>,
    /// norms2 sorted ascending, for bulk counting.
    sorted_norms2: Vec<f64>,
    pub pair_index: PairIndex,
    pub vocab_len: u32,
    pub window_radius: u32,
    pub vocab_fingerprint: u64,
}

/// Build the PCI from a finalized triplet store.
///
/// `positive_values_only = false` (the default reading) stores an entry
/// wherever the probability is positive, i.e. one entry per attested
/// triplet; the stored value ln p(W|w_k) is then <= 0 in the usual case.
/// `true` keeps the literal "positive PCI" reading: only entries with
/// ln p > 0 survive, which on real corpora empties the matrix.
pub fn build_pci(triplets: &TripletCounts, positive_values_only: bool) -> PciMatrix {
    let mut cols: Vec<(u64, u64)> = Vec::new();
    let mut rows: Vec<u32> = Vec::new();
    let mut vals: Vec<f32> = Vec::new();
    let mut norms2: Vec<f64> = Vec::new();
    let mut current: Option<u64> = None;
    for (i, j, k, c) in triplets.iter() {
        let l = triplets.pair_index.encode(i, j);
        let v = ((c as f64) / (triplets.center_marginals[k as usize] as f64)).ln() as f32;
        if positive_values_only && v <= 0.0 {
            continue;
        }
        if current != Some(l) {
            cols.push((l, rows.len() as u64));
            norms2.push(0.0);
            current = Some(l);
        }
        rows.push(k);
        vals.push(v);
        *norms2.last_mut().unwrap() += (v as f64) * (v as f64);
    }
    let mut sorted_norms2 = norms2.clone();
    sorted_norms2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    PciMatrix {
        cols,
        rows,
        vals,
        norms2,
        sorted_norms2,
        pair_index: triplets.pair_index,
        vocab_len: triplets.vocab_len() as u32,
        window_radius: triplets.window_radius,
        vocab_fingerprint: triplets.vocab_fingerprint,
    }
}

impl PciMatrix {
    pub fn n_columns(&self) -> usize {
        self.cols.len()
    }

    pub fn n_entries(&self) -> usize {
        self.rows.len()
    }

    fn col_span(&self, pos: usize) -> std::ops::Range<usize> {
        let start = self.cols[pos].1 as usize;
        let end =
            self.cols.get(pos + 1).map(|c| c.1 as usize).unwrap_or(self.rows.len());
        start..end
    }

    /// Position of the column for canonical pair l, if attested.
    pub fn find_column(&self, a: u32, b: u32) -> Result<usize, PciError> {
        if a == b {
            return Err(PciError::DegeneratePair);
        }
        let universe = self.pair_index.universe();
        if a.max(b) >= universe {
            return Err(PciError::OutOfUniverse { word: a.max(b), universe });
        }
        let l = self.pair_index.encode(a, b);
        self.cols
            .binary_search_by_key(&l, |c| c.0)
            .map_err(|_| PciError::EmptyColumn(a.min(b), a.max(b)))
    }

    pub fn column_entries(&self, pos: usize) -> (&[u32], &[f32]) {
        let span = self.col_span(pos);
        (&self.rows[span.clone()], &self.vals[span])
    }

    pub fn column_pair(&self, pos: usize) -> (u32, u32) {
        self.pair_index.decode(self.cols[pos].0)
    }

    pub fn norm2_sq(&self, pos: usize) -> f64 {
        self.norms2[pos]
    }

    /// Euclidean distance between two attested columns:
    /// sqrt(n1² + n2² - 2·dot) with a sparse merge dot product.
    pub fn column_distance(&self, p1: usize, p2: usize) -> f64 {
        let dot = self.column_dot(p1, p2);
        (self.norms2[p1] + self.norms2[p2] - 2.0 * dot).max(0.0).sqrt()
    }

    fn column_dot(&self, p1: usize, p2: usize) -> f64 {
        let (r1, v1) = self.column_entries(p1);
        let (r2, v2) = self.column_entries(p2);
        let mut dot = 0.0f64;
        let mut a = 0;
        let mut b = 0;
        while a < r1.len() && b < r2.len() {
            match r1[a].cmp(&r2[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    dot += v1[a] as f64 * v2[b] as f64;
                    a += 1;
                    b += 1;
                }
            }
        }
        dot
    }

    /// Row-major inverted index for rank queries.
    pub fn inverted_index(&self) -> InvertedIndex {
        let mut counts = vec![0u64; self.vocab_len as usize + 1];
        for &k in &self.rows {
            counts[k as usize + 1] += 1;
        }
        for i in 0..self.vocab_len as usize {
            counts[i + 1] += counts[i];
        }
        let mut entries = vec![(0u32, 0.0f32); self.rows.len()];
        let mut cursor = counts.clone();
        for pos in 0..self.cols.len() {
            let span = self.col_span(pos);
            for e in span {
                let k = self.rows[e] as usize;
                entries[cursor[k] as usize] = (pos as u32, self.vals[e]);
                cursor[k] += 1;
            }
        }
        InvertedIndex { row_ptr: counts, entries }
    }

    /// Columns with squared norm strictly below / exactly equal to `t`.
    fn norms_below(&self, t: f64) -> (u64, u64) {
        let below = self.sorted_norms2.partition_point(|&n| n < t) as u64;
        let below_or_eq = self.sorted_norms2.partition_point(|&n| n <= t) as u64;
        (below, below_or_eq - below)
    }
}

/// For each row k: the (column position, value) entries of that row.
pub struct InvertedIndex {
    row_ptr: Vec<u64>,
    entries: Vec<(u32, f32)>,
}

impl InvertedIndex {
    pub fn row(&self, k: u32) -> &[(u32, f32)] {
        let lo = self.row_ptr[k as usize] as usize;
        let hi = self.row_ptr[k as usize + 1] as usize;
        &self.entries[lo..hi]
    }
}

/// Rank of the true paraphrase among candidate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    /// d(W, W*).
    pub distance: f64,
    /// 1 + #(candidates strictly closer to W than W*).
    pub rank: u64,
    /// Candidates at exactly the same distance (excluding W*).
    pub ties_below: u64,
    /// Number of candidate columns considered (attested pairs, query column
    /// excluded).
    pub universe_size: u64,
}

/// Exact rank of W* by distance from W over all attested columns
/// (`restrict_to_w_star_words = false`) or only over columns sharing at
/// least one word with W* (`true`).
pub fn rank_true_paraphrase(
    pci: &PciMatrix,
    inverted: &InvertedIndex,
    w: (u32, u32),
    w_star: (u32, u32),
    restrict_to_w_star_words: bool,
) -> Result<RankResult, PciError> {
    let pw = pci.find_column(w.0, w.1)?;
    let pws = pci.find_column(w_star.0, w_star.1)?;
    if restrict_to_w_star_words {
        rank_restricted(pci, pw, pws, w_star)
    } else {
        rank_full(pci, inverted, pw, pws)
    }
}

fn rank_full(
    pci: &PciMatrix,
    inverted: &InvertedIndex,
    pw: usize,
    pws: usize,
) -> Result<RankResult, PciError> {
    let d_star_sq = {
        let d = pci.column_distance(pw, pws);
        d * d
    };
    let nw2 = pci.norms2[pw];
    // Columns sharing no support row with W have d² = nW² + nX².
    let t = d_star_sq - nw2;
    let (mut strictly_below, mut ties) = pci.norms_below(t);

    // Accumulate dot products against every column sharing support with W.
    let (w_rows, w_vals) = pci.column_entries(pw);
    let mut acc: FxHashMap<u32, f64> = FxHashMap::default();
    for (&k, &vw) in w_rows.iter().zip(w_vals.iter()) {
        for &(col_pos, v) in inverted.row(k) {
            *acc.entry(col_pos).or_insert(0.0) += vw as f64 * v as f64;
        }
    }
    for (&col_pos, &dot) in &acc {
        let p = col_pos as usize;
        let nx2 = pci.norms2[p];
        // Remove this column from the bulk count it was part of...
        if nx2 < t {
            strictly_below -= 1;
        } else if nx2 == t {
            ties -= 1;
        }
        if p == pw || p == pws {
            continue;
        }
        // ...and re-count it with its true distance.
        let d_sq = (nw2 + nx2 - 2.0 * dot).max(0.0);
        if d_sq < d_star_sq {
            strictly_below += 1;
        } else if d_sq == d_star_sq {
            ties += 1;
        }
    }
    // W* shares support with W only if acc holds it; if not, its bulk-count
    // membership must still be cancelled (it is not a candidate "other" pair
    // at a different distance -- it IS the reference distance).
    if !acc.contains_key(&(pws as u32)) {
        let nx2 = pci.norms2[pws];
        if nx2 < t {
            strictly_below -= 1;
        } else if nx2 == t {
            ties -= 1;
        }
    }
    // W always shares rows with itself, so its own bulk-count membership was
    // cancelled inside the loop above.
    debug_assert!(acc.contains_key(&(pw as u32)));

    Ok(RankResult {
        distance: d_star_sq.sqrt(),
        rank: 1 + strictly_below,
        ties_below: ties,
        universe_size: pci.n_columns() as u64 - 1,
    })
}

fn rank_restricted(
    pci: &PciMatrix,
    pw: usize,
    pws: usize,
    w_star: (u32, u32),
) -> Result<RankResult, PciError> {
    let d_star = pci.column_distance(pw, pws);
    let d_star_sq = d_star * d_star;
    let universe = pci.pair_index.universe();
    let mut strictly_below = 0u64;
    let mut ties = 0u64;
    let mut candidates = 0u64;
    let mut seen_self = false;
    for &w in &[w_star.0, w_star.1] {
        for partner in 0..universe {
            if partner == w {
                continue;
            }
            // Pairs {w_star.0, w_star.1} would be visited twice; only count
            // them on the first pass.
            if w == w_star.1 && partner == w_star.0 {
                continue;
            }
            let Ok(p) = pci.find_column(w, partner) else { continue };
            if p == pw {
                seen_self = true;
                continue;
            }
            candidates += 1;
            if p == pws {
                continue;
            }
            let d = pci.column_distance(pw, p);
            let d_sq = d * d;
            if d_sq < d_star_sq {
                strictly_below += 1;
            } else if d_sq == d_star_sq {
                ties += 1;
            }
        }
    }
    let _ = seen_self;
    Ok(RankResult {
        distance: d_star,
        rank: 1 + strictly_below,
        ties_below: ties,
        universe_size: candidates,
    })
}

/// Per-category aggregate of true-paraphrase ranks.
#[derive(Debug, Clone)]
pub struct CategoryRankRow {
    pub code: String,
    pub n_enumerated: usize,
    /// Analogies with both pair columns attested.
    pub n_ranked: usize,
    pub mean_rank: f64,
    pub median_rank: f64,
}

#[derive(Debug, Clone)]
pub struct RankDetail {
    pub category: String,
    pub words: (u32, u32, u32, u32),
    pub result: Option<RankResult>,
}

pub fn category_rank_table(
    categories: &[(String, Vec<AnalogyInstance>)],
    pci: &PciMatrix,
    restrict_to_w_star_words: bool,
) -> (Vec<CategoryRankRow>, Vec<RankDetail>) {
    let inverted = pci.inverted_index();
    let mut rows = Vec::with_capacity(categories.len());
    let mut details = Vec::new();
    for (code, analogies) in categories {
        let cat_details: Vec<RankDetail> = map_rank(analogies, |an| {
            let result = match (an.pair_w, an.pair_w_star) {
                (Some(w), Some(ws)) => {
                    rank_true_paraphrase(pci, &inverted, w, ws, restrict_to_w_star_words).ok()
                }
                _ => None,
            };
            RankDetail {
                category: code.clone(),
                words: (an.a, an.a_star, an.b, an.b_star),
                result,
            }
        });
        let mut ranks: Vec<f64> =
            cat_details.iter().filter_map(|d| d.result.as_ref().map(|r| r.rank as f64)).collect();
        let mean = if ranks.is_empty() {
            f64::NAN
        } else {
            ranks.iter().sum::<f64>() / ranks.len() as f64
        };
        ranks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if ranks.is_empty() {
            f64::NAN
        } else if ranks.len() % 2 == 1 {
            ranks[ranks.len() / 2]
        } else {
            0.5 * (ranks[ranks.len() / 2 - 1] + ranks[ranks.len() / 2])
        };
        rows.push(CategoryRankRow {
            code: code.clone(),
            n_enumerated: analogies.len(),
            n_ranked: ranks.len(),
            mean_rank: mean,
            median_rank: median,
        });
        details.extend(cat_details);
    }
    (rows, details)
}

#[cfg(feature = "parallel")]
fn map_rank<F: Fn(&AnalogyInstance) -> RankDetail + Sync>(
    analogies: &[AnalogyInstance],
    f: F,
) -> Vec<RankDetail> {
    use rayon::prelude::*;
    analogies.par_iter().map(|an| f(an)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_rank<F: Fn(&AnalogyInstance) -> RankDetail + Sync>(
    analogies: &[AnalogyInstance],
    f: F,
) -> Vec<RankDetail> {
    analogies.iter().map(|an| f(an)).collect()
}

const MAGIC: &[u8; 8] = b"PARAPMI\0";
const KIND_PCI: u32 = 4;

pub fn norms_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".norms");
    PathBuf::from(os)
}

pub fn save_pci(pci: &PciMatrix, path: &Path) -> Result<(), PciError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&KIND_PCI.to_le_bytes())?;
    w.write_all(&pci.vocab_fingerprint.to_le_bytes())?;
    w.write_all(&pci.window_radius.to_le_bytes())?;
    w.write_all(&pci.pair_index.universe().to_le_bytes())?;
    w.write_all(&pci.vocab_len.to_le_bytes())?;
    w.write_all(&(pci.cols.len() as u64).to_le_bytes())?;
    w.write_all(&(pci.rows.len() as u64).to_le_bytes())?;
    for &(l, start) in &pci.cols {
        w.write_all(&l.to_le_bytes())?;
        w.write_all(&start.to_le_bytes())?;
    }
    for &r in &pci.rows {
        w.write_all(&r.to_le_bytes())?;
    }
    for &v in &pci.vals {
        w.write_all(&v.to_bits().to_le_bytes())?;
    }
    w.flush()?;

    let mut nw = BufWriter::new(File::create(norms_path(path))?);
    nw.write_all(MAGIC)?;
    nw.write_all(&KIND_PCI.to_le_bytes())?;
    nw.write_all(&(pci.norms2.len() as u64).to_le_bytes())?;
    for (&(l, _), &n2) in pci.cols.iter().zip(pci.norms2.iter()) {
        nw.write_all(&l.to_le_bytes())?;
        nw.write_all(&n2.to_bits().to_le_bytes())?;
    }
    nw.flush()?;
    Ok(())
}

pub fn load_pci(path: &Path) -> Result<PciMatrix, PciError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(PciError::Format("bad magic".into()));
    }
    let read_u32 = |r: &mut BufReader<File>| -> Result<u32, PciError> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    };
    let read_u64 = |r: &mut BufReader<File>| -> Result<u64, PciError> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    };
    if read_u32(&mut r)? != KIND_PCI {
        return Err(PciError::Format("wrong store kind".into()));
    }
    let vocab_fingerprint = read_u64(&mut r)?;
    let window_radius = read_u32(&mut r)?;
    let universe = read_u32(&mut r)?;
    let vocab_len = read_u32(&mut r)?;
    let n_cols = read_u64(&mut r)? as usize;
    let n_entries = read_u64(&mut r)? as usize;
    let mut cols = Vec::with_capacity(n_cols);
    for _ in 0..n_cols {
        let l = read_u64(&mut r)?;
        let start = read_u64(&mut r)?;
        cols.push((l, start));
    }
    let mut rows = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        rows.push(read_u32(&mut r)?);
    }
    let mut vals = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        vals.push(f32::from_bits(read_u32(&mut r)?));
    }
    // Norm cache sidecar; recomputed if missing.
    let norms2 = match File::open(norms_path(path)) {
        Ok(f) => {
            let mut nr = BufReader::new(f);
            let mut m = [0u8; 8];
            nr.read_exact(&mut m)?;
            let mut b4 = [0u8; 4];
            nr.read_exact(&mut b4)?;
            let mut b8 = [0u8; 8];
            nr.read_exact(&mut b8)?;
            let n = u64::from_le_bytes(b8) as usize;
            if &m != MAGIC || u32::from_le_bytes(b4) != KIND_PCI || n != n_cols {
                return Err(PciError::Format("bad norms sidecar".into()));
            }
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                nr.read_exact(&mut b8)?; // l, unused beyond alignment
                let mut vb = [0u8; 8];
                nr.read_exact(&mut vb)?;
                out.push(f64::from_bits(u64::from_le_bytes(vb)));
            }
            out
        }
        Err(_) => {
            let mut out = vec![0.0f64; n_cols];
            for (p, out_n) in out.iter_mut().enumerate() {
                let start = cols[p].1 as usize;
                let end = cols.get(p + 1).map(|c| c.1 as usize).unwrap_or(vals.len());
                *out_n = vals[start..end].iter().map(|&v| (v as f64) * (v as f64)).sum();
            }
            out
        }
    };
    let mut sorted_norms2 = norms2.clone();
    sorted_norms2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(PciMatrix {
        cols,
        rows,
        vals,
        norms2,
        sorted_norms2,
        pair_index: PairIndex::new(universe),
        vocab_len,
        window_radius,
        vocab_fingerprint,
    })
}

#[cfg(test)]
mod tests;
