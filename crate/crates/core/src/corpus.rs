//! Corpus ingestion: byte-level tokenization, vocabulary construction with
//! frequency thresholding, and the id-mapped token stream.
//!
//! Tokens are maximal runs of non-whitespace bytes. Ids are dense and
//! assigned in descending-frequency order with lexicographic tie-breaking,
//! so id assignment is reproducible across runs and shard counts.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::util::{fnv1a_extend, shard_ranges, FNV_SEED};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: std::io::Error,
    },
    #[error("empty token sequence: cannot build a vocabulary")]
    EmptyVocabulary,
    #[error("min_count must be >= 1")]
    BadMinCount,
    #[error("top_k out of bounds: requested {requested}, vocabulary has {available}")]
    TopKOutOfBounds { requested: usize, available: usize },
    #[error("malformed vocabulary file at line {line}: {reason}")]
    MalformedVocabFile { line: usize, reason: String },
}

/// Token/id bijection with raw occurrence counts.
///
/// Ids are `0..len`, ordered by descending count, ties broken by token bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Corpus length in tokens, including tokens dropped by the threshold.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str, u64)> {
        self.tokens
            .iter()
            .zip(self.counts.iter())
            .enumerate()
            .map(|(i, (t, &c))| (i as u32, t.as_str(), c))
    }

    /// The `k` most frequent word ids, i.e. ids `0..k`.
    pub fn top_k(&self, k: usize) -> Result<Vec<u32>, CorpusError> {
        if k > self.len() {
            return Err(CorpusError::TopKOutOfBounds { requested: k, available: self.len() });
        }
        Ok((0..k as u32).collect())
    }

    /// Stable fingerprint over (token, count) records in id order. Persisted
    /// in count-store headers to detect vocabulary mismatches.
    pub fn fingerprint(&self) -> u64 {
        let mut h = FNV_SEED;
        for (_, tok, cnt) in self.iter() {
            h = fnv1a_extend(h, tok.as_bytes());
            h = fnv1a_extend(h, &[0xff]);
            h = fnv1a_extend(h, &cnt.to_le_bytes());
        }
        h
    }

    /// One record per line, `token<TAB>count`, ordered by id.
    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (_, tok, cnt) in self.iter() {
            writeln!(w, "{tok}\t{cnt}")?;
        }
        Ok(())
    }

    /// Inverse of [`Vocabulary::save`]. The file does not carry the corpus
    /// length, so `total_tokens` must be supplied by the caller (the token
    /// stream artifact records it).
    pub fn load<R: BufRead>(r: R, total_tokens: u64) -> Result<Self, CorpusError> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        let mut index = HashMap::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| CorpusError::Io { offset: 0, source: e })?;
            if line.is_empty() {
                continue;
            }
            let (tok, cnt) = line.split_once('\t').ok_or(CorpusError::MalformedVocabFile {
                line: lineno + 1,
                reason: "missing tab separator".into(),
            })?;
            let cnt: u64 = cnt.parse().map_err(|e| CorpusError::MalformedVocabFile {
                line: lineno + 1,
                reason: format!("bad count: {e}"),
            })?;
            index.insert(tok.to_string(), tokens.len() as u32);
            tokens.push(tok.to_string());
            counts.push(cnt);
        }
        if tokens.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        Ok(Vocabulary { tokens, counts, index, total_tokens })
    }

    pub fn save_to_path(&self, path: &Path) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.save(&mut w)?;
        w.flush()
    }

    pub fn load_from_path(path: &Path, total_tokens: u64) -> Result<Self, CorpusError> {
        let f = std::fs::File::open(path).map_err(|e| CorpusError::Io { offset: 0, source: e })?;
        Self::load(std::io::BufReader::new(f), total_tokens)
    }
}

/// Id sequence for one corpus, out-of-vocabulary tokens dropped.
/// Window positions close over the gaps left by dropped tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub ids: Vec<u32>,
    /// Token count of the source text before OOV dropping.
    pub source_len: u64,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Split raw bytes into whitespace-delimited tokens.
///
/// Whitespace is the ASCII set (space, tab, LF, CR, VT, FF); anything else is
/// token material. No normalization is applied.
pub fn tokenize(bytes: &[u8]) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &b) in bytes.iter().enumerate() {
        if b.is_ascii_whitespace() {
            if let Some(s) = start.take() {
                out.push(token_str(&bytes[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(token_str(&bytes[s..]));
    }
    out
}

fn token_str(bytes: &[u8]) -> &str {
    // text8 and friends are ASCII; fall back to lossless-utf8 check for
    // other corpora. Invalid sequences cannot occur here because the corpus
    // gets read as bytes and split on single-byte whitespace, which never
    // breaks a multi-byte UTF-8 sequence that was valid in the input.
    std::str::from_utf8(bytes).unwrap_or("\u{fffd}")
}

/// Tally token frequencies, optionally sharded over byte ranges.
/// Shard boundaries are snapped to whitespace so every token is counted once;
/// the merged tally is identical to a single-pass tally.
pub fn tally_tokens(bytes: &[u8], shards: usize) -> FxHashMap<&str, u64> {
    let cuts = whitespace_cuts(bytes, shards);
    let tally_range = |range: std::ops::Range<usize>| {
        let mut m: FxHashMap<&str, u64> = FxHashMap::default();
        for tok in tokenize(&bytes[range]) {
            *m.entry(tok).or_insert(0) += 1;
        }
        m
    };
    let mut merged: FxHashMap<&str, u64> = FxHashMap::default();
    let partials = map_ranges(cuts, tally_range);
    for part in partials {
        for (tok, cnt) in part {
            *merged.entry(tok).or_insert(0) += cnt;
        }
    }
    merged
}

/// Byte ranges split at whitespace, covering `bytes` exactly.
fn whitespace_cuts(bytes: &[u8], shards: usize) -> Vec<std::ops::Range<usize>> {
    let shards = shards.max(1);
    if bytes.is_empty() || shards == 1 {
        return vec![0..bytes.len()];
    }
    let mut cuts = vec![0usize];
    for r in shard_ranges(bytes.len(), shards).iter().skip(1) {
        let mut p = r.start;
        while p < bytes.len() && !bytes[p].is_ascii_whitespace() {
            p += 1;
        }
        if p > *cuts.last().unwrap() && p < bytes.len() {
            cuts.push(p);
        }
    }
    cuts.push(bytes.len());
    cuts.windows(2).map(|w| w[0]..w[1]).collect()
}

#[cfg(feature = "parallel")]
fn map_ranges<T: Send>(
    ranges: Vec<std::ops::Range<usize>>,
    f: impl Fn(std::ops::Range<usize>) -> T + Sync + Send,
) -> Vec<T> {
    use rayon::prelude::*;
    ranges.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_ranges<T: Send>(
    ranges: Vec<std::ops::Range<usize>>,
    f: impl Fn(std::ops::Range<usize>) -> T + Sync + Send,
) -> Vec<T> {
    ranges.into_iter().map(f).collect()
}

/// Build the vocabulary of tokens occurring at least `min_count` times.
///
/// `shards` controls the tally parallelism only; the result is independent
/// of the shard count.
pub fn build_vocabulary(
    bytes: &[u8],
    min_count: u64,
    shards: usize,
) -> Result<Vocabulary, CorpusError> {
    if min_count == 0 {
        return Err(CorpusError::BadMinCount);
    }
    let tally = tally_tokens(bytes, shards);
    let total_tokens: u64 = tally.values().sum();
    if total_tokens == 0 {
        return Err(CorpusError::EmptyVocabulary);
    }
    let mut kept: Vec<(&str, u64)> =
        tally.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if kept.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut tokens = Vec::with_capacity(kept.len());
    let mut counts = Vec::with_capacity(kept.len());
    let mut index = HashMap::with_capacity(kept.len());
    for (tok, cnt) in kept {
        index.insert(tok.to_string(), tokens.len() as u32);
        tokens.push(tok.to_string());
        counts.push(cnt);
    }
    Ok(Vocabulary { tokens, counts, index, total_tokens })
}

/// Map the corpus to an id stream, dropping OOV tokens.
pub fn token_stream(bytes: &[u8], vocab: &Vocabulary, shards: usize) -> TokenStream {
    let cuts = whitespace_cuts(bytes, shards);
    let map_range = |range: std::ops::Range<usize>| {
        let toks = tokenize(&bytes[range]);
        let mut ids = Vec::with_capacity(toks.len());
        let mut source = 0u64;
        for tok in toks {
            source += 1;
            if let Some(id) = vocab.id(tok) {
                ids.push(id);
            }
        }
        (ids, source)
    };
    let parts = map_ranges(cuts, map_range);
    let mut ids = Vec::new();
    let mut source_len = 0;
    for (part_ids, part_src) in parts {
        ids.extend_from_slice(&part_ids);
        source_len += part_src;
    }
    TokenStream { ids, source_len }
}
