//! BATS analogy set: loading, analogy enumeration, and 3CosAdd evaluation.
//!
//! A category file holds one record per line, `source<TAB>target1/target2/...`.
//! Records pair up into analogies a : b :: a* : b* — the relation maps a to
//! b (record 1) and a* to b* (record 2) — queried as a - a* + b* and scored
//! against b. The paraphrase pairs associated with an analogy are
//! W = {a, b*} and W* = {a*, b}.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::sgns::{ColMatrix, EmbeddingPair};

#[derive(Debug, Error)]
pub enum BatsError {
    #[error("malformed record at {file}:{line}: {reason}")]
    Parse { file: String, line: usize, reason: String },
    #[error("no category files found under {0}")]
    EmptyDirectory(PathBuf),
    #[error("query word {0} has a zero-norm vector")]
    DegenerateQuery(u32),
    #[error("no analogies to evaluate")]
    NoAnalogies,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatsRecord {
    pub source: String,
    /// Acceptable targets in file order; the first one is the primary.
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatsCategory {
    /// Category code, e.g. "I01" or "L10" (first token of the file name).
    pub code: String,
    pub records: Vec<BatsRecord>,
}

/// Load all category files under `dir` (recursing into subdirectories, as
/// the dataset ships in four group folders). Categories come back sorted by
/// code. Out-of-vocabulary filtering happens later, at enumeration.
pub fn load_bats(dir: &Path) -> Result<Vec<BatsCategory>, BatsError> {
    let mut files = Vec::new();
    collect_txt_files(dir, &mut files)?;
    if files.is_empty() {
        return Err(BatsError::EmptyDirectory(dir.to_path_buf()));
    }
    files.sort();
    let mut out = Vec::with_capacity(files.len());
    for file in files {
        let name = file.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
        let code = name.split_whitespace().next().unwrap_or(&name).to_string();
        let text = std::fs::read_to_string(&file)?;
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let (source, targets) = line
                .split_once('\t')
                .or_else(|| line.split_once(' '))
                .ok_or_else(|| BatsError::Parse {
                    file: file.display().to_string(),
                    line: lineno + 1,
                    reason: "missing separator between source and targets".into(),
                })?;
            let targets: Vec<String> =
                targets.split('/').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
            if source.is_empty() || targets.is_empty() {
                return Err(BatsError::Parse {
                    file: file.display().to_string(),
                    line: lineno + 1,
                    reason: "empty source or target list".into(),
                });
            }
            records.push(BatsRecord { source: source.trim().to_string(), targets });
        }
        out.push(BatsCategory { code, records });
    }
    out.sort_by(|a, b| a.code.cmp(&b.code));
    Ok(out)
}

fn collect_txt_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), BatsError> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_txt_files(&path, out)?;
        } else if path.extension().map(|e| e == "txt").unwrap_or(false) {
            out.push(path);
        }
    }
    Ok(())
}

/// One ordered analogy a : b :: a* : b*, with the derived paraphrase pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyInstance {
    pub a: u32,
    /// Prediction target (primary target of record 1).
    pub b: u32,
    pub a_star: u32,
    pub b_star: u32,
    /// All in-vocabulary targets of record 1; a prediction matching any of
    /// them counts as correct.
    pub b_accept: Vec<u32>,
    /// W = {a, b*}, canonical order; None when a == b*.
    pub pair_w: Option<(u32, u32)>,
    /// W* = {a*, b}, canonical order; None when a* == b.
    pub pair_w_star: Option<(u32, u32)>,
}

fn canonical(a: u32, b: u32) -> Option<(u32, u32)> {
    match a.cmp(&b) {
        std::cmp::Ordering::Less => Some((a, b)),
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Greater => Some((b, a)),
    }
}

/// All ordered pairs of distinct in-vocabulary records. A record is usable
/// when its source and primary target are in the vocabulary.
pub fn enumerate_analogies(category: &BatsCategory, vocab: &Vocabulary) -> Vec<AnalogyInstance> {
    struct Usable {
        source: u32,
        primary: u32,
        accept: Vec<u32>,
    }
    let usable: Vec<Usable> = category
        .records
        .iter()
        .filter_map(|r| {
            let source = vocab.id(&r.source)?;
            let primary = vocab.id(&r.targets[0])?;
            let accept: Vec<u32> = r.targets.iter().filter_map(|t| vocab.id(t)).collect();
            Some(Usable { source, primary, accept })
        })
        .collect();
    let mut out = Vec::with_capacity(usable.len().saturating_mul(usable.len().saturating_sub(1)));
    for (i, r1) in usable.iter().enumerate() {
        for (j, r2) in usable.iter().enumerate() {
            if i == j {
                continue;
            }
            out.push(AnalogyInstance {
                a: r1.source,
                b: r1.primary,
                a_star: r2.source,
                b_star: r2.primary,
                b_accept: r1.accept.clone(),
                pair_w: canonical(r1.source, r2.primary),
                pair_w_star: canonical(r2.source, r1.primary),
            });
        }
    }
    out
}

/// Length-normalized word vectors, prepared once for many queries.
pub struct NormalizedEmbeddings {
    unit: ColMatrix,
}

impl NormalizedEmbeddings {
    pub fn new(pair: &EmbeddingPair) -> Self {
        let d = pair.words.d;
        let n = pair.words.n;
        let mut unit = ColMatrix::zeros(d, n);
        for i in 0..n as u32 {
            let src = pair.words.col(i);
            let norm: f32 = src.iter().map(|v| v * v).sum::<f32>().sqrt();
            let dst = unit.col_mut(i);
            if norm > 0.0 {
                for (o, &s) in dst.iter_mut().zip(src.iter()) {
                    *o = s / norm;
                }
            }
        }
        NormalizedEmbeddings { unit }
    }

    pub fn vocab_len(&self) -> usize {
        self.unit.n
    }

    fn col(&self, i: u32) -> &[f32] {
        self.unit.col(i)
    }

    fn is_zero(&self, i: u32) -> bool {
        self.unit.col(i).iter().all(|&v| v == 0.0)
    }
}

/// 3CosAdd: argmax over the vocabulary of cos(w_x, a - a* + b*) on unit
/// vectors, excluding the three query words.
pub fn three_cos_add(
    ne: &NormalizedEmbeddings,
    a: u32,
    a_star: u32,
    b_star: u32,
) -> Result<u32, BatsError> {
    for &q in &[a, a_star, b_star] {
        if ne.is_zero(q) {
            return Err(BatsError::DegenerateQuery(q));
        }
    }
    let d = ne.unit.d;
    let mut query = vec![0.0f32; d];
    for i in 0..d {
        query[i] = ne.col(a)[i] - ne.col(a_star)[i] + ne.col(b_star)[i];
    }
    let mut best: Option<(u32, f32)> = None;
    for x in 0..ne.vocab_len() as u32 {
        if x == a || x == a_star || x == b_star {
            continue;
        }
        let score: f32 = ne.col(x).iter().zip(query.iter()).map(|(u, q)| u * q).sum();
        match best {
            Some((_, s)) if s >= score => {}
            _ => best = Some((x, score)),
        }
    }
    best.map(|(x, _)| x).ok_or(BatsError::NoAnalogies)
}

/// Fraction of analogies whose 3CosAdd prediction is an acceptable target.
pub fn evaluate_category(
    ne: &NormalizedEmbeddings,
    analogies: &[AnalogyInstance],
) -> Result<f64, BatsError> {
    if analogies.is_empty() {
        return Err(BatsError::NoAnalogies);
    }
    let hits = count_hits(ne, analogies)?;
    Ok(hits as f64 / analogies.len() as f64)
}

fn score_one(ne: &NormalizedEmbeddings, an: &AnalogyInstance) -> Result<u64, BatsError> {
    let predicted = three_cos_add(ne, an.a, an.a_star, an.b_star)?;
    Ok(u64::from(an.b_accept.contains(&predicted)))
}

#[cfg(feature = "parallel")]
fn count_hits(ne: &NormalizedEmbeddings, analogies: &[AnalogyInstance]) -> Result<u64, BatsError> {
    use rayon::prelude::*;
    analogies.par_iter().map(|an| score_one(ne, an)).sum()
}

#[cfg(not(feature = "parallel"))]
fn count_hits(ne: &NormalizedEmbeddings, analogies: &[AnalogyInstance]) -> Result<u64, BatsError> {
    analogies.iter().map(|an| score_one(ne, an)).sum()
}
