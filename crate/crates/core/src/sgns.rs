//! Skip-gram with negative sampling.
//!
//! Produces both the word matrix W and the context matrix C. Training
//! replicates the reference word2vec conventions: W initialized uniformly in
//! [-0.5/d, 0.5/d], C zero-initialized, fixed (non-shrinking) windows,
//! linear learning-rate decay, negatives drawn from the unigram distribution
//! raised to a configurable exponent. The sigmoid is evaluated exactly (no
//! lookup table) to stay as close as possible to the factorization the dot
//! products are compared against.
//!
//! Multi-threaded training shares parameters lock-free: concurrent updates
//! may race and the result is not reproducible. One thread is reproducible
//! bit for bit given the seed.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{TokenStream, Vocabulary};
use crate::util::shard_ranges;

#[derive(Debug, Error)]
pub enum SgnsError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("empty token stream")]
    EmptyStream,
    #[error("token stream and vocabulary are inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed embedding file at line {line}: {reason}")]
    Format { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub dimension: usize,
    pub negative_samples: usize,
    /// Exponent applied to unigram counts for the noise distribution.
    pub noise_exponent: f64,
    pub window_radius: u32,
    pub epochs: usize,
    pub initial_learning_rate: f32,
    /// Absolute floor of the linearly decayed learning rate.
    pub learning_rate_floor: f32,
    /// `None` disables frequent-word subsampling.
    pub subsample_threshold: Option<f64>,
    pub seed: u64,
    /// 1 = deterministic single-threaded training.
    pub threads: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dimension: 500,
            negative_samples: 1,
            noise_exponent: 1.0,
            window_radius: 5,
            epochs: 5,
            initial_learning_rate: 0.025,
            learning_rate_floor: 0.025 * 1e-4,
            subsample_threshold: None,
            seed: 1,
            threads: 1,
        }
    }
}

impl SgnsConfig {
    fn validate(&self) -> Result<(), SgnsError> {
        if self.dimension == 0 {
            return Err(SgnsError::Config("dimension must be >= 1".into()));
        }
        if self.negative_samples == 0 {
            return Err(SgnsError::Config("negative_samples must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_exponent) {
            return Err(SgnsError::Config("noise_exponent must lie in [0, 1]".into()));
        }
        if self.window_radius == 0 {
            return Err(SgnsError::Config("window_radius must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(SgnsError::Config("epochs must be >= 1".into()));
        }
        if self.initial_learning_rate <= 0.0 {
            return Err(SgnsError::Config("initial_learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Column-major dense matrix, one column per word.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    pub d: usize,
    pub n: usize,
    data: Vec<f32>,
}

impl ColMatrix {
    pub fn zeros(d: usize, n: usize) -> Self {
        ColMatrix { d, n, data: vec![0.0; d * n] }
    }

    pub fn col(&self, i: u32) -> &[f32] {
        let o = i as usize * self.d;
        &self.data[o..o + self.d]
    }

    pub fn col_mut(&mut self, i: u32) -> &mut [f32] {
        let o = i as usize * self.d;
        &mut self.data[o..o + self.d]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Trained word matrix W and context matrix C (both d x |V|, vectors as
/// columns) plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPair {
    pub words: ColMatrix,
    pub contexts: ColMatrix,
    pub config: SgnsConfig,
}

impl EmbeddingPair {
    pub fn dimension(&self) -> usize {
        self.words.d
    }

    pub fn vocab_len(&self) -> usize {
        self.words.n
    }

    /// One row of Wᵀ·C: dot(W col x, C col y) for every y. Rows are computed
    /// on demand; the full |V|x|V| product is never materialized.
    pub fn dot_row(&self, x: u32) -> Vec<f64> {
        let w = self.words.col(x);
        (0..self.vocab_len() as u32)
            .map(|y| {
                let c = self.contexts.col(y);
                w.iter().zip(c.iter()).map(|(&a, &b)| a as f64 * b as f64).sum()
            })
            .collect()
    }
}

/// Loss of one SGNS event: input vector `w`, positive output `c_pos`,
/// negative outputs `c_negs`. Natural-log sigmoid loss.
pub fn event_loss(w: &[f64], c_pos: &[f64], c_negs: &[&[f64]]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut loss = -log_sigmoid(dot(w, c_pos));
    for neg in c_negs {
        loss -= log_sigmoid(-dot(w, neg));
    }
    loss
}

/// Analytic gradients of `event_loss` with respect to `w`, `c_pos`, and each
/// negative output vector, in that order.
pub fn event_gradients(
    w: &[f64],
    c_pos: &[f64],
    c_negs: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let d = w.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut gw = vec![0.0; d];
    let s_pos = sigmoid(dot(w, c_pos));
    let g_pos = s_pos - 1.0; // d(-ln σ(x))/dx = σ(x) - 1
    let mut gc_pos = vec![0.0; d];
    for i in 0..d {
        gw[i] += g_pos * c_pos[i];
        gc_pos[i] = g_pos * w[i];
    }
    let mut gc_negs = Vec::with_capacity(c_negs.len());
    for neg in c_negs {
        let s_neg = sigmoid(dot(w, neg));
        let mut gc = vec![0.0; d];
        for i in 0..d {
            gw[i] += s_neg * neg[i];
            gc[i] = s_neg * w[i];
        }
        gc_negs.push(gc);
    }
    (gw, gc_pos, gc_negs)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn log_sigmoid(x: f64) -> f64 {
    // Stable: -ln(1 + e^-x) for x >= 0, x - ln(1 + e^x) otherwise.
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Cumulative-weight sampler for the noise distribution.
struct NoiseTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl NoiseTable {
    fn new(vocab: &Vocabulary, exponent: f64) -> Self {
        let mut cumulative = Vec::with_capacity(vocab.len());
        let mut acc = 0.0;
        for id in 0..vocab.len() as u32 {
            acc += (vocab.count(id) as f64).powf(exponent);
            cumulative.push(acc);
        }
        NoiseTable { cumulative, total: acc }
    }

    #[inline]
    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let x = rng.gen::<f64>() * self.total;
        self.cumulative.partition_point(|&c| c <= x) as u32
    }
}

/// f32 matrix with relaxed-atomic cells, shared across training threads.
struct SharedMatrix {
    d: usize,
    cells: Vec<AtomicU32>,
}

impl SharedMatrix {
    fn from_values(d: usize, values: Vec<f32>) -> Self {
        let cells = values.into_iter().map(|v| AtomicU32::new(v.to_bits())).collect();
        SharedMatrix { d, cells }
    }

    #[inline]
    fn get(&self, idx: usize) -> f32 {
        f32::from_bits(self.cells[idx].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, idx: usize, delta: f32) {
        let v = self.get(idx) + delta;
        self.cells[idx].store(v.to_bits(), Ordering::Relaxed);
    }

    fn into_col_matrix(self, n: usize) -> ColMatrix {
        let data = self.cells.into_iter().map(|c| f32::from_bits(c.into_inner())).collect();
        ColMatrix { d: self.d, n, data }
    }
}

/// Train SGNS embeddings over the token stream.
pub fn train(
    tokens: &TokenStream,
    vocab: &Vocabulary,
    config: &SgnsConfig,
) -> Result<EmbeddingPair, SgnsError> {
    config.validate()?;
    if tokens.is_empty() {
        return Err(SgnsError::EmptyStream);
    }
    if let Some(&max) = tokens.ids.iter().max() {
        if max as usize >= vocab.len() {
            return Err(SgnsError::Inconsistent(format!(
                "token id {max} outside vocabulary of {}",
                vocab.len()
            )));
        }
    }
    let d = config.dimension;
    let n = vocab.len();

    // W init is a single seeded pass so it never depends on thread count.
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w_init = vec![0.0f32; d * n];
    for v in w_init.iter_mut() {
        *v = (init_rng.gen::<f32>() - 0.5) / d as f32;
    }
    let w = SharedMatrix::from_values(d, w_init);
    let c = SharedMatrix::from_values(d, vec![0.0f32; d * n]);

    let noise = NoiseTable::new(vocab, config.noise_exponent);
    let total_events = (config.epochs as u64) * (tokens.len() as u64);
    let processed = AtomicU64::new(0);

    let threads = config.threads.max(1);
    if threads == 1 {
        train_range(
            tokens,
            vocab,
            config,
            &w,
            &c,
            &noise,
            0..tokens.len(),
            0,
            total_events,
            &processed,
        );
    } else {
        let ranges = shard_ranges(tokens.len(), threads);
        std::thread::scope(|scope| {
            for (i, range) in ranges.into_iter().enumerate() {
                let (w, c, noise, processed) = (&w, &c, &noise, &processed);
                scope.spawn(move || {
                    train_range(
                        tokens,
                        vocab,
                        config,
                        w,
                        c,
                        noise,
                        range,
                        i as u64,
                        total_events,
                        processed,
                    );
                });
            }
        });
    }

    Ok(EmbeddingPair {
        words: w.into_col_matrix(n),
        contexts: c.into_col_matrix(n),
        config: config.clone(),
    })
}

#[allow(clippy::too_many_arguments)]
fn train_range(
    tokens: &TokenStream,
    vocab: &Vocabulary,
    config: &SgnsConfig,
    w: &SharedMatrix,
    c: &SharedMatrix,
    noise: &NoiseTable,
    range: std::ops::Range<usize>,
    worker: u64,
    total_events: u64,
    processed: &AtomicU64,
) {
    let d = config.dimension;
    let radius = config.window_radius as usize;
    let ids = &tokens.ids;
    let stream_total = tokens.len() as f64;
    let mut grad_acc = vec![0.0f32; d];
    let mut lr = config.initial_learning_rate;
    let mut since_sync = 0u64;
    const SYNC_EVERY: u64 = 10_000;

    for epoch in 0..config.epochs as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(
            config.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(worker + 1)).wrapping_add(epoch),
        );
        // Subsampling compacts the worker's slice before windowing, matching
        // the reference implementation's sentence-buffer behaviour.
        let window_ids: Vec<u32> = match config.subsample_threshold {
            None => ids[range.clone()].to_vec(),
            Some(t) => ids[range.clone()]
                .iter()
                .copied()
                .filter(|&id| {
                    let f = vocab.count(id) as f64;
                    let k = t * stream_total;
                    let keep = ((f / k).sqrt() + 1.0) * k / f;
                    keep >= rng.gen::<f64>()
                })
                .collect(),
        };

        for t in 0..window_ids.len() {
            since_sync += 1;
            if since_sync >= SYNC_EVERY {
                let done = processed.fetch_add(since_sync, Ordering::Relaxed) + since_sync;
                since_sync = 0;
                let frac = done as f32 / (total_events + 1) as f32;
                lr = (config.initial_learning_rate * (1.0 - frac))
                    .max(config.learning_rate_floor);
            }
            let center = window_ids[t];
            let lo = t.saturating_sub(radius);
            let hi = (t + radius).min(window_ids.len() - 1);
            for u in lo..=hi {
                if u == t {
                    continue;
                }
                let input = window_ids[u];
                let l1 = input as usize * d;
                grad_acc.iter_mut().for_each(|g| *g = 0.0);
                for k in 0..=config.negative_samples {
                    let (target, label) = if k == 0 {
                        (center, 1.0f32)
                    } else {
                        let neg = noise.sample(&mut rng);
                        if neg == center {
                            continue;
                        }
                        (neg, 0.0f32)
                    };
                    let l2 = target as usize * d;
                    let mut dot = 0.0f32;
                    for i in 0..d {
                        dot += w.get(l1 + i) * c.get(l2 + i);
                    }
                    let g = (label - sigmoid(dot as f64) as f32) * lr;
                    for i in 0..d {
                        grad_acc[i] += g * c.get(l2 + i);
                    }
                    for i in 0..d {
                        c.add(l2 + i, g * w.get(l1 + i));
                    }
                }
                for i in 0..d {
                    w.add(l1 + i, grad_acc[i]);
                }
            }
        }
    }
    processed.fetch_add(since_sync, Ordering::Relaxed);
}

/// Mean SGNS loss over the events of a token slice, with negatives drawn
/// from the noise distribution under a fixed seed. Used for held-out
/// monitoring; does not touch the parameters.
pub fn evaluate_loss(
    pair: &EmbeddingPair,
    holdout: &[u32],
    vocab: &Vocabulary,
    seed: u64,
) -> f64 {
    let config = &pair.config;
    let noise = NoiseTable::new(vocab, config.noise_exponent);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = config.window_radius as usize;
    let mut total = 0.0;
    let mut events = 0u64;
    for t in 0..holdout.len() {
        let center = holdout[t];
        let lo = t.saturating_sub(radius);
        let hi = (t + radius).min(holdout.len().saturating_sub(1));
        for u in lo..=hi {
            if u == t {
                continue;
            }
            let w: Vec<f64> = pair.words.col(holdout[u]).iter().map(|&x| x as f64).collect();
            let cp: Vec<f64> = pair.contexts.col(center).iter().map(|&x| x as f64).collect();
            let negs: Vec<Vec<f64>> = (0..config.negative_samples)
                .map(|_| {
                    pair.contexts.col(noise.sample(&mut rng)).iter().map(|&x| x as f64).collect()
                })
                .collect();
            let neg_refs: Vec<&[f64]> = negs.iter().map(|v| v.as_slice()).collect();
            total += event_loss(&w, &cp, &neg_refs);
            events += 1;
        }
    }
    if events == 0 {
        0.0
    } else {
        total / events as f64
    }
}

/// Write one matrix in the standard text format: header `|V| d`, then one
/// line per word: `token v1 v2 ... vd`, in id order.
pub fn save_matrix_text<W: std::io::Write>(
    mut out: W,
    matrix: &ColMatrix,
    vocab: &Vocabulary,
) -> Result<(), SgnsError> {
    if matrix.n != vocab.len() {
        return Err(SgnsError::Inconsistent("matrix width != vocabulary size".into()));
    }
    writeln!(out, "{} {}", matrix.n, matrix.d)?;
    let mut line = String::new();
    for id in 0..matrix.n as u32 {
        line.clear();
        line.push_str(vocab.token(id));
        for v in matrix.col(id) {
            line.push(' ');
            line.push_str(&format!("{v}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Read a matrix written by [`save_matrix_text`]. Returns the token order of
/// the file alongside the matrix.
pub fn load_matrix_text<R: std::io::BufRead>(
    reader: R,
) -> Result<(Vec<String>, ColMatrix), SgnsError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or(SgnsError::Format { line: 1, reason: "missing header".into() })?
        .map_err(SgnsError::Io)?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(SgnsError::Format { line: 1, reason: "bad vocabulary size".into() })?;
    let d: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(SgnsError::Format { line: 1, reason: "bad dimension".into() })?;
    let mut tokens = Vec::with_capacity(n);
    let mut matrix = ColMatrix::zeros(d, n);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(SgnsError::Io)?;
        if line.is_empty() {
            continue;
        }
        if i >= n {
            return Err(SgnsError::Format { line: i + 2, reason: "more rows than header".into() });
        }
        let mut parts = line.split(' ');
        let tok = parts
            .next()
            .ok_or(SgnsError::Format { line: i + 2, reason: "empty line".into() })?;
        tokens.push(tok.to_string());
        let col = matrix.col_mut(i as u32);
        let mut filled = 0;
        for p in parts {
            if p.is_empty() {
                continue;
            }
            if filled >= d {
                return Err(SgnsError::Format {
                    line: i + 2,
                    reason: "more values than dimension".into(),
                });
            }
            col[filled] = p.parse().map_err(|e| SgnsError::Format {
                line: i + 2,
                reason: format!("bad value: {e}"),
            })?;
            filled += 1;
        }
        if filled != d {
            return Err(SgnsError::Format {
                line: i + 2,
                reason: format!("expected {d} values, found {filled}"),
            });
        }
    }
    if tokens.len() != n {
        return Err(SgnsError::Format {
            line: tokens.len() + 1,
            reason: format!("expected {n} rows, found {}", tokens.len()),
        });
    }
    Ok((tokens, matrix))
}
