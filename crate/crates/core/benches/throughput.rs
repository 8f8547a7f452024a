//! Parallel vs sequential throughput for the data-parallel kernels:
//! windowed counting, the linearity probe, and paraphrase rank queries.
//!
//! The sequential path is always available (it is the deterministic path);
//! with the default `parallel` feature the same work also runs sharded over
//! a rayon pool, and both are measured side by side.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use parapmi::cooccur::{count_pairs, count_triplets, CountingOptions};
use parapmi::corpus::{build_vocabulary, token_stream, TokenStream, Vocabulary};
use parapmi::pci::{build_pci, rank_true_paraphrase};

fn synthetic_corpus(tokens: usize, vocab: usize, seed: u64) -> String {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=vocab).map(|r| 1.0 / (r as f64)).collect();
    let total: f64 = weights.iter().sum();
    let mut out = String::with_capacity(tokens * 6);
    for _ in 0..tokens {
        let mut x = rng.gen::<f64>() * total;
        let mut pick = 0;
        for (i, w) in weights.iter().enumerate() {
            x -= w;
            if x <= 0.0 {
                pick = i;
                break;
            }
        }
        out.push_str(&format!("w{pick:04} "));
    }
    out
}

fn fixture(tokens: usize, vocab: usize) -> (Vocabulary, TokenStream) {
    let text = synthetic_corpus(tokens, vocab, 0xbe);
    let v = build_vocabulary(text.as_bytes(), 1, 1).unwrap();
    let ts = token_stream(text.as_bytes(), &v, 1);
    (v, ts)
}

fn opts(shards: usize) -> CountingOptions {
    CountingOptions { window_radius: 5, shards, ..Default::default() }
}

fn bench_counting(c: &mut Criterion) {
    let (vocab, ts) = fixture(120_000, 800);
    let mut group = c.benchmark_group("count_pairs");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("shards", 1), |b| {
        b.iter(|| count_pairs(&ts, &vocab, &opts(1)).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function(BenchmarkId::new("shards", 8), |b| {
        b.iter(|| count_pairs(&ts, &vocab, &opts(8)).unwrap())
    });
    group.finish();

    let mut group = c.benchmark_group("count_triplets");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("shards", 1), |b| {
        b.iter(|| count_triplets(&ts, &vocab, 400, &opts(1)).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function(BenchmarkId::new("shards", 8), |b| {
        b.iter(|| count_triplets(&ts, &vocab, 400, &opts(8)).unwrap())
    });
    group.finish();
}

fn bench_rank_queries(c: &mut Criterion) {
    let (vocab, ts) = fixture(60_000, 300);
    let tc = count_triplets(&ts, &vocab, 300, &opts(1)).unwrap();
    let pci = build_pci(&tc, false);
    let inverted = pci.inverted_index();
    let queries: Vec<((u32, u32), (u32, u32))> = (0..pci.n_columns().min(64))
        .map(|p| (pci.column_pair(p), pci.column_pair((p * 7 + 3) % pci.n_columns())))
        .collect();

    let run_queries = || {
        let mut acc = 0u64;
        for &(w, ws) in &queries {
            acc += rank_true_paraphrase(&pci, &inverted, w, ws, false).unwrap().rank;
        }
        acc
    };

    let mut group = c.benchmark_group("rank_queries_64");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(run_queries));
    #[cfg(feature = "parallel")]
    group.bench_function("rayon_over_queries", |b| {
        use rayon::prelude::*;
        b.iter(|| {
            queries
                .par_iter()
                .map(|&(w, ws)| rank_true_paraphrase(&pci, &inverted, w, ws, false).unwrap().rank)
                .sum::<u64>()
        })
    });
    group.finish();
}

fn bench_linearity_probe(c: &mut Criterion) {
    use parapmi::linearity::correlation_report;
    use parapmi::pinv::DEFAULT_SVD_CUTOFF;
    use parapmi::pmi::build_pmi;
    use parapmi::sgns::{train, SgnsConfig};

    let (vocab, ts) = fixture(40_000, 300);
    let pmi = build_pmi(&count_pairs(&ts, &vocab, &opts(1)).unwrap()).unwrap();
    let cfg = SgnsConfig {
        dimension: 32,
        epochs: 1,
        initial_learning_rate: 0.05,
        learning_rate_floor: 0.05 * 1e-4,
        ..Default::default()
    };
    let pair = train(&ts, &vocab, &cfg).unwrap();
    let ids: Vec<u32> = (0..vocab.len() as u32).collect();

    let mut group = c.benchmark_group("linearity_probe");
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        let seq_pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        group.bench_function("one_thread", |b| {
            b.iter(|| {
                seq_pool.install(|| {
                    correlation_report(&pair, &pmi, &ids, DEFAULT_SVD_CUTOFF).unwrap().mean
                })
            })
        });
        group.bench_function("rayon_default", |b| {
            b.iter(|| correlation_report(&pair, &pmi, &ids, DEFAULT_SVD_CUTOFF).unwrap().mean)
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| {
        b.iter(|| correlation_report(&pair, &pmi, &ids, DEFAULT_SVD_CUTOFF).unwrap().mean)
    });
    group.finish();
}

criterion_group!(benches, bench_counting, bench_rank_queries, bench_linearity_probe);
criterion_main!(benches);
