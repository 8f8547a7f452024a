//! Stage execution, artifact io, and TSV report emission.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{hash_artifacts, Manifest, ManifestEntry, PipelineConfig, PipelineError, Stage, ALL_STAGES};
use crate::bats::{enumerate_analogies, evaluate_category, load_bats, AnalogyInstance, NormalizedEmbeddings};
use crate::cooccur::{self, store_io, CountingOptions};
use crate::corpus::{build_vocabulary, token_stream, TokenStream, Vocabulary};
use crate::linearity::correlation_report;
use crate::paraphrase::category_norm_table;
use crate::pci::{build_pci, category_rank_table, save_pci};
use crate::pmi::{build_pmi, load_pmi, save_pmi};
use crate::sgns::{load_matrix_text, save_matrix_text, EmbeddingPair, SgnsConfig};
use crate::util::{fmt_f64, fnv1a_extend, FNV_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Built,
    /// Cache hit: artifacts and config hashes both matched the manifest.
    Skipped,
}

/// Run one stage, honoring the artifact cache.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    config.validate()?;
    if stage.needs_bats() && config.bats.is_none() {
        return Err(PipelineError::Config(format!(
            "stage `{}` needs --bats <dir>",
            stage.name()
        )));
    }
    std::fs::create_dir_all(&config.out_dir)?;
    let mut manifest = Manifest::load(&config.out_dir);

    // The report stage aggregates its own missing-stage list; everything
    // else fails fast on the first absent upstream artifact.
    if stage != Stage::Report {
        for up in stage.upstream() {
            let missing = up.artifacts().iter().any(|a| !config.out_dir.join(a).is_file());
            if missing {
                return Err(PipelineError::Dependency {
                    needed: up.name().to_string(),
                    wanted_by: stage.name().to_string(),
                });
            }
        }
    }

    let config_hash = effective_config_hash(stage, config, &mut manifest)?;
    if let Some(entry) = manifest.stages.get(stage.name()) {
        let artifacts_present = stage.artifacts().iter().all(|a| config.out_dir.join(a).is_file());
        if artifacts_present && entry.config_hash == config_hash {
            let current = hash_artifacts(&config.out_dir, stage.artifacts())?;
            if entry.content_hash == format!("{current:016x}") {
                return Ok(StageOutcome::Skipped);
            }
        }
    }

    execute(stage, config)?;

    let content = hash_artifacts(&config.out_dir, stage.artifacts())?;
    manifest.stages.insert(
        stage.name().to_string(),
        ManifestEntry {
            artifacts: stage.artifacts().iter().map(|s| s.to_string()).collect(),
            content_hash: format!("{content:016x}"),
            config_hash,
            timestamp_secs: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
    );
    manifest.save(&config.out_dir)?;
    Ok(StageOutcome::Built)
}

/// Run the whole pipeline in order. BATS-dependent stages require a BATS
/// directory; `all` is the full reproduction.
pub fn run_all(config: &PipelineConfig) -> Result<Vec<(Stage, StageOutcome)>, PipelineError> {
    if config.bats.is_none() {
        return Err(PipelineError::Config(
            "running `all` needs --bats <dir>; individual stages can run without it".into(),
        ));
    }
    let mut out = Vec::new();
    for stage in ALL_STAGES {
        let outcome = run_stage(stage, config)?;
        out.push((stage, outcome));
    }
    Ok(out)
}

/// Stage config hash combined with the content hashes of upstream artifacts,
/// so a stage reruns when anything it reads changed.
fn effective_config_hash(
    stage: Stage,
    config: &PipelineConfig,
    manifest: &mut Manifest,
) -> Result<String, PipelineError> {
    let mut h = FNV_SEED;
    h = fnv1a_extend(h, &config.stage_config_hash(stage).to_le_bytes());
    for up in stage.upstream() {
        let all_present = up.artifacts().iter().all(|a| config.out_dir.join(a).is_file());
        if !all_present {
            continue; // the dependency check already ruled on this
        }
        let content = match manifest.stages.get(up.name()) {
            Some(e) => e.content_hash.clone(),
            None => format!("{:016x}", hash_artifacts(&config.out_dir, up.artifacts())?),
        };
        h = fnv1a_extend(h, content.as_bytes());
    }
    Ok(format!("{h:016x}"))
}

fn execute(stage: Stage, config: &PipelineConfig) -> Result<(), PipelineError> {
    match stage {
        Stage::Ingest => stage_ingest(config),
        Stage::CountPairs => stage_count_pairs(config),
        Stage::CountTriplets => stage_count_triplets(config),
        Stage::TrainSgns => stage_train(config),
        Stage::BuildPmi => stage_build_pmi(config),
        Stage::Linearity => stage_linearity(config),
        Stage::Errors => stage_errors(config),
        Stage::PciRank => stage_pci_rank(config),
        Stage::Analogy => stage_analogy(config),
        Stage::Report => stage_report(config),
    }
}

// ---------------------------------------------------------------- artifacts

const TOKENS_MAGIC: &[u8; 8] = b"PARAPMI\0";
const KIND_TOKENS: u32 = 5;

fn save_tokens(path: &Path, ts: &TokenStream, vocab_fp: u64) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(TOKENS_MAGIC)?;
    w.write_all(&KIND_TOKENS.to_le_bytes())?;
    w.write_all(&vocab_fp.to_le_bytes())?;
    w.write_all(&ts.source_len.to_le_bytes())?;
    w.write_all(&(ts.ids.len() as u64).to_le_bytes())?;
    for &id in &ts.ids {
        w.write_all(&id.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn load_tokens(path: &Path) -> Result<(TokenStream, u64), PipelineError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if &magic != TOKENS_MAGIC || u32::from_le_bytes(b4) != KIND_TOKENS {
        return Err(PipelineError::Other(format!("{}: not a token stream", path.display())));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let vocab_fp = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let source_len = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b4)?;
        ids.push(u32::from_le_bytes(b4));
    }
    Ok((TokenStream { ids, source_len }, vocab_fp))
}

fn load_ingest(config: &PipelineConfig) -> Result<(Vocabulary, TokenStream), PipelineError> {
    let (ts, fp) = load_tokens(&config.out_dir.join("tokens.bin"))?;
    let vocab = Vocabulary::load_from_path(&config.out_dir.join("vocab.tsv"), ts.source_len)
        .map_err(|e| PipelineError::Other(e.to_string()))?;
    if vocab.fingerprint() != fp {
        return Err(PipelineError::Dependency {
            needed: Stage::Ingest.name().into(),
            wanted_by: "artifact consistency (vocabulary fingerprint mismatch)".into(),
        });
    }
    Ok((vocab, ts))
}

fn load_embeddings(config: &PipelineConfig, vocab: &Vocabulary) -> Result<EmbeddingPair, PipelineError> {
    let open = |name: &str| -> Result<(Vec<String>, crate::sgns::ColMatrix), PipelineError> {
        let f = std::fs::File::open(config.out_dir.join(name))?;
        load_matrix_text(std::io::BufReader::new(f))
            .map_err(|e| PipelineError::Other(format!("{name}: {e}")))
    };
    let (tokens_w, w) = open("embeddings_w.txt")?;
    let (tokens_c, c) = open("embeddings_c.txt")?;
    if tokens_w != tokens_c || tokens_w.len() != vocab.len() {
        return Err(PipelineError::Dependency {
            needed: Stage::TrainSgns.name().into(),
            wanted_by: "artifact consistency (embedding token order)".into(),
        });
    }
    for (i, t) in tokens_w.iter().enumerate() {
        if vocab.token(i as u32) != t {
            return Err(PipelineError::Dependency {
                needed: Stage::TrainSgns.name().into(),
                wanted_by: "artifact consistency (embedding vs vocabulary)".into(),
            });
        }
    }
    Ok(EmbeddingPair { words: w, contexts: c, config: sgns_config(config) })
}

fn sgns_config(config: &PipelineConfig) -> SgnsConfig {
    SgnsConfig {
        dimension: config.dimension,
        negative_samples: config.negative_samples,
        noise_exponent: config.noise_exponent,
        window_radius: config.window_radius,
        epochs: config.epochs,
        initial_learning_rate: config.learning_rate as f32,
        learning_rate_floor: config.learning_rate_floor as f32,
        subsample_threshold: (config.subsample_threshold > 0.0)
            .then_some(config.subsample_threshold),
        seed: config.seed,
        threads: config.effective_threads(),
    }
}

fn counting_options(config: &PipelineConfig) -> CountingOptions {
    CountingOptions {
        window_radius: config.window_radius,
        shards: config.effective_threads(),
        memory_budget_bytes: config.memory_budget_mb.saturating_mul(1 << 20),
        spill_dir: Some(config.out_dir.join("spill")),
    }
}

/// Pair universe: top-k clamped to the vocabulary size (mini corpora can be
/// smaller than the configured k).
fn universe_k(config: &PipelineConfig, vocab: &Vocabulary) -> u32 {
    config.pair_universe_top_k.min(vocab.len()) as u32
}

fn numeric<E: std::fmt::Display>(e: E) -> PipelineError {
    PipelineError::Numeric(e.to_string())
}

// ------------------------------------------------------------------ stages

fn read_corpus_bytes(config: &PipelineConfig) -> Result<Vec<u8>, PipelineError> {
    let bytes = std::fs::read(&config.corpus)?;
    if config.corpus_cap_bytes == 0 || bytes.len() as u64 <= config.corpus_cap_bytes {
        return Ok(bytes);
    }
    let mut end = config.corpus_cap_bytes as usize;
    // Snap to a token boundary so the cap never splits a word.
    while end > 0 && !bytes[end - 1].is_ascii_whitespace() {
        end -= 1;
    }
    Ok(bytes[..end].to_vec())
}

fn stage_ingest(config: &PipelineConfig) -> Result<(), PipelineError> {
    let bytes = read_corpus_bytes(config)?;
    let vocab = build_vocabulary(&bytes, config.min_count, config.effective_threads())
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let ts = token_stream(&bytes, &vocab, config.effective_threads());
    vocab.save_to_path(&config.out_dir.join("vocab.tsv"))?;
    save_tokens(&config.out_dir.join("tokens.bin"), &ts, vocab.fingerprint())?;
    Ok(())
}

fn stage_count_pairs(config: &PipelineConfig) -> Result<(), PipelineError> {
    let (vocab, ts) = load_ingest(config)?;
    let counts = cooccur::count_pairs(&ts, &vocab, &counting_options(config)).map_err(numeric)?;
    store_io::save_pair_counts(&counts, &config.out_dir.join("pairs.bin")).map_err(numeric)?;
    Ok(())
}

fn stage_count_triplets(config: &PipelineConfig) -> Result<(), PipelineError> {
    let (vocab, ts) = load_ingest(config)?;
    let k = universe_k(config, &vocab);
    let counts =
        cooccur::count_triplets(&ts, &vocab, k, &counting_options(config)).map_err(numeric)?;
    store_io::save_triplet_counts(&counts, &config.out_dir.join("triplets.bin"))
        .map_err(numeric)?;
    Ok(())
}

fn stage_train(config: &PipelineConfig) -> Result<(), PipelineError> {
    let (vocab, ts) = load_ingest(config)?;
    let pair = crate::sgns::train(&ts, &vocab, &sgns_config(config))
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut w = BufWriter::new(std::fs::File::create(config.out_dir.join("embeddings_w.txt"))?);
    save_matrix_text(&mut w, &pair.words, &vocab).map_err(|e| PipelineError::Other(e.to_string()))?;
    w.flush()?;
    let mut c = BufWriter::new(std::fs::File::create(config.out_dir.join("embeddings_c.txt"))?);
    save_matrix_text(&mut c, &pair.contexts, &vocab)
        .map_err(|e| PipelineError::Other(e.to_string()))?;
    c.flush()?;
    Ok(())
}

fn stage_build_pmi(config: &PipelineConfig) -> Result<(), PipelineError> {
    let counts =
        store_io::load_pair_counts(&config.out_dir.join("pairs.bin")).map_err(numeric)?;
    let pmi = build_pmi(&counts).map_err(numeric)?;
    save_pmi(&pmi, &config.out_dir.join("pmi.bin")).map_err(numeric)?;
    Ok(())
}

fn stage_linearity(config: &PipelineConfig) -> Result<(), PipelineError> {
    let (vocab, _) = load_ingest(config)?;
    let embeddings = load_embeddings(config, &vocab)?;
    let pmi = load_pmi(&config.out_dir.join("pmi.bin")).map_err(numeric)?;
    let ids: Vec<u32> = (0..universe_k(config, &vocab)).collect();
    let report =
        correlation_report(&embeddings, &pmi, &ids, config.svd_cutoff).map_err(numeric)?;

    let mut per_word =
        BufWriter::new(std::fs::File::create(config.out_dir.join("pearson_per_word.tsv"))?);
    writeln!(per_word, "# word\tpearson_r")?;
    for &(id, r) in &report.per_word {
        match r {
            Some(r) => writeln!(per_word, "{}\t{}", vocab.token(id), fmt_f64(r))?,
            None => writeln!(per_word, "{}\tnan", vocab.token(id))?,
        }
    }
    writeln!(
        per_word,
        "# summary\tmean={} variance={} n={} missing={}",
        fmt_f64(report.mean),
        fmt_f64(report.variance),
        report.per_word.len(),
        report.missing
    )?;
    per_word.flush()?;

    let mut hist = BufWriter::new(std::fs::File::create(config.out_dir.join("pearson_hist.tsv"))?);
    writeln!(hist, "# bin_left\tcount")?;
    for (left, count) in report.histogram(0.02) {
        writeln!(hist, "{}\t{count}", fmt_f64(left))?;
    }
    hist.flush()?;

    let mut summary =
        BufWriter::new(std::fs::File::create(config.out_dir.join("linearity_summary.tsv"))?);
    writeln!(summary, "# metric\tvalue")?;
    writeln!(summary, "mean_pearson_r\t{}", fmt_f64(report.mean))?;
    writeln!(summary, "pearson_variance\t{}", fmt_f64(report.variance))?;
    writeln!(summary, "n_words\t{}", report.per_word.len())?;
    writeln!(summary, "n_missing\t{}", report.missing)?;
    summary.flush()?;
    Ok(())
}

fn bats_categories(
    config: &PipelineConfig,
    vocab: &Vocabulary,
) -> Result<Vec<(String, Vec<AnalogyInstance>)>, PipelineError> {
    let dir = config.bats.as_ref().expect("caller checks bats presence");
    let cats = load_bats(dir).map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok(cats
        .into_iter()
        .map(|c| {
            let analogies = enumerate_analogies(&c, vocab);
            (c.code, analogies)
        })
        .collect())
}

/// Canonical candidate paraphrase pairs over all enumerable analogies, split
/// into in-universe and out-of-universe sets.
fn candidate_pairs(
    categories: &[(String, Vec<AnalogyInstance>)],
    universe: u32,
) -> (Vec<(u32, u32)>, usize) {
    let mut set = std::collections::BTreeSet::new();
    for (_, analogies) in categories {
        for an in analogies {
            for p in [an.pair_w, an.pair_w_star].into_iter().flatten() {
                set.insert(p);
            }
        }
    }
    let (in_universe, out): (Vec<(u32, u32)>, Vec<(u32, u32)>) =
        set.into_iter().partition(|&(_, b)| b < universe);
    (in_universe, out.len())
}

fn stage_errors(config: &PipelineConfig) -> Result<(), PipelineError> {
    let (vocab, _) = load_ingest(config)?;
    let triplets =
        store_io::load_triplet_counts(&config.out_dir.join("triplets.bin")).map_err(numeric)?;
    let pmi = load_pmi(&config.out_dir.join("pmi.bin")).map_err(numeric)?;
    let categories = bats_categories(config, &vocab)?;
    let (rows, details) = category_norm_table(&categories, &triplets, Some(&pmi), config.epsilon);

    write_stat_table(
        &config.out_dir.join("table1.tsv"),
        &rows.iter().map(|r| r.code.clone()).collect::<Vec<_>>(),
        &[
            ("n_enumerated", rows.iter().map(|r| r.n_enumerated.to_string()).collect()),
            ("n_well_defined", rows.iter().map(|r| r.n_well_defined.to_string()).collect()),
            (
                "paraphrase_error_norm_mean",
                rows.iter().map(|r| fmt_f64(r.mean_paraphrase)).collect(),
            ),
            (
                "dependence_errors_sum_norm_mean",
                rows.iter().map(|r| fmt_f64(r.mean_dependence)).collect(),
            ),
            ("all_errors_sum_norm_mean", rows.iter().map(|r| fmt_f64(r.mean_all)).collect()),
            (
                "paraphrase_error_norm_median",
                rows.iter().map(|r| fmt_f64(r.median_paraphrase)).collect(),
            ),
            (
                "dependence_errors_sum_norm_median",
                rows.iter().map(|r| fmt_f64(r.median_dependence)).collect(),
            ),
            ("all_errors_sum_norm_median", rows.iter().map(|r| fmt_f64(r.median_all)).collect()),
        ],
    )?;

    let mut detail =
        BufWriter::new(std::fs::File::create(config.out_dir.join("errors_detail.tsv"))?);
    writeln!(
        detail,
        "# category\ta\ta_star\tb\tb_star\twell_defined\tparaphrase_norm\tdependence_norm\tall_norm\tpos_clips\tneg_clips\tzero_zero\tresidual_max_abs"
    )?;
    for d in &details {
        let (a, a_star, b, b_star) = d.words;
        writeln!(
            detail,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            d.category,
            vocab.token(a),
            vocab.token(a_star),
            vocab.token(b),
            vocab.token(b_star),
            d.well_defined,
            fmt_f64(d.paraphrase_norm),
            fmt_f64(d.dependence_norm),
            fmt_f64(d.all_norm),
            d.clip.pos_clips,
            d.clip.neg_clips,
            d.clip.zero_zero,
            d.residual_max_abs.map(fmt_f64).unwrap_or_else(|| "nan".into()),
        )?;
    }
    detail.flush()?;

    let (in_universe, n_out) = candidate_pairs(&categories, triplets.universe());
    let fraction = if in_universe.is_empty() {
        f64::NAN
    } else {
        cooccur::well_defined_fraction(&triplets, &in_universe).map_err(numeric)?
    };
    let mut summary =
        BufWriter::new(std::fs::File::create(config.out_dir.join("errors_summary.tsv"))?);
    writeln!(summary, "# metric\tvalue")?;
    writeln!(summary, "well_defined_fraction\t{}", fmt_f64(fraction))?;
    writeln!(summary, "n_candidate_pairs_in_universe\t{}", in_universe.len())?;
    writeln!(summary, "n_candidate_pairs_outside_universe\t{n_out}")?;
    writeln!(summary, "epsilon\t{:e}", config.epsilon)?;
    summary.flush()?;
    Ok(())
}

fn stage_pci_rank(config: &PipelineConfig) -> Result<(), PipelineError> {
    let (vocab, _) = load_ingest(config)?;
    let triplets =
        store_io::load_triplet_counts(&config.out_dir.join("triplets.bin")).map_err(numeric)?;
    let categories = bats_categories(config, &vocab)?;
    let pci = build_pci(&triplets, config.positive_values_only);
    save_pci(&pci, &config.out_dir.join("pci.bin")).map_err(numeric)?;
    let (rows, details) = category_rank_table(&categories, &pci, config.restrict_to_wstar_words);

    write_stat_table(
        &config.out_dir.join("table2.tsv"),
        &rows.iter().map(|r| r.code.clone()).collect::<Vec<_>>(),
        &[
            ("n_enumerated", rows.iter().map(|r| r.n_enumerated.to_string()).collect()),
            ("n_ranked", rows.iter().map(|r| r.n_ranked.to_string()).collect()),
            ("average_rank", rows.iter().map(|r| fmt_f64(r.mean_rank)).collect()),
            ("median_rank", rows.iter().map(|r| fmt_f64(r.median_rank)).collect()),
        ],
    )?;

    let mut detail =
        BufWriter::new(std::fs::File::create(config.out_dir.join("rank_detail.tsv"))?);
    writeln!(
        detail,
        "# category\ta\ta_star\tb\tb_star\tranked\tdistance\trank\tties_below\tuniverse_size"
    )?;
    for d in &details {
        let (a, a_star, b, b_star) = d.words;
        match &d.result {
            Some(r) => writeln!(
                detail,
                "{}\t{}\t{}\t{}\t{}\ttrue\t{}\t{}\t{}\t{}",
                d.category,
                vocab.token(a),
                vocab.token(a_star),
                vocab.token(b),
                vocab.token(b_star),
                fmt_f64(r.distance),
                r.rank,
                r.ties_below,
                r.universe_size,
            )?,
            None => writeln!(
                detail,
                "{}\t{}\t{}\t{}\t{}\tfalse\tnan\t0\t0\t0",
                d.category,
                vocab.token(a),
                vocab.token(a_star),
                vocab.token(b),
                vocab.token(b_star),
            )?,
        }
    }
    detail.flush()?;
    Ok(())
}

fn stage_analogy(config: &PipelineConfig) -> Result<(), PipelineError> {
    let (vocab, _) = load_ingest(config)?;
    let embeddings = load_embeddings(config, &vocab)?;
    let categories = bats_categories(config, &vocab)?;
    let ne = NormalizedEmbeddings::new(&embeddings);
    let mut out =
        BufWriter::new(std::fs::File::create(config.out_dir.join("analogy_accuracy.tsv"))?);
    writeln!(out, "# category\tn_analogies\taccuracy")?;
    for (code, analogies) in &categories {
        let acc = match evaluate_category(&ne, analogies) {
            Ok(a) => fmt_f64(a),
            Err(_) => "nan".to_string(),
        };
        writeln!(out, "{code}\t{}\t{acc}", analogies.len())?;
    }
    out.flush()?;
    Ok(())
}

fn stage_report(config: &PipelineConfig) -> Result<(), PipelineError> {
    // The report aggregates every table; list everything missing at once.
    let mut missing = Vec::new();
    for stage in [Stage::Linearity, Stage::Errors, Stage::PciRank, Stage::Analogy] {
        if stage.needs_bats() && config.bats.is_none() {
            missing.push(stage.name());
            continue;
        }
        if stage.artifacts().iter().any(|a| !config.out_dir.join(a).is_file()) {
            missing.push(stage.name());
        }
    }
    if !missing.is_empty() {
        return Err(PipelineError::Dependency {
            needed: missing.join(", "),
            wanted_by: Stage::Report.name().to_string(),
        });
    }
    let read_metric = |file: &str, key: &str| -> Option<String> {
        let text = std::fs::read_to_string(config.out_dir.join(file)).ok()?;
        text.lines()
            .filter(|l| !l.starts_with('#'))
            .find_map(|l| l.strip_prefix(&format!("{key}\t")).map(|v| v.to_string()))
    };
    let mut out =
        BufWriter::new(std::fs::File::create(config.out_dir.join("report_summary.tsv"))?);
    writeln!(out, "# metric\tvalue")?;
    for (file, key) in [
        ("errors_summary.tsv", "well_defined_fraction"),
        ("errors_summary.tsv", "n_candidate_pairs_in_universe"),
        ("linearity_summary.tsv", "mean_pearson_r"),
        ("linearity_summary.tsv", "pearson_variance"),
    ] {
        writeln!(out, "{key}\t{}", read_metric(file, key).unwrap_or_else(|| "nan".into()))?;
    }
    // Overall analogy accuracy: unweighted mean over categories with data.
    let acc_text = std::fs::read_to_string(config.out_dir.join("analogy_accuracy.tsv"))?;
    let accs: Vec<f64> = acc_text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.rsplit('\t').next()?.parse::<f64>().ok())
        .filter(|a| a.is_finite())
        .collect();
    let mean_acc =
        if accs.is_empty() { f64::NAN } else { accs.iter().sum::<f64>() / accs.len() as f64 };
    writeln!(out, "mean_analogy_accuracy\t{}", fmt_f64(mean_acc))?;
    writeln!(out, "n_analogy_categories\t{}", accs.len())?;
    out.flush()?;
    Ok(())
}

/// Table shaped like the published ones: one row per statistic, one column
/// per category.
fn write_stat_table(
    path: &Path,
    codes: &[String],
    stats: &[(&str, Vec<String>)],
) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "# statistic")?;
    for code in codes {
        write!(w, "\t{code}")?;
    }
    writeln!(w)?;
    for (name, values) in stats {
        write!(w, "{name}")?;
        for v in values {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
