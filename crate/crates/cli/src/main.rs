//! Command line driver for the corpus-to-report pipeline.
//!
//! Every configuration key can come from a `key=value` config file
//! (`--config`) and be overridden by a flag of the same name. Exit codes:
//! 0 success, 2 configuration error, 3 missing dependency, 4 numeric error.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use parapmi::pipeline::{run_stage, PipelineConfig, PipelineError, Stage, StageOutcome};

#[derive(Parser)]
#[command(name = "parapmi", version, about = "Windowed co-occurrence statistics, SGNS embeddings, PMI linearity probes, and paraphrase error analysis")]
struct Cli {
    /// Flat key=value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Plain-text corpus (single line, space-delimited, lowercase).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,

    /// Analogy dataset directory (category files, `source<TAB>t1/t2` lines).
    #[arg(long, global = true)]
    bats: Option<PathBuf>,

    /// Artifact output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Symmetric window radius for counting and training.
    #[arg(long, global = true)]
    window_radius: Option<u32>,

    /// Minimum token frequency kept in the vocabulary.
    #[arg(long, global = true)]
    min_count: Option<u64>,

    /// Pair universe: the top-k most frequent words.
    #[arg(long, global = true)]
    pair_universe_top_k: Option<usize>,

    /// Embedding dimension.
    #[arg(long, global = true)]
    dimension: Option<usize>,

    /// Negative samples per positive event.
    #[arg(long, global = true)]
    negative_samples: Option<usize>,

    /// Exponent on unigram counts for the noise distribution.
    #[arg(long, global = true)]
    noise_exponent: Option<f64>,

    #[arg(long, global = true)]
    epochs: Option<usize>,

    #[arg(long, global = true)]
    learning_rate: Option<f64>,

    #[arg(long, global = true)]
    learning_rate_floor: Option<f64>,

    /// Frequent-word subsampling threshold; 0 disables.
    #[arg(long, global = true)]
    subsample_threshold: Option<f64>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Clipping constant for log-ratio error terms.
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// In-memory budget for counting before spilling sorted runs to disk.
    #[arg(long, global = true)]
    memory_budget_mb: Option<usize>,

    /// Worker threads; 1 forces the deterministic sequential path, 0 = auto.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Force reproducible single-threaded execution.
    #[arg(long, global = true)]
    deterministic: bool,

    /// CI-speed preset: first 10 MB of the corpus, top-2k pair universe.
    #[arg(long, global = true)]
    mini: bool,

    /// Restrict rank queries to pairs sharing a word with the true
    /// paraphrase.
    #[arg(long = "restrict-to-wstar-words", global = true)]
    restrict_to_wstar_words: Option<bool>,

    /// Literal positive-PCI reading: store only entries with ln p > 0.
    #[arg(long, global = true)]
    positive_values_only: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize the corpus and build the vocabulary and token stream.
    Ingest,
    /// Count windowed (word, context) pairs.
    CountPairs,
    /// Count centered triplets over the pair universe.
    CountTriplets,
    /// Train skip-gram negative-sampling embeddings (W and C).
    TrainSgns,
    /// Build the sparse PMI matrix from pair counts.
    BuildPmi,
    /// Probe per-word linearity between embeddings and C†·PMI rows.
    Linearity {
        /// Word matrix file (defaults to the pipeline artifact).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Context matrix file.
        #[arg(long)]
        contexts: Option<PathBuf>,
        /// PMI matrix file.
        #[arg(long)]
        pmi: Option<PathBuf>,
        /// Number of most frequent words to probe.
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Compute paraphrase/dependence error norms per analogy category.
    Errors,
    /// Build the PCI matrix and rank true paraphrases per analogy.
    PciRank {
        /// Also copy the category rank table to this path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate analogies with 3CosAdd.
    Analogy,
    /// Aggregate all stage outputs into the summary report.
    Report,
    /// Run the whole pipeline in order.
    All,
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = &cli.corpus {
        cfg.corpus = v.clone();
    }
    if let Some(v) = &cli.bats {
        cfg.bats = Some(v.clone());
    }
    if let Some(v) = &cli.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = cli.window_radius {
        cfg.window_radius = v;
    }
    if let Some(v) = cli.min_count {
        cfg.min_count = v;
    }
    if let Some(v) = cli.pair_universe_top_k {
        cfg.pair_universe_top_k = v;
    }
    if let Some(v) = cli.dimension {
        cfg.dimension = v;
    }
    if let Some(v) = cli.negative_samples {
        cfg.negative_samples = v;
    }
    if let Some(v) = cli.noise_exponent {
        cfg.noise_exponent = v;
    }
    if let Some(v) = cli.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = cli.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = cli.learning_rate_floor {
        cfg.learning_rate_floor = v;
    }
    if let Some(v) = cli.subsample_threshold {
        cfg.subsample_threshold = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = cli.memory_budget_mb {
        cfg.memory_budget_mb = v;
    }
    if let Some(v) = cli.threads {
        cfg.threads = v;
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    if let Some(r) = cli.restrict_to_wstar_words {
        cfg.restrict_to_wstar_words = r;
    }
    if cli.positive_values_only {
        cfg.positive_values_only = true;
    }
    if cli.mini {
        cfg.apply_mini();
    }
    Ok(cfg)
}

fn announce(stage: Stage, outcome: StageOutcome, started: Instant) {
    let what = match outcome {
        StageOutcome::Built => "built",
        StageOutcome::Skipped => "skipped (cache hit)",
    };
    eprintln!("[{}] {what} in {:.2}s", stage.name(), started.elapsed().as_secs_f64());
}

fn one(stage: Stage, cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let t = Instant::now();
    let outcome = run_stage(stage, cfg)?;
    announce(stage, outcome, t);
    Ok(())
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = build_config(cli)?;
    match &cli.command {
        Command::Ingest => one(Stage::Ingest, &cfg),
        Command::CountPairs => one(Stage::CountPairs, &cfg),
        Command::CountTriplets => one(Stage::CountTriplets, &cfg),
        Command::TrainSgns => one(Stage::TrainSgns, &cfg),
        Command::BuildPmi => one(Stage::BuildPmi, &cfg),
        Command::Linearity { embeddings, contexts, pmi, top_k } => {
            if embeddings.is_some() || contexts.is_some() || pmi.is_some() {
                standalone_linearity(&cfg, embeddings, contexts, pmi, *top_k)
            } else {
                let mut cfg = cfg.clone();
                if let Some(k) = top_k {
                    cfg.pair_universe_top_k = *k;
                }
                one(Stage::Linearity, &cfg)
            }
        }
        Command::Errors => one(Stage::Errors, &cfg),
        Command::PciRank { output } => {
            one(Stage::PciRank, &cfg)?;
            if let Some(dest) = output {
                std::fs::copy(cfg.out_dir.join("table2.tsv"), dest)?;
            }
            Ok(())
        }
        Command::Analogy => one(Stage::Analogy, &cfg),
        Command::Report => one(Stage::Report, &cfg),
        Command::All => {
            for stage in parapmi::pipeline::ALL_STAGES {
                one(stage, &cfg)?;
            }
            Ok(())
        }
    }
}

/// Linearity probe over explicit matrix/PMI files instead of pipeline
/// artifacts. Token names come from the embedding files themselves.
fn standalone_linearity(
    cfg: &PipelineConfig,
    embeddings: &Option<PathBuf>,
    contexts: &Option<PathBuf>,
    pmi_path: &Option<PathBuf>,
    top_k: Option<usize>,
) -> Result<(), PipelineError> {
    use parapmi::linearity::correlation_report;
    use parapmi::sgns::{load_matrix_text, EmbeddingPair, SgnsConfig};
    use parapmi::util::fmt_f64;
    use std::io::Write;

    let missing =
        |what: &str| PipelineError::Config(format!("standalone linearity needs --{what}"));
    let w_path = embeddings.as_ref().ok_or_else(|| missing("embeddings"))?;
    let c_path = contexts.as_ref().ok_or_else(|| missing("contexts"))?;
    let p_path = pmi_path.as_ref().ok_or_else(|| missing("pmi"))?;
    let open = |p: &PathBuf| -> Result<(Vec<String>, parapmi::sgns::ColMatrix), PipelineError> {
        let f = std::fs::File::open(p)?;
        load_matrix_text(std::io::BufReader::new(f))
            .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))
    };
    let (tokens, w) = open(w_path)?;
    let (tokens_c, c) = open(c_path)?;
    if tokens != tokens_c {
        return Err(PipelineError::Config(
            "word and context files disagree on the token order".into(),
        ));
    }
    let pair = EmbeddingPair { words: w, contexts: c, config: SgnsConfig::default() };
    let pmi = parapmi::pmi::load_pmi(p_path)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", p_path.display())))?;
    let k = top_k.unwrap_or(cfg.pair_universe_top_k).min(tokens.len());
    let ids: Vec<u32> = (0..k as u32).collect();
    let report = correlation_report(&pair, &pmi, &ids, cfg.svd_cutoff)
        .map_err(|e| PipelineError::Numeric(e.to_string()))?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut per_word = std::io::BufWriter::new(std::fs::File::create(
        cfg.out_dir.join("pearson_per_word.tsv"),
    )?);
    writeln!(per_word, "# word\tpearson_r")?;
    for &(id, r) in &report.per_word {
        match r {
            Some(r) => writeln!(per_word, "{}\t{}", tokens[id as usize], fmt_f64(r))?,
            None => writeln!(per_word, "{}\tnan", tokens[id as usize])?,
        }
    }
    per_word.flush()?;
    let mut hist =
        std::io::BufWriter::new(std::fs::File::create(cfg.out_dir.join("pearson_hist.tsv"))?);
    writeln!(hist, "# bin_left\tcount")?;
    for (left, count) in report.histogram(0.02) {
        writeln!(hist, "{}\t{count}", fmt_f64(left))?;
    }
    hist.flush()?;
    let mut summary = std::io::BufWriter::new(std::fs::File::create(
        cfg.out_dir.join("linearity_summary.tsv"),
    )?);
    writeln!(summary, "# metric\tvalue")?;
    writeln!(summary, "mean_pearson_r\t{}", fmt_f64(report.mean))?;
    writeln!(summary, "pearson_variance\t{}", fmt_f64(report.variance))?;
    writeln!(summary, "n_words\t{}", report.per_word.len())?;
    writeln!(summary, "n_missing\t{}", report.missing)?;
    summary.flush()?;
    eprintln!("[linearity] standalone probe over {k} words: mean r = {}", fmt_f64(report.mean));
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
