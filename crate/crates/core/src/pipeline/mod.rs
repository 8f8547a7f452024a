//! Pipeline orchestration: configuration, artifact manifest, and staged
//! execution (ingest → count → train → probe → decompose → rank → evaluate
//! → report).

mod stages;

pub use stages::{run_all, run_stage, StageOutcome};

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{fnv1a, fnv1a_extend, FNV_SEED};

fn cooccur_max_universe() -> usize {
    crate::cooccur::MAX_UNIVERSE as usize
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing dependency: run stage `{needed}` first (wanted by `{wanted_by}`)")]
    Dependency { needed: String, wanted_by: String },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Process exit code: 2 config, 3 dependency, 4 numeric, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Dependency { .. } => 3,
            PipelineError::Numeric(_) => 4,
            _ => 1,
        }
    }
}

/// All pipeline knobs. Every field can come from a `key=value` config file
/// line or the CLI flag of the same name.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub bats: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub window_radius: u32,
    pub min_count: u64,
    pub pair_universe_top_k: usize,
    pub dimension: usize,
    pub negative_samples: usize,
    pub noise_exponent: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub learning_rate_floor: f64,
    /// 0 disables subsampling.
    pub subsample_threshold: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub memory_budget_mb: usize,
    /// 1 forces the deterministic sequential path everywhere.
    pub threads: usize,
    pub deterministic: bool,
    /// Read at most this many corpus bytes (0 = whole file).
    pub corpus_cap_bytes: u64,
    pub restrict_to_wstar_words: bool,
    pub positive_values_only: bool,
    pub svd_cutoff: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: PathBuf::new(),
            bats: None,
            out_dir: PathBuf::from("out"),
            window_radius: 5,
            min_count: 5,
            pair_universe_top_k: 10_000,
            dimension: 500,
            negative_samples: 1,
            noise_exponent: 1.0,
            epochs: 5,
            learning_rate: 0.025,
            learning_rate_floor: 0.025 * 1e-4,
            subsample_threshold: 0.0,
            seed: 1,
            epsilon: 1e-15,
            memory_budget_mb: 2048,
            threads: 0,
            deterministic: false,
            corpus_cap_bytes: 0,
            restrict_to_wstar_words: false,
            positive_values_only: false,
            svd_cutoff: crate::pinv::DEFAULT_SVD_CUTOFF,
        }
    }
}

impl PipelineConfig {
    /// CI-speed preset: first 10 MB of the corpus, top-2k pair universe.
    pub fn apply_mini(&mut self) {
        self.corpus_cap_bytes = 10 * 1024 * 1024;
        self.pair_universe_top_k = 2000;
    }

    /// Apply one `key=value` setting (config-file line or flag).
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let bad =
            |e: &dyn fmt::Display| PipelineError::Config(format!("bad value for {key}: {e}"));
        match key {
            "corpus" => self.corpus = PathBuf::from(value),
            "bats" => self.bats = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "window_radius" => self.window_radius = value.parse().map_err(|e| bad(&e))?,
            "min_count" => self.min_count = value.parse().map_err(|e| bad(&e))?,
            "pair_universe_top_k" => {
                self.pair_universe_top_k = value.parse().map_err(|e| bad(&e))?
            }
            "dimension" => self.dimension = value.parse().map_err(|e| bad(&e))?,
            "negative_samples" => self.negative_samples = value.parse().map_err(|e| bad(&e))?,
            "noise_exponent" => self.noise_exponent = value.parse().map_err(|e| bad(&e))?,
            "epochs" => self.epochs = value.parse().map_err(|e| bad(&e))?,
            "learning_rate" => self.learning_rate = value.parse().map_err(|e| bad(&e))?,
            "learning_rate_floor" => {
                self.learning_rate_floor = value.parse().map_err(|e| bad(&e))?
            }
            "subsample_threshold" => {
                self.subsample_threshold = value.parse().map_err(|e| bad(&e))?
            }
            "seed" => self.seed = value.parse().map_err(|e| bad(&e))?,
            "epsilon" => self.epsilon = value.parse().map_err(|e| bad(&e))?,
            "memory_budget_mb" => self.memory_budget_mb = value.parse().map_err(|e| bad(&e))?,
            "threads" => self.threads = value.parse().map_err(|e| bad(&e))?,
            "deterministic" => self.deterministic = value.parse().map_err(|e| bad(&e))?,
            "corpus_cap_bytes" => self.corpus_cap_bytes = value.parse().map_err(|e| bad(&e))?,
            "restrict_to_wstar_words" => {
                self.restrict_to_wstar_words = value.parse().map_err(|e| bad(&e))?
            }
            "positive_values_only" => {
                self.positive_values_only = value.parse().map_err(|e| bad(&e))?
            }
            "svd_cutoff" => self.svd_cutoff = value.parse().map_err(|e| bad(&e))?,
            "mini" => {
                let on: bool = value.parse().map_err(|e| bad(&e))?;
                if on {
                    self.apply_mini();
                }
            }
            _ => return Err(PipelineError::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Load `key=value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!(
                    "{}:{}: expected key=value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.corpus.as_os_str().is_empty() {
            return Err(PipelineError::Config("corpus path is required".into()));
        }
        if !self.corpus.is_file() {
            return Err(PipelineError::Config(format!(
                "corpus file not found: {}",
                self.corpus.display()
            )));
        }
        if let Some(b) = &self.bats {
            if !b.is_dir() {
                return Err(PipelineError::Config(format!(
                    "BATS directory not found: {}",
                    b.display()
                )));
            }
        }
        if self.window_radius == 0 {
            return Err(PipelineError::Config("window_radius must be >= 1".into()));
        }
        if self.min_count == 0 {
            return Err(PipelineError::Config("min_count must be >= 1".into()));
        }
        if self.pair_universe_top_k == 0 {
            return Err(PipelineError::Config("pair_universe_top_k must be >= 1".into()));
        }
        if self.pair_universe_top_k > cooccur_max_universe() {
            return Err(PipelineError::Config(format!(
                "pair_universe_top_k exceeds the supported maximum {}",
                cooccur_max_universe()
            )));
        }
        if self.dimension == 0 || self.negative_samples == 0 || self.epochs == 0 {
            return Err(PipelineError::Config(
                "dimension, negative_samples and epochs must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_exponent) {
            return Err(PipelineError::Config("noise_exponent must lie in [0, 1]".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(PipelineError::Config("epsilon must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Effective worker count: `deterministic` or `threads == 1` pins to 1.
    pub fn effective_threads(&self) -> usize {
        if self.deterministic || self.threads == 1 {
            1
        } else if self.threads == 0 {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        } else {
            self.threads
        }
    }

    /// Stable fingerprint of the fields a stage depends on.
    fn stage_config_hash(&self, stage: Stage) -> u64 {
        let mut repr = String::new();
        let mut push = |k: &str, v: String| {
            repr.push_str(k);
            repr.push('=');
            repr.push_str(&v);
            repr.push(';');
        };
        push("corpus", self.corpus.display().to_string());
        push("cap", self.corpus_cap_bytes.to_string());
        match stage {
            Stage::Ingest => {
                push("min_count", self.min_count.to_string());
            }
            Stage::CountPairs | Stage::CountTriplets => {
                push("min_count", self.min_count.to_string());
                push("radius", self.window_radius.to_string());
                if stage == Stage::CountTriplets {
                    push("top_k", self.pair_universe_top_k.to_string());
                }
            }
            Stage::TrainSgns => {
                push("min_count", self.min_count.to_string());
                push("radius", self.window_radius.to_string());
                push("dim", self.dimension.to_string());
                push("neg", self.negative_samples.to_string());
                push("noise", format!("{}", self.noise_exponent));
                push("epochs", self.epochs.to_string());
                push("lr", format!("{}", self.learning_rate));
                push("lr_floor", format!("{}", self.learning_rate_floor));
                push("subsample", format!("{}", self.subsample_threshold));
                push("seed", self.seed.to_string());
                push("det", (self.effective_threads() == 1).to_string());
            }
            Stage::BuildPmi => {
                push("radius", self.window_radius.to_string());
            }
            Stage::Linearity => {
                push("top_k", self.pair_universe_top_k.to_string());
                push("svd_cutoff", format!("{}", self.svd_cutoff));
            }
            Stage::Errors => {
                push("bats", self.bats.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
                push("top_k", self.pair_universe_top_k.to_string());
                push("epsilon", format!("{}", self.epsilon));
            }
            Stage::PciRank => {
                push("bats", self.bats.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
                push("top_k", self.pair_universe_top_k.to_string());
                push("restrict", self.restrict_to_wstar_words.to_string());
                push("positive_only", self.positive_values_only.to_string());
            }
            Stage::Analogy => {
                push("bats", self.bats.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
            }
            Stage::Report => {
                push("bats", self.bats.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
                push("top_k", self.pair_universe_top_k.to_string());
            }
        }
        fnv1a(repr.as_bytes())
    }
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    CountPairs,
    CountTriplets,
    TrainSgns,
    BuildPmi,
    Linearity,
    Errors,
    PciRank,
    Analogy,
    Report,
}

pub const ALL_STAGES: [Stage; 10] = [
    Stage::Ingest,
    Stage::CountPairs,
    Stage::CountTriplets,
    Stage::TrainSgns,
    Stage::BuildPmi,
    Stage::Linearity,
    Stage::Errors,
    Stage::PciRank,
    Stage::Analogy,
    Stage::Report,
];

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::CountPairs => "count-pairs",
            Stage::CountTriplets => "count-triplets",
            Stage::TrainSgns => "train-sgns",
            Stage::BuildPmi => "build-pmi",
            Stage::Linearity => "linearity",
            Stage::Errors => "errors",
            Stage::PciRank => "pci-rank",
            Stage::Analogy => "analogy",
            Stage::Report => "report",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        ALL_STAGES.iter().copied().find(|s| s.name() == name)
    }

    /// Stages whose artifacts this stage reads.
    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::CountPairs | Stage::CountTriplets | Stage::TrainSgns => &[Stage::Ingest],
            Stage::BuildPmi => &[Stage::CountPairs],
            Stage::Linearity => &[Stage::TrainSgns, Stage::BuildPmi, Stage::Ingest],
            Stage::Errors => &[Stage::CountTriplets, Stage::BuildPmi, Stage::Ingest],
            Stage::PciRank => &[Stage::CountTriplets, Stage::Ingest],
            Stage::Analogy => &[Stage::TrainSgns, Stage::Ingest],
            Stage::Report => &[Stage::Linearity, Stage::Errors, Stage::PciRank, Stage::Analogy],
        }
    }

    /// Artifact file names this stage produces under the output directory.
    pub fn artifacts(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &["vocab.tsv", "tokens.bin"],
            Stage::CountPairs => &["pairs.bin", "pairs.bin.marg"],
            Stage::CountTriplets => &["triplets.bin", "triplets.bin.marg"],
            Stage::TrainSgns => &["embeddings_w.txt", "embeddings_c.txt"],
            Stage::BuildPmi => &["pmi.bin"],
            Stage::Linearity => {
                &["pearson_per_word.tsv", "pearson_hist.tsv", "linearity_summary.tsv"]
            }
            Stage::Errors => &["table1.tsv", "errors_detail.tsv", "errors_summary.tsv"],
            Stage::PciRank => &["pci.bin", "pci.bin.norms", "table2.tsv", "rank_detail.tsv"],
            Stage::Analogy => &["analogy_accuracy.tsv"],
            Stage::Report => &["report_summary.tsv"],
        }
    }

    pub fn needs_bats(self) -> bool {
        matches!(self, Stage::Errors | Stage::PciRank | Stage::Analogy)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestEntry {
    pub artifacts: Vec<String>,
    pub content_hash: String,
    pub config_hash: String,
    pub timestamp_secs: u64,
}

/// Per-stage artifact records, persisted as JSON next to the artifacts.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    pub stages: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn path(out_dir: &Path) -> PathBuf {
        out_dir.join("manifest.json")
    }

    pub fn load(out_dir: &Path) -> Manifest {
        match std::fs::read_to_string(Self::path(out_dir)) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => Manifest::default(),
        }
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| PipelineError::Other(format!("manifest serialization: {e}")))?;
        std::fs::write(Self::path(out_dir), text)?;
        Ok(())
    }
}

/// Combined FNV-1a over the byte contents of the stage artifacts, in order.
pub fn hash_artifacts(out_dir: &Path, names: &[&str]) -> Result<u64, PipelineError> {
    use std::io::Read;
    let mut h = FNV_SEED;
    for name in names {
        let path = out_dir.join(name);
        let mut f = std::fs::File::open(&path)
            .map_err(|e| PipelineError::Other(format!("{}: {e}", path.display())))?;
        let mut buf = [0u8; 1 << 16];
        loop {
            let n = f.read(&mut buf)?;
            if n == 0 {
                break;
            }
            h = fnv1a_extend(h, &buf[..n]);
        }
        h = fnv1a_extend(h, &[0xfe]);
    }
    Ok(h)
}
