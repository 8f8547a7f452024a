//! Shared fixtures for integration tests: a structured synthetic corpus and
//! a matching analogy directory.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Word inventory: `n_relations` source/target pairs plus filler words.
/// Sources are `src00..`, targets `tgt00..`, filler `f000..`.
pub struct FixtureSpec {
    pub n_relations: usize,
    pub n_filler: usize,
    pub tokens: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec { n_relations: 8, n_filler: 30, tokens: 30_000, seed: 0xf17 }
    }
}

/// Generate corpus text where related words co-occur tightly: each
/// "sentence" mentions a few relation words close together plus filler, so
/// many candidate paraphrase pairs are well-defined.
pub fn corpus_text(spec: &FixtureSpec) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = String::new();
    let mut emitted = 0usize;
    while emitted < spec.tokens {
        let r1 = rng.gen_range(0..spec.n_relations);
        let r2 = rng.gen_range(0..spec.n_relations);
        let words: Vec<String> = vec![
            format!("src{r1:02}"),
            format!("tgt{r1:02}"),
            format!("f{:03}", rng.gen_range(0..spec.n_filler)),
            format!("src{r2:02}"),
            format!("f{:03}", rng.gen_range(0..spec.n_filler)),
            format!("tgt{r2:02}"),
            format!("f{:03}", rng.gen_range(0..spec.n_filler)),
        ];
        for w in words {
            out.push_str(&w);
            out.push(' ');
            emitted += 1;
        }
    }
    out
}

/// Write the corpus and a two-category analogy directory under `dir`.
/// Returns (corpus_path, analogy_dir).
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> (PathBuf, PathBuf) {
    std::fs::create_dir_all(dir).unwrap();
    let corpus = dir.join("corpus.txt");
    std::fs::write(&corpus, corpus_text(spec)).unwrap();

    let bats = dir.join("bats");
    std::fs::create_dir_all(bats.join("1_Group")).unwrap();
    let half = spec.n_relations / 2;
    let mut cat1 = String::new();
    for r in 0..half {
        cat1.push_str(&format!("src{r:02}\ttgt{r:02}\n"));
    }
    std::fs::write(bats.join("1_Group").join("T01 [first half].txt"), cat1).unwrap();
    let mut cat2 = String::new();
    for r in half..spec.n_relations {
        cat2.push_str(&format!("src{r:02}\ttgt{r:02}\n"));
    }
    std::fs::write(bats.join("1_Group").join("T02 [second half].txt"), cat2).unwrap();
    (corpus, bats)
}

/// Temp directory namespaced by test name; wiped on entry.
pub fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("parapmi-it-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
