//! Exercise the binary end to end: exit codes, subcommand plumbing, and the
//! standalone linearity mode.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parapmi"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("parapmi-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_corpus(dir: &Path) -> PathBuf {
    use std::fmt::Write as _;
    let mut text = String::new();
    let mut state = 7u64;
    for _ in 0..8000 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let a = (state >> 33) % 10;
        write!(text, "s{a} t{a} f{} ", (state >> 17) % 15).unwrap();
    }
    let path = dir.join("corpus.txt");
    std::fs::write(&path, text).unwrap();
    path
}

fn write_bats(dir: &Path) -> PathBuf {
    let bats = dir.join("bats");
    std::fs::create_dir_all(&bats).unwrap();
    let mut cat = String::new();
    for r in 0..5 {
        cat.push_str(&format!("s{r}\tt{r}\n"));
    }
    std::fs::write(bats.join("T01 [toy].txt"), cat).unwrap();
    bats
}

#[test]
fn missing_corpus_is_exit_code_2() {
    let status = bin().args(["ingest", "--corpus", "/no/such/file"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_exit_code_2() {
    let dir = scratch("badcfg");
    let cfg = dir.join("bad.conf");
    std::fs::write(&cfg, "definitely_not_a_key=1\n").unwrap();
    let status = bin()
        .args(["ingest", "--config", cfg.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn out_of_order_stage_is_exit_code_3() {
    let dir = scratch("order");
    let corpus = write_corpus(&dir);
    let out = dir.join("out");
    let status = bin()
        .args([
            "count-pairs",
            "--corpus",
            corpus.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn numeric_failure_is_exit_code_4() {
    // A single-token corpus yields empty pair counts; building PMI from them
    // is a numeric error.
    let dir = scratch("numeric");
    let corpus = dir.join("corpus.txt");
    std::fs::write(&corpus, "lonely").unwrap();
    let out = dir.join("out");
    let base = [
        "--corpus",
        corpus.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--min-count",
        "1",
    ];
    for sub in ["ingest", "count-pairs"] {
        let status = bin().arg(sub).args(base).status().unwrap();
        assert_eq!(status.code(), Some(0), "{sub} should succeed");
    }
    let status = bin().arg("build-pmi").args(base).status().unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn full_run_and_standalone_linearity() {
    let dir = scratch("full");
    let corpus = write_corpus(&dir);
    let bats = write_bats(&dir);
    let out = dir.join("out");
    let status = bin()
        .args([
            "all",
            "--corpus",
            corpus.to_str().unwrap(),
            "--bats",
            bats.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--min-count",
            "1",
            "--window-radius",
            "2",
            "--pair-universe-top-k",
            "40",
            "--dimension",
            "8",
            "--epochs",
            "1",
            "--deterministic",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("report_summary.tsv").is_file());
    assert!(out.join("table1.tsv").is_file());
    assert!(out.join("table2.tsv").is_file());

    // Standalone linearity against explicit artifact paths.
    let out2 = dir.join("standalone");
    let status = bin()
        .args([
            "linearity",
            "--embeddings",
            out.join("embeddings_w.txt").to_str().unwrap(),
            "--contexts",
            out.join("embeddings_c.txt").to_str().unwrap(),
            "--pmi",
            out.join("pmi.bin").to_str().unwrap(),
            "--top-k",
            "20",
            "--out-dir",
            out2.to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary = std::fs::read_to_string(out2.join("linearity_summary.tsv")).unwrap();
    assert!(summary.contains("mean_pearson_r"));

    // pci-rank --output copies the table.
    let table = dir.join("ranks.tsv");
    let status = bin()
        .args([
            "pci-rank",
            "--corpus",
            corpus.to_str().unwrap(),
            "--bats",
            bats.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--min-count",
            "1",
            "--window-radius",
            "2",
            "--pair-universe-top-k",
            "40",
            "--dimension",
            "8",
            "--epochs",
            "1",
            "--deterministic",
            "--output",
            table.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(table.is_file());
}
