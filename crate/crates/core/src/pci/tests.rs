use super::*;
use crate::cooccur::{count_triplets, CountingOptions};
use crate::corpus::{build_vocabulary, TokenStream, Vocabulary};

fn opts(radius: u32) -> CountingOptions {
    CountingOptions { window_radius: radius, ..Default::default() }
}

fn ids_vocab(ids: Vec<u32>, vocab: usize) -> (Vocabulary, TokenStream) {
    let mut text = String::new();
    for i in 0..vocab {
        for _ in 0..(2 * (vocab - i)) {
            text.push_str(&format!("w{i:04} "));
        }
    }
    let v = build_vocabulary(text.as_bytes(), 1, 1).unwrap();
    let source_len = ids.len() as u64;
    (v, TokenStream { ids, source_len })
}

fn random_ids(n: usize, vocab: usize, seed: u64) -> Vec<u32> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..vocab as u32)).collect()
}

fn toy_pci(tokens: usize, vocab: usize, seed: u64, radius: u32) -> (PciMatrix, crate::cooccur::TripletCounts) {
    let (v, ts) = ids_vocab(random_ids(tokens, vocab, seed), vocab);
    let tc = count_triplets(&ts, &v, vocab as u32, &opts(radius)).unwrap();
    (build_pci(&tc, false), tc)
}

fn dense_column(pci: &PciMatrix, pos: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; pci.vocab_len as usize];
    let (rows, vals) = pci.column_entries(pos);
    for (&k, &v) in rows.iter().zip(vals.iter()) {
        out[k as usize] = v as f64;
    }
    out
}

#[test]
fn entries_match_bruteforce_log_ratio() {
    let (pci, tc) = toy_pci(1000, 8, 0x61, 3);
    assert!(pci.n_columns() > 0);
    for pos in 0..pci.n_columns() {
        let (i, j) = pci.column_pair(pos);
        let (rows, vals) = pci.column_entries(pos);
        for (&k, &v) in rows.iter().zip(vals.iter()) {
            let want = ((tc.get(i, j, k) as f64)
                / (tc.center_marginals[k as usize] as f64))
                .ln() as f32;
            assert_eq!(v, want, "entry ({i},{j},{k})");
        }
    }
    // Every attested triplet appears exactly once.
    assert_eq!(pci.n_entries(), tc.len());
}

#[test]
fn positive_values_only_drops_nonpositive_logs() {
    // [a,x,b]: the single window gives p({a,b}|x) = 1, ln 1 = 0, which the
    // literal positive-only reading must not store.
    let (v, ts) = ids_vocab(vec![0, 2, 1], 3);
    let tc = count_triplets(&ts, &v, 3, &opts(1)).unwrap();
    let default_pci = build_pci(&tc, false);
    assert_eq!(default_pci.n_entries(), 1);
    assert_eq!(default_pci.column_entries(0).1, &[0.0f32]);
    let literal = build_pci(&tc, true);
    assert_eq!(literal.n_entries(), 0, "ln p <= 0 everywhere on real counts");
    assert_eq!(literal.n_columns(), 0);
}

#[test]
fn distance_examples_and_oracle() {
    let (pci, _) = toy_pci(1200, 10, 0x62, 4);
    // d(l, l) = 0.
    for pos in 0..pci.n_columns().min(10) {
        assert_eq!(pci.column_distance(pos, pos), 0.0);
    }
    // Random pairs against the dense subtraction oracle.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let p1 = rng.gen_range(0..pci.n_columns());
        let p2 = rng.gen_range(0..pci.n_columns());
        let got = pci.column_distance(p1, p2);
        let a = dense_column(&pci, p1);
        let b = dense_column(&pci, p2);
        let want: f64 =
            a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        assert!((got - want).abs() < 1e-9, "d({p1},{p2}) = {got}, oracle {want}");
    }
}

#[test]
fn disjoint_columns_distance_is_norm_sum() {
    // Corpus engineered so pairs (0,1) and (2,3) occur at disjoint centers:
    // 0,1 co-window only around center 4; 2,3 only around center 5.
    let ids = vec![0, 4, 1, 6, 6, 6, 2, 5, 3];
    let (v, ts) = ids_vocab(ids, 7);
    let tc = count_triplets(&ts, &v, 7, &opts(1)).unwrap();
    let pci = build_pci(&tc, false);
    let p1 = pci.find_column(0, 1).unwrap();
    let p2 = pci.find_column(2, 3).unwrap();
    let want = (pci.norm2_sq(p1) + pci.norm2_sq(p2)).sqrt();
    assert!((pci.column_distance(p1, p2) - want).abs() < 1e-12);
}

#[test]
fn distance_symmetry_and_triangle_inequality() {
    let (pci, _) = toy_pci(1500, 12, 0x63, 5);
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let a = rng.gen_range(0..pci.n_columns());
        let b = rng.gen_range(0..pci.n_columns());
        let c = rng.gen_range(0..pci.n_columns());
        let dab = pci.column_distance(a, b);
        let dba = pci.column_distance(b, a);
        assert!((dab - dba).abs() < 1e-12);
        let dac = pci.column_distance(a, c);
        let dcb = pci.column_distance(c, b);
        assert!(dab <= dac + dcb + 1e-9, "triangle violated: {dab} > {dac} + {dcb}");
    }
}

#[test]
fn cached_norms_match_recomputation() {
    let (pci, _) = toy_pci(900, 9, 0x64, 3);
    for pos in 0..pci.n_columns() {
        let (_, vals) = pci.column_entries(pos);
        let want: f64 = vals.iter().map(|&v| (v as f64) * (v as f64)).sum();
        assert!((pci.norm2_sq(pos) - want).abs() < 1e-9);
    }
}

#[test]
fn self_rank_is_one() {
    let (pci, _) = toy_pci(800, 8, 0x65, 3);
    let inverted = pci.inverted_index();
    let (i, j) = pci.column_pair(0);
    let r = rank_true_paraphrase(&pci, &inverted, (i, j), (i, j), false).unwrap();
    assert_eq!(r.rank, 1);
    assert_eq!(r.distance, 0.0);
}

/// Exhaustive sort oracle over every attested column.
fn oracle_rank(pci: &PciMatrix, pw: usize, pws: usize) -> (u64, u64) {
    let qa = dense_column(pci, pw);
    let dense_dist = |p: usize| -> f64 {
        let b = dense_column(pci, p);
        qa.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
    };
    let d_star = dense_dist(pws);
    let mut below = 0u64;
    let mut ties = 0u64;
    for p in 0..pci.n_columns() {
        if p == pw || p == pws {
            continue;
        }
        let d = dense_dist(p);
        if d < d_star - 1e-9 {
            below += 1;
        } else if (d - d_star).abs() <= 1e-9 {
            ties += 1;
        }
    }
    (1 + below, ties)
}

#[test]
fn rank_matches_exhaustive_sort_oracle() {
    let (pci, _) = toy_pci(700, 8, 0x66, 3);
    assert!(pci.n_columns() >= 5, "fixture needs at least 5 columns");
    let inverted = pci.inverted_index();
    for pw in 0..pci.n_columns().min(6) {
        for pws in 0..pci.n_columns().min(6) {
            let w = pci.column_pair(pw);
            let ws = pci.column_pair(pws);
            let got = rank_true_paraphrase(&pci, &inverted, w, ws, false).unwrap();
            let (want_rank, want_ties) = oracle_rank(&pci, pw, pws);
            // The oracle tolerates FP noise in ties; ranks must agree up to
            // the tie band.
            assert!(
                got.rank >= want_rank - want_ties.min(want_rank - 1)
                    && got.rank <= want_rank + want_ties,
                "query {w:?} target {ws:?}: got rank {}, oracle {want_rank} (+{want_ties} ties)",
                got.rank
            );
            assert_eq!(got.universe_size, pci.n_columns() as u64 - 1);
        }
    }
}

#[test]
fn rank_on_downsampled_store_matches_dense() {
    // Larger store: ~hundreds of columns; exact match expected because the
    // corpus produces well-separated distances.
    let (pci, _) = toy_pci(3000, 25, 0x67, 5);
    assert!(pci.n_columns() > 100);
    let inverted = pci.inverted_index();
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..15 {
        let pw = rng.gen_range(0..pci.n_columns());
        let pws = rng.gen_range(0..pci.n_columns());
        let got =
            rank_true_paraphrase(&pci, &inverted, pci.column_pair(pw), pci.column_pair(pws), false)
                .unwrap();
        let (want_rank, want_ties) = oracle_rank(&pci, pw, pws);
        assert!(
            got.rank + got.ties_below >= want_rank && got.rank <= want_rank + want_ties,
            "pw={pw} pws={pws}: got {} (+{} ties), oracle {want_rank} (+{want_ties})",
            got.rank,
            got.ties_below
        );
    }
}

#[test]
fn restricted_mode_matches_filter_oracle() {
    let (pci, _) = toy_pci(1000, 10, 0x68, 4);
    let inverted = pci.inverted_index();
    let pw = 0usize;
    let w = pci.column_pair(pw);
    // Pick a W* sharing no word with W if possible.
    let pws = (0..pci.n_columns())
        .find(|&p| {
            let (x, y) = pci.column_pair(p);
            x != w.0 && x != w.1 && y != w.0 && y != w.1
        })
        .expect("fixture must contain a disjoint pair");
    let ws = pci.column_pair(pws);
    let got = rank_true_paraphrase(&pci, &inverted, w, ws, true).unwrap();

    // Oracle: filter columns containing a W* word, dense distances.
    let qa = dense_column(&pci, pw);
    let dense_dist = |p: usize| -> f64 {
        let b = dense_column(&pci, p);
        qa.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
    };
    let d_star = dense_dist(pws);
    let mut below = 0u64;
    let mut candidates = 0u64;
    for p in 0..pci.n_columns() {
        let (x, y) = pci.column_pair(p);
        let contains = x == ws.0 || x == ws.1 || y == ws.0 || y == ws.1;
        if !contains || p == pw {
            continue;
        }
        candidates += 1;
        if p != pws && dense_dist(p) < d_star - 1e-9 {
            below += 1;
        }
    }
    assert_eq!(got.universe_size, candidates);
    assert!(
        got.rank >= 1 + below.saturating_sub(got.ties_below) && got.rank <= 1 + below + got.ties_below,
        "restricted rank {} vs oracle {}",
        got.rank,
        1 + below
    );
}

#[test]
fn identical_columns_tie_and_count_strictly_closer() {
    // Two pairs engineered to have identical single-entry columns: (0,1) and
    // (2,3) each co-occur exactly once around center 4. A third pair (0,2)
    // gets a different column (center 5).
    let ids = vec![0, 4, 1, 6, 6, 6, 2, 4, 3, 6, 6, 6, 0, 5, 2];
    let (v, ts) = ids_vocab(ids, 7);
    let tc = count_triplets(&ts, &v, 7, &opts(1)).unwrap();
    let pci = build_pci(&tc, false);
    let inverted = pci.inverted_index();
    let p01 = pci.find_column(0, 1).unwrap();
    let p23 = pci.find_column(2, 3).unwrap();
    assert_eq!(pci.column_entries(p01), pci.column_entries(p23), "fixture needs duplicates");
    assert_eq!(pci.column_distance(p01, p23), 0.0);

    // Query W = (0,1), true paraphrase W* = (0,2): the duplicate (2,3) sits
    // at distance 0 and must count as strictly closer.
    let r = rank_true_paraphrase(&pci, &inverted, (0, 1), (0, 2), false).unwrap();
    assert!(r.distance > 0.0);
    assert!(r.rank >= 2, "duplicate column must outrank W*: rank {}", r.rank);

    // With W* = the duplicate itself, nothing is strictly closer.
    let r = rank_true_paraphrase(&pci, &inverted, (0, 1), (2, 3), false).unwrap();
    assert_eq!(r.distance, 0.0);
    assert_eq!(r.rank, 1);
}

#[test]
fn missing_column_is_an_error() {
    // Pair (6,7) never co-occurs in this tiny fixture.
    let (v, ts) = ids_vocab(vec![0, 2, 1], 8);
    let tc = count_triplets(&ts, &v, 8, &opts(1)).unwrap();
    let pci = build_pci(&tc, false);
    let inverted = pci.inverted_index();
    assert!(matches!(
        rank_true_paraphrase(&pci, &inverted, (6, 7), (0, 1), false),
        Err(PciError::EmptyColumn(6, 7))
    ));
    assert!(matches!(pci.find_column(3, 3), Err(PciError::DegeneratePair)));
    assert!(matches!(pci.find_column(3, 99), Err(PciError::OutOfUniverse { .. })));
}

#[test]
fn inverted_index_is_consistent() {
    let (pci, _) = toy_pci(600, 7, 0x69, 2);
    let inverted = pci.inverted_index();
    let mut total = 0usize;
    for k in 0..pci.vocab_len {
        for &(col_pos, v) in inverted.row(k) {
            let (rows, vals) = pci.column_entries(col_pos as usize);
            let at = rows.binary_search(&k).expect("row entry must exist in column");
            assert_eq!(vals[at], v);
            total += 1;
        }
    }
    assert_eq!(total, pci.n_entries());
}

#[test]
fn save_load_roundtrip_bit_exact() {
    let (pci, _) = toy_pci(800, 9, 0x6a, 3);
    let dir = std::env::temp_dir().join(format!("parapmi-pci-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("pci.bin");
    save_pci(&pci, &path).unwrap();
    let loaded = load_pci(&path).unwrap();
    assert_eq!(pci, loaded);
    let path2 = dir.join("pci2.bin");
    save_pci(&loaded, &path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    assert_eq!(
        std::fs::read(norms_path(&path)).unwrap(),
        std::fs::read(norms_path(&path2)).unwrap()
    );
    // Loading without the sidecar recomputes norms.
    let path3 = dir.join("pci3.bin");
    save_pci(&pci, &path3).unwrap();
    std::fs::remove_file(norms_path(&path3)).unwrap();
    let reloaded = load_pci(&path3).unwrap();
    for pos in 0..pci.n_columns() {
        assert!((reloaded.norm2_sq(pos) - pci.norm2_sq(pos)).abs() < 1e-9);
    }
}

#[test]
fn category_rank_table_structure() {
    use crate::bats::{enumerate_analogies, BatsCategory, BatsRecord};
    let ids = random_ids(2500, 10, 0x6b);
    let (v, ts) = ids_vocab(ids, 10);
    let tc = count_triplets(&ts, &v, 10, &opts(5)).unwrap();
    let pci = build_pci(&tc, false);
    let rec = |s: u32, t: u32| BatsRecord {
        source: format!("w{s:04}"),
        targets: vec![format!("w{t:04}")],
    };
    let cat = BatsCategory { code: "T01".into(), records: vec![rec(0, 1), rec(2, 3), rec(4, 5)] };
    let cats = vec![("T01".to_string(), enumerate_analogies(&cat, &v))];
    let (rows, details) = category_rank_table(&cats, &pci, false);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].n_enumerated, 6);
    assert!(rows[0].n_ranked > 0, "dense toy corpus should rank analogies");
    assert!(rows[0].mean_rank >= 1.0);
    assert!(rows[0].median_rank >= 1.0);
    assert_eq!(details.len(), 6);
    for d in &details {
        if let Some(r) = &d.result {
            assert!(r.rank >= 1 && r.rank <= r.universe_size + 1);
        }
    }
}
