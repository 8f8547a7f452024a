//! Binary persistence for count stores.
//!
//! Record stream: little-endian `[u64 packed_key][u32 count]`, preceded by a
//! fixed header carrying the magic, layout version, the vocabulary
//! fingerprint, the window radius, and the universe size. Marginals live in a
//! sidecar file (`<path>.marg`) so the record stream stays mergeable by
//! simple concatenation-and-sort tools. Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{CountError, PairCounts, PairIndex, TripletCounts};

const MAGIC: &[u8; 8] = b"PARAPMI\0";
const VERSION: u32 = 1;
const KIND_PAIRS: u32 = 1;
const KIND_TRIPLETS: u32 = 2;

pub fn marginals_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".marg");
    PathBuf::from(os)
}

struct Header {
    kind: u32,
    vocab_fingerprint: u64,
    window_radius: u32,
    universe: u32,
    n_records: u64,
}

fn write_header<W: Write>(w: &mut W, h: &Header) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&h.kind.to_le_bytes())?;
    w.write_all(&h.vocab_fingerprint.to_le_bytes())?;
    w.write_all(&h.window_radius.to_le_bytes())?;
    w.write_all(&h.universe.to_le_bytes())?;
    w.write_all(&h.n_records.to_le_bytes())?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R, want_kind: u32) -> Result<Header, CountError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CountError::Format("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(CountError::Format(format!("unsupported version {version}")));
    }
    let kind = read_u32(r)?;
    if kind != want_kind {
        return Err(CountError::Format(format!("wrong store kind {kind}, wanted {want_kind}")));
    }
    Ok(Header {
        kind,
        vocab_fingerprint: read_u64(r)?,
        window_radius: read_u32(r)?,
        universe: read_u32(r)?,
        n_records: read_u64(r)?,
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CountError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CountError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn write_records<W: Write>(w: &mut W, keys: &[u64], counts: &[u32]) -> std::io::Result<()> {
    for (&k, &c) in keys.iter().zip(counts.iter()) {
        w.write_all(&k.to_le_bytes())?;
        w.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

fn read_records<R: Read>(r: &mut R, n: u64) -> Result<(Vec<u64>, Vec<u32>), CountError> {
    let mut keys = Vec::with_capacity(n as usize);
    let mut counts = Vec::with_capacity(n as usize);
    let mut buf = [0u8; 12];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        keys.push(u64::from_le_bytes(buf[0..8].try_into().unwrap()));
        counts.push(u32::from_le_bytes(buf[8..12].try_into().unwrap()));
    }
    Ok((keys, counts))
}

fn write_u64_slice<W: Write>(w: &mut W, v: &[u64]) -> std::io::Result<()> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for &x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64_slice<R: Read>(r: &mut R) -> Result<Vec<u64>, CountError> {
    let n = read_u64(r)?;
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        out.push(read_u64(r)?);
    }
    Ok(out)
}

pub fn save_pair_counts(pc: &PairCounts, path: &Path) -> Result<(), CountError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        &Header {
            kind: KIND_PAIRS,
            vocab_fingerprint: pc.vocab_fingerprint,
            window_radius: pc.window_radius,
            universe: pc.vocab_len() as u32,
            n_records: pc.len() as u64,
        },
    )?;
    write_records(&mut w, &pc.keys, &pc.counts)?;
    w.flush()?;

    let mut m = BufWriter::new(File::create(marginals_path(path))?);
    m.write_all(MAGIC)?;
    m.write_all(&KIND_PAIRS.to_le_bytes())?;
    write_u64_slice(&mut m, &pc.row_marginals)?;
    write_u64_slice(&mut m, &pc.col_marginals)?;
    m.write_all(&pc.total.to_le_bytes())?;
    m.flush()?;
    Ok(())
}

pub fn load_pair_counts(path: &Path) -> Result<PairCounts, CountError> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r, KIND_PAIRS)?;
    let (keys, counts) = read_records(&mut r, h.n_records)?;

    let mut m = BufReader::new(File::open(marginals_path(path))?);
    let mut magic = [0u8; 8];
    m.read_exact(&mut magic)?;
    if &magic != MAGIC || read_u32(&mut m)? != KIND_PAIRS {
        return Err(CountError::Format("bad marginals sidecar".into()));
    }
    let row_marginals = read_u64_slice(&mut m)?;
    let col_marginals = read_u64_slice(&mut m)?;
    let total = read_u64(&mut m)?;
    if row_marginals.len() != h.universe as usize {
        return Err(CountError::Format("sidecar does not match header".into()));
    }
    Ok(PairCounts {
        keys,
        counts,
        row_marginals,
        col_marginals,
        total,
        vocab_fingerprint: h.vocab_fingerprint,
        window_radius: h.window_radius,
    })
}

pub fn save_triplet_counts(tc: &TripletCounts, path: &Path) -> Result<(), CountError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        &Header {
            kind: KIND_TRIPLETS,
            vocab_fingerprint: tc.vocab_fingerprint,
            window_radius: tc.window_radius,
            universe: tc.universe(),
            n_records: tc.len() as u64,
        },
    )?;
    write_records(&mut w, &tc.keys, &tc.counts)?;
    w.flush()?;

    let mut m = BufWriter::new(File::create(marginals_path(path))?);
    m.write_all(MAGIC)?;
    m.write_all(&KIND_TRIPLETS.to_le_bytes())?;
    write_u64_slice(&mut m, &tc.center_marginals)?;
    m.write_all(&tc.total_windows.to_le_bytes())?;
    m.write_all(&tc.total_triplets.to_le_bytes())?;
    m.flush()?;
    Ok(())
}

pub fn load_triplet_counts(path: &Path) -> Result<TripletCounts, CountError> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r, KIND_TRIPLETS)?;
    let (keys, counts) = read_records(&mut r, h.n_records)?;

    let mut m = BufReader::new(File::open(marginals_path(path))?);
    let mut magic = [0u8; 8];
    m.read_exact(&mut magic)?;
    if &magic != MAGIC || read_u32(&mut m)? != KIND_TRIPLETS {
        return Err(CountError::Format("bad marginals sidecar".into()));
    }
    let center_marginals = read_u64_slice(&mut m)?;
    let total_windows = read_u64(&mut m)?;
    let total_triplets = read_u64(&mut m)?;
    Ok(TripletCounts {
        keys,
        counts,
        pair_index: PairIndex::new(h.universe),
        center_marginals,
        total_windows,
        total_triplets,
        vocab_fingerprint: h.vocab_fingerprint,
        window_radius: h.window_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccur::{count_pairs, count_triplets, CountingOptions};
    use crate::corpus::{build_vocabulary, token_stream};

    #[test]
    fn pair_store_roundtrip_bit_exact() {
        let text = crate::corpus::tests::synthetic_corpus(800, 15, 0x10);
        let v = build_vocabulary(text.as_bytes(), 1, 1).unwrap();
        let ts = token_stream(text.as_bytes(), &v, 1);
        let pc = count_pairs(&ts, &v, &CountingOptions::default()).unwrap();

        let dir = std::env::temp_dir().join(format!("parapmi-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pairs.bin");
        save_pair_counts(&pc, &path).unwrap();
        let loaded = load_pair_counts(&path).unwrap();
        assert_eq!(pc, loaded);

        // Re-saving the loaded store must reproduce the files byte for byte.
        let path2 = dir.join("pairs2.bin");
        save_pair_counts(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        assert_eq!(
            std::fs::read(marginals_path(&path)).unwrap(),
            std::fs::read(marginals_path(&path2)).unwrap()
        );
    }

    #[test]
    fn triplet_store_roundtrip_bit_exact() {
        let text = crate::corpus::tests::synthetic_corpus(800, 12, 0x11);
        let v = build_vocabulary(text.as_bytes(), 1, 1).unwrap();
        let ts = token_stream(text.as_bytes(), &v, 1);
        let tc = count_triplets(&ts, &v, 12, &CountingOptions::default()).unwrap();

        let dir = std::env::temp_dir().join(format!("parapmi-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("triplets.bin");
        save_triplet_counts(&tc, &path).unwrap();
        let loaded = load_triplet_counts(&path).unwrap();
        assert_eq!(tc, loaded);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let text = "a a b b";
        let v = build_vocabulary(text.as_bytes(), 1, 1).unwrap();
        let ts = token_stream(text.as_bytes(), &v, 1);
        let pc = count_pairs(&ts, &v, &CountingOptions { window_radius: 1, ..Default::default() })
            .unwrap();
        let dir = std::env::temp_dir().join(format!("parapmi-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("kind.bin");
        save_pair_counts(&pc, &path).unwrap();
        assert!(matches!(load_triplet_counts(&path), Err(CountError::Format(_))));
    }
}
