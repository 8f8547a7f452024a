//! Budgeted key counting with spill-to-disk sort-merge.
//!
//! Counts (u64 key -> u32 count) in a hash map; when the map outgrows the
//! memory budget it is drained to a sorted run file. Finalizing merges all
//! runs with the residual map into one sorted, duplicate-free sequence.

use std::collections::BinaryHeap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use rustc_hash::FxHashMap;

use super::CountError;

/// Approximate resident bytes per live hash-map entry (key + count + table
/// slack). Used to translate a byte budget into an entry budget.
const BYTES_PER_ENTRY: usize = 24;
const RECORD_BYTES: usize = 12;

static SPILL_SEQ: AtomicU64 = AtomicU64::new(0);

pub struct SpillCounter {
    map: FxHashMap<u64, u32>,
    budget_entries: usize,
    spill_dir: Option<PathBuf>,
    runs: Vec<PathBuf>,
}

impl SpillCounter {
    /// `budget_bytes` bounds the in-memory map; `spill_dir` receives run
    /// files (created lazily, removed on finalize/drop).
    pub fn new(budget_bytes: usize, spill_dir: Option<PathBuf>) -> Self {
        let budget_entries = (budget_bytes / BYTES_PER_ENTRY).max(1024);
        SpillCounter { map: FxHashMap::default(), budget_entries, spill_dir, runs: Vec::new() }
    }

    #[inline]
    pub fn add(&mut self, key: u64, amount: u32) -> Result<(), CountError> {
        let slot = self.map.entry(key).or_insert(0);
        *slot = slot.checked_add(amount).ok_or(CountError::CountOverflow)?;
        if self.map.len() >= self.budget_entries {
            self.spill()?;
        }
        Ok(())
    }

    fn spill_path(&mut self) -> Result<PathBuf, CountError> {
        let dir = match &self.spill_dir {
            Some(d) => d.clone(),
            None => {
                let d = std::env::temp_dir()
                    .join(format!("parapmi-spill-{}", std::process::id()));
                self.spill_dir = Some(d.clone());
                d
            }
        };
        fs::create_dir_all(&dir)?;
        let n = SPILL_SEQ.fetch_add(1, Ordering::Relaxed);
        Ok(dir.join(format!("run-{n:08}.bin")))
    }

    fn spill(&mut self) -> Result<(), CountError> {
        if self.map.is_empty() {
            return Ok(());
        }
        let mut items: Vec<(u64, u32)> = self.map.drain().collect();
        items.sort_unstable_by_key(|e| e.0);
        let path = self.spill_path()?;
        let mut w = BufWriter::new(File::create(&path)?);
        for (k, c) in items {
            w.write_all(&k.to_le_bytes())?;
            w.write_all(&c.to_le_bytes())?;
        }
        w.flush()?;
        self.runs.push(path);
        Ok(())
    }

    /// Drain everything into one sorted run with duplicate keys summed.
    pub fn finalize(mut self) -> Result<(Vec<u64>, Vec<u32>), CountError> {
        let mut resident: Vec<(u64, u32)> = self.map.drain().collect();
        resident.sort_unstable_by_key(|e| e.0);
        if self.runs.is_empty() {
            let (keys, counts) = resident.into_iter().unzip();
            return Ok((keys, counts));
        }
        let mut sources: Vec<Box<dyn RunSource>> = vec![Box::new(VecSource::new(resident))];
        for path in &self.runs {
            sources.push(Box::new(FileSource::open(path)?));
        }
        let merged = merge_runs(sources)?;
        self.cleanup();
        Ok(merged)
    }

    fn cleanup(&mut self) {
        for path in self.runs.drain(..) {
            let _ = fs::remove_file(path);
        }
    }

    pub fn spilled_runs(&self) -> usize {
        self.runs.len()
    }

}

impl Drop for SpillCounter {
    fn drop(&mut self) {
        self.cleanup();
    }
}

pub(super) trait RunSource {
    fn next_record(&mut self) -> Result<Option<(u64, u32)>, CountError>;
}

struct VecSource {
    items: std::vec::IntoIter<(u64, u32)>,
}

impl VecSource {
    fn new(items: Vec<(u64, u32)>) -> Self {
        VecSource { items: items.into_iter() }
    }
}

impl RunSource for VecSource {
    fn next_record(&mut self) -> Result<Option<(u64, u32)>, CountError> {
        Ok(self.items.next())
    }
}

struct FileSource {
    reader: BufReader<File>,
}

impl FileSource {
    fn open(path: &PathBuf) -> Result<Self, CountError> {
        Ok(FileSource { reader: BufReader::with_capacity(1 << 16, File::open(path)?) })
    }
}

impl RunSource for FileSource {
    fn next_record(&mut self) -> Result<Option<(u64, u32)>, CountError> {
        let mut buf = [0u8; RECORD_BYTES];
        match self.reader.read_exact(&mut buf) {
            Ok(()) => {
                let key = u64::from_le_bytes(buf[0..8].try_into().unwrap());
                let count = u32::from_le_bytes(buf[8..12].try_into().unwrap());
                Ok(Some((key, count)))
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(None),
            Err(e) => Err(CountError::Io(e)),
        }
    }
}

struct HeapEntry {
    key: u64,
    count: u32,
    source: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.source == other.source
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; invert for ascending key order.
        other.key.cmp(&self.key).then(other.source.cmp(&self.source))
    }
}

/// K-way merge of sorted runs, summing counts of equal keys.
pub(super) fn merge_runs(
    mut sources: Vec<Box<dyn RunSource>>,
) -> Result<(Vec<u64>, Vec<u32>), CountError> {
    let mut heap = BinaryHeap::new();
    for (i, src) in sources.iter_mut().enumerate() {
        if let Some((key, count)) = src.next_record()? {
            heap.push(HeapEntry { key, count, source: i });
        }
    }
    let mut keys = Vec::new();
    let mut counts: Vec<u32> = Vec::new();
    while let Some(top) = heap.pop() {
        if keys.last() == Some(&top.key) {
            let last = counts.last_mut().unwrap();
            *last = last.checked_add(top.count).ok_or(CountError::CountOverflow)?;
        } else {
            keys.push(top.key);
            counts.push(top.count);
        }
        if let Some((key, count)) = sources[top.source].next_record()? {
            heap.push(HeapEntry { key, count, source: top.source });
        }
    }
    Ok((keys, counts))
}

/// Merge already-finalized sorted (keys, counts) sequences.
pub(super) fn merge_sorted_pairs(
    parts: Vec<(Vec<u64>, Vec<u32>)>,
) -> Result<(Vec<u64>, Vec<u32>), CountError> {
    let sources: Vec<Box<dyn RunSource>> = parts
        .into_iter()
        .map(|(k, c)| {
            let items: Vec<(u64, u32)> = k.into_iter().zip(c).collect();
            Box::new(VecSource::new(items)) as Box<dyn RunSource>
        })
        .collect();
    merge_runs(sources)
}
