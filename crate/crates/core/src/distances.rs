//! One-pass inter-word distance counting.
//!
//! A rolling 2-bit encoder keeps the current k-mer code and a table of the
//! last start position of every word. When a word repeats inside the same
//! segment at a gap no larger than `d_max`, one count is added at that gap.
//! Tracking resets at every segment boundary.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::seq_io::{
    ChromosomeRecord, FastaReader, SegmentSink, SeqError, SequenceSegment, SourceFile,
};
use crate::words::{check_k, word_count, WordCode, WordError};

/// Dense per-worker tables above this many cells fall back to a hash map.
const DENSE_LIMIT: usize = 1 << 25;

/// Absolute counts of inter-word distances for one word, stored sparsely and
/// sorted by distance. Every stored count is positive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DistanceHistogram {
    distances: Vec<u32>,
    counts: Vec<u64>,
}

impl DistanceHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from arbitrary `(distance, count)` pairs; duplicates are summed
    /// and zero counts dropped.
    pub fn from_pairs<I: IntoIterator<Item = (u32, u64)>>(pairs: I) -> Self {
        let mut m = BTreeMap::new();
        for (d, c) in pairs {
            *m.entry(d).or_insert(0u64) += c;
        }
        let mut h = Self::new();
        for (d, c) in m {
            if c > 0 {
                h.distances.push(d);
                h.counts.push(c);
            }
        }
        h
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn get(&self, distance: u32) -> u64 {
        match self.distances.binary_search(&distance) {
            Ok(i) => self.counts[i],
            Err(_) => 0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.distances.iter().copied().zip(self.counts.iter().copied())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sum of counts with `lo <= distance <= hi`.
    pub fn total_in(&self, lo: u32, hi: u32) -> u64 {
        self.iter()
            .filter(|&(d, _)| d >= lo && d <= hi)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn max_distance(&self) -> Option<u32> {
        self.distances.last().copied()
    }

    /// Elementwise sum.
    pub fn merge(&self, other: &DistanceHistogram) -> DistanceHistogram {
        let mut out = DistanceHistogram {
            distances: Vec::with_capacity(self.len().max(other.len())),
            counts: Vec::with_capacity(self.len().max(other.len())),
        };
        let (mut i, mut j) = (0, 0);
        while i < self.len() || j < other.len() {
            let a = self.distances.get(i).copied().unwrap_or(u32::MAX);
            let b = other.distances.get(j).copied().unwrap_or(u32::MAX);
            let (d, c) = if j >= other.len() || (i < self.len() && a < b) {
                i += 1;
                (a, self.counts[i - 1])
            } else if i >= self.len() || b < a {
                j += 1;
                (b, other.counts[j - 1])
            } else {
                i += 1;
                j += 1;
                (a, self.counts[i - 1] + other.counts[j - 1])
            };
            out.distances.push(d);
            out.counts.push(c);
        }
        out
    }

    /// Multiplies every count by `factor` (> 0).
    pub fn scaled(&self, factor: u64) -> DistanceHistogram {
        assert!(factor > 0);
        DistanceHistogram {
            distances: self.distances.clone(),
            counts: self.counts.iter().map(|c| c * factor).collect(),
        }
    }

    pub(crate) fn push_sorted(&mut self, distance: u32, count: u64) {
        debug_assert!(count > 0);
        debug_assert!(self.distances.last().map_or(true, |&d| d < distance));
        self.distances.push(distance);
        self.counts.push(count);
    }
}

/// Histograms of every word on one chromosome, indexed by word code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChromosomeCounts {
    pub record: ChromosomeRecord,
    pub histograms: Vec<DistanceHistogram>,
}

impl ChromosomeCounts {
    fn merge(&self, other: &ChromosomeCounts) -> ChromosomeCounts {
        ChromosomeCounts {
            record: ChromosomeRecord {
                id: self.record.id.clone(),
                length: self.record.length + other.record.length,
                segments: self.record.segments + other.record.segments,
            },
            histograms: self
                .histograms
                .iter()
                .zip(&other.histograms)
                .map(|(a, b)| a.merge(b))
                .collect(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CountError {
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("distance cap must be at least 1")]
    InvalidDistanceCap,
    #[error("cannot merge archives with different parameters (k {0} vs {1}, d_max {2} vs {3})")]
    Incompatible(usize, usize, u32, u32),
    #[error("failed to build thread pool: {0}")]
    ThreadPool(String),
}

/// Per-chromosome and aggregate histograms for all `4^k` words.
///
/// Chromosomes are keyed by id, so merging is order-independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountArchive {
    k: usize,
    d_max: u32,
    sources: Vec<SourceFile>,
    chromosomes: BTreeMap<String, ChromosomeCounts>,
    aggregate: Vec<DistanceHistogram>,
}

impl CountArchive {
    pub fn empty(k: usize, d_max: u32) -> Result<Self, CountError> {
        check_k(k)?;
        if d_max == 0 {
            return Err(CountError::InvalidDistanceCap);
        }
        Ok(CountArchive {
            k,
            d_max,
            sources: Vec::new(),
            chromosomes: BTreeMap::new(),
            aggregate: vec![DistanceHistogram::new(); word_count(k)],
        })
    }

    pub(crate) fn from_parts(
        k: usize,
        d_max: u32,
        sources: Vec<SourceFile>,
        chromosomes: Vec<ChromosomeCounts>,
    ) -> Result<Self, CountError> {
        let mut a = Self::empty(k, d_max)?;
        a.sources = sources;
        for c in chromosomes {
            a.insert_chromosome(c);
        }
        Ok(a)
    }

    fn insert_chromosome(&mut self, c: ChromosomeCounts) {
        for (agg, h) in self.aggregate.iter_mut().zip(&c.histograms) {
            if !h.is_empty() {
                *agg = agg.merge(h);
            }
        }
        let merged = match self.chromosomes.remove(&c.record.id) {
            Some(prev) => prev.merge(&c),
            None => c,
        };
        self.chromosomes.insert(merged.record.id.clone(), merged);
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn sources(&self) -> &[SourceFile] {
        &self.sources
    }

    pub fn chromosomes(&self) -> impl Iterator<Item = &ChromosomeCounts> {
        self.chromosomes.values()
    }

    pub fn chromosome(&self, id: &str) -> Option<&ChromosomeCounts> {
        self.chromosomes.get(id)
    }

    pub fn aggregate(&self) -> &[DistanceHistogram] {
        &self.aggregate
    }

    pub fn histogram(&self, w: WordCode) -> &DistanceHistogram {
        &self.aggregate[w.code() as usize]
    }

    /// Elementwise sum of two archives with equal `k` and `d_max`.
    pub fn merge(&self, other: &CountArchive) -> Result<CountArchive, CountError> {
        if self.k != other.k || self.d_max != other.d_max {
            return Err(CountError::Incompatible(self.k, other.k, self.d_max, other.d_max));
        }
        let mut out = self.clone();
        let mut sources: Vec<SourceFile> = out.sources.drain(..).chain(other.sources.iter().cloned()).collect();
        sources.sort_by(|a, b| (&a.path, &a.sha256).cmp(&(&b.path, &b.sha256)));
        sources.dedup();
        out.sources = sources;
        for c in other.chromosomes.values() {
            out.insert_chromosome(c.clone());
        }
        Ok(out)
    }

    /// Same archive with every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> CountArchive {
        let scale = |hs: &[DistanceHistogram]| hs.iter().map(|h| h.scaled(factor)).collect();
        CountArchive {
            k: self.k,
            d_max: self.d_max,
            sources: self.sources.clone(),
            chromosomes: self
                .chromosomes
                .iter()
                .map(|(id, c)| {
                    (
                        id.clone(),
                        ChromosomeCounts {
                            record: c.record.clone(),
                            histograms: scale(&c.histograms),
                        },
                    )
                })
                .collect(),
            aggregate: scale(&self.aggregate),
        }
    }
}

enum Table {
    Dense { cells: Vec<u32>, touched: Vec<u32>, seen: Vec<bool> },
    Sparse(HashMap<(u32, u32), u64>),
}

/// Streaming counter; feed it through [`SegmentSink`].
pub struct DistanceCounter {
    k: usize,
    d_max: u32,
    mask: u32,
    /// Last start position + 1 of each word, in counter-global coordinates.
    last: Vec<u64>,
    pos: u64,
    segment_start: u64,
    filled: usize,
    code: u32,
    table: Table,
    current: Option<ChromosomeRecord>,
    finished: Vec<ChromosomeCounts>,
}

#[inline(always)]
fn base2(b: u8) -> u32 {
    // uppercase ACGT only
    ((b >> 1) & 3) as u32 ^ ((b >> 2) & 1) as u32
}

impl DistanceCounter {
    pub fn new(k: usize, d_max: u32) -> Result<Self, CountError> {
        check_k(k)?;
        if d_max == 0 {
            return Err(CountError::InvalidDistanceCap);
        }
        let words = word_count(k);
        let table = match words.checked_mul(d_max as usize) {
            Some(cells) if cells <= DENSE_LIMIT => Table::Dense {
                cells: vec![0; cells],
                touched: Vec::new(),
                seen: vec![false; words],
            },
            _ => Table::Sparse(HashMap::new()),
        };
        Ok(DistanceCounter {
            k,
            d_max,
            mask: (words - 1) as u32,
            last: vec![0; words],
            pos: 0,
            segment_start: 0,
            filled: 0,
            code: 0,
            table,
            current: None,
            finished: Vec::new(),
        })
    }

    #[inline(always)]
    fn record(&mut self, code: u32, distance: u32) {
        match &mut self.table {
            Table::Dense { cells, touched, seen } => {
                if !seen[code as usize] {
                    seen[code as usize] = true;
                    touched.push(code);
                }
                cells[code as usize * self.d_max as usize + (distance - 1) as usize] += 1;
            }
            Table::Sparse(map) => *map.entry((code, distance)).or_insert(0) += 1,
        }
    }

    fn drain_table(&mut self) -> Vec<DistanceHistogram> {
        let mut hs = vec![DistanceHistogram::new(); word_count(self.k)];
        match &mut self.table {
            Table::Dense { cells, touched, seen } => {
                let width = self.d_max as usize;
                for &code in touched.iter() {
                    let row = &mut cells[code as usize * width..(code as usize + 1) * width];
                    let h = &mut hs[code as usize];
                    for (i, c) in row.iter_mut().enumerate() {
                        if *c > 0 {
                            h.push_sorted(i as u32 + 1, *c as u64);
                            *c = 0;
                        }
                    }
                    seen[code as usize] = false;
                }
                touched.clear();
            }
            Table::Sparse(map) => {
                let mut entries: Vec<_> = map.drain().collect();
                entries.sort_unstable();
                for ((code, d), c) in entries {
                    hs[code as usize].push_sorted(d, c);
                }
            }
        }
        hs
    }

    /// Finished chromosomes so far as an archive.
    pub fn into_archive(mut self, sources: Vec<SourceFile>) -> CountArchive {
        self.close_open_record();
        CountArchive::from_parts(self.k, self.d_max, sources, std::mem::take(&mut self.finished))
            .expect("parameters validated at construction")
    }

    fn close_open_record(&mut self) {
        if let Some(record) = self.current.take() {
            let histograms = self.drain_table();
            self.finished.push(ChromosomeCounts { record, histograms });
        }
    }

    /// Counts owned segments; a change of chromosome id closes the previous
    /// chromosome. Record lengths are inferred from the last segment's end.
    pub fn feed_segment(&mut self, seg: &SequenceSegment) {
        let same = self
            .current
            .as_ref()
            .is_some_and(|r| r.id == seg.chromosome_id);
        if !same {
            self.close_open_record();
            self.begin_record(&seg.chromosome_id);
        }
        self.begin_segment(&seg.chromosome_id, seg.segment_index, seg.start_offset);
        self.extend_segment(&seg.bases);
        self.end_segment();
        if let Some(r) = self.current.as_mut() {
            r.segments += 1;
            r.length = r.length.max(seg.start_offset + seg.bases.len() as u64);
        }
    }
}

impl SegmentSink for DistanceCounter {
    fn begin_record(&mut self, id: &str) {
        self.close_open_record();
        self.current = Some(ChromosomeRecord {
            id: id.to_string(),
            length: 0,
            segments: 0,
        });
    }

    fn begin_segment(&mut self, _chromosome_id: &str, _segment_index: usize, _start_offset: u64) {
        self.segment_start = self.pos;
        self.filled = 0;
        self.code = 0;
    }

    fn extend_segment(&mut self, bases: &[u8]) {
        let k = self.k;
        let d_max = self.d_max as u64;
        for &b in bases {
            self.code = ((self.code << 2) | base2(b)) & self.mask;
            self.pos += 1;
            self.filled += 1;
            if self.filled >= k {
                // start position of this occurrence, plus one
                let start1 = self.pos - k as u64 + 1;
                let code = self.code;
                let prev = self.last[code as usize];
                if prev > self.segment_start {
                    let gap = start1 - prev;
                    if gap <= d_max {
                        self.record(code, gap as u32);
                    }
                }
                self.last[code as usize] = start1;
            }
        }
    }

    fn end_segment(&mut self) {}

    fn end_record(&mut self, record: &ChromosomeRecord) {
        if let Some(r) = self.current.as_mut() {
            r.length = record.length;
            r.segments = record.segments;
        }
        self.close_open_record();
    }
}

/// Counts every word of length `k` over an owned segment stream.
pub fn count_distances<I>(segments: I, k: usize, d_max: u32) -> Result<CountArchive, CountError>
where
    I: IntoIterator<Item = Result<SequenceSegment, SeqError>>,
{
    let mut counter = DistanceCounter::new(k, d_max)?;
    for seg in segments {
        counter.feed_segment(&seg?);
    }
    Ok(counter.into_archive(Vec::new()))
}

/// Streams one FASTA file through a counter without buffering segments.
pub fn count_fasta<P: AsRef<Path>>(path: P, k: usize, d_max: u32) -> Result<CountArchive, CountError> {
    let mut counter = DistanceCounter::new(k, d_max)?;
    let mut reader = FastaReader::open(path)?;
    reader.scan(&mut counter)?;
    Ok(counter.into_archive(vec![reader.source_file()]))
}

/// Counts several FASTA files on a pool of `threads` workers (0 = all
/// available cores). The result does not depend on the thread count.
pub fn count_fasta_files<P: AsRef<Path> + Sync>(
    paths: &[P],
    k: usize,
    d_max: u32,
    threads: usize,
) -> Result<CountArchive, CountError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CountError::ThreadPool(e.to_string()))?;
    let parts: Vec<CountArchive> = pool.install(|| {
        paths
            .par_iter()
            .map(|p| count_fasta(p, k, d_max))
            .collect::<Result<_, _>>()
    })?;
    parts
        .iter()
        .try_fold(CountArchive::empty(k, d_max)?, |acc, p| acc.merge(p))
}

/// A genomic interval, 0-based half-open.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Interval {
    pub chromosome: String,
    pub start: u64,
    pub end: u64,
}

/// Collects intervals of consecutive occurrences of one word at an exact gap.
pub struct PositionFinder {
    word: WordCode,
    target: u64,
    only: Option<String>,
    active: bool,
    chromosome: String,
    offset: u64,
    index: u64,
    filled: usize,
    code: u32,
    last: Option<u64>,
    pub intervals: Vec<Interval>,
}

impl PositionFinder {
    /// `only` restricts the search to one chromosome.
    pub fn new(word: WordCode, target_d: u64, only: Option<String>) -> Self {
        PositionFinder {
            word,
            target: target_d,
            only,
            active: false,
            chromosome: String::new(),
            offset: 0,
            index: 0,
            filled: 0,
            code: 0,
            last: None,
            intervals: Vec::new(),
        }
    }
}

impl SegmentSink for PositionFinder {
    fn begin_segment(&mut self, chromosome_id: &str, _segment_index: usize, start_offset: u64) {
        self.active = self.only.as_deref().map_or(true, |c| c == chromosome_id);
        if self.chromosome != chromosome_id {
            self.chromosome = chromosome_id.to_string();
        }
        self.offset = start_offset;
        self.index = 0;
        self.filled = 0;
        self.code = 0;
        self.last = None;
    }

    fn extend_segment(&mut self, bases: &[u8]) {
        if !self.active {
            return;
        }
        let k = self.word.k();
        let mask = (word_count(k) - 1) as u32;
        for &b in bases {
            self.code = ((self.code << 2) | base2(b)) & mask;
            self.index += 1;
            self.filled += 1;
            if self.filled >= k && self.code == self.word.code() {
                let start = self.index - k as u64;
                if let Some(prev) = self.last {
                    if start - prev == self.target {
                        self.intervals.push(Interval {
                            chromosome: self.chromosome.clone(),
                            start: self.offset + prev,
                            end: self.offset + start + k as u64,
                        });
                    }
                }
                self.last = Some(start);
            }
        }
    }

    fn end_segment(&mut self) {
        self.last = None;
    }
}

/// Intervals spanning each consecutive-occurrence pair of `w` exactly
/// `target_d` apart: from the first start to the second start + k.
pub fn positions_at_distance<I>(
    segments: I,
    w: WordCode,
    target_d: u64,
) -> Result<Vec<Interval>, SeqError>
where
    I: IntoIterator<Item = Result<SequenceSegment, SeqError>>,
{
    let mut finder = PositionFinder::new(w, target_d, None);
    for seg in segments {
        let seg = seg?;
        finder.begin_segment(&seg.chromosome_id, seg.segment_index, seg.start_offset);
        finder.extend_segment(&seg.bases);
        finder.end_segment();
    }
    Ok(finder.intervals)
}
