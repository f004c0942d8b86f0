//! Streaming FASTA input split into contiguous ACGT segments.
//!
//! Lowercase `acgt` are uppercased; every other non-whitespace symbol ends
//! the current segment. Offsets count every symbol of a record (separators
//! included) and are 0-based within the record.
//!
//! Two consumption styles share one line-level state machine:
//! [`FastaReader::scan`] pushes segment chunks into a [`SegmentSink`] without
//! ever buffering a whole segment, and [`Segments`] yields owned
//! [`SequenceSegment`]s.

use std::collections::{HashSet, VecDeque};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;
use std::sync::{Arc, Mutex};

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("FASTA format error at line {line}: {msg}")]
    Format { line: u64, msg: String },
    #[error("duplicate FASTA record id {0:?}")]
    DuplicateRecord(String),
}

/// A maximal run of ACGT inside one FASTA record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSegment {
    pub chromosome_id: String,
    pub segment_index: usize,
    pub start_offset: u64,
    pub bases: Vec<u8>,
}

/// Per-record totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChromosomeRecord {
    pub id: String,
    pub length: u64,
    pub segments: u64,
}

/// A file path plus the SHA-256 of its raw bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenomeSource {
    pub records: Vec<ChromosomeRecord>,
    pub provenance: SourceFile,
}

/// Push interface for segment data. Chunks passed to `extend_segment` are
/// uppercase ACGT only.
pub trait SegmentSink {
    fn begin_record(&mut self, _id: &str) {}
    fn begin_segment(&mut self, chromosome_id: &str, segment_index: usize, start_offset: u64);
    fn extend_segment(&mut self, bases: &[u8]);
    fn end_segment(&mut self);
    fn end_record(&mut self, _record: &ChromosomeRecord) {}
}

const SKIP: u8 = 0xff;
const SEP: u8 = 0;

static NORMALIZE: [u8; 256] = {
    let mut t = [SEP; 256];
    t[b'A' as usize] = b'A';
    t[b'C' as usize] = b'C';
    t[b'G' as usize] = b'G';
    t[b'T' as usize] = b'T';
    t[b'a' as usize] = b'A';
    t[b'c' as usize] = b'C';
    t[b'g' as usize] = b'G';
    t[b't' as usize] = b'T';
    t[b' ' as usize] = SKIP;
    t[b'\t' as usize] = SKIP;
    t[b'\r' as usize] = SKIP;
    t[b'\n' as usize] = SKIP;
    t[0x0b] = SKIP;
    t[0x0c] = SKIP;
    t
};

struct OpenRecord {
    id: String,
    length: u64,
    segments: u64,
    in_segment: bool,
}

/// Line-level FASTA state machine.
struct Scanner<R> {
    reader: R,
    line: Vec<u8>,
    chunk: Vec<u8>,
    line_no: u64,
    record: Option<OpenRecord>,
    seen: HashSet<String>,
    done: bool,
}

impl<R: BufRead> Scanner<R> {
    fn new(reader: R) -> Self {
        Scanner {
            reader,
            line: Vec::with_capacity(256),
            chunk: Vec::with_capacity(256),
            line_no: 0,
            record: None,
            seen: HashSet::new(),
            done: false,
        }
    }

    fn close_record<S: SegmentSink>(&mut self, sink: &mut S) {
        if let Some(rec) = self.record.take() {
            if rec.in_segment {
                sink.end_segment();
            }
            sink.end_record(&ChromosomeRecord {
                id: rec.id,
                length: rec.length,
                segments: rec.segments,
            });
        }
    }

    /// Processes one line. Returns `false` at end of input.
    fn step<S: SegmentSink>(&mut self, sink: &mut S) -> Result<bool, SeqError> {
        if self.done {
            return Ok(false);
        }
        self.line.clear();
        if self.reader.read_until(b'\n', &mut self.line)? == 0 {
            self.close_record(sink);
            self.done = true;
            return Ok(false);
        }
        self.line_no += 1;

        if self.line[0] == b'>' {
            self.close_record(sink);
            let header = String::from_utf8_lossy(&self.line[1..]);
            let id = header.split_whitespace().next().unwrap_or("").to_string();
            if id.is_empty() {
                return Err(SeqError::Format {
                    line: self.line_no,
                    msg: "empty record id".into(),
                });
            }
            if !self.seen.insert(id.clone()) {
                return Err(SeqError::DuplicateRecord(id));
            }
            sink.begin_record(&id);
            self.record = Some(OpenRecord {
                id,
                length: 0,
                segments: 0,
                in_segment: false,
            });
            return Ok(true);
        }
        if self.line[0] == b';' {
            return Ok(true);
        }

        let Some(rec) = self.record.as_mut() else {
            if self.line.iter().all(|b| b.is_ascii_whitespace()) {
                return Ok(true);
            }
            return Err(SeqError::Format {
                line: self.line_no,
                msg: "sequence data before first header".into(),
            });
        };

        self.chunk.clear();
        for &b in &self.line {
            match NORMALIZE[b as usize] {
                SKIP => continue,
                SEP => {
                    if rec.in_segment {
                        if !self.chunk.is_empty() {
                            sink.extend_segment(&self.chunk);
                            self.chunk.clear();
                        }
                        sink.end_segment();
                        rec.in_segment = false;
                    }
                }
                base => {
                    if !rec.in_segment {
                        sink.begin_segment(&rec.id, rec.segments as usize, rec.length);
                        rec.segments += 1;
                        rec.in_segment = true;
                    }
                    self.chunk.push(base);
                }
            }
            rec.length += 1;
        }
        if !self.chunk.is_empty() {
            sink.extend_segment(&self.chunk);
        }
        Ok(true)
    }
}

struct HashingReader<R> {
    inner: R,
    hasher: Arc<Mutex<Sha256>>,
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.lock().expect("hasher poisoned").update(&buf[..n]);
        Ok(n)
    }
}

/// A FASTA stream, plain or gzip-compressed (detected by magic bytes).
pub struct FastaReader {
    scanner: Scanner<Box<dyn BufRead + Send>>,
    label: String,
    hasher: Arc<Mutex<Sha256>>,
}

impl FastaReader {
    pub fn open<P: AsRef<Path>>(path: P) -> Result<Self, SeqError> {
        let path = path.as_ref();
        let file = File::open(path)?;
        Self::from_reader(file, path.display().to_string())
    }

    pub fn from_reader<R: Read + Send + 'static>(
        reader: R,
        label: impl Into<String>,
    ) -> Result<Self, SeqError> {
        let hasher = Arc::new(Mutex::new(Sha256::new()));
        let mut raw = BufReader::with_capacity(
            1 << 16,
            HashingReader {
                inner: reader,
                hasher: Arc::clone(&hasher),
            },
        );
        let gz = {
            let head = raw.fill_buf()?;
            head.len() >= 2 && head[0] == 0x1f && head[1] == 0x8b
        };
        let inner: Box<dyn BufRead + Send> = if gz {
            Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(raw)))
        } else {
            Box::new(raw)
        };
        Ok(FastaReader {
            scanner: Scanner::new(inner),
            label: label.into(),
            hasher,
        })
    }

    /// Pushes every segment of the file into `sink`.
    pub fn scan<S: SegmentSink>(&mut self, sink: &mut S) -> Result<(), SeqError> {
        while self.scanner.step(sink)? {}
        Ok(())
    }

    pub fn segments(self) -> Segments {
        Segments {
            reader: self,
            buffer: SegmentBuffer::default(),
        }
    }

    /// Path label and digest of the bytes consumed so far; complete once the
    /// stream is exhausted.
    pub fn source_file(&self) -> SourceFile {
        let digest = self.hasher.lock().expect("hasher poisoned").clone().finalize();
        SourceFile {
            path: self.label.clone(),
            sha256: hex::encode(digest),
        }
    }
}

#[derive(Default)]
struct SegmentBuffer {
    current: Option<SequenceSegment>,
    ready: VecDeque<SequenceSegment>,
    records: Vec<ChromosomeRecord>,
}

impl SegmentSink for SegmentBuffer {
    fn begin_segment(&mut self, chromosome_id: &str, segment_index: usize, start_offset: u64) {
        self.current = Some(SequenceSegment {
            chromosome_id: chromosome_id.to_string(),
            segment_index,
            start_offset,
            bases: Vec::new(),
        });
    }

    fn extend_segment(&mut self, bases: &[u8]) {
        if let Some(seg) = self.current.as_mut() {
            seg.bases.extend_from_slice(bases);
        }
    }

    fn end_segment(&mut self) {
        if let Some(seg) = self.current.take() {
            self.ready.push_back(seg);
        }
    }

    fn end_record(&mut self, record: &ChromosomeRecord) {
        self.records.push(record.clone());
    }
}

/// Owned segments in file order.
pub struct Segments {
    reader: FastaReader,
    buffer: SegmentBuffer,
}

impl Segments {
    pub fn source_file(&self) -> SourceFile {
        self.reader.source_file()
    }
}

impl Iterator for Segments {
    type Item = Result<SequenceSegment, SeqError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(seg) = self.buffer.ready.pop_front() {
                return Some(Ok(seg));
            }
            match self.reader.scanner.step(&mut self.buffer) {
                Ok(true) => continue,
                Ok(false) => return self.buffer.ready.pop_front().map(Ok),
                Err(e) => {
                    self.reader.scanner.done = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

pub fn open_fasta<P: AsRef<Path>>(path: P) -> Result<Segments, SeqError> {
    Ok(FastaReader::open(path)?.segments())
}

/// Drains the stream and reports per-record totals. Records without any ACGT
/// are listed with zero segments.
pub fn scan_summary(mut segments: Segments) -> Result<GenomeSource, SeqError> {
    for seg in segments.by_ref() {
        seg?;
    }
    Ok(GenomeSource {
        provenance: segments.source_file(),
        records: std::mem::take(&mut segments.buffer.records),
    })
}
