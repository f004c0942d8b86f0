//! Persistence for [`CountArchive`].
//!
//! Binary layout (little endian):
//!
//! ```text
//! "SYMD" | version: u32 | payload length: u64 | sha256(payload): [u8; 32] | payload
//! ```
//!
//! The payload is a raw-deflate stream of the count table. The TSV export
//! carries the same content as `word  chromosome  distance  count` rows
//! after `#`-prefixed metadata lines. Aggregate histograms are not stored;
//! they are rebuilt on load as the sum of the chromosome histograms.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::distances::{ChromosomeCounts, CountArchive, DistanceHistogram};
use crate::seq_io::{ChromosomeRecord, SourceFile};
use crate::words::{word_count, WordCode};

pub const MAGIC: &[u8; 4] = b"SYMD";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 32;
const TSV_TAG: &str = "#symdist-archive";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("not a symdist archive: {0}")]
    Format(String),
    #[error("unsupported archive version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("archive checksum mismatch")]
    Checksum,
    #[error("archive truncated")]
    Truncated,
}

impl ArchiveError {
    /// Stable numeric code per failure class.
    pub fn code(&self) -> u8 {
        match self {
            ArchiveError::Io(_) => 1,
            ArchiveError::Format(_) => 2,
            ArchiveError::Version { .. } => 3,
            ArchiveError::Checksum => 4,
            ArchiveError::Truncated => 5,
        }
    }
}

fn bad(msg: impl Into<String>) -> ArchiveError {
    ArchiveError::Format(msg.into())
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn encode_payload(a: &CountArchive) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(a.k() as u8);
    out.extend_from_slice(&a.d_max().to_le_bytes());
    out.extend_from_slice(&(a.sources().len() as u32).to_le_bytes());
    for s in a.sources() {
        put_str(&mut out, &s.path);
        put_str(&mut out, &s.sha256);
    }
    let chroms: Vec<_> = a.chromosomes().collect();
    out.extend_from_slice(&(chroms.len() as u32).to_le_bytes());
    for c in chroms {
        put_str(&mut out, &c.record.id);
        out.extend_from_slice(&c.record.length.to_le_bytes());
        out.extend_from_slice(&c.record.segments.to_le_bytes());
        let nonempty = c.histograms.iter().filter(|h| !h.is_empty()).count();
        out.extend_from_slice(&(nonempty as u32).to_le_bytes());
        for (code, h) in c.histograms.iter().enumerate().filter(|(_, h)| !h.is_empty()) {
            out.extend_from_slice(&(code as u32).to_le_bytes());
            out.extend_from_slice(&(h.len() as u32).to_le_bytes());
            for (d, n) in h.iter() {
                out.extend_from_slice(&d.to_le_bytes());
                out.extend_from_slice(&n.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArchiveError> {
        if self.buf.len() < n {
            return Err(bad("payload ends early"));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8, ArchiveError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, ArchiveError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, ArchiveError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, ArchiveError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("invalid utf-8"))
    }
}

fn decode_payload(buf: &[u8]) -> Result<CountArchive, ArchiveError> {
    let mut cur = Cursor { buf };
    let k = cur.u8()? as usize;
    let d_max = cur.u32()?;
    let mut sources = Vec::new();
    for _ in 0..cur.u32()? {
        sources.push(SourceFile {
            path: cur.str()?,
            sha256: cur.str()?,
        });
    }
    let mut builder = Builder::new(k, d_max)?;
    for _ in 0..cur.u32()? {
        let id = cur.str()?;
        let length = cur.u64()?;
        let segments = cur.u64()?;
        builder.add_chromosome(ChromosomeRecord { id: id.clone(), length, segments })?;
        for _ in 0..cur.u32()? {
            let code = cur.u32()?;
            let n = cur.u32()?;
            for _ in 0..n {
                let d = cur.u32()?;
                let c = cur.u64()?;
                builder.add(&id, code, d, c)?;
            }
        }
    }
    if !cur.buf.is_empty() {
        return Err(bad("trailing bytes in payload"));
    }
    builder.finish(sources)
}

/// Accumulates entries while loading, validating ranges.
struct Builder {
    k: usize,
    d_max: u32,
    chroms: Vec<(ChromosomeRecord, Vec<Vec<(u32, u64)>>)>,
}

impl Builder {
    fn new(k: usize, d_max: u32) -> Result<Self, ArchiveError> {
        CountArchive::empty(k, d_max).map_err(|e| bad(e.to_string()))?;
        Ok(Builder { k, d_max, chroms: Vec::new() })
    }

    fn add_chromosome(&mut self, record: ChromosomeRecord) -> Result<(), ArchiveError> {
        if self.chroms.iter().any(|(r, _)| r.id == record.id) {
            return Err(bad(format!("duplicate chromosome {}", record.id)));
        }
        self.chroms.push((record, vec![Vec::new(); word_count(self.k)]));
        Ok(())
    }

    fn add(&mut self, chrom: &str, code: u32, d: u32, c: u64) -> Result<(), ArchiveError> {
        if code as usize >= word_count(self.k) {
            return Err(bad(format!("word code {code} out of range")));
        }
        if d == 0 || d > self.d_max || c == 0 {
            return Err(bad(format!("invalid entry distance {d} count {c}")));
        }
        let (_, hs) = self
            .chroms
            .iter_mut()
            .rfind(|(r, _)| r.id == chrom)
            .ok_or_else(|| bad(format!("undeclared chromosome {chrom}")))?;
        hs[code as usize].push((d, c));
        Ok(())
    }

    fn finish(self, sources: Vec<SourceFile>) -> Result<CountArchive, ArchiveError> {
        let chromosomes = self
            .chroms
            .into_iter()
            .map(|(record, hs)| {
                let histograms = hs
                    .into_iter()
                    .map(|entries| {
                        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
                            return Err(bad("distances not strictly increasing"));
                        }
                        Ok(DistanceHistogram::from_pairs(entries))
                    })
                    .collect::<Result<_, _>>()?;
                Ok(ChromosomeCounts { record, histograms })
            })
            .collect::<Result<Vec<_>, ArchiveError>>()?;
        CountArchive::from_parts(self.k, self.d_max, sources, chromosomes).map_err(|e| bad(e.to_string()))
    }
}

pub fn write_archive<W: Write>(a: &CountArchive, mut out: W) -> Result<(), ArchiveError> {
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&encode_payload(a))?;
    let payload = enc.finish()?;
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(payload.len() as u64).to_le_bytes())?;
    out.write_all(&Sha256::digest(&payload))?;
    out.write_all(&payload)?;
    out.flush()?;
    Ok(())
}

pub fn read_archive(bytes: &[u8]) -> Result<CountArchive, ArchiveError> {
    if bytes.len() < 4 {
        return Err(ArchiveError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic header"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(ArchiveError::Truncated);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ArchiveError::Version { found: version });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() < len {
        return Err(ArchiveError::Truncated);
    }
    if body.len() > len {
        return Err(bad("trailing bytes after payload"));
    }
    if Sha256::digest(body).as_slice() != &bytes[16..48] {
        return Err(ArchiveError::Checksum);
    }
    let mut raw = Vec::new();
    DeflateDecoder::new(body)
        .read_to_end(&mut raw)
        .map_err(|e| bad(format!("corrupt payload: {e}")))?;
    decode_payload(&raw)
}

pub fn save_archive<P: AsRef<Path>>(a: &CountArchive, path: P) -> Result<(), ArchiveError> {
    write_archive(a, BufWriter::new(File::create(path)?))
}

/// Loads a binary or TSV archive, chosen by the leading bytes.
pub fn load_archive<P: AsRef<Path>>(path: P) -> Result<CountArchive, ArchiveError> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(TSV_TAG.as_bytes()) {
        read_tsv(&bytes[..])
    } else {
        read_archive(&bytes)
    }
}

pub fn write_tsv<W: Write>(a: &CountArchive, out: W) -> Result<(), ArchiveError> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{TSV_TAG}\t{FORMAT_VERSION}")?;
    writeln!(out, "#k\t{}", a.k())?;
    writeln!(out, "#d_max\t{}", a.d_max())?;
    for s in a.sources() {
        writeln!(out, "#source\t{}\t{}", s.path, s.sha256)?;
    }
    for c in a.chromosomes() {
        writeln!(out, "#chromosome\t{}\t{}\t{}", c.record.id, c.record.length, c.record.segments)?;
    }
    writeln!(out, "#word\tchromosome\tdistance\tcount")?;
    let k = a.k();
    for code in 0..word_count(k) {
        let word = WordCode::new(code as u32, k).expect("code in range").to_string();
        for c in a.chromosomes() {
            for (d, n) in c.histograms[code].iter() {
                writeln!(out, "{word}\t{}\t{d}\t{n}", c.record.id)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_tsv<R: Read>(input: R) -> Result<CountArchive, ArchiveError> {
    let mut k = None;
    let mut d_max = None;
    let mut sources = Vec::new();
    let mut builder: Option<Builder> = None;
    let mut tagged = false;
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        let parse_err = |what: &str| bad(format!("line {}: bad {what}", i + 1));
        if i == 0 {
            if fields.first() != Some(&TSV_TAG) {
                return Err(bad("missing TSV archive tag"));
            }
            let v: u32 = fields.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| parse_err("version"))?;
            if v != FORMAT_VERSION {
                return Err(ArchiveError::Version { found: v });
            }
            tagged = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        match fields[0] {
            "#k" => k = Some(fields.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| parse_err("k"))?),
            "#d_max" => {
                d_max = Some(fields.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| parse_err("d_max"))?)
            }
            "#source" if fields.len() == 3 => sources.push(SourceFile {
                path: fields[1].to_string(),
                sha256: fields[2].to_string(),
            }),
            "#chromosome" if fields.len() == 4 => {
                let b = match builder.as_mut() {
                    Some(b) => b,
                    None => builder.insert(Builder::new(
                        k.ok_or_else(|| parse_err("header order"))?,
                        d_max.ok_or_else(|| parse_err("header order"))?,
                    )?),
                };
                b.add_chromosome(ChromosomeRecord {
                    id: fields[1].to_string(),
                    length: fields[2].parse().map_err(|_| parse_err("length"))?,
                    segments: fields[3].parse().map_err(|_| parse_err("segments"))?,
                })?;
            }
            f if f.starts_with('#') => {}
            _ => {
                if fields.len() != 4 {
                    return Err(parse_err("row"));
                }
                let b = builder.as_mut().ok_or_else(|| parse_err("row before chromosome list"))?;
                let w: WordCode = fields[0].parse().map_err(|_| parse_err("word"))?;
                if w.k() != b.k {
                    return Err(parse_err("word length"));
                }
                let d = fields[2].parse().map_err(|_| parse_err("distance"))?;
                let c = fields[3].parse().map_err(|_| parse_err("count"))?;
                b.add(fields[1], w.code(), d, c)?;
            }
        }
    }
    if !tagged {
        return Err(ArchiveError::Truncated);
    }
    let builder = match builder {
        Some(b) => b,
        None => Builder::new(k.ok_or(ArchiveError::Truncated)?, d_max.ok_or(ArchiveError::Truncated)?)?,
    };
    // rows arrive word-major; regroup per chromosome before validation
    let mut builder = builder;
    for (_, hs) in builder.chroms.iter_mut() {
        for h in hs.iter_mut() {
            h.sort_unstable();
        }
    }
    builder.finish(sources)
}
