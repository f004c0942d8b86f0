//! End-to-end pair analysis: distributions, low-count filtering, pair
//! dissimilarities, summary statistics, percentile selection and
//! localisation of favoured distances.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::distances::{CountArchive, Interval, PositionFinder};
use crate::dissim::{distribution_dissimilarity, DissimError, DissimilarityParams, MAX_PEAKS};
use crate::distributions::{
    filter_pairs, quantile, to_distribution, word_total, DistanceDistribution, FiveNumber,
    StatsError, TotalScope,
};
use crate::peaks::{find_peaks, Peak, PeakError, PeakSet};
use crate::seq_io::{FastaReader, SegmentSink, SeqError};
use crate::words::{enumerate_pairs, SymmetricPair, WordCode, WordError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Peaks(#[from] PeakError),
    #[error(transparent)]
    Dissim(#[from] DissimError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error("domain upper bound {domain_hi} exceeds the archive distance cap {d_max}")]
    DomainBeyondCap { domain_hi: u32, d_max: u32 },
    #[error("word length {word} does not match archive k = {archive}")]
    WordLength { word: usize, archive: usize },
    #[error("invalid parameter: {0}")]
    Param(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub dissim: DissimilarityParams,
    /// Quantile of all word totals below which pairs are dropped.
    pub filter_level: f64,
    pub low_level: f64,
    pub high_level: f64,
    pub scope: TotalScope,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            dissim: DissimilarityParams::default(),
            filter_level: 0.25,
            low_level: 0.10,
            high_level: 0.90,
            scope: TotalScope::Domain,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self, archive: &CountArchive) -> Result<(), AnalysisError> {
        let p = &self.dissim;
        if p.h < 2 {
            return Err(AnalysisError::Param(format!("h must be >= 2 (got {})", p.h)));
        }
        if p.n == 0 || p.n > MAX_PEAKS {
            return Err(AnalysisError::Param(format!("n must be in 1..={MAX_PEAKS} (got {})", p.n)));
        }
        for (name, x) in [
            ("filter level", self.filter_level),
            ("low level", self.low_level),
            ("high level", self.high_level),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return Err(AnalysisError::Param(format!("{name} {x} outside [0, 1]")));
            }
        }
        if p.domain_hi > archive.d_max() {
            return Err(AnalysisError::DomainBeyondCap {
                domain_hi: p.domain_hi,
                d_max: archive.d_max(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PairStatus {
    Ok,
    /// Self-paired word; dissimilarity is zero and kept out of percentiles.
    Palindromic,
    /// A member has no peak; dissimilarity undefined.
    Peakless,
    /// Dropped by the low-count filter.
    Excluded,
}

impl PairStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PairStatus::Ok => "ok",
            PairStatus::Palindromic => "palindromic",
            PairStatus::Peakless => "peakless",
            PairStatus::Excluded => "excluded",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub pair: SymmetricPair,
    pub s_w: u64,
    pub s_wbar: u64,
    pub d: Option<f64>,
    pub matching: Option<Vec<usize>>,
    pub status: PairStatus,
}

impl PairRecord {
    /// `max(S/S̄, S̄/S)`, undefined when either total is zero.
    pub fn total_ratio(&self) -> Option<f64> {
        if self.s_w == 0 || self.s_wbar == 0 {
            return None;
        }
        let (a, b) = (self.s_w as f64, self.s_wbar as f64);
        Some((a / b).max(b / a))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub totals: FiveNumber,
    pub ratio_all: Option<FiveNumber>,
    pub d_retained: Option<FiveNumber>,
    pub ratio_retained: Option<FiveNumber>,
    pub threshold: f64,
    pub pairs_total: usize,
    pub pairs_retained: usize,
    pub pairs_excluded: usize,
    pub pairs_peakless: usize,
    pub pairs_palindromic: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub low_cut: f64,
    pub high_cut: f64,
    pub low_pairs: Vec<PairRecord>,
    pub high_pairs: Vec<PairRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub summary: SummaryStats,
    pub selection: Option<SelectionReport>,
    /// Every pair, sorted by `d` (undefined last), then by `w`.
    pub pairs: Vec<PairRecord>,
}

/// Orders by `d` ascending with undefined values last, then by word.
pub fn by_dissimilarity(a: &PairRecord, b: &PairRecord) -> std::cmp::Ordering {
    match (a.d, b.d) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    }
    .then(a.pair.w.cmp(&b.pair.w))
}

/// Aggregate distributions for every word, indexed by code.
pub fn distributions(archive: &CountArchive, domain_hi: u32) -> Result<Vec<DistanceDistribution>, AnalysisError> {
    let k = archive.k();
    archive
        .aggregate()
        .par_iter()
        .enumerate()
        .map(|(code, h)| {
            let w = WordCode::new(code as u32, k)?;
            Ok(to_distribution(w, h, domain_hi)?)
        })
        .collect()
}

/// Dissimilarity record of one pair from precomputed peak sets.
pub fn evaluate_pair(
    pair: SymmetricPair,
    s_w: u64,
    s_wbar: u64,
    ps_w: &PeakSet,
    ps_wbar: &PeakSet,
) -> Result<PairRecord, AnalysisError> {
    let mut rec = PairRecord { pair, s_w, s_wbar, d: None, matching: None, status: PairStatus::Ok };
    if ps_w.is_peakless() || ps_wbar.is_peakless() {
        rec.status = PairStatus::Peakless;
        return Ok(rec);
    }
    let m = distribution_dissimilarity(ps_w, ps_wbar)?;
    rec.d = Some(m.value);
    rec.matching = Some(m.matching);
    if pair.palindromic {
        rec.status = PairStatus::Palindromic;
    }
    Ok(rec)
}

pub fn run_pipeline(archive: &CountArchive, params: &PipelineParams) -> Result<PipelineReport, AnalysisError> {
    params.validate(archive)?;
    let k = archive.k();
    let p = params.dissim;
    let dists = distributions(archive, p.domain_hi)?;
    let totals: Vec<u64> = archive
        .aggregate()
        .iter()
        .map(|h| word_total(h, k, p.domain_hi, params.scope))
        .collect();
    let pairs = enumerate_pairs(k)?;
    let filter = filter_pairs(&pairs, &totals, params.filter_level)?;

    let peak_sets: Vec<PeakSet> = dists
        .par_iter()
        .map(|f| find_peaks(f, p.h, p.n))
        .collect::<Result<_, _>>()?;

    let mut records: Vec<PairRecord> = filter
        .retained
        .par_iter()
        .map(|&pair| {
            let (a, b) = (pair.w.code() as usize, pair.w_bar.code() as usize);
            evaluate_pair(pair, totals[a], totals[b], &peak_sets[a], &peak_sets[b])
        })
        .collect::<Result<_, _>>()?;
    let retained_ratios: Vec<f64> = records.iter().filter_map(PairRecord::total_ratio).collect();
    records.extend(filter.excluded.iter().map(|&pair| PairRecord {
        pair,
        s_w: totals[pair.w.code() as usize],
        s_wbar: totals[pair.w_bar.code() as usize],
        d: None,
        matching: None,
        status: PairStatus::Excluded,
    }));
    records.sort_by(by_dissimilarity);

    let all_ratios: Vec<f64> = records.iter().filter_map(PairRecord::total_ratio).collect();
    let defined: Vec<&PairRecord> = records.iter().filter(|r| r.status == PairStatus::Ok).collect();
    let d_values: Vec<f64> = defined.iter().filter_map(|r| r.d).collect();
    let five = |v: &[f64]| if v.is_empty() { Ok(None) } else { FiveNumber::of(v).map(Some) };
    let count = |s: PairStatus| records.iter().filter(|r| r.status == s).count();

    let summary = SummaryStats {
        totals: FiveNumber::of(&totals.iter().map(|&s| s as f64).collect::<Vec<_>>())?,
        ratio_all: five(&all_ratios)?,
        d_retained: five(&d_values)?,
        ratio_retained: five(&retained_ratios)?,
        threshold: filter.threshold,
        pairs_total: pairs.len(),
        pairs_retained: filter.retained.len(),
        pairs_excluded: filter.excluded.len(),
        pairs_peakless: count(PairStatus::Peakless),
        pairs_palindromic: count(PairStatus::Palindromic),
    };

    let selection = if d_values.is_empty() {
        None
    } else {
        let low_cut = quantile(&d_values, params.low_level)?;
        let high_cut = quantile(&d_values, params.high_level)?;
        let pick = |keep: &dyn Fn(f64) -> bool| -> Vec<PairRecord> {
            defined
                .iter()
                .filter(|r| r.d.is_some_and(keep))
                .map(|r| (*r).clone())
                .collect()
        };
        Some(SelectionReport {
            low_cut,
            high_cut,
            low_pairs: pick(&|d| d <= low_cut),
            high_pairs: pick(&|d| d >= high_cut),
        })
    };

    Ok(PipelineReport { summary, selection, pairs: records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChromosomeLocalization {
    pub chromosome: String,
    pub at_favoured: u64,
    pub total: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    /// Pair member with the larger strongest peak.
    pub word: WordCode,
    pub pair: SymmetricPair,
    /// Selected peaks of positive size.
    pub favoured: Vec<Peak>,
    pub per_chromosome: Vec<ChromosomeLocalization>,
    pub top_chromosome: Option<String>,
    pub intervals: Vec<Interval>,
}

impl LocalizationReport {
    /// Integer distances searched for in the sequence.
    pub fn favoured_distances(&self) -> Vec<u64> {
        self.favoured.iter().map(|p| p.location.floor() as u64).collect()
    }
}

/// Finds where the favoured distances of `word`'s pair are most pronounced.
/// Intervals stay empty; see [`locate_intervals`].
pub fn localize(
    archive: &CountArchive,
    word: WordCode,
    params: &PipelineParams,
) -> Result<LocalizationReport, AnalysisError> {
    params.validate(archive)?;
    let k = archive.k();
    if word.k() != k {
        return Err(AnalysisError::WordLength { word: word.k(), archive: k });
    }
    let p = params.dissim;
    let pair = SymmetricPair::of(word);
    let peaks_of = |w: WordCode| -> Result<PeakSet, AnalysisError> {
        let f = to_distribution(w, archive.histogram(w), p.domain_hi)?;
        Ok(find_peaks(&f, p.h, p.n)?)
    };
    let ps_w = peaks_of(pair.w)?;
    let ps_wbar = peaks_of(pair.w_bar)?;
    let strongest = if ps_wbar.v > ps_w.v { ps_wbar } else { ps_w };
    if strongest.is_peakless() {
        return Err(DissimError::Peakless.into());
    }
    let favoured: Vec<Peak> = strongest.peaks.iter().copied().filter(|p| p.size > 0.0).collect();

    let lo = k as u32 + 1;
    let code = strongest.word.code() as usize;
    let per_chromosome: Vec<ChromosomeLocalization> = archive
        .chromosomes()
        .map(|c| {
            let h = &c.histograms[code];
            let total = h.total_in(lo, p.domain_hi);
            let at_favoured: u64 = h
                .iter()
                .filter(|&(d, _)| favoured.iter().any(|pk| d >= pk.start && d <= pk.end))
                .map(|(_, n)| n)
                .sum();
            let ratio = if total == 0 { 0.0 } else { at_favoured as f64 / total as f64 };
            ChromosomeLocalization {
                chromosome: c.record.id.clone(),
                at_favoured,
                total,
                ratio,
            }
        })
        .collect();
    // chromosomes iterate in id order, so strict '>' keeps the smallest id on ties
    let mut top: Option<&ChromosomeLocalization> = None;
    for c in &per_chromosome {
        if c.total > 0 && top.map_or(true, |t| c.ratio > t.ratio) {
            top = Some(c);
        }
    }
    let top_chromosome = top.map(|c| c.chromosome.clone());

    Ok(LocalizationReport {
        word: strongest.word,
        pair,
        favoured,
        per_chromosome,
        top_chromosome,
        intervals: Vec::new(),
    })
}

struct Fanout(Vec<PositionFinder>);

impl SegmentSink for Fanout {
    fn begin_segment(&mut self, chromosome_id: &str, segment_index: usize, start_offset: u64) {
        for f in &mut self.0 {
            f.begin_segment(chromosome_id, segment_index, start_offset);
        }
    }
    fn extend_segment(&mut self, bases: &[u8]) {
        for f in &mut self.0 {
            f.extend_segment(bases);
        }
    }
    fn end_segment(&mut self) {
        for f in &mut self.0 {
            f.end_segment();
        }
    }
}

/// Scans FASTA files for occurrence pairs of the report's word at each
/// favoured distance on the top chromosome, filling `report.intervals`.
pub fn locate_intervals<P: AsRef<Path>>(report: &mut LocalizationReport, fasta: &[P]) -> Result<(), AnalysisError> {
    let Some(top) = report.top_chromosome.clone() else {
        return Ok(());
    };
    let mut distances = report.favoured_distances();
    distances.sort_unstable();
    distances.dedup();
    let mut sink = Fanout(
        distances
            .iter()
            .map(|&d| PositionFinder::new(report.word, d, Some(top.clone())))
            .collect(),
    );
    for path in fasta {
        FastaReader::open(path)?.scan(&mut sink)?;
    }
    let mut intervals: Vec<Interval> = sink.0.into_iter().flat_map(|f| f.intervals).collect();
    intervals.sort();
    intervals.dedup();
    report.intervals = intervals;
    Ok(())
}
