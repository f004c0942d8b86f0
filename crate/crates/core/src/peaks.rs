//! Sliding-window peak detection on a distance distribution.
//!
//! The size of a window of `h` consecutive distances is the mean absolute
//! difference of its `h - 1` adjacent frequency pairs. Peaks are chosen
//! greedily: the largest window first, then the largest window disjoint
//! from all chosen ones, until `n` are chosen.
//!
//! Ties are broken by the higher frequency at the window midpoint, then by
//! the smaller start. The midpoint rule centres a window on an isolated
//! spike instead of leaving it at the first of several equal windows that
//! contain the spike.

use thiserror::Error;

use crate::distributions::DistanceDistribution;
use crate::words::WordCode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeakError {
    #[error("window width must be at least 2 (got {0})")]
    Width(usize),
    #[error("peak count must be at least 1")]
    Count,
    #[error("window [{start}, {end}] lies outside the domain [{lo}, {hi}]")]
    WindowOutOfDomain { start: u32, end: u32, lo: u32, hi: u32 },
    #[error("domain of {len} distances cannot hold {n} disjoint windows of width {h}")]
    DomainTooShort { len: usize, n: usize, h: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Window midpoint; a half-integer for even widths.
    pub location: f64,
    pub size: f64,
    /// First distance of the window.
    pub start: u32,
    /// Last distance of the window (inclusive).
    pub end: u32,
}

impl Peak {
    /// Bare (location, size) peak, used when peaks come from elsewhere.
    pub fn at(location: f64, size: f64) -> Self {
        Peak { location, size, start: location as u32, end: location as u32 }
    }

    pub fn overlaps(&self, other: &Peak) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub word: WordCode,
    /// Descending by size.
    pub peaks: Vec<Peak>,
    /// Size of the strongest peak.
    pub v: f64,
    /// Domain range `hi - lo`.
    pub range: f64,
}

impl PeakSet {
    /// Constant distributions have no peak worth the name.
    pub fn is_peakless(&self) -> bool {
        self.v <= 0.0
    }
}

#[inline]
fn sizes_from(freqs: &[f64], h: usize) -> Vec<f64> {
    (0..=freqs.len() - h)
        .map(|s| {
            let mut sum = 0.0;
            for i in s..s + h - 1 {
                sum += (freqs[i + 1] - freqs[i]).abs();
            }
            sum / (h - 1) as f64
        })
        .collect()
}

/// Size of the window `[start, start + h - 1]`.
pub fn window_size(f: &DistanceDistribution, start: u32, h: usize) -> Result<f64, PeakError> {
    if h < 2 {
        return Err(PeakError::Width(h));
    }
    let end = start as u64 + h as u64 - 1;
    if start < f.lo || end > f.hi as u64 {
        return Err(PeakError::WindowOutOfDomain {
            start,
            end: end.min(u32::MAX as u64) as u32,
            lo: f.lo,
            hi: f.hi,
        });
    }
    let off = (start - f.lo) as usize;
    Ok(sizes_from(&f.freqs[off..off + h], h)[0])
}

pub fn find_peaks(f: &DistanceDistribution, h: usize, n: usize) -> Result<PeakSet, PeakError> {
    if h < 2 {
        return Err(PeakError::Width(h));
    }
    if n == 0 {
        return Err(PeakError::Count);
    }
    let len = f.freqs.len();
    if len < n * h {
        return Err(PeakError::DomainTooShort { len, n, h });
    }
    let sizes = sizes_from(&f.freqs, h);
    let mid = (h - 1) / 2;
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        sizes[b]
            .total_cmp(&sizes[a])
            .then(f.freqs[b + mid].total_cmp(&f.freqs[a + mid]))
            .then(a.cmp(&b))
    });

    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for s in order {
        if chosen.iter().all(|&c| s + h <= c || c + h <= s) {
            chosen.push(s);
            if chosen.len() == n {
                break;
            }
        }
    }
    if chosen.len() < n {
        // greedy choices left no room for the remaining windows
        return Err(PeakError::DomainTooShort { len, n, h });
    }
    let peaks: Vec<Peak> = chosen
        .into_iter()
        .map(|s| {
            let start = f.lo + s as u32;
            Peak {
                location: start as f64 + (h - 1) as f64 / 2.0,
                size: sizes[s],
                start,
                end: start + h as u32 - 1,
            }
        })
        .collect();
    Ok(PeakSet {
        word: f.word,
        v: peaks[0].size,
        peaks,
        range: f.range() as f64,
    })
}
