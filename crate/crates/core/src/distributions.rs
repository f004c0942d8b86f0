//! Relative-frequency distributions on a restricted distance domain, order
//! statistics, and the low-count pair filter.

use thiserror::Error;

use crate::distances::DistanceHistogram;
use crate::words::{SymmetricPair, WordCode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("quantile of an empty set")]
    Empty,
    #[error("quantile level {0} outside [0, 1]")]
    Level(f64),
    #[error("domain upper bound {hi} must exceed {lo}")]
    Domain { lo: u32, hi: u32 },
}

/// Which counts enter the per-word total used by the pair filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TotalScope {
    /// Counts on the restricted domain only.
    #[default]
    Domain,
    /// Every recorded distance.
    AllRecorded,
}

/// `f^w` on `[lo, hi]` with `total` the absolute count on that domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceDistribution {
    pub word: WordCode,
    pub lo: u32,
    pub hi: u32,
    pub freqs: Vec<f64>,
    pub total: u64,
}

impl DistanceDistribution {
    /// Builds a distribution directly from frequencies starting at `lo`.
    pub fn from_frequencies(word: WordCode, lo: u32, freqs: Vec<f64>) -> Self {
        assert!(!freqs.is_empty());
        let hi = lo + freqs.len() as u32 - 1;
        DistanceDistribution { word, lo, hi, freqs, total: 0 }
    }

    /// Frequency at distance `d`, zero outside the domain.
    pub fn at(&self, d: u32) -> f64 {
        if d < self.lo || d > self.hi {
            0.0
        } else {
            self.freqs[(d - self.lo) as usize]
        }
    }

    /// Domain range `hi - lo`.
    pub fn range(&self) -> u32 {
        self.hi - self.lo
    }
}

/// Domain `[k+1, domain_hi]`.
pub fn domain(k: usize, domain_hi: u32) -> Result<(u32, u32), StatsError> {
    let lo = k as u32 + 1;
    if domain_hi <= lo {
        return Err(StatsError::Domain { lo, hi: domain_hi });
    }
    Ok((lo, domain_hi))
}

pub fn to_distribution(
    word: WordCode,
    h: &DistanceHistogram,
    domain_hi: u32,
) -> Result<DistanceDistribution, StatsError> {
    let (lo, hi) = domain(word.k(), domain_hi)?;
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for (d, c) in h.iter().filter(|&(d, _)| d >= lo && d <= hi) {
        counts[(d - lo) as usize] = c;
    }
    let total: u64 = counts.iter().sum();
    let freqs = if total == 0 {
        vec![0.0; counts.len()]
    } else {
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    };
    Ok(DistanceDistribution { word, lo, hi, freqs, total })
}

/// `S^w` under the chosen scope.
pub fn word_total(h: &DistanceHistogram, k: usize, domain_hi: u32, scope: TotalScope) -> u64 {
    match scope {
        TotalScope::Domain => h.total_in(k as u32 + 1, domain_hi),
        TotalScope::AllRecorded => h.total(),
    }
}

/// Linear interpolation between order statistics: with sorted `x_1..x_N`,
/// `h = (N-1)p + 1` and the result is `x_⌊h⌋ + (h-⌊h⌋)(x_⌊h⌋+1 - x_⌊h⌋)`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64, StatsError> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> Result<f64, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(StatsError::Level(p));
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return Ok(sorted[lo]);
    }
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// Minimum, quartiles and maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Result<Self, StatsError> {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(FiveNumber {
            min: quantile_sorted(&sorted, 0.0)?,
            q1: quantile_sorted(&sorted, 0.25)?,
            median: quantile_sorted(&sorted, 0.5)?,
            q3: quantile_sorted(&sorted, 0.75)?,
            max: quantile_sorted(&sorted, 1.0)?,
        })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.min, self.q1, self.median, self.q3, self.max]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairFilterResult {
    pub threshold: f64,
    pub retained: Vec<SymmetricPair>,
    pub excluded: Vec<SymmetricPair>,
}

/// Drops pairs whose smaller total is at or below the `level` quantile of
/// all word totals. `totals` is indexed by word code.
pub fn filter_pairs(
    pairs: &[SymmetricPair],
    totals: &[u64],
    level: f64,
) -> Result<PairFilterResult, StatsError> {
    let values: Vec<f64> = totals.iter().map(|&s| s as f64).collect();
    let threshold = quantile(&values, level)?;
    let (retained, excluded) = pairs.iter().partition(|p| {
        let s = totals[p.w.code() as usize].min(totals[p.w_bar.code() as usize]);
        s as f64 > threshold
    });
    Ok(PairFilterResult { threshold, retained, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> WordCode {
        s.parse().unwrap()
    }

    #[test]
    fn cg_example_distribution() {
        let h = DistanceHistogram::from_pairs([(2, 1), (3, 1), (4, 1), (5, 1)]);
        let f = to_distribution(w("CG"), &h, 1000).unwrap();
        assert_eq!((f.lo, f.hi, f.total), (3, 1000, 3));
        assert_eq!(f.freqs.len(), 998);
        for d in 3..=5 {
            assert_eq!(f.at(d), 1.0 / 3.0);
        }
        assert_eq!(f.at(2), 0.0);
        assert_eq!(f.range(), 997);
    }

    #[test]
    fn empty_and_single() {
        let f = to_distribution(w("ACGTACG"), &DistanceHistogram::new(), 1000).unwrap();
        assert_eq!(f.total, 0);
        assert_eq!(f.freqs.len(), 993);
        assert!(f.freqs.iter().all(|&x| x == 0.0));
        let f = to_distribution(w("ACGTACG"), &DistanceHistogram::from_pairs([(10, 7)]), 1000).unwrap();
        assert_eq!(f.at(10), 1.0);
        assert_eq!(f.freqs.iter().sum::<f64>(), 1.0);
        assert_eq!(f.range(), 992);
        assert!(to_distribution(w("AC"), &DistanceHistogram::new(), 3).is_err());
    }

    #[test]
    fn totals_by_scope() {
        let h = DistanceHistogram::from_pairs([(2, 1), (3, 1), (1001, 5)]);
        assert_eq!(word_total(&h, 2, 1000, TotalScope::Domain), 1);
        assert_eq!(word_total(&h, 2, 1000, TotalScope::AllRecorded), 7);
    }

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((quantile(&v, 0.1).unwrap() - 1.9).abs() < 1e-12);
        assert_eq!(quantile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&v, 1.0).unwrap(), 10.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap(), 1.75);
        assert_eq!(quantile(&[], 0.5), Err(StatsError::Empty));
        assert!(quantile(&[1.0], 1.5).is_err());
        let five = FiveNumber::of(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(five.as_array(), [1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn synthetic_filter() {
        // words A,C,G,T with S = 1,2,3,4; pairs (A,T) and (C,G)
        let pairs = crate::words::enumerate_pairs(1).unwrap();
        let r = filter_pairs(&pairs, &[1, 2, 3, 4], 0.25).unwrap();
        assert_eq!(r.threshold, 1.75);
        assert_eq!(r.excluded, vec![pairs[0]]);
        assert_eq!(r.retained, vec![pairs[1]]);
        // boundary: min equal to the threshold is excluded
        let r = filter_pairs(&pairs, &[2, 2, 2, 2], 0.25).unwrap();
        assert!(r.retained.is_empty());
    }

    proptest! {
        #[test]
        fn frequencies_sum_to_one(entries in prop::collection::vec((1u32..1200, 1u64..10_000), 1..300)) {
            let h = DistanceHistogram::from_pairs(entries);
            let f = to_distribution(w("ACG"), &h, 1000).unwrap();
            if f.total > 0 {
                prop_assert!((f.freqs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            } else {
                prop_assert!(f.freqs.iter().all(|&x| x == 0.0));
            }
        }

        #[test]
        fn quantile_monotone_and_affine(
            v in prop::collection::vec(-1e3f64..1e3, 1..60),
            p in 0.0f64..=1.0, q in 0.0f64..=1.0,
            a in 0.1f64..10.0, b in -100.0f64..100.0,
        ) {
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            prop_assert!(quantile(&v, lo).unwrap() <= quantile(&v, hi).unwrap() + 1e-9);
            let t: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            let expect = a * quantile(&v, p).unwrap() + b;
            prop_assert!((quantile(&t, p).unwrap() - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }

        #[test]
        fn filter_partitions_pairs(totals in prop::collection::vec(0u64..50, 16)) {
            let pairs = crate::words::enumerate_pairs(2).unwrap();
            let r = filter_pairs(&pairs, &totals, 0.25).unwrap();
            prop_assert_eq!(r.retained.len() + r.excluded.len(), pairs.len());
            for p in &r.retained {
                let m = totals[p.w.code() as usize].min(totals[p.w_bar.code() as usize]);
                prop_assert!(m as f64 > r.threshold);
            }
            for p in &r.excluded {
                let m = totals[p.w.code() as usize].min(totals[p.w_bar.code() as usize]);
                prop_assert!(m as f64 <= r.threshold);
            }
        }
    }
}
