//! End-to-end checks of the pair analysis against a reference built only
//! from string scans and brute-force searches.

use std::collections::BTreeMap;
use std::io::Cursor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symdist::analysis::{localize, locate_intervals, run_pipeline, PairStatus, PipelineParams};
use symdist::distances::count_distances;
use symdist::seq_io::FastaReader;
use symdist::words::WordCode;

const K: usize = 2;
const HI: u32 = 1000;

fn count(fasta: &str) -> symdist::CountArchive {
    let segs = FastaReader::from_reader(Cursor::new(fasta.as_bytes().to_vec()), "mem")
        .unwrap()
        .segments();
    count_distances(segs, K, HI).unwrap()
}

fn rc(w: &str) -> String {
    w.chars()
        .rev()
        .map(|c| match c {
            'A' => 'T',
            'C' => 'G',
            'G' => 'C',
            _ => 'A',
        })
        .collect()
}

fn type7(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    if i + 1 >= v.len() {
        v[i]
    } else {
        v[i] + (h - i as f64) * (v[i + 1] - v[i])
    }
}

struct RefPeaks {
    peaks: Vec<(f64, f64)>,
    v: f64,
}

/// Frequencies on [K+1, HI] from a plain string scan of every N-free run.
fn ref_frequencies(chroms: &[String], word: &str) -> (Vec<f64>, u64) {
    let mut counts = vec![0u64; (HI - K as u32) as usize];
    for c in chroms {
        for run in c.split('N') {
            let pos: Vec<usize> = (0..run.len().saturating_sub(K - 1))
                .filter(|&p| &run[p..p + K] == word)
                .collect();
            for w in pos.windows(2) {
                let d = (w[1] - w[0]) as u32;
                if d > K as u32 && d <= HI {
                    counts[(d - K as u32 - 1) as usize] += 1;
                }
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let freqs = counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect();
    (freqs, total)
}

fn ref_peaks(f: &[f64], h: usize, n: usize) -> RefPeaks {
    let size = |s: usize| (s..s + h - 1).map(|i| (f[i + 1] - f[i]).abs()).sum::<f64>() / (h - 1) as f64;
    let mut taken: Vec<usize> = Vec::new();
    while taken.len() < n {
        let best = (0..=f.len() - h)
            .filter(|&s| taken.iter().all(|&t| s + h <= t || t + h <= s))
            .max_by(|&a, &b| {
                size(a)
                    .total_cmp(&size(b))
                    .then(f[a + (h - 1) / 2].total_cmp(&f[b + (h - 1) / 2]))
                    .then(b.cmp(&a))
            })
            .unwrap();
        taken.push(best);
    }
    let peaks: Vec<(f64, f64)> = taken
        .iter()
        .map(|&s| ((K + 1 + s) as f64 + (h - 1) as f64 / 2.0, size(s)))
        .collect();
    RefPeaks { v: peaks[0].1, peaks }
}

fn ref_d(a: &RefPeaks, b: &RefPeaks) -> f64 {
    let r = (HI - K as u32 - 1) as f64;
    let norm = a.v.min(b.v);
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    perms
        .iter()
        .map(|p| {
            (0..3)
                .map(|i| {
                    let (x, y) = (a.peaks[i], b.peaks[p[i]]);
                    ((x.0 - y.0).abs() / r + 1.0) * ((x.1 - y.1).abs() / norm + 1.0) - 1.0
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn toy_genome_matches_reference_pipeline() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let chroms: Vec<String> = (0..2)
        .map(|_| {
            (0..5000)
                .map(|_| if rng.gen_bool(0.01) { 'N' } else { ['A', 'C', 'G', 'T'][rng.gen_range(0..4)] })
                .collect()
        })
        .collect();
    let fasta: String = chroms
        .iter()
        .enumerate()
        .map(|(i, s)| format!(">t{i}\n{s}\n"))
        .collect();
    let report = run_pipeline(&count(&fasta), &PipelineParams::default()).unwrap();

    let words: Vec<String> = (0..16).map(|c| WordCode::new(c, K).unwrap().to_string()).collect();
    let freq: BTreeMap<&str, (Vec<f64>, u64)> =
        words.iter().map(|w| (w.as_str(), ref_frequencies(&chroms, w))).collect();
    let totals: Vec<f64> = freq.values().map(|(_, s)| *s as f64).collect();
    let q1 = type7(&totals, 0.25);
    assert_eq!(report.summary.threshold, q1);

    let mut expected_d = Vec::new();
    for r in &report.pairs {
        let (w, wb) = (r.pair.w.to_string(), r.pair.w_bar.to_string());
        assert_eq!(wb, rc(&w));
        let (fw, sw) = &freq[w.as_str()];
        let (fb, sb) = &freq[wb.as_str()];
        assert_eq!((r.s_w, r.s_wbar), (*sw, *sb));
        if (*sw.min(sb) as f64) <= q1 {
            assert_eq!(r.status, PairStatus::Excluded, "{w}");
            continue;
        }
        let want = ref_d(&ref_peaks(fw, 5, 3), &ref_peaks(fb, 5, 3));
        let got = r.d.unwrap();
        assert!((got - want).abs() <= 1e-12, "{w}: {got} vs {want}");
        if w == wb {
            assert_eq!(r.status, PairStatus::Palindromic);
        } else {
            assert_eq!(r.status, PairStatus::Ok);
            expected_d.push(want);
        }
    }
    let sel = report.selection.unwrap();
    assert!((sel.low_cut - type7(&expected_d, 0.10)).abs() <= 1e-12);
    assert!((sel.high_cut - type7(&expected_d, 0.90)).abs() <= 1e-12);
    let low = expected_d.iter().filter(|&&d| d <= sel.low_cut).count();
    assert_eq!(sel.low_pairs.len(), low);
}

#[test]
fn localizes_fixed_gap_repeat() {
    // ACG recurs every 50 bases on c2 only; neither filler contains ACG or CGT
    let c1 = "GATTACA".repeat(300);
    let c2 = format!("{}ACG", format!("ACG{}", "T".repeat(47)).repeat(20));
    let fasta = format!(">c1\n{c1}\n>c2\n{c2}\n");
    let archive = {
        let segs = FastaReader::from_reader(Cursor::new(fasta.clone().into_bytes()), "mem")
            .unwrap()
            .segments();
        count_distances(segs, 3, 1000).unwrap()
    };
    let word: WordCode = "ACG".parse().unwrap();
    let mut report = localize(&archive, word, &PipelineParams::default()).unwrap();
    assert_eq!(report.word, word);
    assert_eq!(report.favoured_distances(), vec![50]);
    assert_eq!(report.top_chromosome.as_deref(), Some("c2"));
    let c2_row = report.per_chromosome.iter().find(|c| c.chromosome == "c2").unwrap();
    assert_eq!(c2_row.ratio, 1.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.fa");
    std::fs::write(&path, &fasta).unwrap();
    locate_intervals(&mut report, &[&path]).unwrap();
    let expected: Vec<(u64, u64)> = (0..20u64).map(|i| (50 * i, 50 * i + 53)).collect();
    let got: Vec<(u64, u64)> = report
        .intervals
        .iter()
        .inspect(|iv| assert_eq!(iv.chromosome, "c2"))
        .map(|iv| (iv.start, iv.end))
        .collect();
    assert_eq!(got, expected);
}

#[test]
fn single_occurrences_are_peakless() {
    let fasta = ">c1\nACGTTT\n>c2\nTTACGA\n";
    let segs = FastaReader::from_reader(Cursor::new(fasta.as_bytes().to_vec()), "mem")
        .unwrap()
        .segments();
    let archive = count_distances(segs, 3, 1000).unwrap();
    assert!(localize(&archive, "ACG".parse().unwrap(), &PipelineParams::default()).is_err());
}
