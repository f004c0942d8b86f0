//! Strand-symmetric Markov chains for generating null-model sequences.
//!
//! An order-`m` model stores counts of every `(m+1)`-mer seen inside
//! segments. Symmetrising adds each `(m+1)`-mer's count to its reversed
//! complement, so `count(u) == count(rc(u))` holds exactly.
//!
//! Generation uses [`rand_chacha::ChaCha8Rng`] seeded with `seed_from_u64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::seq_io::{SeqError, SequenceSegment};
use crate::words::{WordCode, BASES};

/// Name of the generator, for output metadata.
pub const RNG_NAME: &str = "ChaCha8Rng/seed_from_u64";

/// Longest supported context.
pub const MAX_ORDER: usize = 12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model has no counts")]
    Empty,
    #[error("order {0} exceeds maximum {MAX_ORDER}")]
    Order(usize),
    #[error("requested length {length} must exceed model order {order}")]
    Length { length: usize, order: usize },
    #[error(transparent)]
    Seq(#[from] SeqError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovModel {
    order: usize,
    /// `(m+1)`-mer counts indexed by code: context in the high digits,
    /// next base in the lowest digit.
    counts: Vec<u64>,
    symmetrized: bool,
}

fn rc_code(code: usize, len: usize) -> usize {
    WordCode::new(code as u32, len)
        .expect("valid code")
        .reverse_complement()
        .code() as usize
}

impl MarkovModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }

    /// Count of the `(m+1)`-mer `u`.
    pub fn count(&self, u: WordCode) -> u64 {
        assert_eq!(u.k(), self.order + 1);
        self.counts[u.code() as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Transition row of a context (`m` bases packed as a code).
    pub fn row(&self, context: usize) -> [u64; 4] {
        let base = context << 2;
        [
            self.counts[base],
            self.counts[base + 1],
            self.counts[base + 2],
            self.counts[base + 3],
        ]
    }

    /// P(next base | context), or `None` for an unseen context.
    pub fn probabilities(&self, context: usize) -> Option<[f64; 4]> {
        let r = self.row(context);
        let t: u64 = r.iter().sum();
        (t > 0).then(|| r.map(|c| c as f64 / t as f64))
    }

    /// Counts marginalised down to order `m - drop` by summing over the
    /// oldest context bases.
    fn reduced(&self, drop: usize) -> Vec<u64> {
        let len = 1usize << (2 * (self.order + 1 - drop));
        let mut out = vec![0u64; len];
        for (code, &c) in self.counts.iter().enumerate() {
            out[code & (len - 1)] += c;
        }
        out
    }
}

pub fn train<I>(segments: I, order: usize, symmetrize: bool) -> Result<MarkovModel, ModelError>
where
    I: IntoIterator<Item = Result<SequenceSegment, SeqError>>,
{
    if order > MAX_ORDER {
        return Err(ModelError::Order(order));
    }
    let len = order + 1;
    let mask = (1usize << (2 * len)) - 1;
    let mut raw = vec![0u64; mask + 1];
    for seg in segments {
        let seg = seg?;
        let mut code = 0usize;
        for (i, &b) in seg.bases.iter().enumerate() {
            code = ((code << 2) | crate::words::base_code(b).expect("ACGT segment") as usize) & mask;
            if i + 1 >= len {
                raw[code] += 1;
            }
        }
    }
    let counts = if symmetrize {
        (0..=mask).map(|u| raw[u] + raw[rc_code(u, len)]).collect()
    } else {
        raw
    };
    Ok(MarkovModel { order, counts, symmetrized: symmetrize })
}

/// Picks index `i` with probability `weights[i] / sum`.
fn sample<R: Rng>(rng: &mut R, weights: &[u64]) -> usize {
    let total: u64 = weights.iter().sum();
    let mut x = rng.gen_range(0..total);
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    unreachable!("x < total")
}

/// Generates `length` bases. The first `m` are a context drawn with weight
/// equal to its row total; unseen contexts back off to shorter ones.
pub fn generate(model: &MarkovModel, length: usize, seed: u64) -> Result<Vec<u8>, ModelError> {
    let m = model.order;
    if model.total() == 0 {
        return Err(ModelError::Empty);
    }
    if length <= m {
        return Err(ModelError::Length { length, order: m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // levels[j] holds counts of order m - j
    let levels: Vec<Vec<u64>> = (0..=m)
        .map(|j| if j == 0 { model.counts.clone() } else { model.reduced(j) })
        .collect();

    let mut out = Vec::with_capacity(length);
    let mut ctx = 0usize;
    if m > 0 {
        let totals: Vec<u64> = (0..1usize << (2 * m))
            .map(|c| model.row(c).iter().sum())
            .collect();
        ctx = sample(&mut rng, &totals);
        for i in (0..m).rev() {
            out.push(BASES[(ctx >> (2 * i)) & 3]);
        }
    }
    let ctx_mask = if m == 0 { 0 } else { (1usize << (2 * m)) - 1 };
    while out.len() < length {
        let mut next = None;
        for (j, counts) in levels.iter().enumerate() {
            let order = m - j;
            let c = ctx & ((1usize << (2 * order)) - 1);
            let row = &counts[c << 2..(c << 2) + 4];
            if row.iter().any(|&x| x > 0) {
                next = Some(sample(&mut rng, row));
                break;
            }
        }
        let b = next.ok_or(ModelError::Empty)?;
        out.push(BASES[b]);
        ctx = ((ctx << 2) | b) & ctx_mask;
    }
    Ok(out)
}
