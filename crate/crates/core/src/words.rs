//! Fixed-length words over {A,C,G,T} packed two bits per base.
//!
//! Digits are A=0, C=1, G=2, T=3 with the first letter in the most
//! significant position, so the complement of a digit is `3 - digit`
//! (equivalently `digit ^ 3`).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest supported word length; codes fit in 30 bits.
pub const MAX_K: usize = 15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("word length {0} out of range 1..={MAX_K}")]
    LengthOutOfRange(usize),
    #[error("invalid nucleotide {0:?} in word")]
    InvalidBase(char),
    #[error("code {code} does not fit a word of length {k}")]
    CodeOutOfRange { code: u32, k: usize },
}

/// Two-bit code of an uppercase or lowercase nucleotide, `None` for anything else.
#[inline(always)]
pub fn base_code(b: u8) -> Option<u32> {
    match b {
        b'A' | b'a' => Some(0),
        b'C' | b'c' => Some(1),
        b'G' | b'g' => Some(2),
        b'T' | b't' => Some(3),
        _ => None,
    }
}

pub const BASES: [u8; 4] = [b'A', b'C', b'G', b'T'];

/// Number of distinct words of length `k`.
#[inline]
pub fn word_count(k: usize) -> usize {
    1usize << (2 * k)
}

#[inline]
pub fn check_k(k: usize) -> Result<(), WordError> {
    if (1..=MAX_K).contains(&k) {
        Ok(())
    } else {
        Err(WordError::LengthOutOfRange(k))
    }
}

/// Packed identity of a k-mer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordCode {
    code: u32,
    k: u8,
}

impl WordCode {
    pub fn new(code: u32, k: usize) -> Result<Self, WordError> {
        check_k(k)?;
        if (code as usize) >= word_count(k) {
            return Err(WordError::CodeOutOfRange { code, k });
        }
        Ok(WordCode { code, k: k as u8 })
    }

    /// Caller guarantees `k` is valid and `code < 4^k`.
    #[inline]
    pub(crate) fn from_raw(code: u32, k: usize) -> Self {
        debug_assert!(k >= 1 && k <= MAX_K && (code as usize) < word_count(k));
        WordCode { code, k: k as u8 }
    }

    pub fn encode(text: &[u8]) -> Result<Self, WordError> {
        check_k(text.len())?;
        let mut code = 0u32;
        for &b in text {
            let c = base_code(b).ok_or(WordError::InvalidBase(b as char))?;
            code = (code << 2) | c;
        }
        Ok(WordCode::from_raw(code, text.len()))
    }

    #[inline]
    pub fn code(self) -> u32 {
        self.code
    }

    #[inline]
    pub fn k(self) -> usize {
        self.k as usize
    }

    pub fn decode(self) -> String {
        let k = self.k();
        (0..k)
            .map(|i| {
                let shift = 2 * (k - 1 - i);
                BASES[((self.code >> shift) & 3) as usize] as char
            })
            .collect()
    }

    /// Letters reversed, each complemented (A<->T, C<->G).
    pub fn reverse_complement(self) -> Self {
        let k = self.k();
        let mut fwd = self.code;
        let mut rc = 0u32;
        for _ in 0..k {
            rc = (rc << 2) | (3 - (fwd & 3));
            fwd >>= 2;
        }
        WordCode::from_raw(rc, k)
    }

    #[inline]
    pub fn is_palindromic(self) -> bool {
        self.reverse_complement() == self
    }
}

impl fmt::Display for WordCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.decode())
    }
}

impl FromStr for WordCode {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WordCode::encode(s.as_bytes())
    }
}

/// A word and its reversed complement, stored with `w <= w_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymmetricPair {
    pub w: WordCode,
    pub w_bar: WordCode,
    pub palindromic: bool,
}

impl SymmetricPair {
    /// Canonical pair containing `word`.
    pub fn of(word: WordCode) -> Self {
        let rc = word.reverse_complement();
        let (w, w_bar) = if word <= rc { (word, rc) } else { (rc, word) };
        SymmetricPair {
            w,
            w_bar,
            palindromic: w == w_bar,
        }
    }
}

/// All symmetric pairs of length `k`, sorted by `w`. Palindromic words pair
/// with themselves.
pub fn enumerate_pairs(k: usize) -> Result<Vec<SymmetricPair>, WordError> {
    check_k(k)?;
    let pairs = (0..word_count(k) as u32)
        .map(|c| WordCode::from_raw(c, k))
        .filter(|w| *w <= w.reverse_complement())
        .map(SymmetricPair::of)
        .collect();
    Ok(pairs)
}
