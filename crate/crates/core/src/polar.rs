//! Polar encoding over GF(2) with the plain `F^{⊗n}` kernel (no bit reversal).
//!
//! With `F = [[1, 0], [1, 1]]`, entry `G[i][j]` of `F^{⊗n}` is one exactly when
//! the binary digits of `j` are a subset of those of `i`, so
//! `x_j = ⊕_{i ⊇ j} u_i`. For `N = 4` this is
//! `x = (u1⊕u2⊕u3⊕u4, u2⊕u4, u3⊕u4, u4)`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::hilbert::{parse_bits, write_bits, Codeword};

/// Input string `u_1 … u_N` of the polar transform, frozen bits included.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Message {
    bits: Vec<u8>,
}

impl Message {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return invalid(format!("message bit {b} is not binary"));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl FromStr for Message {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Message::new(parse_bits(s)?)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bits(f, &self.bits)
    }
}

fn check_block_length(n: usize) -> Result<()> {
    if !matches!(n, 2 | 4 | 8) {
        return invalid(format!("block length must be 2, 4 or 8, got {n}"));
    }
    Ok(())
}

/// `x = u · F^{⊗n}` over GF(2), computed with the in-place butterfly.
pub fn polar_transform(u: &[u8]) -> Result<Codeword> {
    check_block_length(u.len())?;
    let mut x = u.to_vec();
    if x.iter().any(|&b| b > 1) {
        return invalid("message bits must be binary");
    }
    let n = x.len();
    let mut half = 1;
    while half < n {
        for block in (0..n).step_by(2 * half) {
            for j in block..block + half {
                x[j] ^= x[j + half];
            }
        }
        half *= 2;
    }
    Codeword::new(x)
}

/// Block length, information-bit count and frozen positions of a polar code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarCode {
    n_bins: usize,
    k_info: usize,
    frozen: Vec<bool>,
}

impl PolarCode {
    /// `frozen_positions` are 1-based bit indices, frozen to zero.
    pub fn new(n_bins: usize, k_info: usize, frozen_positions: &[usize]) -> Result<Self> {
        check_block_length(n_bins)?;
        let set: BTreeSet<usize> = frozen_positions.iter().copied().collect();
        if set.len() != frozen_positions.len() {
            return invalid("frozen positions must be distinct");
        }
        if let Some(&p) = set.iter().find(|&&p| p == 0 || p > n_bins) {
            return invalid(format!("frozen position {p} outside 1..={n_bins}"));
        }
        if set.len() + k_info != n_bins {
            return invalid(format!(
                "N - K = {} frozen bits required, got {}",
                n_bins.saturating_sub(k_info),
                set.len()
            ));
        }
        let mut frozen = vec![false; n_bins];
        for p in set {
            frozen[p - 1] = true;
        }
        Ok(Self {
            n_bins,
            k_info,
            frozen,
        })
    }

    /// `N = 2, K = 1`, frozen `{1}`.
    pub fn n2() -> Self {
        Self::new(2, 1, &[1]).expect("valid code")
    }

    /// `N = 4, K = 2`, frozen `{1, 2}`.
    pub fn n4() -> Self {
        Self::new(4, 2, &[1, 2]).expect("valid code")
    }

    /// `N = 8, K = 4`, frozen `{1, 2, 3, 5}` (information bits 4, 6, 7, 8).
    pub fn n8() -> Self {
        Self::new(8, 4, &[1, 2, 3, 5]).expect("valid code")
    }

    /// Rate-1/2 code of the given block length.
    pub fn standard(n_bins: usize) -> Result<Self> {
        match n_bins {
            2 => Ok(Self::n2()),
            4 => Ok(Self::n4()),
            8 => Ok(Self::n8()),
            n => invalid(format!("no built-in code for N = {n}")),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn k_info(&self) -> usize {
        self.k_info
    }

    pub fn rate(&self) -> f64 {
        self.k_info as f64 / self.n_bins as f64
    }

    /// 1-based frozen positions.
    pub fn frozen_positions(&self) -> Vec<usize> {
        (0..self.n_bins)
            .filter(|&i| self.frozen[i])
            .map(|i| i + 1)
            .collect()
    }

    /// 0-based information positions in increasing order.
    pub fn info_indices(&self) -> Vec<usize> {
        (0..self.n_bins).filter(|&i| !self.frozen[i]).collect()
    }

    /// Whether 0-based position `i` is frozen.
    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    /// Fails if `prefix` sets a frozen bit or is longer than `N`.
    pub fn check_prefix(&self, prefix: &[u8]) -> Result<()> {
        if prefix.len() > self.n_bins {
            return invalid(format!(
                "prefix of length {} exceeds block length {}",
                prefix.len(),
                self.n_bins
            ));
        }
        for (i, &b) in prefix.iter().enumerate() {
            if b > 1 {
                return invalid("prefix bits must be binary");
            }
            if self.frozen[i] && b != 0 {
                return invalid(format!("prefix sets frozen bit {} to 1", i + 1));
            }
        }
        Ok(())
    }

    /// All messages extending `prefix` with frozen bits at zero, in
    /// lexicographic order.
    pub fn completions(&self, prefix: &[u8]) -> Result<Vec<Message>> {
        self.check_prefix(prefix)?;
        let free: Vec<usize> = (prefix.len()..self.n_bins)
            .filter(|&i| !self.frozen[i])
            .collect();
        let mut out = Vec::with_capacity(1 << free.len());
        for mask in 0..(1usize << free.len()) {
            let mut bits = prefix.to_vec();
            bits.resize(self.n_bins, 0);
            for (k, &pos) in free.iter().enumerate() {
                // first free position is the most significant digit
                bits[pos] = ((mask >> (free.len() - 1 - k)) & 1) as u8;
            }
            out.push(Message { bits });
        }
        Ok(out)
    }
}

/// Every `(u, x)` pair of a code, messages in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Vec<(Message, Codeword)>,
}

impl Codebook {
    pub fn entries(&self) -> &[(Message, Codeword)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.entries.iter().map(|(u, _)| u)
    }

    pub fn codeword(&self, message: &Message) -> Option<&Codeword> {
        self.entries
            .iter()
            .find(|(u, _)| u == message)
            .map(|(_, x)| x)
    }

    /// Whether two messages share a codeword.
    pub fn has_degenerate_codewords(&self) -> bool {
        let distinct: BTreeSet<&Codeword> = self.entries.iter().map(|(_, x)| x).collect();
        distinct.len() != self.entries.len()
    }
}

pub fn build_codebook(code: &PolarCode) -> Codebook {
    let entries = code
        .completions(&[])
        .expect("empty prefix is always valid")
        .into_iter()
        .map(|u| {
            let x = polar_transform(u.bits()).expect("code block length is validated");
            (u, x)
        })
        .collect();
    Codebook { entries }
}
