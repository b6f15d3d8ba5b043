//! Truncated photonic Hilbert spaces for BPSK coherent-state codewords.
//!
//! A codeword of `N` bits is sent as `N` consecutive coherent pulses
//! `|(-1)^{c_i} α⟩`. In the weak-field regime the product state is expanded
//! in photon number and cut off after one photon (vacuum + one photon in any
//! bin) or after two photons in *distinct* bins. Basis order is always
//! vacuum, singles by increasing bin, then pairs `(i, j)` with `i < j` in
//! lexicographic order. Bins are 0-based in code and printed as Fock strings
//! such as `0100`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Occupation pattern of one basis vector of a truncated space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinPattern {
    Vacuum,
    Single(usize),
    Pair(usize, usize),
}

impl BinPattern {
    pub fn photon_count(&self) -> usize {
        match self {
            BinPattern::Vacuum => 0,
            BinPattern::Single(_) => 1,
            BinPattern::Pair(..) => 2,
        }
    }

    pub fn occupies(&self, bin: usize) -> bool {
        match *self {
            BinPattern::Vacuum => false,
            BinPattern::Single(i) => i == bin,
            BinPattern::Pair(i, j) => i == bin || j == bin,
        }
    }

    /// Fock-string label over `n_bins` bins, e.g. `Single(1)` → `0100`.
    pub fn fock_label(&self, n_bins: usize) -> String {
        (0..n_bins)
            .map(|b| if self.occupies(b) { '1' } else { '0' })
            .collect()
    }
}

/// Photon-number cutoff of the weak-field expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truncation {
    /// Vacuum plus one photon in any bin; dimension `N + 1`.
    OnePhoton,
    /// Additionally two photons in distinct bins; dimension `1 + N + N(N-1)/2`.
    TwoPhoton,
}

impl Truncation {
    pub fn max_photons(&self) -> usize {
        match self {
            Truncation::OnePhoton => 1,
            Truncation::TwoPhoton => 2,
        }
    }

    pub fn from_max_photons(max_photons: usize) -> Result<Self> {
        match max_photons {
            1 => Ok(Truncation::OnePhoton),
            2 => Ok(Truncation::TwoPhoton),
            m => invalid(format!("max_photons must be 1 or 2, got {m}")),
        }
    }

    pub fn basis(&self, n_bins: usize) -> Vec<BinPattern> {
        let mut basis = Vec::with_capacity(self.dim(n_bins));
        basis.push(BinPattern::Vacuum);
        basis.extend((0..n_bins).map(BinPattern::Single));
        if *self == Truncation::TwoPhoton {
            for i in 0..n_bins {
                for j in i + 1..n_bins {
                    basis.push(BinPattern::Pair(i, j));
                }
            }
        }
        basis
    }

    pub fn dim(&self, n_bins: usize) -> usize {
        match self {
            Truncation::OnePhoton => n_bins + 1,
            Truncation::TwoPhoton => 1 + n_bins + n_bins * n_bins.saturating_sub(1) / 2,
        }
    }

    /// Normalized codeword state under this cutoff.
    pub fn codeword_state(&self, c: &Codeword, alpha: f64) -> Result<TruncatedPhotonicState> {
        match self {
            Truncation::OnePhoton => bpsk_codeword_state(c, alpha),
            Truncation::TwoPhoton => two_photon_codeword_state(c, alpha),
        }
    }
}

/// Binary codeword `c_1 … c_N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword {
    bits: Vec<u8>,
}

impl Codeword {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return invalid("codeword must have at least one bit");
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return invalid(format!("codeword bit {b} is not binary"));
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

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| b ^ 1).collect(),
        }
    }

    /// `(-1)^{c_i}` as a float.
    fn sign(&self, i: usize) -> f64 {
        if self.bits[i] == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl FromStr for Codeword {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Codeword::new(parse_bits(s)?)
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bits(f, &self.bits)
    }
}

pub(crate) fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            other => invalid(format!("unexpected character {other:?} in bit string {s:?}")),
        })
        .collect()
}

pub(crate) fn write_bits(f: &mut fmt::Formatter<'_>, bits: &[u8]) -> fmt::Result {
    for b in bits {
        write!(f, "{b}")?;
    }
    Ok(())
}

/// Amplitude vector over a truncated multi-bin Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPhotonicState {
    amplitudes: DVector<Complex64>,
    basis: Vec<BinPattern>,
    n_bins: usize,
    max_photons: usize,
}

impl TruncatedPhotonicState {
    pub fn new(
        amplitudes: DVector<Complex64>,
        n_bins: usize,
        truncation: Truncation,
    ) -> Result<Self> {
        let basis = truncation.basis(n_bins);
        if amplitudes.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                actual: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            basis,
            n_bins,
            max_photons: truncation.max_photons(),
        })
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn basis(&self) -> &[BinPattern] {
        &self.basis
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn max_photons(&self) -> usize {
        self.max_photons
    }

    pub fn truncation(&self) -> Truncation {
        if self.max_photons == 1 {
            Truncation::OnePhoton
        } else {
            Truncation::TwoPhoton
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn squared_norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitude of the basis vector with the given pattern, if present.
    pub fn amplitude(&self, pattern: BinPattern) -> Option<Complex64> {
        self.basis
            .iter()
            .position(|&p| p == pattern)
            .map(|i| self.amplitudes[i])
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> DMatrix<Complex64> {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    fn normalized(mut self) -> Self {
        let norm = self.squared_norm().sqrt();
        self.amplitudes /= Complex64::new(norm, 0.0);
        self
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return invalid(format!("alpha must be a finite non-negative real, got {alpha}"));
    }
    Ok(())
}

/// Fock amplitudes `e^{-α²/2} α^j / √(j!)` for `j = 0..=max_photons`.
///
/// Not renormalized after the cutoff.
pub fn coherent_truncated(alpha: f64, max_photons: usize) -> Result<Vec<Complex64>> {
    check_alpha(alpha)?;
    if max_photons < 1 {
        return invalid("max_photons must be at least 1");
    }
    let envelope = (-0.5 * alpha * alpha).exp();
    let mut amp = envelope;
    let mut out = Vec::with_capacity(max_photons + 1);
    for j in 0..=max_photons {
        if j > 0 {
            amp *= alpha / (j as f64).sqrt();
        }
        out.push(Complex64::new(amp, 0.0));
    }
    Ok(out)
}

/// Unnormalized cut-off expansion of `⊗ |(-1)^{c_i} α⟩`.
///
/// Same-bin multi-photon terms are never part of the expansion.
pub fn truncated_expansion(
    c: &Codeword,
    alpha: f64,
    truncation: Truncation,
) -> Result<TruncatedPhotonicState> {
    check_alpha(alpha)?;
    let n = c.len();
    if truncation == Truncation::TwoPhoton && n < 2 {
        return invalid("two-photon states need at least two bins");
    }
    let envelope = (-0.5 * n as f64 * alpha * alpha).exp();
    let amplitudes: Vec<Complex64> = truncation
        .basis(n)
        .iter()
        .map(|p| {
            let v = match *p {
                BinPattern::Vacuum => 1.0,
                BinPattern::Single(i) => c.sign(i) * alpha,
                BinPattern::Pair(i, j) => c.sign(i) * c.sign(j) * alpha * alpha,
            };
            Complex64::new(envelope * v, 0.0)
        })
        .collect();
    TruncatedPhotonicState::new(DVector::from_vec(amplitudes), n, truncation)
}

/// BPSK codeword projected onto the vacuum + one-photon subspace, unit norm.
pub fn bpsk_codeword_state(c: &Codeword, alpha: f64) -> Result<TruncatedPhotonicState> {
    Ok(truncated_expansion(c, alpha, Truncation::OnePhoton)?.normalized())
}

/// BPSK codeword cut off after two photons in distinct bins, unit norm.
pub fn two_photon_codeword_state(c: &Codeword, alpha: f64) -> Result<TruncatedPhotonicState> {
    Ok(truncated_expansion(c, alpha, Truncation::TwoPhoton)?.normalized())
}

/// Probability mass lost to the photon-number cutoff.
///
/// Identical for every codeword since only `|α|²` enters.
pub fn residual_multiphoton_probability(
    c: &Codeword,
    alpha: f64,
    max_photons: usize,
) -> Result<f64> {
    let truncation = Truncation::from_max_photons(max_photons)?;
    check_alpha(alpha)?;
    Ok(residual_mass(c.len(), alpha, truncation))
}

/// Closed form of [`residual_multiphoton_probability`] for `n_bins` bins.
pub fn residual_mass(n_bins: usize, alpha: f64, truncation: Truncation) -> f64 {
    let n = n_bins as f64;
    let nbar = alpha * alpha;
    let mut kept = 1.0 + n * nbar;
    if truncation == Truncation::TwoPhoton {
        kept += n * (n - 1.0) / 2.0 * nbar * nbar;
    }
    // -expm1 keeps precision when the kept mass is within 1e-16 of one
    let x = n * nbar;
    let residual = -((-x).exp_m1() * kept + (kept - 1.0));
    residual.max(0.0)
}
