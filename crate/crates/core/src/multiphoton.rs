//! Receiver with room for two photons per codeword.
//!
//! A chain of cavity switches routes the first absorbed photon into one
//! single-photon register module and any later photon into the next. Pairs
//! in the same time bin cannot be routed and count as lost mass.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hilbert::{residual_mass, BinPattern, Truncation};
use crate::polar::PolarCode;
use crate::qsim::TimeBinEncoding;
use crate::scdecoder::{build_sc_povm_with, Povm};

/// Atom-cavity switch, described by its cooperativity `g²/(κγ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchParams {
    cooperativity: f64,
}

impl SwitchParams {
    pub fn new(cooperativity: f64) -> Result<Self> {
        if !(cooperativity >= 0.0) {
            return invalid(format!("cooperativity must be non-negative, got {cooperativity}"));
        }
        Ok(Self { cooperativity })
    }

    pub fn cooperativity(&self) -> f64 {
        self.cooperativity
    }
}

/// Reflection probabilities `(coupled, uncoupled)` of a resonant photon.
pub fn switch_reflectivity(params: SwitchParams) -> (f64, f64) {
    let coop = params.cooperativity;
    if coop.is_infinite() {
        return (1.0, 0.0);
    }
    // squaring before dividing keeps C = 1 at exactly 16/25
    let num = 4.0 * coop;
    let den = 1.0 + 4.0 * coop;
    (num * num / (den * den), 0.0)
}

/// Register layout for two modules of `⌈log₂(N+1)⌉` qubits each.
///
/// The first group holds the arrival bin of the earlier photon, the second
/// group that of the later one; an unused group stays all zero.
pub fn two_photon_encoding(n_bins: usize) -> Result<TimeBinEncoding> {
    if n_bins != 4 && n_bins != 8 {
        return invalid(format!("two-photon encoding is defined for N = 4 or 8, got {n_bins}"));
    }
    let single = TimeBinEncoding::single_photon(n_bins)?;
    let group = single.qubits();
    let enc = |bin: usize| single.registers()[bin + 1];
    let registers = Truncation::TwoPhoton
        .basis(n_bins)
        .into_iter()
        .map(|p| match p {
            BinPattern::Vacuum => 0,
            BinPattern::Single(i) => enc(i) << group,
            BinPattern::Pair(i, j) => (enc(i) << group) | enc(j),
        })
        .collect();
    TimeBinEncoding::new(n_bins, 2 * group, Truncation::TwoPhoton, registers)
}

/// Successive-cancellation POVM on the vacuum, single and distinct-pair space.
pub fn two_photon_povm(code: &PolarCode, alpha: f64, rel_tol: f64) -> Result<Povm> {
    if code.n_bins() != 4 && code.n_bins() != 8 {
        return invalid(format!(
            "two-photon receiver is defined for N = 4 or 8, got {}",
            code.n_bins()
        ));
    }
    build_sc_povm_with(code, alpha, Truncation::TwoPhoton, rel_tol)
}

/// Photon budget when the signal is split over several spatial modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMass {
    pub modes: usize,
    /// Amplitude per bin reaching each receiver.
    pub amplitude_per_mode: f64,
    /// Probability that every receiver stays within its photon cutoff.
    pub captured: f64,
    /// `1 − captured`.
    pub lost: f64,
}

/// Mass captured by `modes` receivers behind a tree of 50/50 splitters.
///
/// Splitting a coherent state gives independent coherent states of amplitude
/// `α/√m`, so the captured mass factorizes over modes.
pub fn spatial_split_mass(
    n_bins: usize,
    alpha: f64,
    modes: usize,
    truncation: Truncation,
) -> Result<SplitMass> {
    if modes == 0 {
        return invalid("need at least one spatial mode");
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return invalid(format!("amplitude must be finite and non-negative, got {alpha}"));
    }
    let amplitude_per_mode = alpha / (modes as f64).sqrt();
    let per_mode = 1.0 - residual_mass(n_bins, amplitude_per_mode, truncation);
    let captured = per_mode.powi(modes as i32);
    Ok(SplitMass {
        modes,
        amplitude_per_mode,
        captured,
        lost: 1.0 - captured,
    })
}
