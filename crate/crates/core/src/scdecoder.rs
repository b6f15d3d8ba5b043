//! Quantum successive-cancellation decoder.
//!
//! Bit `i` is decided by projecting onto the non-negative (bit 0) or negative
//! (bit 1) eigenspace of `ρ̄(prefix, 0) − ρ̄(prefix, 1)`, where `ρ̄` averages the
//! codeword densities over every completion of a prefix. Frozen positions
//! carry no projector; they are only held at zero inside the averages. The
//! POVM element of a decision path `P_1 … P_m` is the symmetric sandwich
//! `P_1 ⋯ P_{m-1} P_m P_{m-1} ⋯ P_1`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{residual_mass, Truncation};
use crate::linalg::{self, c, CMatrix};
use crate::polar::{build_codebook, polar_transform, Codebook, Message, PolarCode};

/// Relative eigenvalue threshold, scaled by the spectral norm of the
/// difference operator.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;

const ZERO_ALPHA_LIMIT: f64 = 1e-3;
const HERMITIAN_TOL: f64 = 1e-12;
const PROJECTOR_TOL: f64 = 1e-9;
const ROW_SUM_TOL: f64 = 1e-9;
const ENTRY_TOL: f64 = 1e-12;

/// Complex matrix equal to its adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    /// Accepts deviations up to `1e-12` relative to the largest entry and
    /// symmetrizes them away.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return invalid(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        let dev = linalg::hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL * linalg::max_abs(&matrix).max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        let matrix = (&matrix + matrix.adjoint()) * c(0.5);
        Ok(Self { matrix })
    }

    pub fn from_real(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix.map(c))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    /// `⟨ψ|A|ψ⟩`, real for Hermitian `A`.
    pub fn expectation(&self, psi: &nalgebra::DVector<Complex64>) -> Result<f64> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: psi.len(),
            });
        }
        Ok((psi.adjoint() * &self.matrix * psi)[(0, 0)].re)
    }

    /// `Tr(ρA)`.
    pub fn trace_with(&self, rho: &DMatrix<Complex64>) -> Result<f64> {
        if rho.nrows() != self.dim() || rho.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: rho.nrows(),
            });
        }
        Ok(linalg::trace_re(&(rho * &self.matrix)))
    }

    /// Largest entrywise distance to another operator.
    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }
}

/// Orthogonal projector.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    operator: HermitianOperator,
}

impl Projector {
    pub fn new(operator: HermitianOperator) -> Result<Self> {
        let m = operator.matrix();
        let dev = linalg::max_abs_diff(&(m * m), m);
        if dev > PROJECTOR_TOL {
            return invalid(format!("matrix is not idempotent (deviation {dev:e})"));
        }
        Ok(Self { operator })
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.operator
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        self.operator.matrix()
    }

    pub fn rank(&self) -> usize {
        linalg::trace_re(self.matrix()).round() as usize
    }
}

/// Splits `delta` into the projector on eigenvalues `≥ -tol·‖delta‖` and its
/// complement. Zero eigenvalues land in the first projector.
pub fn eigenspace_projectors(
    delta: &HermitianOperator,
    rel_tol: f64,
) -> Result<(Projector, Projector)> {
    let m = delta.matrix();
    let (values, vectors) = linalg::hermitian_eigen(m);
    let threshold = rel_tol * values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let dim = delta.dim();
    let mut nonneg = CMatrix::zeros(dim, dim);
    for (k, &v) in values.iter().enumerate() {
        if v >= -threshold {
            let col = vectors.column(k);
            nonneg += col * col.adjoint();
        }
    }
    let neg = linalg::identity(dim) - &nonneg;
    Ok((
        Projector::new(HermitianOperator::new(nonneg)?)?,
        Projector::new(HermitianOperator::new(neg)?)?,
    ))
}

/// Uniform mixture of one-photon codeword densities over every completion of
/// `prefix`, frozen bits held at zero.
pub fn averaged_density(code: &PolarCode, prefix: &[u8], alpha: f64) -> Result<HermitianOperator> {
    averaged_density_with(code, prefix, alpha, Truncation::OnePhoton)
}

pub fn averaged_density_with(
    code: &PolarCode,
    prefix: &[u8],
    alpha: f64,
    truncation: Truncation,
) -> Result<HermitianOperator> {
    let completions = code.completions(prefix)?;
    let dim = truncation.dim(code.n_bins());
    let mut acc = CMatrix::zeros(dim, dim);
    for u in &completions {
        let x = polar_transform(u.bits())?;
        acc += truncation.codeword_state(&x, alpha)?.density();
    }
    acc /= c(completions.len() as f64);
    HermitianOperator::new(acc)
}

/// `(Π_{prefix 0}, Π_{prefix 1})` for the bit right after `prefix`.
pub fn bit_projectors(
    code: &PolarCode,
    prefix: &[u8],
    alpha: f64,
    truncation: Truncation,
    rel_tol: f64,
) -> Result<(Projector, Projector)> {
    let mut with_zero = prefix.to_vec();
    with_zero.push(0);
    let mut with_one = prefix.to_vec();
    with_one.push(1);
    let rho0 = averaged_density_with(code, &with_zero, alpha, truncation)?;
    let rho1 = averaged_density_with(code, &with_one, alpha, truncation)?;
    let delta = HermitianOperator::new(rho0.matrix() - rho1.matrix())?;
    eigenspace_projectors(&delta, rel_tol)
}

/// One labelled POVM element.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmElement {
    pub label: Message,
    pub operator: HermitianOperator,
}

/// Ordered POVM over a truncated photonic space, one element per message.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<PovmElement>,
    n_bins: usize,
    alpha: f64,
    truncation: Truncation,
}

impl Povm {
    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        self.truncation.dim(self.n_bins)
    }

    pub fn element(&self, label: &str) -> Option<&HermitianOperator> {
        self.elements
            .iter()
            .find(|e| e.label.to_string() == label)
            .map(|e| &e.operator)
    }

    /// `max |∑Λ_y − I|` entrywise.
    pub fn completeness_deviation(&self) -> f64 {
        let dim = self.dim();
        let sum = self
            .elements
            .iter()
            .fold(CMatrix::zeros(dim, dim), |acc, e| acc + e.operator.matrix());
        linalg::max_abs_diff(&sum, &linalg::identity(dim))
    }

    /// Smallest eigenvalue over all elements.
    pub fn min_eigenvalue(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| e.operator.min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn export(&self) -> PovmExport {
        PovmExport {
            n_bins: self.n_bins,
            alpha: self.alpha,
            max_photons: self.truncation.max_photons(),
            basis: self
                .truncation
                .basis(self.n_bins)
                .iter()
                .map(|p| p.fock_label(self.n_bins))
                .collect(),
            elements: self
                .elements
                .iter()
                .map(|e| ElementExport {
                    label: e.label.to_string(),
                    real: rows(e.operator.matrix(), |z| z.re),
                    imag: rows(e.operator.matrix(), |z| z.im),
                })
                .collect(),
        }
    }
}

fn rows<T: nalgebra::Scalar, F: Fn(&T) -> f64>(m: &DMatrix<T>, f: F) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|k| f(&m[(r, k)])).collect())
        .collect()
}

/// JSON form of a [`Povm`]; matrices are row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PovmExport {
    pub n_bins: usize,
    pub alpha: f64,
    pub max_photons: usize,
    pub basis: Vec<String>,
    pub elements: Vec<ElementExport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementExport {
    pub label: String,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

pub fn build_sc_povm(code: &PolarCode, alpha: f64, rel_tol: f64) -> Result<Povm> {
    build_sc_povm_with(code, alpha, Truncation::OnePhoton, rel_tol)
}

pub fn build_sc_povm_with(
    code: &PolarCode,
    alpha: f64,
    truncation: Truncation,
    rel_tol: f64,
) -> Result<Povm> {
    // at α = 0 every difference operator vanishes; use the α → 0⁺ limit,
    // which the projectors have already reached at this amplitude
    let design_alpha = if alpha == 0.0 { ZERO_ALPHA_LIMIT } else { alpha };
    let info = code.info_indices();
    let mut cache: HashMap<Vec<u8>, (Projector, Projector)> = HashMap::new();
    let mut elements = Vec::new();
    for message in code.completions(&[])? {
        let u = message.bits();
        for &i in &info {
            if !cache.contains_key(&u[..i]) {
                let pair = bit_projectors(code, &u[..i], design_alpha, truncation, rel_tol)?;
                cache.insert(u[..i].to_vec(), pair);
            }
        }
        let path: Vec<&CMatrix> = info
            .iter()
            .map(|&i| {
                let (p0, p1) = &cache[&u[..i]];
                if u[i] == 0 {
                    p0.matrix()
                } else {
                    p1.matrix()
                }
            })
            .collect();
        let (last, outer) = path.split_last().expect("codes have an information bit");
        let mut lambda = (*last).clone();
        for p in outer.iter().rev() {
            lambda = *p * lambda * *p;
        }
        elements.push(PovmElement {
            label: message,
            operator: HermitianOperator::new(lambda)?,
        });
    }
    Ok(Povm {
        elements,
        n_bins: code.n_bins(),
        alpha,
        truncation,
    })
}

/// Row-stochastic `P(y|u)`; rows are inputs, columns outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    inputs: Vec<String>,
    outputs: Vec<String>,
    probabilities: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Round-off below zero (within `1e-12`) is clamped.
    pub fn new(inputs: Vec<String>, outputs: Vec<String>, probabilities: DMatrix<f64>) -> Result<Self> {
        if probabilities.nrows() != inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                actual: probabilities.nrows(),
            });
        }
        if probabilities.ncols() != outputs.len() {
            return Err(Error::DimensionMismatch {
                expected: outputs.len(),
                actual: probabilities.ncols(),
            });
        }
        if inputs.is_empty() || outputs.is_empty() {
            return invalid("transition matrix needs at least one input and one output");
        }
        for (r, row) in probabilities.row_iter().enumerate() {
            if let Some(v) = row
                .iter()
                .find(|v| !v.is_finite() || **v < -ENTRY_TOL || **v > 1.0 + ENTRY_TOL)
            {
                return invalid(format!("row {} has entry {v} outside [0, 1]", inputs[r]));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return invalid(format!("row {} sums to {sum}", inputs[r]));
            }
        }
        let probabilities = probabilities.map(|v| v.clamp(0.0, 1.0));
        Ok(Self {
            inputs,
            outputs,
            probabilities,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn probabilities(&self) -> &DMatrix<f64> {
        &self.probabilities
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.probabilities[(input, output)]
    }

    /// Entry by labels.
    pub fn prob(&self, input: &str, output: &str) -> Option<f64> {
        let r = self.inputs.iter().position(|s| s == input)?;
        let k = self.outputs.iter().position(|s| s == output)?;
        Some(self.probabilities[(r, k)])
    }

    pub fn row(&self, input: usize) -> Vec<f64> {
        self.probabilities.row(input).iter().copied().collect()
    }

    /// `(1 − ε)·row + ε·guess` for every row.
    pub fn blended(&self, epsilon: f64, guess: &[f64]) -> Result<Self> {
        if guess.len() != self.n_outputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_outputs(),
                actual: guess.len(),
            });
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return invalid(format!("blend weight {epsilon} outside [0, 1]"));
        }
        let mut p = self.probabilities.clone() * (1.0 - epsilon);
        for mut row in p.row_iter_mut() {
            for (v, g) in row.iter_mut().zip(guess) {
                *v += epsilon * g;
            }
        }
        Self::new(self.inputs.clone(), self.outputs.clone(), p)
    }

    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        self.probabilities
            .iter()
            .zip(other.probabilities.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn export(&self) -> TransitionExport {
        TransitionExport {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            probabilities: rows(&self.probabilities, |v| *v),
        }
    }
}

/// JSON form of a [`TransitionMatrix`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionExport {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub probabilities: Vec<Vec<f64>>,
}

/// `P(y|u) = ⟨ψ_{x(u)}|Λ_y|ψ_{x(u)}⟩` on the truncated space.
pub fn transition_matrix(povm: &Povm, codebook: &Codebook, alpha: f64) -> Result<TransitionMatrix> {
    let mut probabilities = DMatrix::zeros(codebook.len(), povm.len());
    for (r, (_, x)) in codebook.entries().iter().enumerate() {
        if x.len() != povm.n_bins() {
            return Err(Error::DimensionMismatch {
                expected: povm.n_bins(),
                actual: x.len(),
            });
        }
        let state = povm.truncation().codeword_state(x, alpha)?;
        for (k, e) in povm.elements().iter().enumerate() {
            probabilities[(r, k)] = e.operator.expectation(state.amplitudes())?;
        }
    }
    TransitionMatrix::new(
        codebook.messages().map(|m| m.to_string()).collect(),
        povm.elements().iter().map(|e| e.label.to_string()).collect(),
        probabilities,
    )
}

/// What happens to the probability mass outside the photon-number cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiphotonPolicy {
    /// The receiver guesses a message uniformly.
    #[default]
    UniformGuess,
    /// Condition on the truncated subspace.
    Discard,
}

impl FromStr for MultiphotonPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_guess" => Ok(Self::UniformGuess),
            "discard" => Ok(Self::Discard),
            other => invalid(format!("unknown multiphoton policy `{other}`")),
        }
    }
}

impl fmt::Display for MultiphotonPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::UniformGuess => "uniform_guess",
            Self::Discard => "discard",
        })
    }
}

/// Channel used for rate calculations.
pub fn effective_channel(
    code: &PolarCode,
    alpha: f64,
    povm: &Povm,
    policy: MultiphotonPolicy,
) -> Result<TransitionMatrix> {
    let codebook = build_codebook(code);
    let truncated = transition_matrix(povm, &codebook, alpha)?;
    match policy {
        MultiphotonPolicy::Discard => Ok(truncated),
        MultiphotonPolicy::UniformGuess => {
            let eps = residual_mass(code.n_bins(), alpha, povm.truncation());
            let n = truncated.n_outputs();
            truncated.blended(eps, &vec![1.0 / n as f64; n])
        }
    }
}

/// Noiseless single-photon channel at `alpha` with default tolerances.
pub fn noiseless_channel(code: &PolarCode, alpha: f64) -> Result<TransitionMatrix> {
    let povm = build_sc_povm(code, alpha, DEFAULT_EIGEN_TOL)?;
    effective_channel(code, alpha, &povm, MultiphotonPolicy::UniformGuess)
}
