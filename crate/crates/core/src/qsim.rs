//! Density-matrix simulation of the qubit receiver.
//!
//! Qubit 0 is the most significant bit of a register index and the leftmost
//! character of a printed bit string; spin up is `0`. The receiver has two
//! stages. Compression writes each time bin's photon into a binary register
//! through a fresh control qubit. Decoding then walks a decision tree of
//! gates and Z measurements. Both stages are linear in the photonic input, so
//! for a fixed noise setting the whole receiver collapses to an effective
//! POVM on the photonic space, computed once and reused for every `α`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{bpsk_codeword_state, residual_mass, BinPattern, Codeword, Truncation};
use crate::linalg::{self, c, CMatrix};
use crate::polar::{build_codebook, PolarCode};
use crate::rates::ChannelModel;
use crate::scdecoder::{HermitianOperator, TransitionMatrix};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;
const UNITARY_TOL: f64 = 1e-10;
const TP_TOL: f64 = 1e-10;
const BRANCH_TOL: f64 = 1e-10;

/// Label used for leaves that herald a decoding failure.
pub const ERROR_LABEL: &str = "error";

/// Density matrix of a qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    qubits: usize,
}

impl DensityMatrix {
    /// Checks shape and Hermiticity only; see [`DensityMatrix::check_state`].
    pub fn new(matrix: DMatrix<Complex64>, qubits: usize) -> Result<Self> {
        let dim = 1usize << qubits;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: matrix.nrows(),
            });
        }
        let dev = linalg::hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL * linalg::max_abs(&matrix).max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { matrix, qubits })
    }

    pub fn from_pure(amplitudes: &DVector<Complex64>, qubits: usize) -> Result<Self> {
        Self::new(amplitudes * amplitudes.adjoint(), qubits)
    }

    /// `|index⟩⟨index|`.
    pub fn basis_state(qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << qubits;
        if index >= dim {
            return invalid(format!("basis index {index} out of range for {qubits} qubits"));
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(index, index)] = c(1.0);
        Ok(Self { matrix: m, qubits })
    }

    pub fn maximally_mixed(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        Self {
            matrix: linalg::identity(dim) * c(1.0 / dim as f64),
            qubits,
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.matrix)
    }

    /// Probability of each computational basis string.
    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    /// Hermitian, unit trace and positive semidefinite within tolerance.
    pub fn check_state(&self) -> Result<()> {
        self.check_subnormalized(1.0)
    }

    /// As [`DensityMatrix::check_state`] with trace `expected_trace`, for
    /// unnormalized post-measurement branches.
    pub fn check_subnormalized(&self, expected_trace: f64) -> Result<()> {
        let dev = linalg::hermitian_deviation(&self.matrix);
        if dev > HERMITIAN_TOL * linalg::max_abs(&self.matrix).max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        let tr = self.trace();
        if (tr - expected_trace).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace {tr} differs from {expected_trace}"
            )));
        }
        let min = linalg::min_eigenvalue(&self.matrix);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `⟨φ|ρ|φ⟩`.
    pub fn fidelity_with_pure(&self, phi: &DVector<Complex64>) -> Result<f64> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: phi.len(),
            });
        }
        Ok((phi.adjoint() * &self.matrix * phi)[(0, 0)].re)
    }
}

/// Operator-sum representation of a channel on `arity` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    operators: Vec<CMatrix>,
    arity: usize,
}

impl KrausChannel {
    pub fn new(operators: Vec<DMatrix<Complex64>>, arity: usize) -> Result<Self> {
        let dim = 1usize << arity;
        if operators.is_empty() {
            return invalid("channel needs at least one Kraus operator");
        }
        if let Some(bad) = operators.iter().find(|a| a.nrows() != dim || a.ncols() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.nrows(),
            });
        }
        let sum = operators
            .iter()
            .fold(CMatrix::zeros(dim, dim), |acc, a| acc + a.adjoint() * a);
        let dev = linalg::max_abs_diff(&sum, &linalg::identity(dim));
        if dev > TP_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(Self { operators, arity })
    }

    pub fn identity(arity: usize) -> Self {
        Self {
            operators: vec![linalg::identity(1 << arity)],
            arity,
        }
    }

    pub fn operators(&self) -> &[DMatrix<Complex64>] {
        &self.operators
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

fn check_targets(targets: &[usize], qubits: usize) -> Result<()> {
    for (k, &t) in targets.iter().enumerate() {
        if t >= qubits {
            return Err(Error::QubitOutOfRange { index: t, qubits });
        }
        if targets[..k].contains(&t) {
            return invalid(format!("qubit {t} listed twice"));
        }
    }
    Ok(())
}

/// `(A ⊗ I)·M` with `A` acting on `targets`, first target most significant.
fn left_apply(m: &CMatrix, op: &CMatrix, targets: &[usize], qubits: usize) -> CMatrix {
    let dim = 1usize << qubits;
    let k = targets.len();
    let sub = 1usize << k;
    let offsets: Vec<usize> = (0..sub)
        .map(|s| {
            (0..k)
                .filter(|j| (s >> (k - 1 - j)) & 1 == 1)
                .map(|j| 1usize << (qubits - 1 - targets[j]))
                .sum()
        })
        .collect();
    let mask: usize = offsets[sub - 1];
    let mut out = CMatrix::zeros(dim, m.ncols());
    let mut v = vec![Complex64::default(); sub];
    for base in (0..dim).filter(|i| i & mask == 0) {
        for col in 0..m.ncols() {
            for s in 0..sub {
                v[s] = m[(base | offsets[s], col)];
            }
            for r in 0..sub {
                let mut acc = Complex64::default();
                for s in 0..sub {
                    acc += op[(r, s)] * v[s];
                }
                out[(base | offsets[r], col)] = acc;
            }
        }
    }
    out
}

/// `A·M·A†` on the target qubits; `M` need not be Hermitian.
fn conjugate(m: &CMatrix, op: &CMatrix, targets: &[usize], qubits: usize) -> CMatrix {
    left_apply(&left_apply(m, op, targets, qubits).adjoint(), op, targets, qubits).adjoint()
}

fn channel_raw(m: &CMatrix, ch: &KrausChannel, targets: &[usize], qubits: usize) -> CMatrix {
    let dim = m.nrows();
    ch.operators
        .iter()
        .fold(CMatrix::zeros(dim, dim), |acc, a| acc + conjugate(m, a, targets, qubits))
}

/// `ρ → U ρ U†` with `U` acting on `targets`.
pub fn apply_unitary(
    rho: &DensityMatrix,
    unitary: &DMatrix<Complex64>,
    targets: &[usize],
) -> Result<DensityMatrix> {
    check_targets(targets, rho.qubits)?;
    let sub = 1usize << targets.len();
    if unitary.nrows() != sub || unitary.ncols() != sub {
        return Err(Error::DimensionMismatch {
            expected: sub,
            actual: unitary.nrows(),
        });
    }
    let dev = linalg::max_abs_diff(&(unitary.adjoint() * unitary), &linalg::identity(sub));
    if dev > UNITARY_TOL {
        return Err(Error::NotUnitary(dev));
    }
    DensityMatrix::new(conjugate(&rho.matrix, unitary, targets, rho.qubits), rho.qubits)
}

/// `ρ → ∑ A_j ρ A_j†` on `targets`.
pub fn apply_channel(
    rho: &DensityMatrix,
    channel: &KrausChannel,
    targets: &[usize],
) -> Result<DensityMatrix> {
    check_targets(targets, rho.qubits)?;
    if targets.len() != channel.arity {
        return Err(Error::DimensionMismatch {
            expected: channel.arity,
            actual: targets.len(),
        });
    }
    DensityMatrix::new(channel_raw(&rho.matrix, channel, targets, rho.qubits), rho.qubits)
}

pub fn hadamard() -> DMatrix<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)])
}

pub fn pauli_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn pauli_y() -> DMatrix<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    DMatrix::from_row_slice(2, 2, &[c(0.0), -i, i, c(0.0)])
}

pub fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

/// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ U`, control first.
pub fn controlled(unitary: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut m = linalg::identity(4);
    m.view_mut((2, 2), (2, 2)).copy_from(unitary);
    m
}

fn pauli(label: char) -> CMatrix {
    match label {
        'X' => pauli_x(),
        'Y' => pauli_y(),
        'Z' => pauli_z(),
        _ => linalg::identity(2),
    }
}

/// Correlation structure of two-qubit Pauli noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PauliModel {
    /// Independent depolarizing noise on each qubit.
    #[default]
    Independent,
    /// All 15 non-identity two-qubit Paulis equally likely.
    Uniform,
    /// Only errors hitting both qubits, the 9 of them equally likely.
    Paired,
}

impl FromStr for PauliModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Self::Independent),
            "uniform" => Ok(Self::Uniform),
            "paired" => Ok(Self::Paired),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl fmt::Display for PauliModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Independent => "independent",
            Self::Uniform => "uniform",
            Self::Paired => "paired",
        })
    }
}

/// Probability of every Pauli string (`"I"`, `"X"`, … or `"IX"`, …).
///
/// On one qubit every model is the depolarizing channel with `p/3` per error.
pub fn pauli_probabilities(model: PauliModel, p: f64, arity: usize) -> Result<Vec<(String, f64)>> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("error probability {p} outside [0, 1]"));
    }
    let single = [('I', 1.0 - p), ('X', p / 3.0), ('Y', p / 3.0), ('Z', p / 3.0)];
    match arity {
        1 => Ok(single.iter().map(|(l, q)| (l.to_string(), *q)).collect()),
        2 => {
            let mut out = Vec::with_capacity(16);
            for (a, qa) in single {
                for (b, qb) in single {
                    let prob = match model {
                        PauliModel::Independent => qa * qb,
                        PauliModel::Uniform if a == 'I' && b == 'I' => 1.0 - p,
                        PauliModel::Uniform => p / 15.0,
                        PauliModel::Paired if a == 'I' && b == 'I' => 1.0 - p,
                        PauliModel::Paired if a == 'I' || b == 'I' => 0.0,
                        PauliModel::Paired => p / 9.0,
                    };
                    out.push((format!("{a}{b}"), prob));
                }
            }
            Ok(out)
        }
        other => invalid(format!("Pauli channels are defined on 1 or 2 qubits, not {other}")),
    }
}

pub fn pauli_channel(model: PauliModel, p: f64, arity: usize) -> Result<KrausChannel> {
    let ops = pauli_probabilities(model, p, arity)?
        .into_iter()
        .filter(|(_, q)| *q > 0.0)
        .map(|(label, q)| {
            let m = label
                .chars()
                .map(pauli)
                .reduce(|acc, m| acc.kronecker(&m))
                .expect("label is non-empty");
            m * c(q.sqrt())
        })
        .collect();
    KrausChannel::new(ops, arity)
}

/// `(1 − p)ρ + p·I/d` on the photonic space.
pub fn transducer_channel(rho: &DMatrix<Complex64>, p: f64) -> Result<DMatrix<Complex64>> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("transducer error probability {p} outside [0, 1]"));
    }
    if !rho.is_square() {
        return invalid("photonic operator must be square");
    }
    let dim = rho.nrows();
    Ok(rho * c(1.0 - p) + linalg::identity(dim) * c(p / dim as f64))
}

/// Map from photonic basis patterns to register basis strings.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBinEncoding {
    n_bins: usize,
    qubits: usize,
    truncation: Truncation,
    registers: Vec<usize>,
}

impl TimeBinEncoding {
    /// `registers[k]` is the register index of the `k`-th basis pattern of
    /// `truncation`.
    pub fn new(
        n_bins: usize,
        qubits: usize,
        truncation: Truncation,
        registers: Vec<usize>,
    ) -> Result<Self> {
        let basis = truncation.basis(n_bins);
        if registers.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                actual: registers.len(),
            });
        }
        if let Some(r) = registers.iter().find(|&&r| r >> qubits != 0) {
            return invalid(format!("register index {r} needs more than {qubits} qubits"));
        }
        if registers[0] != 0 {
            return Err(Error::EncodingCollision(
                "vacuum must map to the all-zero register".into(),
            ));
        }
        for (k, r) in registers.iter().enumerate() {
            if let Some(j) = registers[..k].iter().position(|s| s == r) {
                return Err(Error::EncodingCollision(format!(
                    "patterns {} and {} share register {}",
                    basis[j].fock_label(n_bins),
                    basis[k].fock_label(n_bins),
                    register_label(*r, qubits)
                )));
            }
        }
        Ok(Self {
            n_bins,
            qubits,
            truncation,
            registers,
        })
    }

    /// Vacuum to all zeros; bin `j` (1-based) to a leading one followed by
    /// `j − 1` in binary, on `⌈log₂(N+1)⌉` qubits.
    pub fn single_photon(n_bins: usize) -> Result<Self> {
        if n_bins < 1 {
            return invalid("need at least one time bin");
        }
        let qubits = (usize::BITS - n_bins.leading_zeros()) as usize;
        let lead = 1usize << (qubits - 1);
        let registers = std::iter::once(0).chain((0..n_bins).map(|j| lead | j)).collect();
        Self::new(n_bins, qubits, Truncation::OnePhoton, registers)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn registers(&self) -> &[usize] {
        &self.registers
    }

    pub fn basis(&self) -> Vec<BinPattern> {
        self.truncation.basis(self.n_bins)
    }

    pub fn register_of(&self, pattern: BinPattern) -> Option<usize> {
        self.basis()
            .iter()
            .position(|&p| p == pattern)
            .map(|k| self.registers[k])
    }

    /// `(Fock label, register label)` pairs in basis order.
    pub fn table(&self) -> Vec<(String, String)> {
        self.basis()
            .iter()
            .zip(&self.registers)
            .map(|(p, &r)| (p.fock_label(self.n_bins), register_label(r, self.qubits)))
            .collect()
    }

    /// Isometry `V` with `V|pattern⟩ = |register⟩`.
    pub fn isometry(&self) -> DMatrix<Complex64> {
        let mut v = CMatrix::zeros(1 << self.qubits, self.registers.len());
        for (k, &r) in self.registers.iter().enumerate() {
            v[(r, k)] = c(1.0);
        }
        v
    }
}

/// Bit string of a register index, qubit 0 first.
pub fn register_label(index: usize, qubits: usize) -> String {
    (0..qubits)
        .map(|q| if (index >> (qubits - 1 - q)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Pauli noise attached to every gate of one receiver stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GateNoise {
    pub model: PauliModel,
    /// Total error probability of each one- or two-qubit noise block.
    pub p: f64,
}

impl GateNoise {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(model: PauliModel, p: f64) -> Result<Self> {
        let noise = Self { model, p };
        noise.validate()?;
        Ok(noise)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return invalid(format!("gate error probability {} outside [0, 1]", self.p));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p == 0.0
    }
}

/// Noise of the full receiver.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Depolarizing probability on the photonic input.
    #[serde(default)]
    pub transducer: f64,
    #[serde(default)]
    pub compression: GateNoise,
    #[serde(default)]
    pub decoding: GateNoise,
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn transducer(p: f64) -> Self {
        Self {
            transducer: p,
            ..Self::default()
        }
    }

    /// Same gate noise in compression and decoding.
    pub fn gates(model: PauliModel, p: f64) -> Self {
        let g = GateNoise { model, p };
        Self {
            transducer: 0.0,
            compression: g,
            decoding: g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.transducer) {
            return invalid(format!(
                "transducer error probability {} outside [0, 1]",
                self.transducer
            ));
        }
        self.compression.validate()?;
        self.decoding.validate()
    }
}

/// Kraus channels of one stage, absent when noiseless.
struct StageNoise {
    one: Option<KrausChannel>,
    two: Option<KrausChannel>,
}

impl StageNoise {
    fn new(noise: &GateNoise) -> Result<Self> {
        noise.validate()?;
        if noise.is_noiseless() {
            return Ok(Self { one: None, two: None });
        }
        Ok(Self {
            one: Some(pauli_channel(noise.model, noise.p, 1)?),
            two: Some(pauli_channel(noise.model, noise.p, 2)?),
        })
    }

    fn after_one(&self, m: CMatrix, target: usize, qubits: usize) -> CMatrix {
        match &self.one {
            Some(ch) => channel_raw(&m, ch, &[target], qubits),
            None => m,
        }
    }

    fn after_two(&self, m: CMatrix, pair: [usize; 2], qubits: usize) -> CMatrix {
        match &self.two {
            Some(ch) => channel_raw(&m, ch, &pair, qubits),
            None => m,
        }
    }
}

/// The compression stage as a linear map on photonic operators, stored as
/// the register image of every matrix unit `|b⟩⟨b'|`.
#[derive(Debug, Clone)]
pub struct CompressionMap {
    encoding: TimeBinEncoding,
    units: Vec<CMatrix>,
}

impl CompressionMap {
    pub fn new(encoding: &TimeBinEncoding, noise: &GateNoise) -> Result<Self> {
        if encoding.truncation() != Truncation::OnePhoton {
            return invalid("compression is defined for vacuum plus single photons only");
        }
        let stage = StageNoise::new(noise)?;
        let dim = encoding.registers().len();
        let mut units = Vec::with_capacity(dim * dim);
        for ket in 0..dim {
            for bra in 0..dim {
                units.push(compress_unit(encoding, &stage, ket, bra, &mut |_, _, _| {}));
            }
        }
        Ok(Self {
            encoding: encoding.clone(),
            units,
        })
    }

    pub fn encoding(&self) -> &TimeBinEncoding {
        &self.encoding
    }

    /// Register image of a photonic operator.
    pub fn apply(&self, photonic: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let dim = self.encoding.registers().len();
        if photonic.nrows() != dim || photonic.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: photonic.nrows(),
            });
        }
        let reg = 1usize << self.encoding.qubits();
        let mut out = CMatrix::zeros(reg, reg);
        for ket in 0..dim {
            for bra in 0..dim {
                let w = photonic[(ket, bra)];
                if w != Complex64::default() {
                    out += &self.units[ket * dim + bra] * w;
                }
            }
        }
        Ok(out)
    }

    fn unit(&self, ket: usize, bra: usize) -> &CMatrix {
        &self.units[ket * self.encoding.registers().len() + bra]
    }
}

/// Register image of `|ket⟩⟨bra|`. The control is the extra last qubit; its
/// ket side is excited in bin `ket` and its bra side in bin `bra`.
/// `observe(bin, zero_branch, corrected_one_branch)` sees both measurement
/// branches of every bin after the control reset.
fn compress_unit(
    encoding: &TimeBinEncoding,
    noise: &StageNoise,
    ket: usize,
    bra: usize,
    observe: &mut dyn FnMut(usize, &CMatrix, &CMatrix),
) -> CMatrix {
    let q = encoding.qubits();
    let n = q + 1;
    let control = q;
    let dim = 1usize << n;
    let x = pauli_x();
    let cnot = controlled(&pauli_x());
    let h = hadamard();
    let zero = linalg::identity(2).map(|_| Complex64::default());
    let mut p0 = zero.clone();
    p0[(0, 0)] = c(1.0);
    let mut p1 = zero;
    p1[(1, 1)] = c(1.0);

    let mut sig = CMatrix::zeros(dim, dim);
    sig[(0, 0)] = c(1.0);
    for k in 1..encoding.registers().len() {
        if ket == k {
            sig = left_apply(&sig, &x, &[control], n);
        }
        if bra == k {
            sig = left_apply(&sig.adjoint(), &x, &[control], n).adjoint();
        }
        let reg = encoding.registers()[k];
        for t in (0..q).filter(|t| (reg >> (q - 1 - t)) & 1 == 1) {
            sig = conjugate(&sig, &cnot, &[control, t], n);
            sig = noise.after_two(sig, [control, t], n);
        }
        sig = conjugate(&sig, &h, &[control], n);
        sig = noise.after_one(sig, control, n);

        let zero_branch = conjugate(&sig, &p0, &[control], n);
        let mut one_branch = conjugate(&sig, &p1, &[control], n);
        // outcome 1 leaves a minus sign on the |reg⟩ component: undo it, then
        // return the control to 0
        let sign = |i: usize| if i >> 1 == reg { -1.0 } else { 1.0 };
        for r in 0..dim {
            for col in 0..dim {
                one_branch[(r, col)] *= sign(r) * sign(col);
            }
        }
        let one_branch = conjugate(&one_branch, &x, &[control], n);
        observe(k, &zero_branch, &one_branch);
        sig = zero_branch + one_branch;
    }
    let reg_dim = 1usize << q;
    CMatrix::from_fn(reg_dim, reg_dim, |r, col| {
        sig[(r << 1, col << 1)] + sig[((r << 1) | 1, (col << 1) | 1)]
    })
}

/// Maps a photonic density operator into the register.
pub fn compression_circuit(
    photonic_dm: &DMatrix<Complex64>,
    encoding: &TimeBinEncoding,
    noise: &GateNoise,
) -> Result<DensityMatrix> {
    let map = CompressionMap::new(encoding, noise)?;
    DensityMatrix::new(map.apply(photonic_dm)?, encoding.qubits())
}

/// One gate, measurement or leaf of a [`DecisionTree`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum Step {
    #[serde(rename = "H")]
    Hadamard { target: usize },
    #[serde(rename = "X")]
    PauliX { target: usize },
    #[serde(rename = "Z")]
    PauliZ { target: usize },
    #[serde(rename = "CH")]
    ControlledHadamard { control: usize, target: usize },
    #[serde(rename = "CNOT")]
    Cnot { control: usize, target: usize },
    /// Z measurement; the walk continues in `zero` or `one`.
    #[serde(rename = "measure")]
    Measure {
        qubit: usize,
        zero: Vec<Step>,
        one: Vec<Step>,
    },
    /// Decision weights summing to one; the weight splits a leaf between
    /// messages the receiver cannot tell apart.
    #[serde(rename = "leaf")]
    Leaf { decisions: BTreeMap<String, f64> },
}

/// Adaptive gate-and-measure decoder over a qubit register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub name: String,
    pub n_bins: usize,
    pub qubits: usize,
    pub steps: Vec<Step>,
}

impl DecisionTree {
    pub fn from_json(text: &str) -> Result<Self> {
        let tree: Self = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Receivers shipped with the crate, for `N = 4` and `N = 8`.
    pub fn builtin(n_bins: usize) -> Result<Self> {
        match n_bins {
            4 => Self::from_json(include_str!("../trees/n4.json")),
            8 => Self::from_json(include_str!("../trees/n8.json")),
            n => invalid(format!("no built-in decision tree for N = {n}")),
        }
    }

    /// Every path ends in a leaf, nothing follows a measurement, indices are
    /// in range, no qubit is measured twice on a path and leaf weights sum to
    /// one.
    pub fn validate(&self) -> Result<()> {
        self.validate_steps(&self.steps, &mut Vec::new())
    }

    fn validate_steps(&self, steps: &[Step], measured: &mut Vec<usize>) -> Result<()> {
        let (last, body) = steps
            .split_last()
            .ok_or_else(|| Error::Tree("branch ends without a leaf".into()))?;
        let check = |q: usize| {
            if q >= self.qubits {
                Err(Error::Tree(format!(
                    "qubit {q} out of range for {} qubits",
                    self.qubits
                )))
            } else {
                Ok(())
            }
        };
        for step in body {
            match *step {
                Step::Hadamard { target } | Step::PauliX { target } | Step::PauliZ { target } => {
                    check(target)?
                }
                Step::ControlledHadamard { control, target } | Step::Cnot { control, target } => {
                    check(control)?;
                    check(target)?;
                    if control == target {
                        return Err(Error::Tree(format!("gate controls and targets qubit {control}")));
                    }
                }
                Step::Measure { .. } | Step::Leaf { .. } => {
                    return Err(Error::Tree("a measurement or leaf must end its branch".into()))
                }
            }
        }
        match last {
            Step::Measure { qubit, zero, one } => {
                check(*qubit)?;
                if measured.contains(qubit) {
                    return Err(Error::Tree(format!("qubit {qubit} measured twice on one path")));
                }
                measured.push(*qubit);
                self.validate_steps(zero, measured)?;
                self.validate_steps(one, measured)?;
                measured.pop();
                Ok(())
            }
            Step::Leaf { decisions } => {
                let total: f64 = decisions.values().sum();
                if decisions.is_empty()
                    || decisions.values().any(|w| *w < 0.0)
                    || (total - 1.0).abs() > 1e-12
                {
                    return Err(Error::Tree(format!("leaf weights {decisions:?} do not sum to one")));
                }
                Ok(())
            }
            _ => Err(Error::Tree("branch ends without a leaf".into())),
        }
    }

    /// Decision labels in order of first appearance.
    pub fn labels(&self) -> Vec<String> {
        fn collect(steps: &[Step], out: &mut Vec<String>) {
            for step in steps {
                match step {
                    Step::Measure { zero, one, .. } => {
                        collect(zero, out);
                        collect(one, out);
                    }
                    Step::Leaf { decisions } => {
                        for label in decisions.keys() {
                            if !out.contains(label) {
                                out.push(label.clone());
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        collect(&self.steps, &mut out);
        out
    }

    pub fn has_error_leaf(&self) -> bool {
        self.labels().iter().any(|l| l == ERROR_LABEL)
    }
}

/// Runs the tree on any register operator, accumulating `Tr` of each leaf
/// branch times its weights. Linear in `sig`.
fn walk(
    mut sig: CMatrix,
    steps: &[Step],
    qubits: usize,
    noise: &StageNoise,
    out: &mut BTreeMap<String, Complex64>,
) -> Result<()> {
    for step in steps {
        match step {
            Step::Hadamard { target } => {
                sig = conjugate(&sig, &hadamard(), &[*target], qubits);
                sig = noise.after_one(sig, *target, qubits);
            }
            Step::PauliX { target } => {
                sig = conjugate(&sig, &pauli_x(), &[*target], qubits);
                sig = noise.after_one(sig, *target, qubits);
            }
            Step::PauliZ { target } => {
                sig = conjugate(&sig, &pauli_z(), &[*target], qubits);
                sig = noise.after_one(sig, *target, qubits);
            }
            Step::ControlledHadamard { control, target } => {
                sig = conjugate(&sig, &controlled(&hadamard()), &[*control, *target], qubits);
                sig = noise.after_two(sig, [*control, *target], qubits);
            }
            Step::Cnot { control, target } => {
                sig = conjugate(&sig, &controlled(&pauli_x()), &[*control, *target], qubits);
                sig = noise.after_two(sig, [*control, *target], qubits);
            }
            Step::Measure { qubit, zero, one } => {
                let bit = 1usize << (qubits - 1 - qubit);
                let dim = sig.nrows();
                let branch = |value: usize| {
                    CMatrix::from_fn(dim, dim, |r, col| {
                        if (r & bit != 0) as usize == value && (col & bit != 0) as usize == value {
                            sig[(r, col)]
                        } else {
                            Complex64::default()
                        }
                    })
                };
                let (s0, s1) = (branch(0), branch(1));
                let total = sig.trace();
                let split = s0.trace() + s1.trace();
                if (split - total).norm() > BRANCH_TOL * total.norm().max(1.0) {
                    return Err(Error::Tree(format!(
                        "branch weights {split} do not add up to {total}"
                    )));
                }
                walk(s0, zero, qubits, noise, out)?;
                return walk(s1, one, qubits, noise, out);
            }
            Step::Leaf { decisions } => {
                let weight = sig.trace();
                for (label, share) in decisions {
                    *out.entry(label.clone()).or_default() += weight * *share;
                }
                return Ok(());
            }
        }
    }
    Err(Error::Tree("branch ends without a leaf".into()))
}

/// Probability of every decision label for a register state.
pub fn decision_tree_decode(
    register_dm: &DensityMatrix,
    tree: &DecisionTree,
    noise: &GateNoise,
) -> Result<BTreeMap<String, f64>> {
    if register_dm.qubits() != tree.qubits {
        return Err(Error::Tree(format!(
            "tree acts on {} qubits, register has {}",
            tree.qubits,
            register_dm.qubits()
        )));
    }
    let stage = StageNoise::new(noise)?;
    let mut out = BTreeMap::new();
    walk(register_dm.matrix.clone(), &tree.steps, tree.qubits, &stage, &mut out)?;
    Ok(out.into_iter().map(|(k, v)| (k, v.re)).collect())
}

/// Photonic operators `Ẽ_y` with `P(y) = Tr(ρ Ẽ_y)` for the whole noisy
/// receiver (compression then decision tree).
#[derive(Debug, Clone)]
pub struct EffectivePovm {
    labels: Vec<String>,
    elements: Vec<HermitianOperator>,
}

impl EffectivePovm {
    pub fn new(encoding: &TimeBinEncoding, tree: &DecisionTree, noise: &NoiseConfig) -> Result<Self> {
        noise.validate()?;
        tree.validate()?;
        if tree.qubits != encoding.qubits() {
            return Err(Error::Tree(format!(
                "tree acts on {} qubits, encoding uses {}",
                tree.qubits,
                encoding.qubits()
            )));
        }
        let map = CompressionMap::new(encoding, &noise.compression)?;
        let stage = StageNoise::new(&noise.decoding)?;
        let labels = tree.labels();
        let dim = encoding.registers().len();
        let mut mats = vec![CMatrix::zeros(dim, dim); labels.len()];
        for ket in 0..dim {
            for bra in 0..dim {
                let mut out = BTreeMap::new();
                walk(map.unit(ket, bra).clone(), &tree.steps, tree.qubits, &stage, &mut out)?;
                for (label, v) in out {
                    let k = labels.iter().position(|l| *l == label).expect("label from tree");
                    // Tr(ρ Ẽ) = ∑ ρ[ket, bra] Ẽ[bra, ket]
                    mats[k][(bra, ket)] += v;
                }
            }
        }
        let elements = mats
            .into_iter()
            .map(HermitianOperator::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { labels, elements })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn element(&self, label: &str) -> Option<&HermitianOperator> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| &self.elements[k])
    }

    /// Outcome probabilities of a photonic density operator.
    pub fn probabilities(&self, rho: &DMatrix<Complex64>) -> Result<Vec<f64>> {
        self.elements.iter().map(|e| e.trace_with(rho)).collect()
    }

    /// `max |∑Ẽ_y − I|` entrywise.
    pub fn completeness_deviation(&self) -> f64 {
        let dim = self.elements[0].dim();
        let sum = self
            .elements
            .iter()
            .fold(CMatrix::zeros(dim, dim), |acc, e| acc + e.matrix());
        linalg::max_abs_diff(&sum, &linalg::identity(dim))
    }
}

/// Circuit receiver for a polar code under a noise setting, with its
/// effective POVM precomputed.
#[derive(Debug, Clone)]
pub struct NoisyReceiver {
    code: PolarCode,
    noise: NoiseConfig,
    povm: EffectivePovm,
    outputs: Vec<String>,
}

impl NoisyReceiver {
    /// Built-in encoding and decision tree for `N = 4` or `N = 8`.
    pub fn new(code: &PolarCode, noise: NoiseConfig) -> Result<Self> {
        let encoding = TimeBinEncoding::single_photon(code.n_bins())?;
        let tree = DecisionTree::builtin(code.n_bins())?;
        Self::with_tree(code, &encoding, &tree, noise)
    }

    pub fn with_tree(
        code: &PolarCode,
        encoding: &TimeBinEncoding,
        tree: &DecisionTree,
        noise: NoiseConfig,
    ) -> Result<Self> {
        if tree.n_bins != code.n_bins() || encoding.n_bins() != code.n_bins() {
            return Err(Error::Tree(format!(
                "tree for N = {} and encoding for N = {} do not match the code's N = {}",
                tree.n_bins,
                encoding.n_bins(),
                code.n_bins()
            )));
        }
        let mut outputs: Vec<String> = build_codebook(code).messages().map(|m| m.to_string()).collect();
        for label in tree.labels() {
            if label == ERROR_LABEL {
                continue;
            }
            if !outputs.contains(&label) {
                return Err(Error::Tree(format!("leaf decision {label} is not a codebook message")));
            }
        }
        if tree.has_error_leaf() {
            outputs.push(ERROR_LABEL.to_string());
        }
        let povm = EffectivePovm::new(encoding, tree, &noise)?;
        Ok(Self {
            code: code.clone(),
            noise,
            povm,
            outputs,
        })
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    pub fn effective_povm(&self) -> &EffectivePovm {
        &self.povm
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }
}

impl ChannelModel for NoisyReceiver {
    fn n_bins(&self) -> usize {
        self.code.n_bins()
    }

    /// Each row: codeword state, transducer noise, effective POVM; the mass
    /// beyond one photon is a uniform guess over messages.
    fn channel(&self, alpha: f64) -> Result<TransitionMatrix> {
        let codebook = build_codebook(&self.code);
        let n_msgs = codebook.len();
        let eps = residual_mass(self.code.n_bins(), alpha, Truncation::OnePhoton);
        let mut p = DMatrix::zeros(n_msgs, self.outputs.len());
        for (r, (_, x)) in codebook.entries().iter().enumerate() {
            let rho = transducer_channel(&bpsk_codeword_state(x, alpha)?.density(), self.noise.transducer)?;
            let probs = self.povm.probabilities(&rho)?;
            for (label, v) in self.povm.labels().iter().zip(probs) {
                let k = self.outputs.iter().position(|o| o == label).expect("checked in new");
                p[(r, k)] += (1.0 - eps) * v;
            }
            for k in 0..n_msgs {
                p[(r, k)] += eps / n_msgs as f64;
            }
        }
        TransitionMatrix::new(
            codebook.messages().map(|m| m.to_string()).collect(),
            self.outputs.clone(),
            p,
        )
    }
}

/// Full receiver channel at one amplitude; see [`NoisyReceiver`].
pub fn noisy_pipeline_channel(code: &PolarCode, alpha: f64, noise: &NoiseConfig) -> Result<TransitionMatrix> {
    NoisyReceiver::new(code, *noise)?.channel(alpha)
}

/// Direct simulation of one codeword through transducer, compression and
/// decision tree, on the one-photon space (no residual blending).
pub fn simulate_codeword(
    codeword: &Codeword,
    alpha: f64,
    encoding: &TimeBinEncoding,
    tree: &DecisionTree,
    noise: &NoiseConfig,
) -> Result<BTreeMap<String, f64>> {
    noise.validate()?;
    let rho = transducer_channel(&bpsk_codeword_state(codeword, alpha)?.density(), noise.transducer)?;
    let register = compression_circuit(&rho, encoding, &noise.compression)?;
    decision_tree_decode(&register, tree, &noise.decoding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scdecoder::noiseless_channel;

    fn ket(qubits: usize, index: usize) -> DensityMatrix {
        DensityMatrix::basis_state(qubits, index).unwrap()
    }

    #[test]
    fn unitary_examples() {
        let rho = DensityMatrix::from_pure(
            &DVector::from_vec(vec![c(0.6), Complex64::new(0.0, 0.8)]),
            1,
        )
        .unwrap();
        let same = apply_unitary(&rho, &linalg::identity(2), &[0]).unwrap();
        assert_eq!(same, rho);
        let flipped = apply_unitary(&ket(1, 0), &pauli_x(), &[0]).unwrap();
        assert_eq!(flipped, ket(1, 1));
        let hh = apply_unitary(&apply_unitary(&rho, &hadamard(), &[0]).unwrap(), &hadamard(), &[0]).unwrap();
        assert!(linalg::max_abs_diff(hh.matrix(), rho.matrix()) < 1e-12);
    }

    #[test]
    fn embedding_respects_qubit_order() {
        // X on qubit 0 of |00⟩ gives |10⟩, index 2
        assert_eq!(apply_unitary(&ket(2, 0), &pauli_x(), &[0]).unwrap(), ket(2, 2));
        assert_eq!(apply_unitary(&ket(2, 0), &pauli_x(), &[1]).unwrap(), ket(2, 1));
        // CNOT with control 1 and target 0 on |01⟩ gives |11⟩
        let cx = controlled(&pauli_x());
        assert_eq!(apply_unitary(&ket(2, 1), &cx, &[1, 0]).unwrap(), ket(2, 3));
        assert_eq!(apply_unitary(&ket(3, 4), &cx, &[0, 2]).unwrap(), ket(3, 5));
        assert!(matches!(
            apply_unitary(&ket(2, 0), &pauli_x(), &[2]),
            Err(Error::QubitOutOfRange { index: 2, qubits: 2 })
        ));
        let not_unitary = pauli_x() * c(2.0);
        assert!(matches!(
            apply_unitary(&ket(1, 0), &not_unitary, &[0]),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn local_application_matches_kronecker_embedding() {
        let u = controlled(&hadamard());
        let rho = DensityMatrix::from_pure(
            &DVector::from_fn(8, |i, _| Complex64::new(0.1 * i as f64 + 0.2, 0.05 * i as f64)).normalize(),
            3,
        )
        .unwrap();
        let got = apply_unitary(&rho, &u, &[0, 1]).unwrap();
        let full = u.kronecker(&linalg::identity(2));
        let want = &full * rho.matrix() * full.adjoint();
        assert!(linalg::max_abs_diff(got.matrix(), &want) < 1e-14);
    }

    #[test]
    fn channel_examples() {
        let rho = ket(1, 0);
        assert_eq!(apply_channel(&rho, &KrausChannel::identity(1), &[0]).unwrap(), rho);
        let mixed = DensityMatrix::maximally_mixed(1);
        let dep = pauli_channel(PauliModel::Independent, 0.3, 1).unwrap();
        let out = apply_channel(&mixed, &dep, &[0]).unwrap();
        assert!(linalg::max_abs_diff(out.matrix(), mixed.matrix()) < 1e-15);

        // |+⟩: coherence 1/2 shrinks by 1 − 4p/3
        let plus = DensityMatrix::from_pure(&DVector::from_element(2, c(std::f64::consts::FRAC_1_SQRT_2)), 1).unwrap();
        for p in [0.1, 0.5, 1.0] {
            let ch = pauli_channel(PauliModel::Uniform, p, 1).unwrap();
            let out = apply_channel(&plus, &ch, &[0]).unwrap();
            assert!((out.matrix()[(0, 1)].re - 0.5 * (1.0 - 4.0 * p / 3.0)).abs() < 1e-15);
            assert!((out.trace() - 1.0).abs() < 1e-15);
        }
        let bad = KrausChannel::new(vec![pauli_x() * c(0.5)], 1);
        assert!(matches!(bad, Err(Error::NotTracePreserving(_))));
    }

    #[test]
    fn pauli_models() {
        let p = 0.09;
        let prob = |model, label: &str| {
            pauli_probabilities(model, p, 2)
                .unwrap()
                .into_iter()
                .find(|(l, _)| l == label)
                .unwrap()
                .1
        };
        assert!((prob(PauliModel::Independent, "IX") - (1.0 - p) * p / 3.0).abs() < 1e-15);
        assert!((prob(PauliModel::Independent, "ZY") - p * p / 9.0).abs() < 1e-15);
        assert_eq!(prob(PauliModel::Paired, "IX"), 0.0);
        assert_eq!(prob(PauliModel::Paired, "ZI"), 0.0);
        assert!((prob(PauliModel::Paired, "XY") - p / 9.0).abs() < 1e-15);
        assert!((prob(PauliModel::Uniform, "IZ") - p / 15.0).abs() < 1e-15);
        for model in [PauliModel::Independent, PauliModel::Uniform, PauliModel::Paired] {
            let total: f64 = pauli_probabilities(model, p, 2).unwrap().iter().map(|x| x.1).sum();
            assert!((total - 1.0).abs() < 1e-15);
            let ch = pauli_channel(model, 0.0, 2).unwrap();
            assert_eq!(ch.operators().len(), 1);
            assert_eq!(ch.operators()[0], linalg::identity(4));
        }
        assert!(matches!("biased".parse::<PauliModel>(), Err(Error::UnknownModel(_))));
        assert!(pauli_probabilities(PauliModel::Independent, 0.1, 3).is_err());
    }

    #[test]
    fn transducer_examples() {
        let rho = bpsk_codeword_state(&"0101".parse().unwrap(), 0.2).unwrap().density();
        assert_eq!(transducer_channel(&rho, 0.0).unwrap(), rho);
        let full = transducer_channel(&rho, 1.0).unwrap();
        assert!(linalg::max_abs_diff(&full, &(linalg::identity(5) * c(0.2))) < 1e-16);
        for p in [0.1, 0.37, 0.9] {
            assert!((linalg::trace_re(&transducer_channel(&rho, p).unwrap()) - 1.0).abs() < 1e-15);
        }
        assert!(transducer_channel(&rho, 1.5).is_err());
    }

    #[test]
    fn encodings() {
        let e4 = TimeBinEncoding::single_photon(4).unwrap();
        assert_eq!(e4.qubits(), 3);
        let labels: Vec<String> = e4.table().into_iter().map(|(_, r)| r).collect();
        assert_eq!(labels, ["000", "100", "101", "110", "111"]);
        let e8 = TimeBinEncoding::single_photon(8).unwrap();
        assert_eq!(e8.qubits(), 4);
        assert_eq!(e8.register_of(BinPattern::Single(7)), Some(0b1111));
        let e2 = TimeBinEncoding::single_photon(2).unwrap();
        assert_eq!(e2.registers(), &[0, 2, 3]);
        let clash = TimeBinEncoding::new(2, 2, Truncation::OnePhoton, vec![0, 1, 1]);
        assert!(matches!(clash, Err(Error::EncodingCollision(_))));
        let vac = TimeBinEncoding::new(2, 2, Truncation::OnePhoton, vec![1, 2, 3]);
        assert!(matches!(vac, Err(Error::EncodingCollision(_))));
    }

    #[test]
    fn noiseless_compression_is_the_encoding_isometry() {
        for n in [2, 4, 8] {
            let enc = TimeBinEncoding::single_photon(n).unwrap();
            let v = enc.isometry();
            let x: Codeword = "1011010011"[..n].parse().unwrap();
            let rho = bpsk_codeword_state(&x, 0.27).unwrap().density();
            let reg = compression_circuit(&rho, &enc, &GateNoise::none()).unwrap();
            assert!(linalg::max_abs_diff(reg.matrix(), &(&v * &rho * v.adjoint())) < 1e-12);
        }
        let enc = TimeBinEncoding::single_photon(4).unwrap();
        let mut vac = CMatrix::zeros(5, 5);
        vac[(0, 0)] = c(1.0);
        let reg = compression_circuit(&vac, &enc, &GateNoise::none()).unwrap();
        assert!(linalg::max_abs_diff(reg.matrix(), ket(3, 0).matrix()) < 1e-15);
    }

    #[test]
    fn compressed_codeword_state() {
        // |ψ_1111⟩ → (|000⟩ − α(|100⟩ + |101⟩ + |110⟩ + |111⟩)) / √(1+4α²)
        let a = 0.15;
        let enc = TimeBinEncoding::single_photon(4).unwrap();
        let rho = bpsk_codeword_state(&"1111".parse().unwrap(), a).unwrap().density();
        let reg = compression_circuit(&rho, &enc, &GateNoise::none()).unwrap();
        let mut phi = DVector::zeros(8);
        phi[0] = c(1.0);
        for i in 4..8 {
            phi[i] = c(-a);
        }
        let phi = phi / c((1.0 + 4.0 * a * a).sqrt());
        assert!((reg.fidelity_with_pure(&phi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn both_control_outcomes_agree_after_correction() {
        // holds unit by unit, so the receiver may ignore the control outcome
        for n in [4, 8] {
            let enc = TimeBinEncoding::single_photon(n).unwrap();
            let stage = StageNoise::new(&GateNoise::none()).unwrap();
            for ket in 0..=n {
                for bra in 0..=n {
                    compress_unit(&enc, &stage, ket, bra, &mut |_, s0, s1| {
                        assert!(linalg::max_abs_diff(s0, s1) < 1e-12);
                    });
                }
            }
        }
    }

    #[test]
    fn builtin_trees_parse_and_validate() {
        let t4 = DecisionTree::builtin(4).unwrap();
        assert_eq!(t4.labels(), ["0000", "0001", "0010", "0011", "error"]);
        let t8 = DecisionTree::builtin(8).unwrap();
        assert_eq!(t8.labels().len(), 16);
        assert!(!t8.has_error_leaf());
        let back = DecisionTree::from_json(&t8.to_json().unwrap()).unwrap();
        assert_eq!(back, t8);
        assert!(DecisionTree::builtin(2).is_err());
    }

    #[test]
    fn malformed_trees_are_rejected() {
        let twice = r#"{"name":"t","n_bins":4,"qubits":1,"steps":[{"op":"measure","qubit":0,
            "zero":[{"op":"measure","qubit":0,"zero":[{"op":"leaf","decisions":{"a":1.0}}],
            "one":[{"op":"leaf","decisions":{"b":1.0}}]}],"one":[{"op":"leaf","decisions":{"b":1.0}}]}]}"#;
        assert!(matches!(DecisionTree::from_json(twice), Err(Error::Tree(_))));
        let open = r#"{"name":"t","n_bins":4,"qubits":1,"steps":[{"op":"H","target":0}]}"#;
        assert!(DecisionTree::from_json(open).is_err());
        let weights = r#"{"name":"t","n_bins":4,"qubits":1,"steps":[{"op":"leaf","decisions":{"a":0.6}}]}"#;
        assert!(DecisionTree::from_json(weights).is_err());
        let range = r#"{"name":"t","n_bins":4,"qubits":1,"steps":[{"op":"H","target":3},{"op":"leaf","decisions":{"a":1.0}}]}"#;
        assert!(DecisionTree::from_json(range).is_err());
        let gate = r#"{"name":"t","n_bins":4,"qubits":1,"steps":[{"op":"T","target":0}]}"#;
        assert!(matches!(DecisionTree::from_json(gate), Err(Error::Json(_))));
    }

    #[test]
    fn worked_example_decodes_with_table_probability() {
        let enc = TimeBinEncoding::single_photon(4).unwrap();
        let tree = DecisionTree::builtin(4).unwrap();
        for a in [0.0, 0.05, 0.2] {
            let out = simulate_codeword(&"1111".parse().unwrap(), a, &enc, &tree, &NoiseConfig::noiseless()).unwrap();
            let want = (2.0 * a * a + 2.0 * a + 0.5) / (4.0 * a * a + 1.0);
            assert!((out["0001"] - want).abs() < 1e-12);
        }
        let out = simulate_codeword(&"0000".parse().unwrap(), 0.0, &enc, &tree, &NoiseConfig::noiseless()).unwrap();
        assert!((out["0000"] - 0.5).abs() < 1e-15 && (out["0001"] - 0.5).abs() < 1e-15);
        assert!(out["0010"].abs() < 1e-15 && out["error"].abs() < 1e-15);
    }

    #[test]
    fn noiseless_receiver_matches_povm_channel() {
        for code in [PolarCode::n4(), PolarCode::n8()] {
            let rx = NoisyReceiver::new(&code, NoiseConfig::noiseless()).unwrap();
            for a in [0.03, 0.2] {
                let circuit = rx.channel(a).unwrap();
                let povm = noiseless_channel(&code, a).unwrap();
                for (r, _) in povm.inputs().iter().enumerate() {
                    for (k, label) in povm.outputs().iter().enumerate() {
                        let got = circuit.prob(&povm.inputs()[r], label).unwrap();
                        assert!((got - povm.get(r, k)).abs() < 1e-9);
                    }
                }
                if let Some(k) = circuit.outputs().iter().position(|o| o == ERROR_LABEL) {
                    assert!((0..circuit.n_inputs()).all(|r| circuit.get(r, k).abs() < 1e-12));
                }
            }
        }
    }

    #[test]
    fn effective_povm_agrees_with_direct_simulation_under_noise() {
        let code = PolarCode::n4();
        let enc = TimeBinEncoding::single_photon(4).unwrap();
        let tree = DecisionTree::builtin(4).unwrap();
        let noise = NoiseConfig {
            transducer: 0.02,
            compression: GateNoise::new(PauliModel::Paired, 0.03).unwrap(),
            decoding: GateNoise::new(PauliModel::Independent, 0.05).unwrap(),
        };
        let rx = NoisyReceiver::with_tree(&code, &enc, &tree, noise).unwrap();
        assert!(rx.effective_povm().completeness_deviation() < 1e-12);
        let a = 0.25;
        for (_, x) in build_codebook(&code).entries() {
            let direct = simulate_codeword(x, a, &enc, &tree, &noise).unwrap();
            let rho = transducer_channel(&bpsk_codeword_state(x, a).unwrap().density(), noise.transducer).unwrap();
            let fast = rx.effective_povm().probabilities(&rho).unwrap();
            for (label, v) in rx.effective_povm().labels().iter().zip(fast) {
                assert!((direct[label] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noisy_register_states_are_physical() {
        let enc = TimeBinEncoding::single_photon(4).unwrap();
        let rho = bpsk_codeword_state(&"1010".parse().unwrap(), 0.3).unwrap().density();
        for model in [PauliModel::Independent, PauliModel::Uniform, PauliModel::Paired] {
            let reg = compression_circuit(&rho, &enc, &GateNoise::new(model, 0.05).unwrap()).unwrap();
            reg.check_state().unwrap();
        }
    }

    #[test]
    fn fully_depolarized_input_carries_no_information() {
        let code = PolarCode::n4();
        let ch = noisy_pipeline_channel(&code, 0.2, &NoiseConfig::transducer(1.0)).unwrap();
        for r in 1..ch.n_inputs() {
            assert!(ch.row(r).iter().zip(ch.row(0)).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }
}
