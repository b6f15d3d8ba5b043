//! Rates of the classical channel induced by a receiver: mutual information,
//! capacity-achieving inputs, photon information efficiency (PIE) and the
//! single-symbol and Holevo baselines.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::Truncation;
use crate::polar::PolarCode;
use crate::scdecoder::{
    build_sc_povm_with, effective_channel, MultiphotonPolicy, TransitionMatrix, DEFAULT_EIGEN_TOL,
};

/// Rows closer than this are treated as the same channel output law.
pub const IDENTICAL_ROW_TOL: f64 = 1e-12;

/// `h₂(x)` in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return invalid(format!("binary entropy argument {x} outside [0, 1]"));
    }
    Ok(-xlog2x(x) - xlog2x(1.0 - x))
}

fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Probability vector over the inputs of a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    probabilities: Vec<f64>,
}

impl InputDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return invalid("input distribution is empty");
        }
        if let Some(p) = probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return invalid(format!("input probability {p} is negative or not finite"));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return invalid(format!("input probabilities sum to {sum}"));
        }
        Ok(Self { probabilities })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("input distribution is empty");
        }
        Ok(Self {
            probabilities: vec![1.0 / n as f64; n],
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

fn output_law(channel: &TransitionMatrix, p: &[f64]) -> Vec<f64> {
    let w = channel.probabilities();
    (0..channel.n_outputs())
        .map(|y| (0..channel.n_inputs()).map(|u| p[u] * w[(u, y)]).sum())
        .collect()
}

/// `D(W_u ‖ q)` in bits for every input row.
fn row_divergences(channel: &TransitionMatrix, q: &[f64]) -> Vec<f64> {
    let w = channel.probabilities();
    (0..channel.n_inputs())
        .map(|u| {
            (0..channel.n_outputs())
                .map(|y| {
                    let v = w[(u, y)];
                    if v > 0.0 {
                        v * (v / q[y]).log2()
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect()
}

fn mutual_information_raw(channel: &TransitionMatrix, p: &[f64]) -> f64 {
    let q = output_law(channel, p);
    let d = row_divergences(channel, &q);
    p.iter()
        .zip(&d)
        .map(|(pu, du)| if *pu > 0.0 { pu * du } else { 0.0 })
        .sum::<f64>()
        .max(0.0)
}

/// `I(Y;U)` in bits.
pub fn mutual_information(channel: &TransitionMatrix, p: &InputDistribution) -> Result<f64> {
    if p.len() != channel.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: channel.n_inputs(),
            actual: p.len(),
        });
    }
    Ok(mutual_information_raw(channel, p.probabilities()))
}

/// Stopping rule and iteration cap for [`blahut_arimoto`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaOptions {
    /// Stop once `max_u D(W_u‖q) − I` drops below this many bits.
    pub tol: f64,
    pub max_iter: usize,
    /// Allow over-relaxed steps `p ∝ p·2^{μD}` with `μ > 1`.
    pub accelerate: bool,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200_000,
            accelerate: true,
        }
    }
}

/// Outcome of a capacity computation.
#[derive(Debug, Clone, PartialEq)]
pub struct BaResult {
    pub distribution: InputDistribution,
    pub capacity_bits: f64,
    /// `max_u D(W_u‖q) − I` at termination; an upper bound on the shortfall.
    pub gap_bits: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Mutual information after every accepted step.
    pub history: Vec<f64>,
}

/// Capacity of a discrete memoryless channel.
///
/// Each step multiplies `p_u` by `2^{μ D(W_u‖q)}`. `μ = 1` is the classical
/// update and never lowers `I`; larger `μ` is tried first when accelerating
/// and kept only if `I` does not drop.
pub fn blahut_arimoto(channel: &TransitionMatrix, opts: &BaOptions) -> Result<BaResult> {
    if !(opts.tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {}", opts.tol));
    }
    let n = channel.n_inputs();
    let mut p = vec![1.0 / n as f64; n];
    let mut info = mutual_information_raw(channel, &p);
    let mut history = vec![info];
    let mut step = 1.0f64;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let q = output_law(channel, &p);
        let d = row_divergences(channel, &q);
        let dmax = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        gap = dmax - info;
        if gap < opts.tol {
            break;
        }
        iterations += 1;
        let update = |mu: f64| -> Vec<f64> {
            // subtract dmax so the exponent never overflows
            let mut next: Vec<f64> = p
                .iter()
                .zip(&d)
                .map(|(pu, du)| pu * (mu * (du - dmax)).exp2())
                .collect();
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= total);
            next
        };
        loop {
            let candidate = update(step);
            let candidate_info = mutual_information_raw(channel, &candidate);
            if step == 1.0 || candidate_info >= info {
                p = candidate;
                info = candidate_info.max(info);
                if opts.accelerate {
                    step = (step * 1.5).min(64.0);
                }
                break;
            }
            step = (step / 2.0).max(1.0);
        }
        history.push(info);
    }
    Ok(BaResult {
        distribution: InputDistribution::new(p)?,
        capacity_bits: info,
        gap_bits: gap,
        iterations,
        converged: gap < opts.tol,
        history,
    })
}

/// Groups of inputs whose rows agree within [`IDENTICAL_ROW_TOL`], each in
/// increasing index order.
pub fn identical_row_groups(channel: &TransitionMatrix) -> Vec<Vec<usize>> {
    let w = channel.probabilities();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for u in 0..channel.n_inputs() {
        let same = |v: usize| {
            (0..channel.n_outputs()).all(|y| (w[(u, y)] - w[(v, y)]).abs() <= IDENTICAL_ROW_TOL)
        };
        match groups.iter_mut().find(|g| same(g[0])) {
            Some(g) => g.push(u),
            None => groups.push(vec![u]),
        }
    }
    groups
}

/// Moves the mass of every group of identical rows onto its first input.
pub fn canonicalize(channel: &TransitionMatrix, p: &InputDistribution) -> Result<InputDistribution> {
    if p.len() != channel.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: channel.n_inputs(),
            actual: p.len(),
        });
    }
    let mut out = vec![0.0; p.len()];
    for group in identical_row_groups(channel) {
        out[group[0]] = group.iter().map(|&u| p.probabilities()[u]).sum();
    }
    InputDistribution::new(out)
}

/// Capacity-achieving input (canonicalized) and the capacity in bits.
pub fn optimize_input(channel: &TransitionMatrix) -> Result<(InputDistribution, f64)> {
    optimize_input_with(channel, &BaOptions::default())
}

pub fn optimize_input_with(
    channel: &TransitionMatrix,
    opts: &BaOptions,
) -> Result<(InputDistribution, f64)> {
    let res = blahut_arimoto(channel, opts)?;
    let p = canonicalize(channel, &res.distribution)?;
    let info = mutual_information(channel, &p)?;
    Ok((p, info))
}

fn check_nbar(nbar: f64) -> Result<()> {
    if !(nbar > 0.0) || !nbar.is_finite() {
        return invalid(format!("mean photon number must be positive, got {nbar}"));
    }
    Ok(())
}

/// Bits per photon: `I / (N·n̄)`.
pub fn pie(info_bits: f64, n_bins: usize, nbar: f64) -> Result<f64> {
    check_nbar(nbar)?;
    if n_bins == 0 {
        return invalid("block length must be positive");
    }
    Ok(info_bits / (n_bins as f64 * nbar))
}

/// Which closed form to use for the single-symbol capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DolinarForm {
    /// `1 − h₂((1 − √(1 − e^{−4n̄}))/2)`, built on the Helstrom error.
    #[default]
    Helstrom,
    /// `1 − h₂((1 − √(e^{−4n̄}))/2)`, which tends to one bit as `n̄ → 0`.
    UnitLimit,
}

/// Capacity per symbol of BPSK with an optimal symbol-by-symbol receiver.
pub fn dolinar_capacity(nbar: f64, form: DolinarForm) -> Result<f64> {
    check_nbar(nbar)?;
    let error = match form {
        // √(1 − e^{−4n̄}) through expm1 to keep precision for tiny n̄
        DolinarForm::Helstrom => (1.0 - (-(-4.0 * nbar).exp_m1()).sqrt()) / 2.0,
        DolinarForm::UnitLimit => (1.0 - (-4.0 * nbar).exp().sqrt()) / 2.0,
    };
    Ok(1.0 - binary_entropy(error)?)
}

pub fn dolinar_pie(nbar: f64) -> Result<f64> {
    Ok(dolinar_capacity(nbar, DolinarForm::Helstrom)? / nbar)
}

/// Holevo capacity per symbol of BPSK, `h₂((1 − e^{−2n̄})/2)`.
pub fn holevo_capacity(nbar: f64) -> Result<f64> {
    check_nbar(nbar)?;
    binary_entropy(-(-2.0 * nbar).exp_m1() / 2.0)
}

pub fn holevo_pie(nbar: f64) -> Result<f64> {
    Ok(holevo_capacity(nbar)? / nbar)
}

/// Anything that turns a pulse amplitude into a classical channel.
pub trait ChannelModel: Sync {
    fn n_bins(&self) -> usize;
    fn channel(&self, alpha: f64) -> Result<TransitionMatrix>;
}

/// POVM-algebra channel of an ideal receiver.
#[derive(Debug, Clone)]
pub struct NoiselessModel {
    pub code: PolarCode,
    pub truncation: Truncation,
    pub policy: MultiphotonPolicy,
    pub eigen_tol: f64,
}

impl NoiselessModel {
    pub fn new(code: PolarCode) -> Self {
        Self {
            code,
            truncation: Truncation::OnePhoton,
            policy: MultiphotonPolicy::UniformGuess,
            eigen_tol: DEFAULT_EIGEN_TOL,
        }
    }
}

impl ChannelModel for NoiselessModel {
    fn n_bins(&self) -> usize {
        self.code.n_bins()
    }

    fn channel(&self, alpha: f64) -> Result<TransitionMatrix> {
        let povm = build_sc_povm_with(&self.code, alpha, self.truncation, self.eigen_tol)?;
        effective_channel(&self.code, alpha, &povm, self.policy)
    }
}

/// One evaluated operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    /// Mean photon number per time bin, `α²`.
    pub nbar: f64,
    pub alpha: f64,
    pub pie: f64,
    pub mutual_information_bits: f64,
    pub optimal_input: InputDistribution,
    pub input_labels: Vec<String>,
    pub config_id: String,
}

/// Capacity and PIE of `model` at a fixed amplitude.
pub fn evaluate_point(
    model: &dyn ChannelModel,
    alpha: f64,
    opts: &BaOptions,
    config_id: &str,
) -> Result<RatePoint> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    let channel = model.channel(alpha)?;
    let (p, info) = optimize_input_with(&channel, opts)?;
    let nbar = alpha * alpha;
    Ok(RatePoint {
        nbar,
        alpha,
        pie: pie(info, model.n_bins(), nbar)?,
        mutual_information_bits: info,
        optimal_input: p,
        input_labels: channel.inputs().to_vec(),
        config_id: config_id.to_string(),
    })
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || n == 0 {
        return invalid(format!("bad log grid [{lo}, {hi}] with {n} points"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Settings for the amplitude search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSearch {
    /// Stop refining once the bracket in `ln α` is narrower than this.
    pub log_alpha_tol: f64,
    pub ba: BaOptions,
}

impl Default for AlphaSearch {
    fn default() -> Self {
        Self {
            log_alpha_tol: 1e-4,
            ba: BaOptions::default(),
        }
    }
}

/// Maximizes PIE over `α`: scan `alpha_grid`, then golden-section search in
/// `ln α` between the neighbours of the best grid point. A maximizer at the
/// edge of the grid is returned as is.
pub fn optimize_alpha(
    model: &dyn ChannelModel,
    alpha_grid: &[f64],
    search: &AlphaSearch,
    config_id: &str,
) -> Result<RatePoint> {
    if alpha_grid.is_empty() {
        return invalid("alpha grid is empty");
    }
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let points = grid
        .iter()
        .map(|&a| evaluate_point(model, a, &search.ba, config_id))
        .collect::<Result<Vec<_>>>()?;
    let best = (0..points.len())
        .max_by(|&i, &j| points[i].pie.total_cmp(&points[j].pie))
        .expect("grid is non-empty");
    if best == 0 || best + 1 == points.len() {
        return Ok(points[best].clone());
    }

    let eval = |log_a: f64| evaluate_point(model, log_a.exp(), &search.ba, config_id);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (grid[best - 1].ln(), grid[best + 1].ln());
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while hi - lo > search.log_alpha_tol {
        if f1.pie >= f2.pie {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let refined = if f1.pie >= f2.pie { f1 } else { f2 };
    if refined.pie >= points[best].pie {
        Ok(refined)
    } else {
        Ok(points[best].clone())
    }
}
