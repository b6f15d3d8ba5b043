//! Quick end-to-end checks: reference matrices and circuit/POVM agreement.

use cqpolar::golden::golden_deviations;
use cqpolar::polar::PolarCode;
use cqpolar::qsim::{NoiseConfig, NoisyReceiver};
use cqpolar::rates::ChannelModel;
use cqpolar::scdecoder::noiseless_channel;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

const GOLDEN_TOL: f64 = 1e-9;
const EQUIVALENCE_TOL: f64 = 1e-9;

fn golden() -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut error = None;
    for a in [0.05, 0.1, 0.2] {
        match golden_deviations(a) {
            Ok(devs) => worst = devs.iter().fold(worst, |m, (_, d)| m.max(*d)),
            Err(e) => error = Some(e.to_string()),
        }
    }
    CheckResult {
        name: "golden matrices".into(),
        passed: error.is_none() && worst < GOLDEN_TOL,
        detail: error.unwrap_or_else(|| format!("max deviation {worst:.1e} (tol {GOLDEN_TOL:.0e})")),
    }
}

fn equivalence(code: PolarCode) -> CheckResult {
    let n = code.n_bins();
    let run = || -> cqpolar::Result<f64> {
        let rx = NoisyReceiver::new(&code, NoiseConfig::noiseless())?;
        let mut worst: f64 = 0.0;
        for a in [0.02, 0.1, 0.3] {
            let circuit = rx.channel(a)?;
            let povm = noiseless_channel(&code, a)?;
            for input in povm.inputs() {
                for label in povm.outputs() {
                    let (x, y) = (circuit.prob(input, label), povm.prob(input, label));
                    worst = worst.max((x.unwrap_or(f64::NAN) - y.unwrap_or(f64::NAN)).abs());
                }
            }
        }
        Ok(worst)
    };
    let (passed, detail) = match run() {
        Ok(worst) => (worst < EQUIVALENCE_TOL, format!("max |circuit − POVM| {worst:.1e} (tol {EQUIVALENCE_TOL:.0e})")),
        Err(e) => (false, e.to_string()),
    };
    CheckResult {
        name: format!("circuit equals POVM, N={n}"),
        passed,
        detail,
    }
}

pub fn run_selftest() -> Vec<CheckResult> {
    vec![golden(), equivalence(PolarCode::n4()), equivalence(PolarCode::n8())]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for check in run_selftest() {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
    }
}
