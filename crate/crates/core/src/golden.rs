//! Reference projectors and POVM elements of the `N = 4, K = 2` decoder on the
//! one-photon space, used as regression data. They do not depend on `α`.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::hilbert::Truncation;
use crate::polar::PolarCode;
use crate::scdecoder::{bit_projectors, build_sc_povm, DEFAULT_EIGEN_TOL};

fn from_rows(rows: [[f64; 5]; 5]) -> DMatrix<f64> {
    DMatrix::from_fn(5, 5, |r, k| rows[r][k])
}

fn eighths(rows: [[i32; 5]; 5]) -> DMatrix<f64> {
    from_rows(rows.map(|r| r.map(|v| v as f64 / 8.0)))
}

pub fn pi_000() -> DMatrix<f64> {
    eighths([
        [8, 0, 0, 0, 0],
        [0, 6, 2, -2, 2],
        [0, 2, 6, 2, -2],
        [0, -2, 2, 6, 2],
        [0, 2, -2, 2, 6],
    ])
}

pub fn pi_001() -> DMatrix<f64> {
    eighths([
        [0, 0, 0, 0, 0],
        [0, 2, -2, 2, -2],
        [0, -2, 2, -2, 2],
        [0, 2, -2, 2, -2],
        [0, -2, 2, -2, 2],
    ])
}

pub fn pi_0000() -> DMatrix<f64> {
    eighths([
        [4, 2, 2, 2, 2],
        [2, 7, -1, -1, -1],
        [2, -1, 7, -1, -1],
        [2, -1, -1, 7, -1],
        [2, -1, -1, -1, 7],
    ])
}

pub fn pi_0001() -> DMatrix<f64> {
    eighths([
        [4, -2, -2, -2, -2],
        [-2, 1, 1, 1, 1],
        [-2, 1, 1, 1, 1],
        [-2, 1, 1, 1, 1],
        [-2, 1, 1, 1, 1],
    ])
}

pub fn pi_0010() -> DMatrix<f64> {
    eighths([
        [4, -2, 2, -2, 2],
        [-2, 7, 1, -1, 1],
        [2, 1, 7, 1, -1],
        [-2, -1, 1, 7, 1],
        [2, 1, -1, 1, 7],
    ])
}

pub fn pi_0011() -> DMatrix<f64> {
    eighths([
        [4, 2, -2, 2, -2],
        [2, 1, -1, 1, -1],
        [-2, -1, 1, -1, 1],
        [2, 1, -1, 1, -1],
        [-2, -1, 1, -1, 1],
    ])
}

pub fn lambda_0000() -> DMatrix<f64> {
    eighths([
        [4, 2, 2, 2, 2],
        [2, 5, 1, -3, 1],
        [2, 1, 5, 1, -3],
        [2, -3, 1, 5, 1],
        [2, 1, -3, 1, 5],
    ])
}

pub fn lambda_0001() -> DMatrix<f64> {
    eighths([
        [4, -2, -2, -2, -2],
        [-2, 1, 1, 1, 1],
        [-2, 1, 1, 1, 1],
        [-2, 1, 1, 1, 1],
        [-2, 1, 1, 1, 1],
    ])
}

pub fn lambda_0010() -> DMatrix<f64> {
    eighths([
        [0, 0, 0, 0, 0],
        [0, 1, -1, 1, -1],
        [0, -1, 1, -1, 1],
        [0, 1, -1, 1, -1],
        [0, -1, 1, -1, 1],
    ])
}

pub fn lambda_0011() -> DMatrix<f64> {
    lambda_0010()
}

/// Largest entrywise deviation of each computed matrix from its reference at
/// the given `α`, labelled `Pi_000`, …, `Lambda_0011`.
pub fn golden_deviations(alpha: f64) -> Result<Vec<(String, f64)>> {
    let code = PolarCode::n4();
    let t = Truncation::OnePhoton;
    let (p000, p001) = bit_projectors(&code, &[0, 0], alpha, t, DEFAULT_EIGEN_TOL)?;
    let (p0000, p0001) = bit_projectors(&code, &[0, 0, 0], alpha, t, DEFAULT_EIGEN_TOL)?;
    let (p0010, p0011) = bit_projectors(&code, &[0, 0, 1], alpha, t, DEFAULT_EIGEN_TOL)?;
    let povm = build_sc_povm(&code, alpha, DEFAULT_EIGEN_TOL)?;

    let dev = |got: &nalgebra::DMatrix<num_complex::Complex64>, want: DMatrix<f64>| {
        got.iter()
            .zip(want.iter())
            .fold(0.0f64, |acc, (g, w)| acc.max((g.re - w).abs()).max(g.im.abs()))
    };
    let mut out = vec![
        ("Pi_000".to_string(), dev(p000.matrix(), pi_000())),
        ("Pi_001".to_string(), dev(p001.matrix(), pi_001())),
        ("Pi_0000".to_string(), dev(p0000.matrix(), pi_0000())),
        ("Pi_0001".to_string(), dev(p0001.matrix(), pi_0001())),
        ("Pi_0010".to_string(), dev(p0010.matrix(), pi_0010())),
        ("Pi_0011".to_string(), dev(p0011.matrix(), pi_0011())),
    ];
    let lambdas = [
        ("0000", lambda_0000()),
        ("0001", lambda_0001()),
        ("0010", lambda_0010()),
        ("0011", lambda_0011()),
    ];
    for (label, want) in lambdas {
        let got = povm.element(label).expect("N = 4 POVM has every message");
        out.push((format!("Lambda_{label}"), dev(got.matrix(), want)));
    }
    Ok(out)
}
