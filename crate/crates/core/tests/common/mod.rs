#![allow(dead_code)]

use std::sync::Arc;

use ldrkit::{Matrix, OperatorMatrix, OperatorPair, StructuredMatrix, Vector};
use rand::Rng;

pub fn rand_vec<R: Rng>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn rand_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// diag(1, …, n) / (n + 1): distinct absolute values inside (0, 1).
pub fn scaled_diag(n: usize) -> OperatorMatrix {
    OperatorMatrix::diagonal(Vector::from_fn(n, |i, _| (i + 1) as f64 / (n + 1) as f64))
}

pub fn embeddable_pair(n: usize) -> Arc<OperatorPair> {
    Arc::new(OperatorPair::embeddable(OperatorMatrix::unit_circulant(n, 1.0), scaled_diag(n)).unwrap())
}

/// Nodes with pairwise gaps bounded away from zero.
pub fn spaced_nodes<R: Rng>(rng: &mut R, n: usize, offset: f64) -> Vector {
    Vector::from_fn(n, |i, _| offset + i as f64 + rng.random_range(0.1..0.9))
}

pub fn random_structured<R: Rng>(rng: &mut R, family: ldrkit::Family, n: usize) -> StructuredMatrix {
    use ldrkit::Family::*;
    match family {
        Circulant => StructuredMatrix::circulant(rand_vec(rng, n)),
        Toeplitz => {
            let col = rand_vec(rng, n);
            let mut row = rand_vec(rng, n);
            row[0] = col[0];
            StructuredMatrix::toeplitz(col, row).unwrap()
        }
        Hankel => {
            let col = rand_vec(rng, n);
            let mut row = rand_vec(rng, n);
            row[0] = col[n - 1];
            StructuredMatrix::hankel(col, row).unwrap()
        }
        // nodes in [0.5, 1.5) keep powers moderate
        Vandermonde => StructuredMatrix::vandermonde(Vector::from_fn(n, |_, _| rng.random_range(0.5..1.5))),
        Cauchy => {
            let s = spaced_nodes(rng, n, 0.0);
            let t = spaced_nodes(rng, n, -(n as f64) - 1.0);
            StructuredMatrix::cauchy(s, t).unwrap()
        }
    }
}

/// Central finite differences of `f` at `params`, step `1e-6·(1 + |p|)`.
pub fn central_differences(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            let h = 1e-6 * (1.0 + orig.abs());
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|analytic - numeric| / max(1, |analytic|)`.
pub fn worst_relative(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}
