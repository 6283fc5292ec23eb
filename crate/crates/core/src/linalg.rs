//! Small dense helpers shared by the other modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Maximum absolute row sum.
pub fn norm_inf(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn cnorm_inf(m: &CMatrix) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Thin SVD `M = U diag(σ) Vᵀ` with singular values in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// One-sided (Hestenes) Jacobi SVD. Accurate on rank-deficient input, where
/// columns belonging to zero singular values may be arbitrary in `u`.
pub fn jacobi_svd(m: &Matrix) -> Svd {
    let transposed = m.nrows() < m.ncols();
    let mut a = if transposed { m.transpose() } else { m.clone() };
    let cols = a.ncols();
    let mut v = Matrix::identity(cols, cols);
    const MAX_SWEEPS: usize = 60;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(usize, f64)> = (0..cols).map(|j| (j, a.column(j).norm())).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let rows = a.nrows();
    let mut u = Matrix::zeros(rows, cols);
    let mut vs = Matrix::zeros(cols, cols);
    let mut sigma = Vec::with_capacity(cols);
    for (dst, &(src, s)) in order.iter().enumerate() {
        if s > 0.0 {
            u.set_column(dst, &(a.column(src) / s));
        }
        vs.set_column(dst, &v.column(src));
        sigma.push(s);
    }
    if transposed {
        Svd { u: vs, sigma, v: u }
    } else {
        Svd { u, sigma, v: vs }
    }
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let xp = m[(i, p)];
        let xq = m[(i, q)];
        m[(i, p)] = c * xp - s * xq;
        m[(i, q)] = s * xp + c * xq;
    }
}

pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    jacobi_svd(m).sigma
}

/// Number of singular values above `rel_tol * sigma_max`. Zero matrices have rank 0.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 || !smax.is_finite() {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// 2-norm condition number from the singular values; infinite when singular.
pub fn condition_number(m: &Matrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn to_complex_vec(v: &Vector) -> CVector {
    v.map(|x| Complex64::new(x, 0.0))
}

/// Splits a complex vector into its real part and the largest imaginary magnitude.
pub fn real_part(v: &CVector) -> (Vector, f64) {
    let imag = v.iter().fold(0.0_f64, |acc, z| acc.max(z.im.abs()));
    (v.map(|z| z.re), imag)
}

pub fn outer(u: &Vector, v: &Vector) -> Matrix {
    u * v.transpose()
}

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}
