//! Displacement operators: unit-f-circulant shifts, diagonals and explicit dense matrices.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;

use crate::error::{LdrError, Result};
use crate::linalg::{cnorm_inf, norm_inf, to_complex, CMatrix, CVector, Matrix, Vector};

/// Absolute tolerance on `A^q - aI` after normalising `A` by its infinity norm.
pub const TOL_POTENCY: f64 = 1e-10;
/// Relative tolerance on the eigendecomposition residual.
pub const TOL_EIG: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    /// `Z_f`: cyclic down-shift with wrap-around entry `f` (`Z_f e_j = e_{j+1}`,
    /// `Z_f e_{n-1} = f e_0`). With `transposed` set the operator is `Z_fᵀ`, the up-shift.
    UnitCirculant { f: f64, transposed: bool },
    Diagonal(Vector),
    Dense(Matrix),
}

/// `A^q = a I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potency {
    pub q: usize,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    kind: OperatorKind,
    n: usize,
    potency: Option<Potency>,
}

impl OperatorMatrix {
    pub fn unit_circulant(n: usize, f: f64) -> Self {
        Self::from_kind(OperatorKind::UnitCirculant {
            f,
            transposed: false,
        })
        .with_dim(n)
    }

    /// `Z_fᵀ`, the cyclic up-shift.
    pub fn unit_circulant_transposed(n: usize, f: f64) -> Self {
        Self::from_kind(OperatorKind::UnitCirculant {
            f,
            transposed: true,
        })
        .with_dim(n)
    }

    pub fn diagonal(d: Vector) -> Self {
        let n = d.len();
        Self::from_kind(OperatorKind::Diagonal(d)).with_dim(n)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(Vector::from_element(n, 1.0))
    }

    pub fn zero(n: usize) -> Self {
        Self::diagonal(Vector::zeros(n))
    }

    pub fn dense(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(LdrError::DimensionMismatch {
                context: "dense operator (must be square)",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let n = m.nrows();
        Ok(Self::from_kind(OperatorKind::Dense(m)).with_dim(n))
    }

    fn from_kind(kind: OperatorKind) -> Self {
        Self {
            kind,
            n: 0,
            potency: None,
        }
    }

    fn with_dim(mut self, n: usize) -> Self {
        self.n = n;
        self.potency = match &self.kind {
            OperatorKind::UnitCirculant { f, .. } if *f != 0.0 && n > 0 => {
                Some(Potency { q: n, a: *f })
            }
            OperatorKind::UnitCirculant { .. } => None,
            _ => check_potency(&self, n),
        };
        self
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn potency(&self) -> Option<Potency> {
        self.potency
    }

    /// True for `Z_0` and `Z_0ᵀ`, whose `n`-th power vanishes.
    pub fn is_nilpotent_shift(&self) -> bool {
        matches!(self.kind, OperatorKind::UnitCirculant { f, .. } if f == 0.0)
    }

    /// Operators that apply in O(n) without a dense product.
    pub fn is_structured(&self) -> bool {
        !matches!(self.kind, OperatorKind::Dense(_))
    }

    /// Number of scalars needed to describe the operator.
    pub fn descriptor_len(&self) -> usize {
        match &self.kind {
            OperatorKind::UnitCirculant { .. } => 1,
            OperatorKind::Diagonal(d) => d.len(),
            OperatorKind::Dense(m) => m.len(),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match &self.kind {
            OperatorKind::UnitCirculant { f, transposed } => {
                let n = self.n;
                let mut z = Matrix::zeros(n, n);
                for j in 0..n {
                    if j + 1 < n {
                        z[(j + 1, j)] = 1.0;
                    } else {
                        z[(0, j)] += *f;
                    }
                }
                if *transposed {
                    z.transpose()
                } else {
                    z
                }
            }
            OperatorKind::Diagonal(d) => Matrix::from_diagonal(d),
            OperatorKind::Dense(m) => m.clone(),
        }
    }

    /// `A x`.
    pub fn apply(&self, x: &Vector) -> Vector {
        debug_assert_eq!(x.len(), self.n);
        match &self.kind {
            OperatorKind::UnitCirculant { f, transposed } => shift(x, *f, *transposed),
            OperatorKind::Diagonal(d) => d.component_mul(x),
            OperatorKind::Dense(m) => m * x,
        }
    }

    /// `Aᵀ x`.
    pub fn apply_transpose(&self, x: &Vector) -> Vector {
        debug_assert_eq!(x.len(), self.n);
        match &self.kind {
            OperatorKind::UnitCirculant { f, transposed } => shift(x, *f, !*transposed),
            OperatorKind::Diagonal(d) => d.component_mul(x),
            OperatorKind::Dense(m) => m.tr_mul(x),
        }
    }

    /// `A X`.
    pub fn apply_cols(&self, x: &Matrix) -> Matrix {
        debug_assert_eq!(x.nrows(), self.n);
        match &self.kind {
            OperatorKind::UnitCirculant { f, transposed } => shift_rows(x, *f, *transposed),
            OperatorKind::Diagonal(d) => scale_rows(x, d),
            OperatorKind::Dense(m) => m * x,
        }
    }

    /// `Aᵀ X`.
    pub fn apply_transpose_cols(&self, x: &Matrix) -> Matrix {
        debug_assert_eq!(x.nrows(), self.n);
        match &self.kind {
            OperatorKind::UnitCirculant { f, transposed } => shift_rows(x, *f, !*transposed),
            OperatorKind::Diagonal(d) => scale_rows(x, d),
            OperatorKind::Dense(m) => m.tr_mul(x),
        }
    }

    /// `X A`.
    pub fn right_mul(&self, x: &Matrix) -> Matrix {
        self.apply_transpose_cols(&x.transpose()).transpose()
    }

    pub fn power_dense(&self, k: usize) -> Matrix {
        let mut p = Matrix::identity(self.n, self.n);
        for _ in 0..k {
            p = self.apply_cols(&p);
        }
        p
    }

    /// Eigenvalues (complex in general).
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        match &self.kind {
            OperatorKind::Diagonal(d) => d.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            OperatorKind::UnitCirculant { f, .. } => {
                let beta = principal_root(*f, self.n);
                (0..self.n)
                    .map(|m| beta * unit_root(self.n, m as i64, -1.0))
                    .collect()
            }
            OperatorKind::Dense(m) => m
                .complex_eigenvalues()
                .iter()
                .map(|z| Complex64::new(z.re, z.im))
                .collect(),
        }
    }
}

fn shift(x: &Vector, f: f64, up: bool) -> Vector {
    let n = x.len();
    let mut y = Vector::zeros(n);
    if n == 0 {
        return y;
    }
    if up {
        for i in 0..n - 1 {
            y[i] = x[i + 1];
        }
        y[n - 1] = f * x[0];
    } else {
        y[0] = f * x[n - 1];
        for i in 1..n {
            y[i] = x[i - 1];
        }
    }
    y
}

/// `shift` applied to every column.
fn shift_rows(x: &Matrix, f: f64, up: bool) -> Matrix {
    let (n, m) = x.shape();
    let mut y = Matrix::zeros(n, m);
    if n == 0 {
        return y;
    }
    for j in 0..m {
        let src = x.column(j);
        let mut dst = y.column_mut(j);
        if up {
            for i in 0..n - 1 {
                dst[i] = src[i + 1];
            }
            dst[n - 1] = f * src[0];
        } else {
            dst[0] = f * src[n - 1];
            for i in 1..n {
                dst[i] = src[i - 1];
            }
        }
    }
    y
}

pub(crate) fn scale_rows(x: &Matrix, d: &Vector) -> Matrix {
    let mut y = x.clone();
    for mut col in y.column_iter_mut() {
        col.component_mul_assign(d);
    }
    y
}

/// `exp(sign · 2πi m / n)`.
fn unit_root(n: usize, m: i64, sign: f64) -> Complex64 {
    let m = m.rem_euclid(n as i64) as f64;
    Complex64::from_polar(1.0, sign * 2.0 * PI * m / n as f64)
}

/// Principal complex `n`-th root of a real scalar.
fn principal_root(f: f64, n: usize) -> Complex64 {
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let arg = if f < 0.0 { PI } else { 0.0 };
    Complex64::from_polar(f.abs().powf(1.0 / n as f64), arg / n as f64)
}

/// Smallest `q ≤ q_max` with `A^q = a I` for a nonzero scalar `a`, checked on the
/// operator normalised by its infinity norm.
pub fn check_potency(op: &OperatorMatrix, q_max: usize) -> Option<Potency> {
    let n = op.n();
    if n == 0 {
        return None;
    }
    let q_max = q_max.min(n);
    match op.kind() {
        OperatorKind::Diagonal(d) => {
            let scale = d.amax();
            if scale == 0.0 {
                return None;
            }
            let normed = d / scale;
            let mut p = Vector::from_element(n, 1.0);
            for q in 1..=q_max {
                p.component_mul_assign(&normed);
                let lead = p[0];
                if lead.abs() > TOL_POTENCY && p.iter().all(|v| (v - lead).abs() <= TOL_POTENCY) {
                    return Some(Potency {
                        q,
                        a: lead * scale.powi(q as i32),
                    });
                }
            }
            None
        }
        _ => {
            let dense = op.to_dense();
            let scale = norm_inf(&dense);
            if scale == 0.0 {
                return None;
            }
            let normed = dense / scale;
            let mut p = Matrix::identity(n, n);
            for q in 1..=q_max {
                p = &normed * &p;
                let lead = p[(0, 0)];
                if lead.abs() <= TOL_POTENCY {
                    continue;
                }
                let resid = norm_inf(&(&p - Matrix::identity(n, n) * lead));
                if resid <= TOL_POTENCY {
                    return Some(Potency {
                        q,
                        a: lead * scale.powi(q as i32),
                    });
                }
            }
            None
        }
    }
}

/// `A = Q⁻¹ diag(Λ) Q`.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub q: CMatrix,
    pub lambda: CVector,
    pub q_inv: CMatrix,
}

impl EigenDecomp {
    pub fn apply_q(&self, v: &CVector) -> CVector {
        &self.q * v
    }

    pub fn apply_q_inv(&self, v: &CVector) -> CVector {
        &self.q_inv * v
    }

    /// `Q⁻¹ diag(Λ) Q`.
    pub fn recompose(&self) -> CMatrix {
        &self.q_inv * CMatrix::from_diagonal(&self.lambda) * &self.q
    }
}

pub fn eigendecompose(op: &OperatorMatrix) -> Result<EigenDecomp> {
    let n = op.n();
    let decomp = match op.kind() {
        OperatorKind::Diagonal(d) => EigenDecomp {
            q: CMatrix::identity(n, n),
            lambda: d.map(|v| Complex64::new(v, 0.0)),
            q_inv: CMatrix::identity(n, n),
        },
        OperatorKind::UnitCirculant { f, transposed } => {
            if *f == 0.0 && n > 1 {
                return Err(LdrError::NotDiagonalizable {
                    residual: f64::INFINITY,
                });
            }
            // Z_f = β D Z_1 D⁻¹ with D = diag(β^{-j}), and Z_1 = F⁻¹ Ω F for the DFT matrix F.
            let beta = principal_root(*f, n);
            let q = CMatrix::from_fn(n, n, |m, j| {
                unit_root(n, (m * j) as i64, -1.0) * beta.powu(j as u32)
            });
            let q_inv = CMatrix::from_fn(n, n, |j, m| {
                unit_root(n, (m * j) as i64, 1.0) / (beta.powu(j as u32) * n as f64)
            });
            let lambda = CVector::from_iterator(
                n,
                (0..n).map(|m| beta * unit_root(n, m as i64, -1.0)),
            );
            if *transposed {
                EigenDecomp {
                    q: q_inv.transpose(),
                    lambda,
                    q_inv: q.transpose(),
                }
            } else {
                EigenDecomp { q, lambda, q_inv }
            }
        }
        OperatorKind::Dense(m) => dense_eigendecompose(m)?,
    };
    let dense = to_complex(&op.to_dense());
    let scale = cnorm_inf(&dense).max(f64::MIN_POSITIVE);
    let residual = cnorm_inf(&(decomp.recompose() - dense)) / scale;
    if residual > TOL_EIG || !residual.is_finite() {
        return Err(LdrError::NotDiagonalizable { residual });
    }
    Ok(decomp)
}

fn dense_eigendecompose(m: &Matrix) -> Result<EigenDecomp> {
    let n = m.nrows();
    let symmetric = (m - m.transpose()).amax() <= 1e-14 * m.amax().max(1.0);
    if symmetric {
        let eig = m.clone().symmetric_eigen();
        let v = to_complex(&eig.eigenvectors);
        return Ok(EigenDecomp {
            q: v.transpose(),
            lambda: eig.eigenvalues.map(|v| Complex64::new(v, 0.0)),
            q_inv: v,
        });
    }
    // General case: eigenvalues from the Schur form, eigenvectors as the null
    // direction of (A - λI).
    let lambdas = m.complex_eigenvalues();
    let cm: DMatrix<Complex<f64>> = to_complex(m);
    let mut vecs = CMatrix::zeros(n, n);
    for (col, lam) in lambdas.iter().enumerate() {
        let lam = Complex64::new(lam.re, lam.im);
        let shifted = &cm - CMatrix::identity(n, n) * lam;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.ok_or(LdrError::NotDiagonalizable {
            residual: f64::INFINITY,
        })?;
        let (idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &s)| if s < best.1 { (i, s) } else { best });
        let v = v_t.row(idx).adjoint();
        vecs.set_column(col, &v);
    }
    let q = vecs
        .clone()
        .try_inverse()
        .ok_or(LdrError::NotDiagonalizable {
            residual: f64::INFINITY,
        })?;
    Ok(EigenDecomp {
        q,
        lambda: CVector::from_iterator(n, lambdas.iter().map(|z| Complex64::new(z.re, z.im))),
        q_inv: vecs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_power(m: &Matrix, k: usize) -> Matrix {
        let mut p = Matrix::identity(m.nrows(), m.ncols());
        for _ in 0..k {
            p = m * p;
        }
        p
    }

    #[test]
    fn shift_orientation() {
        let z = OperatorMatrix::unit_circulant(3, 2.0).to_dense();
        let expected = Matrix::from_row_slice(3, 3, &[0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(z, expected);
        let zt = OperatorMatrix::unit_circulant_transposed(3, 2.0).to_dense();
        assert_eq!(zt, expected.transpose());
    }

    #[test]
    fn fast_apply_matches_dense() {
        let x = Vector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let ops = [
            OperatorMatrix::unit_circulant(4, 1.5),
            OperatorMatrix::unit_circulant_transposed(4, -0.5),
            OperatorMatrix::diagonal(Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0])),
        ];
        for op in &ops {
            let d = op.to_dense();
            assert!((op.apply(&x) - &d * &x).amax() < 1e-15);
            assert!((op.apply_transpose(&x) - d.transpose() * &x).amax() < 1e-15);
        }
    }

    #[test]
    fn potency_of_z1() {
        let z1 = OperatorMatrix::unit_circulant(4, 1.0);
        assert_eq!(check_potency(&z1, 4), Some(Potency { q: 4, a: 1.0 }));
        assert_eq!(z1.potency(), Some(Potency { q: 4, a: 1.0 }));
    }

    #[test]
    fn z0_is_nilpotent() {
        let z0 = OperatorMatrix::unit_circulant(4, 0.0);
        assert_eq!(check_potency(&z0, 4), None);
        assert_eq!(z0.potency(), None);
        assert!(dense_power(&z0.to_dense(), 4).amax() == 0.0);
    }

    #[test]
    fn f_circulant_potency_against_dense_power() {
        let zf = OperatorMatrix::unit_circulant(3, 2.0);
        let p = check_potency(&zf, 3).unwrap();
        assert_eq!(p.q, 3);
        assert!((p.a - 2.0).abs() < 1e-12);
        let cube = dense_power(&zf.to_dense(), 3);
        assert!((cube - Matrix::identity(3, 3) * 2.0).amax() < 1e-12);
        // the closed form agrees
        assert_eq!(zf.potency(), Some(Potency { q: 3, a: 2.0 }));
        // q_max below the period finds nothing
        assert_eq!(check_potency(&zf, 2), None);
    }

    #[test]
    fn diagonal_potency() {
        let d = OperatorMatrix::diagonal(Vector::from_vec(vec![1.0, -1.0, 1.0]));
        assert_eq!(d.potency(), Some(Potency { q: 2, a: 1.0 }));
        let id = OperatorMatrix::identity(5);
        assert_eq!(id.potency(), Some(Potency { q: 1, a: 1.0 }));
        let generic = OperatorMatrix::diagonal(Vector::from_vec(vec![1.0, 2.0, 3.0]));
        assert_eq!(generic.potency(), None);
    }

    #[test]
    fn dense_potency_matches_structured() {
        let zf = OperatorMatrix::unit_circulant(5, -3.0);
        let dense = OperatorMatrix::dense(zf.to_dense()).unwrap();
        let p = dense.potency().unwrap();
        assert_eq!(p.q, 5);
        assert!((p.a + 3.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_eigendecomposition_is_trivial() {
        let d = Vector::from_vec(vec![3.0, -1.0, 0.5]);
        let e = eigendecompose(&OperatorMatrix::diagonal(d.clone())).unwrap();
        assert_eq!(e.q, CMatrix::identity(3, 3));
        for i in 0..3 {
            assert_eq!(e.lambda[i], Complex64::new(d[i], 0.0));
        }
    }

    #[test]
    fn z1_eigenvalues_are_fourth_roots_of_unity() {
        let e = eigendecompose(&OperatorMatrix::unit_circulant(4, 1.0)).unwrap();
        // roots of x^4 = 1
        let roots = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for r in roots {
            assert!(e.lambda.iter().any(|l| (l - r).norm() < 1e-12), "missing root {r}");
        }
        for l in e.lambda.iter() {
            assert!((l.powu(4) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn f_circulant_eigendecompositions_reconstruct() {
        for &(n, f) in &[(4usize, 2.0), (5, -0.7), (8, 1.0), (3, -2.0)] {
            for op in [
                OperatorMatrix::unit_circulant(n, f),
                OperatorMatrix::unit_circulant_transposed(n, f),
            ] {
                let e = eigendecompose(&op).unwrap();
                let resid = cnorm_inf(&(e.recompose() - to_complex(&op.to_dense())));
                assert!(resid <= TOL_EIG * norm_inf(&op.to_dense()));
            }
        }
        assert!(eigendecompose(&OperatorMatrix::unit_circulant(4, 0.0)).is_err());
    }

    #[test]
    fn dense_symmetric_residual() {
        let m = Matrix::from_row_slice(
            4,
            4,
            &[
                2.0, 0.3, -0.1, 0.0, 0.3, 1.0, 0.4, 0.2, -0.1, 0.4, -1.5, 0.7, 0.0, 0.2, 0.7, 0.5,
            ],
        );
        let e = eigendecompose(&OperatorMatrix::dense(m.clone()).unwrap()).unwrap();
        let resid = cnorm_inf(&(e.recompose() - to_complex(&m)));
        assert!(resid <= TOL_EIG * norm_inf(&m));
    }

    #[test]
    fn dense_nonsymmetric_and_defective() {
        let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 3.0, 1.0, 1.0, 0.0, -2.0]);
        let e = eigendecompose(&OperatorMatrix::dense(m.clone()).unwrap()).unwrap();
        assert!(cnorm_inf(&(e.recompose() - to_complex(&m))) <= TOL_EIG * norm_inf(&m));

        let jordan = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            eigendecompose(&OperatorMatrix::dense(jordan).unwrap()),
            Err(LdrError::NotDiagonalizable { .. })
        ));
    }
}
