//! Stein and Sylvester displacement, numerical displacement rank, and the
//! compress/decompress round trip for operators with an `a`-potent `A`.
//!
//! Decompression uses
//! `M = [Σ_{k<q} A^k Δ(M) B^k] (I - a B^q)⁻¹`, valid whenever `A^q = aI`.

use std::sync::Arc;

use crate::error::{LdrError, Result};
use crate::linalg::{condition_number, jacobi_svd, numerical_rank, Matrix, Vector};
use crate::operator::{eigendecompose, scale_rows, OperatorKind, OperatorMatrix, Potency};

/// Default relative threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-8;
/// Pairs whose `I - aB^q` has a larger condition number are rejected.
pub const COND_MAX: f64 = 1e12;
/// Minimum gap between distinct absolute values of `B`'s eigenvalues.
pub const SEP_MIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisplacementForm {
    /// `M - A M B`
    Stein,
    /// `A M - M B`
    Sylvester,
}

/// `T = (I - aB^q)⁻¹` in the cheapest form that represents it.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Identity,
    Diagonal(Vector),
    Dense(Matrix),
}

impl Transform {
    pub fn apply(&self, x: &Vector) -> Vector {
        match self {
            Transform::Identity => x.clone(),
            Transform::Diagonal(d) => d.component_mul(x),
            Transform::Dense(t) => t * x,
        }
    }

    pub fn apply_transpose(&self, x: &Vector) -> Vector {
        match self {
            Transform::Identity => x.clone(),
            Transform::Diagonal(d) => d.component_mul(x),
            Transform::Dense(t) => t.tr_mul(x),
        }
    }

    /// `T X`.
    pub fn apply_cols(&self, x: &Matrix) -> Matrix {
        match self {
            Transform::Identity => x.clone(),
            Transform::Diagonal(d) => scale_rows(x, d),
            Transform::Dense(t) => t * x,
        }
    }

    /// `Tᵀ X`.
    pub fn apply_transpose_cols(&self, x: &Matrix) -> Matrix {
        match self {
            Transform::Identity => x.clone(),
            Transform::Diagonal(d) => scale_rows(x, d),
            Transform::Dense(t) => t.tr_mul(x),
        }
    }

    /// `X T`.
    pub fn right_mul(&self, x: &Matrix) -> Matrix {
        match self {
            Transform::Identity => x.clone(),
            Transform::Diagonal(d) => {
                let mut out = x.clone();
                for (j, mut col) in out.column_iter_mut().enumerate() {
                    col *= d[j];
                }
                out
            }
            Transform::Dense(t) => x * t,
        }
    }

    pub fn to_dense(&self, n: usize) -> Matrix {
        match self {
            Transform::Identity => Matrix::identity(n, n),
            Transform::Diagonal(d) => Matrix::from_diagonal(d),
            Transform::Dense(t) => t.clone(),
        }
    }
}

/// A pair of displacement operators `(A, B)` of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPair {
    a: OperatorMatrix,
    b: OperatorMatrix,
    transform: Option<Transform>,
    supports_embedding: bool,
}

impl OperatorPair {
    /// Builds a pair. When `A` is `a`-potent, `(I - aB^q)⁻¹` is precomputed and the
    /// pair is rejected if that matrix is singular or has condition number above
    /// [`COND_MAX`]. Pairs without potency are accepted but cannot decompress.
    pub fn new(a: OperatorMatrix, b: OperatorMatrix) -> Result<Self> {
        if a.n() != b.n() {
            return Err(LdrError::DimensionMismatch {
                context: "operator pair",
                expected: a.n(),
                found: b.n(),
            });
        }
        let transform = match a.potency() {
            Some(p) => Some(build_transform(&b, p)?),
            None => None,
        };
        let mut pair = Self {
            a,
            b,
            transform,
            supports_embedding: false,
        };
        pair.supports_embedding = pair.embedding_conditions().is_ok();
        Ok(pair)
    }

    /// Builds a pair that must admit column embeddings: `A` potent, nonsingular and
    /// diagonalizable, `I - aB^q` invertible, and `B` nonsingular, diagonalizable with
    /// eigenvalues of pairwise distinct absolute value.
    pub fn embeddable(a: OperatorMatrix, b: OperatorMatrix) -> Result<Self> {
        let pair = Self::new(a, b)?;
        pair.embedding_conditions()?;
        Ok(pair)
    }

    fn embedding_conditions(&self) -> Result<()> {
        let fail = |why: &str| Err(LdrError::NotConstructible(why.to_string()));
        if self.transform.is_none() {
            return fail("A is not a-potent");
        }
        if self.n() == 0 {
            return fail("empty operators");
        }
        let a_eig = eigendecompose(&self.a)
            .map_err(|_| LdrError::NotConstructible("A is not diagonalizable".into()))?;
        if a_eig.lambda.iter().any(|l| l.norm() == 0.0) {
            return fail("A is singular");
        }
        eigendecompose(&self.b)
            .map_err(|_| LdrError::NotConstructible("B is not diagonalizable".into()))?;
        let mut mags: Vec<f64> = self.b.eigenvalues().iter().map(|l| l.norm()).collect();
        if mags.contains(&0.0) {
            return fail("B is singular");
        }
        mags.sort_by(f64::total_cmp);
        if mags.windows(2).any(|w| w[1] - w[0] < SEP_MIN) {
            return fail("eigenvalues of B do not have distinct absolute values");
        }
        Ok(())
    }

    /// Toeplitz-type pair `(Z_1, Z_0ᵀ)`; `T = I` since `Z_0ᵀ` is nilpotent.
    pub fn toeplitz(n: usize) -> Self {
        Self::new(
            OperatorMatrix::unit_circulant(n, 1.0),
            OperatorMatrix::unit_circulant_transposed(n, 0.0),
        )
        .expect("(Z_1, Z_0^T) is always a valid pair")
    }

    /// `(I, 0)`: here `q = 1`, `T = I` and the decompressed matrix is `G Hᵀ`.
    pub fn low_rank(n: usize) -> Self {
        Self::new(OperatorMatrix::identity(n), OperatorMatrix::zero(n))
            .expect("(I, 0) is always a valid pair")
    }

    pub fn a(&self) -> &OperatorMatrix {
        &self.a
    }

    pub fn b(&self) -> &OperatorMatrix {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn potency(&self) -> Option<Potency> {
        self.a.potency()
    }

    pub fn transform(&self) -> Option<&Transform> {
        self.transform.as_ref()
    }

    pub fn supports_embedding(&self) -> bool {
        self.supports_embedding
    }

    fn check_square(&self, m: &Matrix, context: &'static str) -> Result<()> {
        let n = self.n();
        if m.nrows() != n {
            return Err(LdrError::DimensionMismatch {
                context,
                expected: n,
                found: m.nrows(),
            });
        }
        if m.ncols() != n {
            return Err(LdrError::DimensionMismatch {
                context,
                expected: n,
                found: m.ncols(),
            });
        }
        Ok(())
    }
}

fn build_transform(b: &OperatorMatrix, p: Potency) -> Result<Transform> {
    let n = b.n();
    if b.is_nilpotent_shift() && p.q >= n {
        return Ok(Transform::Identity);
    }
    if let OperatorKind::Diagonal(d) = b.kind() {
        let diag = d.map(|v| 1.0 - p.a * v.powi(p.q as i32));
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if cond > COND_MAX {
            return Err(LdrError::SingularTransform { cond });
        }
        if diag.iter().all(|&v| v == 1.0) {
            return Ok(Transform::Identity);
        }
        return Ok(Transform::Diagonal(diag.map(|v| 1.0 / v)));
    }
    let m = Matrix::identity(n, n) - b.power_dense(p.q) * p.a;
    let cond = condition_number(&m);
    if cond > COND_MAX {
        return Err(LdrError::SingularTransform { cond });
    }
    let t = m
        .lu()
        .try_inverse()
        .ok_or(LdrError::SingularTransform { cond })?;
    Ok(Transform::Dense(t))
}

/// Generators `(G, H)` with `Δ_{A,B}(W) = G Hᵀ`, the compressed form of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementRep {
    pair: Arc<OperatorPair>,
    g: Matrix,
    h: Matrix,
}

impl DisplacementRep {
    pub fn new(pair: Arc<OperatorPair>, g: Matrix, h: Matrix) -> Result<Self> {
        let n = pair.n();
        for (m, context) in [(&g, "generator G rows"), (&h, "generator H rows")] {
            if m.nrows() != n {
                return Err(LdrError::DimensionMismatch {
                    context,
                    expected: n,
                    found: m.nrows(),
                });
            }
        }
        if g.ncols() != h.ncols() {
            return Err(LdrError::DimensionMismatch {
                context: "generator widths",
                expected: g.ncols(),
                found: h.ncols(),
            });
        }
        Ok(Self { pair, g, h })
    }

    pub fn zeros(pair: Arc<OperatorPair>, r: usize) -> Self {
        let n = pair.n();
        Self {
            pair,
            g: Matrix::zeros(n, r),
            h: Matrix::zeros(n, r),
        }
    }

    pub fn pair(&self) -> &Arc<OperatorPair> {
        &self.pair
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn g_mut(&mut self) -> &mut Matrix {
        &mut self.g
    }

    pub fn h_mut(&mut self) -> &mut Matrix {
        &mut self.h
    }

    pub fn n(&self) -> usize {
        self.pair.n()
    }

    pub fn rank(&self) -> usize {
        self.g.ncols()
    }

    fn decompression(&self) -> Result<(Potency, &Transform)> {
        match (self.pair.potency(), self.pair.transform()) {
            (Some(p), Some(t)) => Ok((p, t)),
            _ => Err(LdrError::MissingPotency),
        }
    }

    /// `Wᵀ x = Tᵀ Σ_k (Bᵀ)^k H Gᵀ (Aᵀ)^k x` without forming `W`.
    pub fn apply_transpose(&self, x: &Vector) -> Result<Vector> {
        let (p, t) = self.decompression()?;
        self.check_vec(x)?;
        let a = self.pair.a();
        let b = self.pair.b();
        let mut u = x.clone();
        let mut z = Vec::with_capacity(p.q);
        for k in 0..p.q {
            if k > 0 {
                u = a.apply_transpose(&u);
            }
            z.push(self.g.tr_mul(&u));
        }
        let mut acc = Vector::zeros(self.n());
        for zk in z.iter().rev() {
            acc = b.apply_transpose(&acc) + &self.h * zk;
        }
        Ok(t.apply_transpose(&acc))
    }

    /// `W x = Σ_k A^k G Hᵀ B^k T x` without forming `W`.
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        let (p, t) = self.decompression()?;
        self.check_vec(x)?;
        let a = self.pair.a();
        let b = self.pair.b();
        let mut w = t.apply(x);
        let mut s = Vec::with_capacity(p.q);
        for k in 0..p.q {
            if k > 0 {
                w = b.apply(&w);
            }
            s.push(self.h.tr_mul(&w));
        }
        let mut acc = Vector::zeros(self.n());
        for sk in s.iter().rev() {
            acc = a.apply(&acc) + &self.g * sk;
        }
        Ok(acc)
    }

    /// `Wᵀ X` for a batch of columns.
    pub fn apply_transpose_cols(&self, x: &Matrix) -> Result<Matrix> {
        let (p, t) = self.decompression()?;
        self.check_rows(x)?;
        let a = self.pair.a();
        let b = self.pair.b();
        let mut u = x.clone();
        let mut z = Vec::with_capacity(p.q);
        for k in 0..p.q {
            if k > 0 {
                u = a.apply_transpose_cols(&u);
            }
            z.push(self.g.tr_mul(&u));
        }
        let mut acc = Matrix::zeros(self.n(), x.ncols());
        for zk in z.iter().rev() {
            acc = b.apply_transpose_cols(&acc);
            acc.gemm(1.0, &self.h, zk, 1.0);
        }
        Ok(t.apply_transpose_cols(&acc))
    }

    /// `W X` for a batch of columns.
    pub fn apply_cols(&self, x: &Matrix) -> Result<Matrix> {
        let (p, t) = self.decompression()?;
        self.check_rows(x)?;
        let a = self.pair.a();
        let b = self.pair.b();
        let mut w = t.apply_cols(x);
        let mut s = Vec::with_capacity(p.q);
        for k in 0..p.q {
            if k > 0 {
                w = b.apply_cols(&w);
            }
            s.push(self.h.tr_mul(&w));
        }
        let mut acc = Matrix::zeros(self.n(), x.ncols());
        for sk in s.iter().rev() {
            acc = a.apply_cols(&acc);
            acc.gemm(1.0, &self.g, sk, 1.0);
        }
        Ok(acc)
    }

    fn check_rows(&self, x: &Matrix) -> Result<()> {
        if x.nrows() != self.n() {
            return Err(LdrError::DimensionMismatch {
                context: "batch rows",
                expected: self.n(),
                found: x.nrows(),
            });
        }
        Ok(())
    }

    fn check_vec(&self, x: &Vector) -> Result<()> {
        if x.len() != self.n() {
            return Err(LdrError::DimensionMismatch {
                context: "vector length",
                expected: self.n(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// `M - A M B`.
pub fn stein_displacement(m: &Matrix, pair: &OperatorPair) -> Result<Matrix> {
    pair.check_square(m, "Stein displacement")?;
    let amb = pair.b().right_mul(&pair.a().apply_cols(m));
    Ok(m - amb)
}

/// `A M - M B`.
pub fn sylvester_displacement(m: &Matrix, pair: &OperatorPair) -> Result<Matrix> {
    pair.check_square(m, "Sylvester displacement")?;
    Ok(pair.a().apply_cols(m) - pair.b().right_mul(m))
}

pub fn displacement(m: &Matrix, pair: &OperatorPair, form: DisplacementForm) -> Result<Matrix> {
    match form {
        DisplacementForm::Stein => stein_displacement(m, pair),
        DisplacementForm::Sylvester => sylvester_displacement(m, pair),
    }
}

/// Stein displacement rank: singular values of `M - AMB` above `tol · σ_max`.
pub fn displacement_rank(m: &Matrix, pair: &OperatorPair, tol: f64) -> Result<usize> {
    displacement_rank_with(m, pair, DisplacementForm::Stein, tol)
}

pub fn displacement_rank_with(
    m: &Matrix,
    pair: &OperatorPair,
    form: DisplacementForm,
    tol: f64,
) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(LdrError::InvalidArgument(format!(
            "rank tolerance must be positive, got {tol}"
        )));
    }
    Ok(numerical_rank(&displacement(m, pair, form)?, tol))
}

/// Truncated-SVD factorisation of the Stein displacement into `r` columns.
/// Fails with [`LdrError::RankExceeded`] if the numerical rank exceeds `r`.
pub fn compress(m: &Matrix, pair: &Arc<OperatorPair>, r: usize) -> Result<DisplacementRep> {
    let delta = stein_displacement(m, pair)?;
    let n = pair.n();
    let svd = jacobi_svd(&delta);
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let measured = if smax > 0.0 {
        svd.sigma.iter().filter(|&&s| s > RANK_TOL * smax).count()
    } else {
        0
    };
    if measured > r {
        return Err(LdrError::RankExceeded { measured, bound: r });
    }
    let mut g = Matrix::zeros(n, r);
    let mut h = Matrix::zeros(n, r);
    for i in 0..measured {
        let s = svd.sigma[i].sqrt();
        g.set_column(i, &(svd.u.column(i) * s));
        h.set_column(i, &(svd.v.column(i) * s));
    }
    DisplacementRep::new(Arc::clone(pair), g, h)
}

/// `[Σ_{k<q} A^k G Hᵀ B^k] (I - aB^q)⁻¹`.
pub fn reconstruct(rep: &DisplacementRep) -> Result<Matrix> {
    let (p, t) = rep.decompression()?;
    let a = rep.pair.a();
    let b = rep.pair.b();
    let n = rep.n();
    let mut left = rep.g.clone();
    let mut right = rep.h.clone();
    let mut sum = Matrix::zeros(n, n);
    for k in 0..p.q {
        if k > 0 {
            left = a.apply_cols(&left);
            right = b.apply_transpose_cols(&right);
        }
        sum += &left * right.transpose();
    }
    Ok(t.right_mul(&sum))
}
