//! The five classic structured families with dense materialisation and fast
//! matrix-vector products.
//!
//! Conventions:
//! - `circulant(c)`: `C[i][j] = c[(i - j) mod n]`, so `c` is the first column.
//! - `toeplitz(col, row)`: `T[i][j] = col[i - j]` below the diagonal, `row[j - i]` above.
//! - `hankel(col, row)`: `H[i][j] = h[i + j]`; `col` is the first column and `row`
//!   the last row, so `col[n-1] == row[0]`.
//! - `vandermonde(t)`: `V[i][j] = t_i^j`.
//! - `cauchy(s, t)`: `C[i][j] = 1 / (s_i - t_j)`.

use num_complex::Complex64;
use rand::Rng;

use crate::displacement::{DisplacementForm, OperatorPair};
use crate::error::{LdrError, Result};
use crate::fourier::FourierPlan;
use crate::linalg::{Matrix, Vector};
use crate::operator::OperatorMatrix;

/// Minimum separation `|s_i - t_j|` for a Cauchy matrix.
pub const CAUCHY_MIN_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Circulant,
    Toeplitz,
    Hankel,
    Vandermonde,
    Cauchy,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Circulant,
        Family::Toeplitz,
        Family::Hankel,
        Family::Vandermonde,
        Family::Cauchy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Circulant => "circulant",
            Family::Toeplitz => "toeplitz",
            Family::Hankel => "hankel",
            Family::Vandermonde => "vandermonde",
            Family::Cauchy => "cauchy",
        }
    }

    /// Displacement-rank bound of the family under its reference operators.
    pub fn rank_bound(self) -> usize {
        match self {
            Family::Circulant | Family::Toeplitz | Family::Hankel => 2,
            Family::Vandermonde | Family::Cauchy => 1,
        }
    }

    /// Number of free parameters of an `n × n` member.
    pub fn parameter_count(self, n: usize) -> usize {
        match self {
            Family::Circulant | Family::Vandermonde => n,
            Family::Toeplitz | Family::Hankel => 2 * n - 1,
            Family::Cauchy => 2 * n,
        }
    }
}

impl std::str::FromStr for Family {
    type Err = LdrError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| LdrError::InvalidArgument(format!("unknown structured family '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StructuredMatrix {
    Circulant { c: Vector },
    Toeplitz { col: Vector, row: Vector },
    Hankel { col: Vector, row: Vector },
    Vandermonde { t: Vector },
    Cauchy { s: Vector, t: Vector },
}

fn same_len(context: &'static str, a: &Vector, b: &Vector) -> Result<()> {
    if a.len() != b.len() {
        return Err(LdrError::DimensionMismatch {
            context,
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

impl StructuredMatrix {
    pub fn circulant(c: Vector) -> Self {
        StructuredMatrix::Circulant { c }
    }

    pub fn toeplitz(col: Vector, row: Vector) -> Result<Self> {
        same_len("toeplitz row length", &col, &row)?;
        if !col.is_empty() && col[0] != row[0] {
            return Err(LdrError::InvalidArgument(format!(
                "toeplitz corner disagrees: col[0] = {}, row[0] = {}",
                col[0], row[0]
            )));
        }
        Ok(StructuredMatrix::Toeplitz { col, row })
    }

    pub fn hankel(col: Vector, row: Vector) -> Result<Self> {
        same_len("hankel row length", &col, &row)?;
        let n = col.len();
        if n > 0 && col[n - 1] != row[0] {
            return Err(LdrError::InvalidArgument(format!(
                "hankel corner disagrees: col[n-1] = {}, row[0] = {}",
                col[n - 1],
                row[0]
            )));
        }
        Ok(StructuredMatrix::Hankel { col, row })
    }

    pub fn vandermonde(t: Vector) -> Self {
        StructuredMatrix::Vandermonde { t }
    }

    pub fn cauchy(s: Vector, t: Vector) -> Result<Self> {
        same_len("cauchy node count", &s, &t)?;
        let gap = s
            .iter()
            .flat_map(|si| t.iter().map(move |tj| (si - tj).abs()))
            .fold(f64::INFINITY, f64::min);
        if gap < CAUCHY_MIN_GAP {
            return Err(LdrError::InvalidArgument(format!(
                "cauchy nodes too close: min |s_i - t_j| = {gap:e}"
            )));
        }
        Ok(StructuredMatrix::Cauchy { s, t })
    }

    /// Builds a member of `family` from its defining vectors, in the order
    /// (c), (col, row), (col, row), (t), (s, t).
    pub fn make(family: Family, vectors: &[Vector]) -> Result<Self> {
        let want = match family {
            Family::Circulant | Family::Vandermonde => 1,
            _ => 2,
        };
        if vectors.len() != want {
            return Err(LdrError::DimensionMismatch {
                context: "number of defining vectors",
                expected: want,
                found: vectors.len(),
            });
        }
        let v = |i: usize| vectors[i].clone();
        match family {
            Family::Circulant => Ok(Self::circulant(v(0))),
            Family::Toeplitz => Self::toeplitz(v(0), v(1)),
            Family::Hankel => Self::hankel(v(0), v(1)),
            Family::Vandermonde => Ok(Self::vandermonde(v(0))),
            Family::Cauchy => Self::cauchy(v(0), v(1)),
        }
    }

    /// A random instance: entries uniform in `[-1, 1)`, Vandermonde nodes in
    /// `[0.5, 1.5)`, and Cauchy nodes `s_i ∈ i + [0.1, 0.9)`, `t_j ∈ j - n - 1 + [0.1, 0.9)`.
    pub fn random<R: Rng + ?Sized>(family: Family, n: usize, rng: &mut R) -> Self {
        let mut uniform = |lo: f64, hi: f64| Vector::from_fn(n, |_, _| rng.random_range(lo..hi));
        match family {
            Family::Circulant => Self::circulant(uniform(-1.0, 1.0)),
            Family::Toeplitz => {
                let col = uniform(-1.0, 1.0);
                let mut row = uniform(-1.0, 1.0);
                row[0] = col[0];
                Self::Toeplitz { col, row }
            }
            Family::Hankel => {
                let col = uniform(-1.0, 1.0);
                let mut row = uniform(-1.0, 1.0);
                row[0] = col[n - 1];
                Self::Hankel { col, row }
            }
            Family::Vandermonde => Self::vandermonde(uniform(0.5, 1.5)),
            Family::Cauchy => {
                let s = uniform(0.1, 0.9) + Vector::from_fn(n, |i, _| i as f64);
                let t = uniform(0.1, 0.9) + Vector::from_fn(n, |j, _| j as f64 - n as f64 - 1.0);
                Self::Cauchy { s, t }
            }
        }
    }

    pub fn family(&self) -> Family {
        match self {
            StructuredMatrix::Circulant { .. } => Family::Circulant,
            StructuredMatrix::Toeplitz { .. } => Family::Toeplitz,
            StructuredMatrix::Hankel { .. } => Family::Hankel,
            StructuredMatrix::Vandermonde { .. } => Family::Vandermonde,
            StructuredMatrix::Cauchy { .. } => Family::Cauchy,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            StructuredMatrix::Circulant { c } => c.len(),
            StructuredMatrix::Toeplitz { col, .. } | StructuredMatrix::Hankel { col, .. } => {
                col.len()
            }
            StructuredMatrix::Vandermonde { t } => t.len(),
            StructuredMatrix::Cauchy { s, .. } => s.len(),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.n();
        match self {
            StructuredMatrix::Circulant { c } => Matrix::from_fn(n, n, |i, j| c[(i + n - j) % n]),
            StructuredMatrix::Toeplitz { col, row } => {
                Matrix::from_fn(n, n, |i, j| if i >= j { col[i - j] } else { row[j - i] })
            }
            StructuredMatrix::Hankel { col, row } => Matrix::from_fn(n, n, |i, j| {
                let k = i + j;
                if k < n {
                    col[k]
                } else {
                    row[k - (n - 1)]
                }
            }),
            StructuredMatrix::Vandermonde { t } => {
                Matrix::from_fn(n, n, |i, j| t[i].powi(j as i32))
            }
            StructuredMatrix::Cauchy { s, t } => Matrix::from_fn(n, n, |i, j| 1.0 / (s[i] - t[j])),
        }
    }

    /// Reference operators under which the family's displacement rank is bounded
    /// by [`Family::rank_bound`].
    ///
    /// Circulant and Toeplitz use `(Z_1, Z_0ᵀ)`, Hankel `(Z_0, Z_1)` and
    /// Vandermonde `(diag(t), Z_0ᵀ)`, all with the Stein form. Cauchy uses
    /// `(diag(s), diag(t))` with the Sylvester form: its Stein displacement under
    /// those operators is not low rank.
    pub fn reference_operators(&self) -> Result<(OperatorPair, DisplacementForm)> {
        let n = self.n();
        match self {
            StructuredMatrix::Circulant { .. } | StructuredMatrix::Toeplitz { .. } => {
                Ok((OperatorPair::toeplitz(n), DisplacementForm::Stein))
            }
            StructuredMatrix::Hankel { .. } => Ok((
                OperatorPair::new(
                    OperatorMatrix::unit_circulant(n, 0.0),
                    OperatorMatrix::unit_circulant(n, 1.0),
                )?,
                DisplacementForm::Stein,
            )),
            StructuredMatrix::Vandermonde { t } => Ok((
                OperatorPair::new(
                    OperatorMatrix::diagonal(t.clone()),
                    OperatorMatrix::unit_circulant_transposed(n, 0.0),
                )?,
                DisplacementForm::Stein,
            )),
            StructuredMatrix::Cauchy { s, t } => Ok((
                OperatorPair::new(
                    OperatorMatrix::diagonal(s.clone()),
                    OperatorMatrix::diagonal(t.clone()),
                )?,
                DisplacementForm::Sylvester,
            )),
        }
    }

    pub fn prepare(&self) -> MatvecKernel {
        let n = self.n();
        match self {
            StructuredMatrix::Circulant { c } if n.is_power_of_two() => {
                MatvecKernel::circulant(c.as_slice())
            }
            StructuredMatrix::Circulant { c } => {
                // wrap to a Toeplitz: first row is (c0, c_{n-1}, ..., c1)
                let row: Vec<f64> = (0..n).map(|j| c[(n - j) % n]).collect();
                MatvecKernel::toeplitz(c.as_slice(), &row, false)
            }
            StructuredMatrix::Toeplitz { col, row } => {
                MatvecKernel::toeplitz(col.as_slice(), row.as_slice(), false)
            }
            StructuredMatrix::Hankel { col, row } => {
                // H = T J with T[i][j] = H[i][n-1-j]: T's first column is `row`,
                // its first row is `col` reversed.
                let t_row: Vec<f64> = col.iter().rev().copied().collect();
                MatvecKernel::toeplitz(row.as_slice(), &t_row, true)
            }
            _ => MatvecKernel::Direct(self.clone()),
        }
    }

    /// `S x`: FFT-based for circulant, Toeplitz and Hankel, direct O(n²) otherwise.
    pub fn matvec(&self, x: &Vector) -> Result<Vector> {
        self.prepare().apply(x)
    }
}

/// A prepared matrix-vector product: spectrum and plan are computed once.
#[derive(Debug, Clone)]
pub enum MatvecKernel {
    Spectral {
        n: usize,
        plan: FourierPlan,
        spectrum: Vec<Complex64>,
        reverse_input: bool,
    },
    Direct(StructuredMatrix),
}

impl MatvecKernel {
    fn circulant(c: &[f64]) -> Self {
        let n = c.len();
        let plan = FourierPlan::new(n).expect("power-of-two length");
        let buf: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let spectrum = plan.forward(&buf).expect("length matches plan");
        MatvecKernel::Spectral {
            n,
            plan,
            spectrum,
            reverse_input: false,
        }
    }

    /// Embeds the Toeplitz matrix into a circulant of length `next_pow2(2n)`.
    fn toeplitz(col: &[f64], row: &[f64], reverse_input: bool) -> Self {
        let n = col.len();
        let m = (2 * n).next_power_of_two().max(1);
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        for (i, &v) in col.iter().enumerate() {
            c[i] = Complex64::new(v, 0.0);
        }
        for j in 1..n {
            c[m - j] = Complex64::new(row[j], 0.0);
        }
        let plan = FourierPlan::new(m).expect("power-of-two length");
        let spectrum = plan.forward(&c).expect("length matches plan");
        MatvecKernel::Spectral {
            n,
            plan,
            spectrum,
            reverse_input,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            MatvecKernel::Spectral { n, .. } => *n,
            MatvecKernel::Direct(s) => s.n(),
        }
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.n() {
            return Err(LdrError::DimensionMismatch {
                context: "structured matvec input",
                expected: self.n(),
                found: x.len(),
            });
        }
        match self {
            MatvecKernel::Spectral {
                n,
                plan,
                spectrum,
                reverse_input,
            } => {
                let mut buf = vec![Complex64::new(0.0, 0.0); plan.len()];
                for i in 0..*n {
                    let v = if *reverse_input { x[n - 1 - i] } else { x[i] };
                    buf[i] = Complex64::new(v, 0.0);
                }
                plan.forward_in_place(&mut buf)?;
                for (b, s) in buf.iter_mut().zip(spectrum) {
                    *b *= s;
                }
                plan.inverse_in_place(&mut buf)?;
                Ok(Vector::from_iterator(*n, buf.iter().take(*n).map(|z| z.re)))
            }
            MatvecKernel::Direct(s) => Ok(direct_matvec(s, x)),
        }
    }
}

fn direct_matvec(s: &StructuredMatrix, x: &Vector) -> Vector {
    let n = s.n();
    match s {
        StructuredMatrix::Vandermonde { t } => Vector::from_fn(n, |i, _| {
            // Horner in t_i
            x.iter().rev().fold(0.0, |acc, &xj| acc * t[i] + xj)
        }),
        StructuredMatrix::Cauchy { s, t } => Vector::from_fn(n, |i, _| {
            (0..n).map(|j| x[j] / (s[i] - t[j])).sum()
        }),
        other => other.to_dense() * x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::displacement::{displacement_rank_with, RANK_TOL};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn circulant_e1_is_identity() {
        let c = StructuredMatrix::circulant(v(&[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(c.to_dense(), Matrix::identity(4, 4));
        let x = v(&[0.3, -1.0, 2.0, 5.0]);
        assert!((c.matvec(&x).unwrap() - &x).amax() < 1e-15);
    }

    #[test]
    fn zero_toeplitz() {
        let t = StructuredMatrix::toeplitz(Vector::zeros(5), Vector::zeros(5)).unwrap();
        assert_eq!(t.to_dense(), Matrix::zeros(5, 5));
    }

    #[test]
    fn vandermonde_by_hand() {
        let m = StructuredMatrix::vandermonde(v(&[1.0, 2.0])).to_dense();
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn circulant_columns_shift_down() {
        let m = StructuredMatrix::circulant(v(&[1.0, 2.0, 3.0])).to_dense();
        assert_eq!(
            m,
            Matrix::from_row_slice(3, 3, &[1.0, 3.0, 2.0, 2.0, 1.0, 3.0, 3.0, 2.0, 1.0])
        );
    }

    #[test]
    fn hankel_is_antidiagonal_constant() {
        let (a, b, c, d, e) = (1.0, 2.0, 3.0, 4.0, 5.0);
        let m = StructuredMatrix::hankel(v(&[a, b, c]), v(&[c, d, e])).unwrap().to_dense();
        assert_eq!(m, Matrix::from_row_slice(3, 3, &[a, b, c, b, c, d, c, d, e]));
    }

    #[test]
    fn cauchy_by_hand() {
        let m = StructuredMatrix::cauchy(v(&[2.0, 3.0]), v(&[0.0, 1.0])).unwrap().to_dense();
        let expected = Matrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0 / 3.0, 0.5]);
        assert!((m - expected).amax() < 1e-15);
    }

    #[test]
    fn constraint_violations() {
        assert!(StructuredMatrix::cauchy(v(&[1.0, 2.0]), v(&[0.0, 2.0])).is_err());
        assert!(StructuredMatrix::toeplitz(v(&[1.0, 2.0]), v(&[0.0, 2.0])).is_err());
        assert!(StructuredMatrix::hankel(v(&[1.0, 2.0]), v(&[1.0, 2.0])).is_err());
        assert!(StructuredMatrix::toeplitz(v(&[1.0, 2.0]), v(&[1.0])).is_err());
        assert!(StructuredMatrix::make(Family::Circulant, &[]).is_err());
        let x = Vector::zeros(3);
        assert!(StructuredMatrix::circulant(Vector::zeros(4)).matvec(&x).is_err());
    }

    #[test]
    fn family_parses() {
        assert_eq!("Toeplitz".parse::<Family>().unwrap(), Family::Toeplitz);
        assert!("banded".parse::<Family>().is_err());
    }

    #[test]
    fn random_circulant_and_padded_toeplitz_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rand_vec = |n: usize| Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let c = StructuredMatrix::circulant(rand_vec(16));
        let x = rand_vec(16);
        let dense = c.to_dense() * &x;
        assert!((c.matvec(&x).unwrap() - &dense).norm() <= 1e-10 * dense.norm());

        let col = rand_vec(12);
        let mut row = rand_vec(12);
        row[0] = col[0];
        let t = StructuredMatrix::toeplitz(col, row).unwrap();
        let x = rand_vec(12);
        let dense = t.to_dense() * &x;
        assert!((t.matvec(&x).unwrap() - &dense).norm() <= 1e-10 * dense.norm());
    }

    #[test]
    fn reference_operators_bound_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 8;
        let mut rand_vec = |n: usize| Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let col = rand_vec(n);
        let mut row = rand_vec(n);
        row[0] = col[0];
        let mut hrow = rand_vec(n);
        hrow[0] = col[n - 1];
        let s = Vector::from_fn(n, |i, _| 1.0 + i as f64);
        let t = Vector::from_fn(n, |i, _| -0.5 - i as f64);
        let members = [
            StructuredMatrix::circulant(col.clone()),
            StructuredMatrix::toeplitz(col.clone(), row).unwrap(),
            StructuredMatrix::hankel(col.clone(), hrow).unwrap(),
            StructuredMatrix::vandermonde(col.map(|x| 0.5 + 0.5 * x)),
            StructuredMatrix::cauchy(s, t).unwrap(),
        ];
        for m in members {
            let (pair, form) = m.reference_operators().unwrap();
            let rank = displacement_rank_with(&m.to_dense(), &pair, form, RANK_TOL).unwrap();
            assert!(rank <= m.family().rank_bound(), "{:?}: rank {rank}", m.family());
        }
    }
}
