//! Embedding an arbitrary vector as one column of a displacement-rank-1 matrix.
//!
//! For `Δ(M) = g hᵀ` and `A = Q⁻¹ΛQ`, column `j` of the decompressed matrix
//! satisfies `Q M e_j = D Q g` with the diagonal
//! `D_i = Σ_{k<q} (hᵀ B^k T e_j) λ_i^k`. Picking `(h, j)` with `D` nonsingular
//! and setting `g = Q⁻¹ D⁻¹ Q v` places `v` in column `j`. Every result is
//! certified by decompressing and comparing the column.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activation::Activation;
use crate::displacement::{reconstruct, DisplacementRep, OperatorPair};
use crate::error::{LdrError, Result};
use crate::layer::LdrLayer;
use crate::linalg::{real_part, to_complex_vec, CVector, Matrix, Vector};
use crate::network::NetworkModel;
use crate::operator::{eigendecompose, EigenDecomp};

/// `D` must satisfy `min|D_i| ≥ NONSING_FLOOR · max|D_i|`.
pub const NONSING_FLOOR: f64 = 1e-8;
/// Random `h` candidates drawn per column index.
pub const CANDIDATES_PER_INDEX: usize = 64;
/// Column-match tolerance, relative to `‖v‖_∞`.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// Largest imaginary residue tolerated when projecting `g` back to the reals.
pub const IMAG_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Selector {
    pub h: Vector,
    pub j: usize,
    /// Diagonal entries `D_i`.
    pub diag: CVector,
}

impl Selector {
    /// `min|D_i| / max|D_i|`.
    pub fn conditioning(&self) -> f64 {
        relative_min(&self.diag)
    }
}

fn relative_min(d: &CVector) -> f64 {
    let (lo, hi) = d
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), z| (lo.min(z.norm()), hi.max(z.norm())));
    if hi > 0.0 {
        lo / hi
    } else {
        0.0
    }
}

/// `D_i = Σ_{k<q} (hᵀ B^k T e_j) λ_i^k`.
pub fn selector_diagonal(pair: &OperatorPair, eig: &EigenDecomp, h: &Vector, j: usize) -> Result<CVector> {
    let n = pair.n();
    if h.len() != n {
        return Err(LdrError::DimensionMismatch {
            context: "selector vector h",
            expected: n,
            found: h.len(),
        });
    }
    if j >= n {
        return Err(LdrError::InvalidArgument(format!("column index {j} out of range for n = {n}")));
    }
    let (p, t) = match (pair.potency(), pair.transform()) {
        (Some(p), Some(t)) => (p, t),
        _ => return Err(LdrError::MissingPotency),
    };
    let mut e = Vector::zeros(n);
    e[j] = 1.0;
    let mut w = t.apply(&e);
    let mut coeffs = Vec::with_capacity(p.q);
    for k in 0..p.q {
        if k > 0 {
            w = pair.b().apply(&w);
        }
        coeffs.push(h.dot(&w));
    }
    Ok(CVector::from_iterator(
        n,
        eig.lambda.iter().map(|&lam| {
            // Horner in λ_i
            coeffs
                .iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &s| acc * lam + s)
        }),
    ))
}

/// A pair prepared for repeated column embeddings: eigendecomposition of `A` and a
/// selector `(h, j)` found once.
#[derive(Debug, Clone)]
pub struct ColumnEmbedder {
    pair: Arc<OperatorPair>,
    eig: EigenDecomp,
    selector: Selector,
}

impl ColumnEmbedder {
    pub fn new(pair: Arc<OperatorPair>, seed: u64) -> Result<Self> {
        let eig = eigendecompose(pair.a())?;
        let selector = search_selector(&pair, &eig, seed)?;
        Ok(Self {
            pair,
            eig,
            selector,
        })
    }

    /// Uses a caller-supplied `(h, j)`.
    pub fn with_selector(pair: Arc<OperatorPair>, h: Vector, j: usize) -> Result<Self> {
        if !pair.supports_embedding() {
            return Err(LdrError::NotConstructible("pair is not embeddable".into()));
        }
        let eig = eigendecompose(pair.a())?;
        let diag = selector_diagonal(&pair, &eig, &h, j)?;
        Ok(Self {
            pair,
            eig,
            selector: Selector { h, j, diag },
        })
    }

    pub fn pair(&self) -> &Arc<OperatorPair> {
        &self.pair
    }

    pub fn selector(&self) -> &Selector {
        &self.selector
    }

    pub fn eigen(&self) -> &EigenDecomp {
        &self.eig
    }

    /// `g = Q⁻¹ D⁻¹ Q v`.
    pub fn solve_generator(&self, v: &Vector) -> Result<Vector> {
        let n = self.pair.n();
        if v.len() != n {
            return Err(LdrError::DimensionMismatch {
                context: "target vector",
                expected: n,
                found: v.len(),
            });
        }
        let d = &self.selector.diag;
        let hi = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let lo = d.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let floor = NONSING_FLOOR * hi;
        if !(lo >= floor) || hi == 0.0 {
            return Err(LdrError::SingularSelector { min: lo, floor });
        }
        let qv = self.eig.apply_q(&to_complex_vec(v));
        let scaled = qv.component_div(d);
        let g = self.eig.apply_q_inv(&scaled);
        let (g_re, imag) = real_part(&g);
        let scale = g_re.amax().max(v.amax()).max(f64::MIN_POSITIVE);
        if imag > IMAG_TOL * scale.max(1.0) {
            return Err(LdrError::Certificate {
                what: "imaginary part of generator",
                residual: imag,
                tol: IMAG_TOL,
            });
        }
        Ok(g_re)
    }

    pub fn embed(&self, v: &Vector) -> Result<ColumnEmbedding> {
        let g = self.solve_generator(v)?;
        let n = self.pair.n();
        let rep = DisplacementRep::new(
            Arc::clone(&self.pair),
            Matrix::from_column_slice(n, 1, g.as_slice()),
            Matrix::from_column_slice(n, 1, self.selector.h.as_slice()),
        )?;
        let m = reconstruct(&rep)?;
        let j = self.selector.j;
        let err = (m.column(j) - v).amax();
        let vmax = v.amax();
        let residual = if vmax > 0.0 { err / vmax } else { err };
        if !(residual <= CERTIFICATE_TOL) {
            return Err(LdrError::Certificate {
                what: "embedded column",
                residual,
                tol: CERTIFICATE_TOL,
            });
        }
        Ok(ColumnEmbedding {
            rep,
            j,
            v: v.clone(),
            residual,
        })
    }
}

fn search_selector(pair: &OperatorPair, eig: &EigenDecomp, seed: u64) -> Result<Selector> {
    if !pair.supports_embedding() {
        return Err(LdrError::NotConstructible("pair is not embeddable".into()));
    }
    let n = pair.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut overall_best = 0.0_f64;
    for j in 0..n {
        let mut best: Option<Selector> = None;
        for _ in 0..CANDIDATES_PER_INDEX {
            let h = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let diag = selector_diagonal(pair, eig, &h, j)?;
            let cand = Selector { h, j, diag };
            if best.as_ref().is_none_or(|b| cand.conditioning() > b.conditioning()) {
                best = Some(cand);
            }
        }
        let best = best.expect("candidate budget is positive");
        overall_best = overall_best.max(best.conditioning());
        if best.conditioning() >= NONSING_FLOOR {
            return Ok(best);
        }
    }
    Err(LdrError::SelectorNotFound { best: overall_best })
}

/// Finds `(h, j)` such that the selector diagonal is well away from singular.
pub fn find_selector(pair: &OperatorPair, seed: u64) -> Result<Selector> {
    if !pair.supports_embedding() {
        return Err(LdrError::NotConstructible("pair is not embeddable".into()));
    }
    let eig = eigendecompose(pair.a())?;
    search_selector(pair, &eig, seed)
}

/// Solves for `g` so that column `j` of the decompressed `(g, h)` matrix is `v`.
pub fn solve_generator(pair: &Arc<OperatorPair>, h: &Vector, j: usize, v: &Vector) -> Result<Vector> {
    ColumnEmbedder::with_selector(Arc::clone(pair), h.clone(), j)?.solve_generator(v)
}

/// A displacement-rank-1 matrix whose column `j` is `v`.
#[derive(Debug, Clone)]
pub struct ColumnEmbedding {
    pub rep: DisplacementRep,
    pub j: usize,
    pub v: Vector,
    /// `‖M e_j - v‖_∞ / ‖v‖_∞` (absolute when `v = 0`).
    pub residual: f64,
}

impl ColumnEmbedding {
    pub fn g(&self) -> Vector {
        self.rep.g().column(0).into_owned()
    }

    pub fn h(&self) -> Vector {
        self.rep.h().column(0).into_owned()
    }
}

pub fn construct_with_column(pair: &Arc<OperatorPair>, v: &Vector, seed: u64) -> Result<ColumnEmbedding> {
    ColumnEmbedder::new(Arc::clone(pair), seed)?.embed(v)
}

/// Single hidden layer with one block whose column `j` is `v`, every bias `θ`,
/// and a one-hot readout at `j`; it computes `σ(vᵀx + θ)`.
#[derive(Debug, Clone)]
pub struct OneHotNetwork {
    pub embedding: ColumnEmbedding,
    pub alpha: Vector,
    pub theta: f64,
    model: NetworkModel,
}

impl OneHotNetwork {
    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn evaluate(&self, x: &Vector) -> Result<f64> {
        self.model.forward(x)
    }
}

pub fn embed_as_network(
    pair: &Arc<OperatorPair>,
    v: &Vector,
    theta: f64,
    sigma: Activation,
    seed: u64,
) -> Result<OneHotNetwork> {
    let embedding = construct_with_column(pair, v, seed)?;
    let n = pair.n();
    let mut alpha = Vector::zeros(n);
    alpha[embedding.j] = 1.0;
    let layer = LdrLayer::new(vec![embedding.rep.clone()], Vector::from_element(n, theta), sigma)?;
    let model = NetworkModel::new(vec![layer], alpha.clone(), 0.0)?;
    Ok(OneHotNetwork {
        embedding,
        alpha,
        theta,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::displacement::{displacement_rank, RANK_TOL};
    use crate::operator::OperatorMatrix;

    fn pair(n: usize, f: f64) -> Arc<OperatorPair> {
        Arc::new(
            OperatorPair::embeddable(
                OperatorMatrix::unit_circulant(n, f),
                OperatorMatrix::diagonal(Vector::from_fn(n, |i, _| (i + 1) as f64 / (n + 1) as f64)),
            )
            .unwrap(),
        )
    }

    /// diag(hᵀ(Σ_k B^k T λ_i^k e_j)) with dense powers.
    fn brute_force_diag(pair: &OperatorPair, h: &Vector, j: usize) -> Vec<Complex64> {
        let n = pair.n();
        let q = pair.potency().unwrap().q;
        let t = pair.transform().unwrap().to_dense(n);
        let lambdas = eigendecompose(pair.a()).unwrap().lambda;
        lambdas
            .iter()
            .map(|&lam| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..q {
                    let col = pair.b().power_dense(k) * &t;
                    acc += h.dot(&col.column(j).into_owned()) * lam.powu(k as u32);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn selector_found_for_conforming_pair() {
        let p = pair(5, 1.0);
        let s = find_selector(&p, 7).unwrap();
        assert!(s.diag.iter().all(|z| z.norm() > 0.0));
        let oracle = brute_force_diag(&p, &s.h, s.j);
        for (a, b) in s.diag.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_matches_brute_force_for_every_column() {
        let p = pair(4, 2.0);
        let eig = eigendecompose(p.a()).unwrap();
        let mut h = Vector::zeros(4);
        h[0] = 1.0;
        for j in 0..4 {
            let d = selector_diagonal(&p, &eig, &h, j).unwrap();
            let oracle = brute_force_diag(&p, &h, j);
            for (a, b) in d.iter().zip(&oracle) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn non_conforming_pair_is_refused() {
        let p = OperatorPair::toeplitz(4);
        assert!(matches!(find_selector(&p, 0), Err(LdrError::NotConstructible(_))));
    }

    #[test]
    fn zero_target_gives_zero_generator() {
        let p = pair(6, 1.0);
        let e = construct_with_column(&p, &Vector::zeros(6), 1).unwrap();
        assert_eq!(e.g(), Vector::zeros(6));
        assert_eq!(reconstruct(&e.rep).unwrap(), Matrix::zeros(6, 6));
    }

    #[test]
    fn unit_vector_is_embedded() {
        let p = pair(4, 1.0);
        let mut v = Vector::zeros(4);
        v[0] = 1.0;
        let e = construct_with_column(&p, &v, 3).unwrap();
        let m = reconstruct(&e.rep).unwrap();
        assert!((m.column(e.j) - &v).amax() <= 1e-8);
        assert!(displacement_rank(&m, &p, RANK_TOL).unwrap() <= 1);
    }

    #[test]
    fn planted_column_is_recovered() {
        let n = 6;
        let p = pair(n, 1.0);
        let embedder = ColumnEmbedder::new(Arc::clone(&p), 11).unwrap();
        let g0 = Vector::from_fn(n, |i, _| (i as f64 * 0.7).sin());
        let planted = DisplacementRep::new(
            Arc::clone(&p),
            Matrix::from_column_slice(n, 1, g0.as_slice()),
            Matrix::from_column_slice(n, 1, embedder.selector().h.as_slice()),
        )
        .unwrap();
        let m0 = reconstruct(&planted).unwrap();
        let v = m0.column(embedder.selector().j).into_owned();
        let e = embedder.embed(&v).unwrap();
        assert!((e.g() - g0).amax() < 1e-10);
        assert!((reconstruct(&e.rep).unwrap().column(e.j) - m0.column(e.j)).amax() < 1e-10);
    }

    #[test]
    fn real_route_agrees() {
        // column j is (Σ_k s_k A^k) g, a real linear system
        let n = 6;
        let p = pair(n, -1.0);
        let embedder = ColumnEmbedder::new(Arc::clone(&p), 5).unwrap();
        let sel = embedder.selector();
        let v = Vector::from_fn(n, |i, _| 1.0 / (1.0 + i as f64));
        let t = p.transform().unwrap().to_dense(n);
        let mut poly = Matrix::zeros(n, n);
        for k in 0..n {
            let s = sel.h.dot(&(p.b().power_dense(k) * &t).column(sel.j).into_owned());
            poly += p.a().power_dense(k) * s;
        }
        let g_real = poly.lu().solve(&v).unwrap();
        assert!((embedder.solve_generator(&v).unwrap() - g_real).amax() < 1e-9);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = pair(8, 1.0);
        let v = Vector::from_fn(8, |i, _| (i as f64).cos());
        let a = construct_with_column(&p, &v, 42).unwrap();
        let b = construct_with_column(&p, &v, 42).unwrap();
        assert_eq!(a.rep, b.rep);
        assert_eq!(a.j, b.j);
    }

    #[test]
    fn network_constant_half_for_zero_vector() {
        let p = pair(4, 1.0);
        let net = embed_as_network(&p, &Vector::zeros(4), 0.0, Activation::Sigmoid, 0).unwrap();
        assert_eq!(net.evaluate(&Vector::from_element(4, 0.9)).unwrap(), 0.5);
    }

    #[test]
    fn identity_readout_is_linear() {
        let p = pair(4, 1.0);
        let mut v = Vector::zeros(4);
        v[0] = 1.0;
        let net = embed_as_network(&p, &v, 1.0, Activation::Identity, 0).unwrap();
        let x = Vector::from_vec(vec![0.3, 0.1, 0.9, 0.2]);
        assert!((net.evaluate(&x).unwrap() - 1.3).abs() < 1e-8);
    }

    #[test]
    fn dimension_checks() {
        let p = pair(4, 1.0);
        assert!(construct_with_column(&p, &Vector::zeros(5), 0).is_err());
        assert!(solve_generator(&p, &Vector::zeros(4), 9, &Vector::zeros(4)).is_err());
    }
}
