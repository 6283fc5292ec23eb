//! Fully connected layer `y = σ(Wᵀx + θ)` whose weight matrix
//! `W = [W_1 | … | W_k]` is stored only through the generators of each square
//! block, `W_i = [Σ_k A_i^k G_i H_iᵀ B_i^k](I - aB_i^q)⁻¹`.
//!
//! Gradients with respect to the generators are computed directly, without
//! forming `∂O/∂W_i`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use rand::Rng;

use crate::activation::Activation;
use crate::displacement::{reconstruct, DisplacementRep, OperatorPair};
use crate::error::{LdrError, Result};
use crate::linalg::{Matrix, Vector};

static NEXT_LAYER_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_LAYER_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug)]
pub struct LdrLayer {
    blocks: Vec<DisplacementRep>,
    theta: Vector,
    activation: Activation,
    dense: OnceLock<Matrix>,
    /// Identifies the current parameter values; changes on every mutation.
    stamp: u64,
}

impl Clone for LdrLayer {
    fn clone(&self) -> Self {
        Self {
            blocks: self.blocks.clone(),
            theta: self.theta.clone(),
            activation: self.activation,
            dense: self.dense.clone(),
            stamp: next_id(),
        }
    }
}

/// What `forward` keeps for `backward`.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub x: Vector,
    pub pre_activation: Vector,
    pub output: Vector,
    stamp: u64,
}

/// What `forward_batch` keeps for `backward_batch`; one column per sample.
#[derive(Debug, Clone)]
pub struct BatchCache {
    pub x: Matrix,
    pub pre_activation: Matrix,
    pub output: Matrix,
    stamp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub dg: Vec<Matrix>,
    pub dh: Vec<Matrix>,
    pub dtheta: Vector,
    pub dx: Vector,
}

impl LayerGradients {
    pub fn zeros_like(layer: &LdrLayer) -> Self {
        let (n, r) = (layer.n(), layer.r());
        Self {
            dg: vec![Matrix::zeros(n, r); layer.k()],
            dh: vec![Matrix::zeros(n, r); layer.k()],
            dtheta: Vector::zeros(layer.width()),
            dx: Vector::zeros(n),
        }
    }

    pub fn add_assign(&mut self, other: &LayerGradients) {
        for (a, b) in self.dg.iter_mut().zip(&other.dg) {
            *a += b;
        }
        for (a, b) in self.dh.iter_mut().zip(&other.dh) {
            *a += b;
        }
        self.dtheta += &other.dtheta;
        self.dx += &other.dx;
    }

    pub fn scale(&mut self, s: f64) {
        self.dg.iter_mut().for_each(|m| *m *= s);
        self.dh.iter_mut().for_each(|m| *m *= s);
        self.dtheta *= s;
        self.dx *= s;
    }

    pub fn is_finite(&self) -> bool {
        self.dg.iter().chain(&self.dh).all(|m| m.iter().all(|v| v.is_finite()))
            && self.dtheta.iter().chain(self.dx.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterCount {
    pub generators: usize,
    pub biases: usize,
    pub operators: usize,
}

impl ParameterCount {
    pub fn total(&self) -> usize {
        self.generators + self.biases + self.operators
    }
}

impl LdrLayer {
    pub fn new(blocks: Vec<DisplacementRep>, theta: Vector, activation: Activation) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| LdrError::InvalidArgument("a layer needs at least one block".into()))?;
        let (n, r) = (first.n(), first.rank());
        for b in &blocks {
            if b.n() != n {
                return Err(LdrError::DimensionMismatch {
                    context: "block size",
                    expected: n,
                    found: b.n(),
                });
            }
            if b.rank() != r {
                return Err(LdrError::DimensionMismatch {
                    context: "block generator width",
                    expected: r,
                    found: b.rank(),
                });
            }
            if b.pair().transform().is_none() {
                return Err(LdrError::MissingPotency);
            }
        }
        let width = n * blocks.len();
        if theta.len() != width {
            return Err(LdrError::DimensionMismatch {
                context: "bias length",
                expected: width,
                found: theta.len(),
            });
        }
        Ok(Self {
            blocks,
            theta,
            activation,
            dense: OnceLock::new(),
            stamp: next_id(),
        })
    }

    pub fn zeros(pair: Arc<OperatorPair>, k: usize, r: usize, activation: Activation) -> Result<Self> {
        let n = pair.n();
        let blocks = (0..k)
            .map(|_| DisplacementRep::zeros(Arc::clone(&pair), r))
            .collect();
        Self::new(blocks, Vector::zeros(k * n), activation)
    }

    /// Generators uniform in `[-scale, scale]`, biases uniform in `[-bias_scale, bias_scale]`.
    pub fn random<R: Rng + ?Sized>(
        pair: Arc<OperatorPair>,
        k: usize,
        r: usize,
        activation: Activation,
        scale: f64,
        bias_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let n = pair.n();
        let mut draw = |rows: usize, cols: usize, s: f64| {
            Matrix::from_fn(rows, cols, |_, _| if s > 0.0 { rng.random_range(-s..s) } else { 0.0 })
        };
        let mut blocks = Vec::with_capacity(k);
        for _ in 0..k {
            let g = draw(n, r, scale);
            let h = draw(n, r, scale);
            blocks.push(DisplacementRep::new(Arc::clone(&pair), g, h)?);
        }
        let theta = draw(k * n, 1, bias_scale).column(0).into_owned();
        Self::new(blocks, theta, activation)
    }

    pub fn n(&self) -> usize {
        self.blocks[0].n()
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn r(&self) -> usize {
        self.blocks[0].rank()
    }

    /// Output width `k·n`.
    pub fn width(&self) -> usize {
        self.k() * self.n()
    }

    pub fn blocks(&self) -> &[DisplacementRep] {
        &self.blocks
    }

    pub fn theta(&self) -> &Vector {
        &self.theta
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn touch(&mut self) {
        self.dense = OnceLock::new();
        self.stamp = next_id();
    }

    /// Mutable access to the blocks; drops the cached dense weight.
    pub fn blocks_mut(&mut self) -> &mut [DisplacementRep] {
        self.touch();
        &mut self.blocks
    }

    pub fn theta_mut(&mut self) -> &mut Vector {
        self.touch();
        &mut self.theta
    }

    pub fn is_materialized(&self) -> bool {
        self.dense.get().is_some()
    }

    /// Whether `Wᵀx` can be applied blockwise in O(q·n·r) per block.
    pub fn has_fast_path(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.pair().a().is_structured() && b.pair().b().is_structured())
    }

    /// Dense `n × kn` weight `[W_1 | … | W_k]`, computed once and cached.
    pub fn materialize(&self) -> Result<&Matrix> {
        if let Some(w) = self.dense.get() {
            return Ok(w);
        }
        let n = self.n();
        let mut w = Matrix::zeros(n, self.width());
        for (i, block) in self.blocks.iter().enumerate() {
            w.view_mut((0, i * n), (n, n)).copy_from(&reconstruct(block)?);
        }
        Ok(self.dense.get_or_init(|| w))
    }

    /// `Wᵀ x`.
    pub fn linear(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.n() {
            return Err(LdrError::DimensionMismatch {
                context: "layer input",
                expected: self.n(),
                found: x.len(),
            });
        }
        if self.has_fast_path() {
            let n = self.n();
            let mut out = Vector::zeros(self.width());
            for (i, block) in self.blocks.iter().enumerate() {
                out.rows_mut(i * n, n).copy_from(&block.apply_transpose(x)?);
            }
            Ok(out)
        } else {
            Ok(self.materialize()?.tr_mul(x))
        }
    }

    /// `y = σ(Wᵀx + θ)`.
    pub fn forward(&self, x: &Vector) -> Result<(Vector, LayerCache)> {
        let pre = self.linear(x)? + &self.theta;
        let act = self.activation;
        let y = pre.map(|a| act.eval(a));
        Ok((
            y.clone(),
            LayerCache {
                x: x.clone(),
                pre_activation: pre,
                output: y,
                stamp: self.stamp,
            },
        ))
    }

    /// Gradients of a scalar objective given `∂O/∂y`.
    ///
    /// With `δ = ∂O/∂y ⊙ σ'(a)` and `∂O/∂W_i = x δ_iᵀ`, the generator gradients are
    /// `∂O/∂G_i = Σ_k (A^k)ᵀ x δ_iᵀ Tᵀ (B^k)ᵀ H_i` and
    /// `∂O/∂H_i = Σ_k B^k T δ_i xᵀ A^k G_i`, evaluated as sums of outer products.
    pub fn backward(&self, cache: &LayerCache, upstream: &Vector) -> Result<LayerGradients> {
        if cache.stamp != self.stamp {
            return Err(LdrError::StaleCache(
                "parameters changed since the forward pass".into(),
            ));
        }
        if upstream.len() != self.width() {
            return Err(LdrError::DimensionMismatch {
                context: "upstream gradient",
                expected: self.width(),
                found: upstream.len(),
            });
        }
        let act = self.activation;
        let delta = upstream.zip_map(&cache.pre_activation, |u, a| u * act.derivative(a));
        let n = self.n();
        let mut grads = LayerGradients {
            dg: Vec::with_capacity(self.k()),
            dh: Vec::with_capacity(self.k()),
            dtheta: delta.clone(),
            dx: Vector::zeros(n),
        };
        for (i, block) in self.blocks.iter().enumerate() {
            let d = delta.rows(i * n, n).into_owned();
            let (dg, dh) = rank_one_generator_gradients(block, &cache.x, &d)?;
            grads.dg.push(dg);
            grads.dh.push(dh);
            if self.has_fast_path() {
                grads.dx += block.apply(&d)?;
            }
        }
        if !self.has_fast_path() {
            grads.dx = self.materialize()? * &delta;
        }
        Ok(grads)
    }

    /// `σ(Wᵀ X + θ 1ᵀ)` for a batch with one sample per column.
    pub fn forward_batch(&self, x: &Matrix) -> Result<(Matrix, BatchCache)> {
        let n = self.n();
        if x.nrows() != n {
            return Err(LdrError::DimensionMismatch {
                context: "layer input",
                expected: n,
                found: x.nrows(),
            });
        }
        let mut pre = if self.has_fast_path() {
            let mut pre = Matrix::zeros(self.width(), x.ncols());
            for (i, block) in self.blocks.iter().enumerate() {
                pre.rows_mut(i * n, n).copy_from(&block.apply_transpose_cols(x)?);
            }
            pre
        } else {
            self.materialize()?.tr_mul(x)
        };
        for mut col in pre.column_iter_mut() {
            col += &self.theta;
        }
        let act = self.activation;
        let y = pre.map(|a| act.eval(a));
        Ok((
            y.clone(),
            BatchCache {
                x: x.clone(),
                pre_activation: pre,
                output: y,
                stamp: self.stamp,
            },
        ))
    }

    /// Gradients of the batch sum of a per-sample objective, given `∂O/∂Y` with
    /// one column per sample. The returned `dx` field is the column sum of the
    /// input gradients, which are returned in full as the second value.
    pub fn backward_batch(&self, cache: &BatchCache, upstream: &Matrix) -> Result<(LayerGradients, Matrix)> {
        if cache.stamp != self.stamp {
            return Err(LdrError::StaleCache(
                "parameters changed since the forward pass".into(),
            ));
        }
        if upstream.shape() != cache.pre_activation.shape() {
            return Err(LdrError::DimensionMismatch {
                context: "upstream gradient rows",
                expected: self.width(),
                found: upstream.nrows(),
            });
        }
        let act = self.activation;
        let delta = upstream.zip_map(&cache.pre_activation, |u, a| u * act.derivative(a));
        let n = self.n();
        let mut grads = LayerGradients {
            dg: Vec::with_capacity(self.k()),
            dh: Vec::with_capacity(self.k()),
            dtheta: delta.column_sum(),
            dx: Vector::zeros(n),
        };
        let mut dx = Matrix::zeros(n, delta.ncols());
        for (i, block) in self.blocks.iter().enumerate() {
            let d = delta.rows(i * n, n).into_owned();
            let (dg, dh) = batch_generator_gradients(block, &cache.x, &d)?;
            grads.dg.push(dg);
            grads.dh.push(dh);
            if self.has_fast_path() {
                dx += block.apply_cols(&d)?;
            }
        }
        if !self.has_fast_path() {
            dx = self.materialize()? * &delta;
        }
        grads.dx = dx.column_sum();
        Ok((grads, dx))
    }

    /// Plain gradient step; invalidates the dense cache.
    pub fn apply_gradients(&mut self, grads: &LayerGradients, lr: f64) {
        self.touch();
        for ((block, dg), dh) in self.blocks.iter_mut().zip(&grads.dg).zip(&grads.dh) {
            *block.g_mut() -= dg * lr;
            *block.h_mut() -= dh * lr;
        }
        self.theta -= &grads.dtheta * lr;
    }

    /// Stored parameters: `2nr` generator entries per block, `kn` biases, and the
    /// scalars describing each block's operators.
    pub fn parameter_count(&self) -> ParameterCount {
        let (n, r, k) = (self.n(), self.r(), self.k());
        ParameterCount {
            generators: k * 2 * n * r,
            biases: k * n,
            operators: self
                .blocks
                .iter()
                .map(|b| b.pair().a().descriptor_len() + b.pair().b().descriptor_len())
                .sum(),
        }
    }
}

/// Generator gradients for `∂O/∂W = x δᵀ` in O(q·n·r).
fn rank_one_generator_gradients(
    block: &DisplacementRep,
    x: &Vector,
    delta: &Vector,
) -> Result<(Matrix, Matrix)> {
    let pair = block.pair();
    let (p, t) = match (pair.potency(), pair.transform()) {
        (Some(p), Some(t)) => (p, t),
        _ => return Err(LdrError::MissingPotency),
    };
    let (g, h) = (block.g(), block.h());
    let mut dg = Matrix::zeros(g.nrows(), g.ncols());
    let mut dh = Matrix::zeros(h.nrows(), h.ncols());
    // u_k = (Aᵀ)^k x, p_k = B^k T δ
    let mut u = x.clone();
    let mut pk = t.apply(delta);
    for k in 0..p.q {
        if k > 0 {
            u = pair.a().apply_transpose(&u);
            pk = pair.b().apply(&pk);
        }
        let hp = h.tr_mul(&pk);
        let gu = g.tr_mul(&u);
        dg.ger(1.0, &u, &hp, 1.0);
        dh.ger(1.0, &pk, &gu, 1.0);
    }
    Ok((dg, dh))
}

/// Generator gradients for `∂O/∂W = X Δᵀ`, summing the rank-one case over
/// the columns: with `U_k = (Aᵀ)^k X` and `P_k = B^k T Δ`,
/// `∂O/∂G = Σ_k U_k P_kᵀ H` and `∂O/∂H = Σ_k P_k U_kᵀ G`.
fn batch_generator_gradients(block: &DisplacementRep, x: &Matrix, delta: &Matrix) -> Result<(Matrix, Matrix)> {
    let pair = block.pair();
    let (p, t) = match (pair.potency(), pair.transform()) {
        (Some(p), Some(t)) => (p, t),
        _ => return Err(LdrError::MissingPotency),
    };
    let (g, h) = (block.g(), block.h());
    let mut dg = Matrix::zeros(g.nrows(), g.ncols());
    let mut dh = Matrix::zeros(h.nrows(), h.ncols());
    let mut u = x.clone();
    let mut pk = t.apply_cols(delta);
    for k in 0..p.q {
        if k > 0 {
            u = pair.a().apply_transpose_cols(&u);
            pk = pair.b().apply_cols(&pk);
        }
        let ph = pk.tr_mul(h);
        let ug = u.tr_mul(g);
        dg.gemm(1.0, &u, &ph, 1.0);
        dh.gemm(1.0, &pk, &ug, 1.0);
    }
    Ok((dg, dh))
}

/// Generator gradients for an arbitrary `E = ∂O/∂W_i`:
/// `∂O/∂G = Σ_k (A^k)ᵀ E Tᵀ (B^k)ᵀ H` and `∂O/∂H = Σ_k B^k T Eᵀ A^k G`.
pub fn generator_gradients(block: &DisplacementRep, dw: &Matrix) -> Result<(Matrix, Matrix)> {
    let pair = block.pair();
    let (p, t) = match (pair.potency(), pair.transform()) {
        (Some(p), Some(t)) => (p, t),
        _ => return Err(LdrError::MissingPotency),
    };
    let n = block.n();
    if dw.nrows() != n || dw.ncols() != n {
        return Err(LdrError::DimensionMismatch {
            context: "weight gradient",
            expected: n,
            found: if dw.nrows() != n { dw.nrows() } else { dw.ncols() },
        });
    }
    let td = t.to_dense(n);
    let a = pair.a().to_dense();
    let b = pair.b().to_dense();
    let mut ak = Matrix::identity(n, n);
    let mut bk = Matrix::identity(n, n);
    let mut dg = Matrix::zeros(n, block.rank());
    let mut dh = Matrix::zeros(n, block.rank());
    for k in 0..p.q {
        if k > 0 {
            ak = &a * &ak;
            bk = &b * &bk;
        }
        let h_hat = block.h().transpose() * &bk * &td; // Ĥ_k = Hᵀ B^k T
        let g_hat = &ak * block.g(); // Ĝ_k = A^k G
        dg += ak.transpose() * dw * h_hat.transpose();
        dh += &bk * &td * dw.transpose() * g_hat;
    }
    Ok((dg, dh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::OperatorMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cauchy_like_pair(n: usize) -> Arc<OperatorPair> {
        Arc::new(
            OperatorPair::new(
                OperatorMatrix::unit_circulant(n, 1.0),
                OperatorMatrix::diagonal(Vector::from_fn(n, |i, _| (i + 1) as f64 / (n + 1) as f64)),
            )
            .unwrap(),
        )
    }

    #[test]
    fn zero_generators_give_half() {
        let layer = LdrLayer::zeros(Arc::new(OperatorPair::toeplitz(4)), 2, 1, Activation::Sigmoid).unwrap();
        let (y, _) = layer.forward(&Vector::from_element(4, 0.7)).unwrap();
        assert_eq!(y, Vector::from_element(8, 0.5));
        assert_eq!(layer.materialize().unwrap(), &Matrix::zeros(4, 8));
    }

    #[test]
    fn identity_block_passes_input_through() {
        let n = 5;
        let pair = Arc::new(OperatorPair::low_rank(n));
        let rep = DisplacementRep::new(pair, Matrix::identity(n, n), Matrix::identity(n, n)).unwrap();
        let layer = LdrLayer::new(vec![rep], Vector::zeros(n), Activation::Identity).unwrap();
        let x = Vector::from_fn(n, |i, _| i as f64 - 1.5);
        assert_eq!(layer.forward(&x).unwrap().0, x);
    }

    #[test]
    fn fast_forward_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for pair in [Arc::new(OperatorPair::toeplitz(6)), cauchy_like_pair(6)] {
            let layer = LdrLayer::random(pair, 3, 2, Activation::Sigmoid, 0.5, 0.5, &mut rng).unwrap();
            assert!(layer.has_fast_path());
            let x = Vector::from_fn(6, |_, _| rng.random_range(0.0..1.0));
            let (y, _) = layer.forward(&x).unwrap();
            assert!(!layer.is_materialized());
            let w = layer.materialize().unwrap();
            let dense = (w.tr_mul(&x) + layer.theta()).map(|a| Activation::Sigmoid.eval(a));
            assert!((y - dense).amax() < 1e-10);
        }
    }

    #[test]
    fn materialize_concatenates_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layer = LdrLayer::random(cauchy_like_pair(4), 3, 1, Activation::Relu, 1.0, 0.0, &mut rng).unwrap();
        let w = layer.materialize().unwrap().clone();
        for (i, b) in layer.blocks().iter().enumerate() {
            assert_eq!(w.columns(4 * i, 4).into_owned(), reconstruct(b).unwrap());
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = LdrLayer::random(cauchy_like_pair(4), 2, 2, Activation::Sigmoid, 0.5, 0.5, &mut rng).unwrap();
        let (_, cache) = layer.forward(&Vector::from_element(4, 0.3)).unwrap();
        let g = layer.backward(&cache, &Vector::zeros(8)).unwrap();
        assert_eq!(g, LayerGradients::zeros_like(&layer));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut layer = LdrLayer::random(cauchy_like_pair(4), 1, 1, Activation::Sigmoid, 0.5, 0.5, &mut rng).unwrap();
        let (_, cache) = layer.forward(&Vector::from_element(4, 0.3)).unwrap();
        layer.theta_mut()[0] += 1.0;
        assert!(matches!(
            layer.backward(&cache, &Vector::zeros(4)),
            Err(LdrError::StaleCache(_))
        ));
    }

    #[test]
    fn rank_one_path_matches_general_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pair = cauchy_like_pair(5);
        let layer = LdrLayer::random(pair, 1, 2, Activation::Identity, 0.5, 0.0, &mut rng).unwrap();
        let x = Vector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let d = Vector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let (_, cache) = layer.forward(&x).unwrap();
        let g = layer.backward(&cache, &d).unwrap();
        let (dg, dh) = generator_gradients(&layer.blocks()[0], &(&x * d.transpose())).unwrap();
        assert!((&g.dg[0] - dg).amax() < 1e-12);
        assert!((&g.dh[0] - dh).amax() < 1e-12);
    }

    #[test]
    fn parameter_count_per_block() {
        let layer = LdrLayer::zeros(cauchy_like_pair(8), 3, 2, Activation::Sigmoid).unwrap();
        let c = layer.parameter_count();
        assert_eq!(c.generators, 3 * 2 * 8 * 2);
        assert_eq!(c.biases, 24);
        // Z_1 is one scalar, the diagonal eight
        assert_eq!(c.operators, 3 * (1 + 8));
    }

    #[test]
    fn layer_shape_validation() {
        let pair = Arc::new(OperatorPair::toeplitz(4));
        let rep = DisplacementRep::zeros(Arc::clone(&pair), 1);
        assert!(LdrLayer::new(vec![rep.clone()], Vector::zeros(3), Activation::Identity).is_err());
        assert!(LdrLayer::new(vec![], Vector::zeros(0), Activation::Identity).is_err());
        let other = DisplacementRep::zeros(pair, 2);
        assert!(LdrLayer::new(vec![rep, other], Vector::zeros(8), Activation::Identity).is_err());
    }
}
