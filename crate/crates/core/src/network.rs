//! Stacked LDR layers with a linear readout: `y = Σ_j α_j h_j + β` where `h` is the
//! last layer's output.

use crate::error::{LdrError, Result};
use crate::layer::{BatchCache, LayerCache, LayerGradients, LdrLayer};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct NetworkModel {
    layers: Vec<LdrLayer>,
    alpha: Vector,
    bias: f64,
}

#[derive(Debug, Clone)]
pub struct NetworkCache {
    layers: Vec<LayerCache>,
}

#[derive(Debug, Clone)]
pub struct NetworkBatchCache {
    layers: Vec<BatchCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGradients {
    pub layers: Vec<LayerGradients>,
    pub dalpha: Vector,
    pub dbias: f64,
    pub dx: Vector,
}

impl NetworkGradients {
    pub fn zeros_like(model: &NetworkModel) -> Self {
        Self {
            layers: model.layers.iter().map(LayerGradients::zeros_like).collect(),
            dalpha: Vector::zeros(model.alpha.len()),
            dbias: 0.0,
            dx: Vector::zeros(model.input_dim()),
        }
    }

    pub fn add_assign(&mut self, other: &NetworkGradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b);
        }
        self.dalpha += &other.dalpha;
        self.dbias += other.dbias;
        self.dx += &other.dx;
    }

    pub fn scale(&mut self, s: f64) {
        self.layers.iter_mut().for_each(|l| l.scale(s));
        self.dalpha *= s;
        self.dbias *= s;
        self.dx *= s;
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(LayerGradients::is_finite)
            && self.dalpha.iter().all(|v| v.is_finite())
            && self.dbias.is_finite()
            && self.dx.iter().all(|v| v.is_finite())
    }

    /// Flattened in the order of [`NetworkModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            for (dg, dh) in l.dg.iter().zip(&l.dh) {
                out.extend(dg.iter());
                out.extend(dh.iter());
            }
            out.extend(l.dtheta.iter());
        }
        out.extend(self.dalpha.iter());
        out.push(self.dbias);
        out
    }
}

impl NetworkModel {
    pub fn new(layers: Vec<LdrLayer>, alpha: Vector, bias: f64) -> Result<Self> {
        let last = layers
            .last()
            .ok_or_else(|| LdrError::InvalidArgument("a network needs at least one layer".into()))?;
        for pair in layers.windows(2) {
            if pair[1].n() != pair[0].width() {
                return Err(LdrError::DimensionMismatch {
                    context: "adjacent layer widths",
                    expected: pair[0].width(),
                    found: pair[1].n(),
                });
            }
        }
        if alpha.len() != last.width() {
            return Err(LdrError::DimensionMismatch {
                context: "readout length",
                expected: last.width(),
                found: alpha.len(),
            });
        }
        Ok(Self {
            layers,
            alpha,
            bias,
        })
    }

    pub fn layers(&self) -> &[LdrLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LdrLayer] {
        &mut self.layers
    }

    pub fn alpha(&self) -> &Vector {
        &self.alpha
    }

    pub fn alpha_mut(&mut self) -> &mut Vector {
        &mut self.alpha
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn set_bias(&mut self, bias: f64) {
        self.bias = bias;
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n()
    }

    pub fn forward(&self, x: &Vector) -> Result<f64> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(&h)?.0;
        }
        Ok(self.alpha.dot(&h) + self.bias)
    }

    pub fn forward_cached(&self, x: &Vector) -> Result<(f64, NetworkCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward(&h)?;
            caches.push(cache);
            h = y;
        }
        Ok((self.alpha.dot(&h) + self.bias, NetworkCache { layers: caches }))
    }

    /// Back-propagates `∂O/∂y` from the scalar output through every layer.
    pub fn backward(&self, cache: &NetworkCache, dout: f64) -> Result<NetworkGradients> {
        if cache.layers.len() != self.layers.len() {
            return Err(LdrError::StaleCache("layer count differs".into()));
        }
        let last = cache.layers.last().expect("non-empty");
        let dalpha = &last.output * dout;
        let mut upstream = &self.alpha * dout;
        let mut grads = Vec::with_capacity(self.layers.len());
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            let g = layer.backward(c, &upstream)?;
            upstream = g.dx.clone();
            grads.push(g);
        }
        grads.reverse();
        Ok(NetworkGradients {
            layers: grads,
            dalpha,
            dbias: dout,
            dx: upstream,
        })
    }

    /// Outputs for a batch with one sample per column.
    pub fn forward_batch(&self, x: &Matrix) -> Result<(Vector, NetworkBatchCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward_batch(&h)?;
            caches.push(cache);
            h = y;
        }
        let y = h.tr_mul(&self.alpha).add_scalar(self.bias);
        Ok((y, NetworkBatchCache { layers: caches }))
    }

    /// Gradients of `Σ_s O_s` given `∂O_s/∂y_s` for every sample `s`; `dx` is
    /// summed over the batch.
    pub fn backward_batch(&self, cache: &NetworkBatchCache, dout: &Vector) -> Result<NetworkGradients> {
        if cache.layers.len() != self.layers.len() {
            return Err(LdrError::StaleCache("layer count differs".into()));
        }
        let last = cache.layers.last().expect("non-empty");
        if dout.len() != last.output.ncols() {
            return Err(LdrError::DimensionMismatch {
                context: "output gradient length",
                expected: last.output.ncols(),
                found: dout.len(),
            });
        }
        let dalpha = &last.output * dout;
        let mut upstream = &self.alpha * dout.transpose();
        let mut grads = Vec::with_capacity(self.layers.len());
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            let (g, dx) = layer.backward_batch(c, &upstream)?;
            upstream = dx;
            grads.push(g);
        }
        grads.reverse();
        Ok(NetworkGradients {
            layers: grads,
            dalpha,
            dbias: dout.sum(),
            dx: upstream.column_sum(),
        })
    }

    /// Output and all-parameter gradients at `x`.
    pub fn gradients(&self, x: &Vector, dout: f64) -> Result<(f64, NetworkGradients)> {
        let (y, cache) = self.forward_cached(x)?;
        Ok((y, self.backward(&cache, dout)?))
    }

    pub fn apply_gradients(&mut self, grads: &NetworkGradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.apply_gradients(g, lr);
        }
        self.alpha -= &grads.dalpha * lr;
        self.bias -= grads.dbias * lr;
    }

    /// All trainable scalars: per layer, each block's G then H (column-major),
    /// then θ; finally α and the output bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            for b in l.blocks() {
                out.extend(b.g().iter());
                out.extend(b.h().iter());
            }
            out.extend(l.theta().iter());
        }
        out.extend(self.alpha.iter());
        out.push(self.bias);
        out
    }

    pub fn parameter_len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.parameter_count().generators + l.parameter_count().biases)
            .sum::<usize>()
            + self.alpha.len()
            + 1
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_len() {
            return Err(LdrError::DimensionMismatch {
                context: "parameter vector",
                expected: self.parameter_len(),
                found: values.len(),
            });
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            for b in l.blocks_mut() {
                b.g_mut().iter_mut().for_each(|v| *v = it.next().unwrap());
                b.h_mut().iter_mut().for_each(|v| *v = it.next().unwrap());
            }
            l.theta_mut().iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        self.alpha.iter_mut().for_each(|v| *v = it.next().unwrap());
        self.bias = it.next().unwrap();
        Ok(())
    }
}
