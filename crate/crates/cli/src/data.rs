//! Targets and samples from the uniform measure on the ball `B_r ⊂ ℝⁿ`.

use std::sync::Arc;

use ldrkit::{LdrLayer, Matrix, NetworkModel, OperatorPair, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{ExperimentConfig, TargetConfig};
use crate::error::{CliError, Result};

/// Uniform on the ball: a Gaussian direction scaled by `r U^{1/n}`.
pub fn sample_ball<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Vector {
    loop {
        let z = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = z.norm();
        if norm > 0.0 {
            let u: f64 = rng.random();
            return z * (radius * u.powf(1.0 / n as f64) / norm);
        }
    }
}

#[derive(Debug, Clone)]
pub enum Target {
    Planted(Box<NetworkModel>),
    SmoothRadial { radius: f64 },
    Sinusoid { frequency: f64 },
    Constant(f64),
}

impl Target {
    pub fn from_config(cfg: &ExperimentConfig, pair: &Arc<OperatorPair>) -> Result<Self> {
        Ok(match &cfg.target {
            TargetConfig::PlantedLdr { seed, k, scale } => {
                Target::Planted(Box::new(planted_model(cfg, pair, k.unwrap_or(cfg.k), *seed, *scale)?))
            }
            TargetConfig::SmoothRadial => Target::SmoothRadial {
                radius: cfg.domain_radius,
            },
            TargetConfig::Sinusoid { frequency } => Target::Sinusoid {
                frequency: *frequency,
            },
            TargetConfig::Constant { value } => Target::Constant(*value),
        })
    }

    pub fn eval(&self, x: &Vector) -> Result<f64> {
        Ok(match self {
            Target::Planted(model) => model.forward(x)?,
            Target::SmoothRadial { radius } => (-x.norm_squared() / (radius * radius)).exp(),
            Target::Sinusoid { frequency } => (frequency * x.sum() / (x.len() as f64).sqrt()).sin(),
            Target::Constant(c) => *c,
        })
    }
}

/// A network with the trained architecture and a fixed random draw of its
/// parameters: generators and biases in `[-scale, scale]`, readout in
/// `[-1, 1] / √width`.
pub fn planted_model(
    cfg: &ExperimentConfig,
    pair: &Arc<OperatorPair>,
    k: usize,
    seed: u64,
    scale: f64,
) -> Result<NetworkModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer = LdrLayer::random(Arc::clone(pair), k, cfg.rank, cfg.activation, scale, scale, &mut rng)?;
    let width = layer.width();
    let s = 1.0 / (width as f64).sqrt();
    let alpha = Vector::from_fn(width, |_, _| rng.random_range(-s..s));
    Ok(NetworkModel::new(vec![layer], alpha, 0.0)?)
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub xs: Vec<Vector>,
    pub ys: Vec<f64>,
}

impl Dataset {
    pub fn sample(target: &Target, n: usize, radius: f64, count: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Dataset::default();
        for _ in 0..count {
            let x = sample_ball(n, radius, &mut rng);
            let y = target.eval(&x)?;
            if !y.is_finite() {
                return Err(CliError::validation(format!("target is not finite at a sample point: {y}")));
            }
            data.xs.push(x);
            data.ys.push(y);
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn mse(&self, model: &NetworkModel) -> Result<f64> {
        if self.is_empty() {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for (xs, ys) in self.xs.chunks(256).zip(self.ys.chunks(256)) {
            let (pred, _) = model.forward_batch(&Matrix::from_columns(xs))?;
            sum += pred.iter().zip(ys).map(|(p, y)| (p - y) * (p - y)).sum::<f64>();
        }
        Ok(sum / self.len() as f64)
    }

    /// Mean of `|x| |f(x)|`, a Monte-Carlo stand-in for the approximation constant.
    pub fn surrogate_constant(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.xs.iter().zip(&self.ys).map(|(x, y)| x.norm() * y.abs()).sum::<f64>() / self.len() as f64
    }
}

/// Independent stream seeds derived from one master seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = master ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        s = splitmix(s ^ splitmix(t.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    s
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub mod stream {
    pub const TRAIN: u64 = 1;
    pub const VALIDATION: u64 = 2;
    pub const EVAL: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
}
