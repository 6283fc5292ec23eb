//! Experiment configuration, read from TOML. Every field has a default, so an
//! empty file (or no file) is a valid configuration.

use std::path::Path;
use std::sync::Arc;

use ldrkit::{Activation, OperatorMatrix, OperatorPair, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::model_file::OperatorDescriptor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetConfig {
    /// Output of a randomly drawn network with the trained architecture.
    PlantedLdr {
        seed: u64,
        /// Blocks in the planted network; defaults to the trained `k`.
        #[serde(default)]
        k: Option<usize>,
        #[serde(default = "default_planted_scale")]
        scale: f64,
    },
    /// `exp(-|x|² / r²)`.
    SmoothRadial,
    /// `sin(frequency · Σx_i / √n)`.
    Sinusoid { frequency: f64 },
    Constant { value: f64 },
}

fn default_planted_scale() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairConfig {
    /// `(Z_1, Z_0ᵀ)`: Toeplitz-like blocks.
    Toeplitz,
    /// `(I, 0)`: plain rank-`r` blocks `G Hᵀ`.
    LowRank,
    /// `(Z_f, diag(j / (n + 1)))`: satisfies the column-embedding conditions.
    CirculantDiagonal {
        #[serde(default = "one")]
        f: f64,
    },
    Explicit {
        a: OperatorDescriptor,
        b: OperatorDescriptor,
    },
}

fn one() -> f64 {
    1.0
}

impl PairConfig {
    pub fn build(&self, n: usize) -> Result<Arc<OperatorPair>> {
        let pair = match self {
            PairConfig::Toeplitz => OperatorPair::toeplitz(n),
            PairConfig::LowRank => OperatorPair::low_rank(n),
            PairConfig::CirculantDiagonal { f } => OperatorPair::new(
                OperatorMatrix::unit_circulant(n, *f),
                OperatorMatrix::diagonal(Vector::from_fn(n, |i, _| (i + 1) as f64 / (n + 1) as f64)),
            )?,
            PairConfig::Explicit { a, b } => {
                let a = a.build("pair.a")?;
                let b = b.build("pair.b")?;
                if a.n() != n || b.n() != n {
                    return Err(CliError::validation(format!(
                        "pair operators have size ({}, {}) but input_dim is {n}",
                        a.n(),
                        b.n()
                    )));
                }
                OperatorPair::new(a, b)?
            }
        };
        Ok(Arc::new(pair))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub restarts: usize,
    /// Epoch interval between loss-history rows.
    pub log_every: usize,
    /// Generators are drawn uniformly from `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Divide the learning rate by the number of blocks `k`. The readout
    /// curvature grows with the layer width `kn`, so one rate for every `k`
    /// is either unstable at large `k` or slow at small `k`.
    pub scale_lr_by_blocks: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 2000,
            batch_size: 32,
            restarts: 5,
            log_every: 50,
            init_scale: 0.5,
            scale_lr_by_blocks: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub target: TargetConfig,
    pub domain_radius: f64,
    pub input_dim: usize,
    /// Blocks for `train`.
    pub k: usize,
    /// Block counts for `decay`.
    pub k_grid: Vec<usize>,
    /// Displacement rank of each block.
    pub rank: usize,
    pub pair: PairConfig,
    pub activation: Activation,
    pub train_samples: usize,
    pub validation_samples: usize,
    /// Monte-Carlo samples for the integrated squared error.
    pub eval_samples: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            target: TargetConfig::SmoothRadial,
            domain_radius: 1.0,
            input_dim: 8,
            k: 2,
            k_grid: vec![1, 2, 4, 8, 16],
            rank: 1,
            pair: PairConfig::Toeplitz,
            activation: Activation::Sigmoid,
            train_samples: 512,
            validation_samples: 256,
            eval_samples: 4096,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::validation(msg));
        if self.input_dim == 0 {
            return bad("input_dim must be positive".into());
        }
        if !(self.domain_radius > 0.0) {
            return bad(format!("domain_radius must be positive, got {}", self.domain_radius));
        }
        if self.k == 0 || self.rank == 0 {
            return bad("k and rank must be positive".into());
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) || self.k_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("k_grid must be nonempty, positive and increasing, got {:?}", self.k_grid));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0) || o.batch_size == 0 || o.restarts == 0 || o.log_every == 0 {
            return bad("optimizer learning_rate, batch_size, restarts and log_every must be positive".into());
        }
        if !(o.init_scale >= 0.0) {
            return bad("optimizer init_scale must be nonnegative".into());
        }
        if self.train_samples == 0 || self.eval_samples == 0 {
            return bad("train_samples and eval_samples must be positive".into());
        }
        if let TargetConfig::PlantedLdr { k: Some(0), .. } = self.target {
            return bad("planted k must be positive".into());
        }
        Ok(())
    }
}
