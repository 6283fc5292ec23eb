//! Minibatch SGD on the squared loss, with restarts.

use std::path::Path;
use std::sync::Arc;

use ldrkit::{DisplacementRep, LdrLayer, Matrix, NetworkModel, OperatorPair, Vector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, OptimizerConfig};
use crate::data::{derive_seed, stream, Dataset, Target};
use crate::error::{CliError, Result};
use crate::model_file::save_model;
use crate::report::{create_dir, write_csv, write_json};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub restart: usize,
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub restart: usize,
    pub model: NetworkModel,
    pub history: Vec<HistoryRow>,
    pub train_mse: f64,
    pub validation_mse: f64,
    /// Why the run stopped early, if it did (a non-finite loss or gradient).
    pub failure: Option<String>,
}

/// A single-layer model with `k` blocks. Generators and biases are uniform in
/// `[-init_scale, init_scale]`, the readout starts at zero and the output bias
/// at `bias`. The model output is then the constant `bias`.
pub fn init_model<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    pair: &Arc<OperatorPair>,
    k: usize,
    bias: f64,
    rng: &mut R,
) -> Result<NetworkModel> {
    let s = cfg.optimizer.init_scale;
    let layer = LdrLayer::random(Arc::clone(pair), k, cfg.rank, cfg.activation, s, s, rng)?;
    let width = layer.width();
    let alpha = Vector::zeros(width);
    Ok(NetworkModel::new(vec![layer], alpha, bias)?)
}

/// Grows a single-layer model to `k` blocks without changing its output: the
/// new blocks get random generators and biases but zero readout weights, so the
/// smaller model is a point of the larger model's parameter space.
pub fn pad_model<R: Rng + ?Sized>(model: &NetworkModel, k: usize, scale: f64, rng: &mut R) -> Result<NetworkModel> {
    let [layer] = model.layers() else {
        return Err(CliError::validation("only single-layer models can be padded"));
    };
    if k < layer.k() {
        return Err(CliError::validation(format!("cannot shrink a {}-block model to {k}", layer.k())));
    }
    let (n, r) = (layer.n(), layer.r());
    let pair = Arc::clone(layer.blocks()[0].pair());
    let mut draw = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| if scale > 0.0 { rng.random_range(-scale..scale) } else { 0.0 })
            .collect()
    };
    let mut blocks: Vec<DisplacementRep> = layer.blocks().to_vec();
    let mut theta: Vec<f64> = layer.theta().iter().copied().collect();
    let mut alpha: Vec<f64> = model.alpha().iter().copied().collect();
    for _ in layer.k()..k {
        let g = Matrix::from_vec(n, r, draw(n * r));
        let h = Matrix::from_vec(n, r, draw(n * r));
        blocks.push(DisplacementRep::new(Arc::clone(&pair), g, h)?);
        theta.extend(draw(n));
        alpha.extend(std::iter::repeat_n(0.0, n));
    }
    let layer = LdrLayer::new(blocks, Vector::from_vec(theta), layer.activation())?;
    Ok(NetworkModel::new(vec![layer], Vector::from_vec(alpha), model.bias())?)
}

/// Runs SGD in place, appending a row to `history` every `log_every` epochs and
/// after the last one. A non-finite loss or gradient stops the run with an
/// invariant error; the rows logged so far are kept.
pub fn sgd(
    model: &mut NetworkModel,
    train: &Dataset,
    validation: &Dataset,
    opt: &OptimizerConfig,
    restart: usize,
    shuffle_seed: u64,
    history: &mut Vec<HistoryRow>,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let lr = if opt.scale_lr_by_blocks {
        let k: usize = model.layers().iter().map(|l| l.k()).max().unwrap_or(1);
        opt.learning_rate / k as f64
    } else {
        opt.learning_rate
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let log = |model: &NetworkModel, epoch: usize, history: &mut Vec<HistoryRow>| -> Result<()> {
        let train_mse = train.mse(model)?;
        let validation_mse = validation.mse(model)?;
        if !train_mse.is_finite() {
            return Err(CliError::invariant(format!(
                "non-finite training loss at epoch {epoch} of restart {restart}"
            )));
        }
        history.push(HistoryRow {
            restart,
            epoch,
            train_mse,
            validation_mse,
        });
        Ok(())
    };
    log(model, 0, history)?;
    for epoch in 1..=opt.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(opt.batch_size) {
            let x = Matrix::from_columns(&batch.iter().map(|&i| train.xs[i].clone()).collect::<Vec<_>>());
            let (pred, cache) = model.forward_batch(&x)?;
            let residual = Vector::from_iterator(batch.len(), batch.iter().zip(pred.iter()).map(|(&i, p)| p - train.ys[i]));
            let mut acc = model.backward_batch(&cache, &residual)?;
            acc.scale(1.0 / batch.len() as f64);
            if !acc.is_finite() {
                return Err(CliError::invariant(format!(
                    "non-finite gradient at epoch {epoch} of restart {restart}"
                )));
            }
            model.apply_gradients(&acc, lr);
        }
        if epoch % opt.log_every == 0 || epoch == opt.epochs {
            log(model, epoch, history)?;
        }
    }
    Ok(())
}

/// Mean of the targets, the loss-minimising constant.
fn mean(data: &Dataset) -> f64 {
    if data.is_empty() {
        0.0
    } else {
        data.ys.iter().sum::<f64>() / data.len() as f64
    }
}

/// Trains `optimizer.restarts` models with `k` blocks. When `warm` is given, the
/// first restart starts from it, padded to `k` blocks; the others start from
/// fresh random draws. `tag` separates the seed streams of different callers.
pub fn train_restarts(
    cfg: &ExperimentConfig,
    pair: &Arc<OperatorPair>,
    k: usize,
    train: &Dataset,
    validation: &Dataset,
    warm: Option<&NetworkModel>,
    tag: u64,
) -> Result<Vec<TrainRun>> {
    let bias = mean(train);
    let mut runs = Vec::with_capacity(cfg.optimizer.restarts);
    for restart in 0..cfg.optimizer.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[stream::INIT, tag, restart as u64]));
        let mut model = match (restart, warm) {
            (0, Some(w)) => pad_model(w, k, cfg.optimizer.init_scale, &mut rng)?,
            _ => init_model(cfg, pair, k, bias, &mut rng)?,
        };
        let shuffle = derive_seed(cfg.seed, &[stream::SHUFFLE, tag, restart as u64]);
        let mut history = Vec::new();
        let run = match sgd(&mut model, train, validation, &cfg.optimizer, restart, shuffle, &mut history) {
            Ok(()) => {
                let last = history.last().expect("history has the initial row");
                TrainRun {
                    restart,
                    train_mse: last.train_mse,
                    validation_mse: last.validation_mse,
                    model,
                    history,
                    failure: None,
                }
            }
            Err(CliError::Invariant(msg)) => TrainRun {
                restart,
                train_mse: f64::NAN,
                validation_mse: f64::NAN,
                model,
                history,
                failure: Some(msg),
            },
            Err(e) => return Err(e),
        };
        runs.push(run);
    }
    Ok(runs)
}

/// Index of the completed run with the lowest training loss; ties go to the
/// earliest. `None` when every run failed.
pub fn best_run(runs: &[TrainRun]) -> Option<usize> {
    (0..runs.len())
        .filter(|&i| runs[i].failure.is_none())
        .min_by(|&a, &b| runs[a].train_mse.total_cmp(&runs[b].train_mse))
}

/// The failure messages of `runs`, for a diagnostic when none completed.
pub fn failures(runs: &[TrainRun]) -> String {
    runs.iter()
        .filter_map(|r| r.failure.as_deref())
        .collect::<Vec<_>>()
        .join("; ")
}

pub struct Experiment {
    pub pair: Arc<OperatorPair>,
    pub target: Target,
    pub train: Dataset,
    pub validation: Dataset,
}

impl Experiment {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let pair = cfg.pair.build(cfg.input_dim)?;
        if pair.transform().is_none() {
            return Err(CliError::validation(
                "pair.a: no power of the operator equals a multiple of the identity",
            ));
        }
        let target = Target::from_config(cfg, &pair)?;
        let (n, r) = (cfg.input_dim, cfg.domain_radius);
        let train = Dataset::sample(&target, n, r, cfg.train_samples, derive_seed(cfg.seed, &[stream::TRAIN]))?;
        let validation = Dataset::sample(
            &target,
            n,
            r,
            cfg.validation_samples,
            derive_seed(cfg.seed, &[stream::VALIDATION]),
        )?;
        Ok(Self {
            pair,
            target,
            train,
            validation,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
    pub best: bool,
    pub failure: String,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub best: TrainRun,
    pub restarts: Vec<RestartSummary>,
    pub history: Vec<HistoryRow>,
}

pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    let exp = Experiment::new(cfg)?;
    let runs = train_restarts(cfg, &exp.pair, cfg.k, &exp.train, &exp.validation, None, cfg.k as u64)?;
    let best = best_run(&runs)
        .ok_or_else(|| CliError::invariant(format!("every restart failed: {}", failures(&runs))))?;
    let restarts = runs
        .iter()
        .map(|r| RestartSummary {
            restart: r.restart,
            train_mse: r.train_mse,
            validation_mse: r.validation_mse,
            best: r.restart == best,
            failure: r.failure.clone().unwrap_or_default(),
        })
        .collect();
    let history = runs.iter().flat_map(|r| r.history.iter().cloned()).collect();
    Ok(TrainOutcome {
        best: runs.into_iter().nth(best).expect("index in range"),
        restarts,
        history,
    })
}

/// Writes `model.json`, `loss_history.csv` and `train_summary.csv` to `out`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainOutcome> {
    let outcome = run_train(cfg)?;
    create_dir(out)?;
    save_model(&outcome.best.model, &out.join("model.json"))?;
    write_csv(&out.join("loss_history.csv"), &outcome.history)?;
    write_csv(&out.join("train_summary.csv"), &outcome.restarts)?;
    write_json(&out.join("config.resolved.json"), cfg)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TargetConfig;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            input_dim: 4,
            k: 2,
            train_samples: 64,
            validation_samples: 32,
            optimizer: OptimizerConfig {
                epochs: 20,
                restarts: 2,
                log_every: 5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn padding_preserves_outputs() {
        let cfg = small_config();
        let pair = cfg.pair.build(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = init_model(&cfg, &pair, 2, 0.3, &mut rng).unwrap();
        let padded = pad_model(&model, 5, 0.5, &mut rng).unwrap();
        assert_eq!(padded.layers()[0].k(), 5);
        for _ in 0..10 {
            let x = Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            assert_eq!(model.forward(&x).unwrap(), padded.forward(&x).unwrap());
        }
    }

    #[test]
    fn sgd_reduces_loss_and_is_deterministic() {
        let cfg = small_config();
        let a = run_train(&cfg).unwrap();
        let b = run_train(&cfg).unwrap();
        assert_eq!(a.history, b.history);
        let first = a.history.iter().find(|h| h.restart == a.best.restart).unwrap();
        assert!(a.best.train_mse < first.train_mse);
    }

    #[test]
    fn zero_target_is_fit() {
        let mut cfg = small_config();
        cfg.target = TargetConfig::Constant { value: 0.0 };
        cfg.optimizer.epochs = 2000;
        cfg.optimizer.learning_rate = 0.5;
        let out = run_train(&cfg).unwrap();
        assert!(out.best.train_mse <= 1e-8, "{}", out.best.train_mse);
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = small_config();
        cfg.target = TargetConfig::Sinusoid { frequency: 3.0 };
        cfg.activation = ldrkit::Activation::Identity;
        cfg.optimizer.learning_rate = 1e6;
        let err = run_train(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }
}
