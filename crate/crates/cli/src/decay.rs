//! Approximation error against the number of blocks `k`.

use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::data::{derive_seed, stream, Dataset};
use crate::error::{CliError, Result};
use crate::report::{create_dir, write_csv, write_json};
use crate::train::{best_run, failures, train_restarts, Experiment};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub k: usize,
    /// Monte-Carlo integrated squared error of the best restart.
    pub mse: f64,
    pub train_mse: f64,
    pub best_restart: usize,
    /// `4 r² C / k` with `C` the surrogate constant.
    pub bound: f64,
    pub surrogate_c: f64,
    /// Set when every restart at this `k` failed; `mse` is then NaN.
    pub flagged: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecaySummary {
    pub slope: f64,
    pub surrogate_c: f64,
    pub domain_radius: f64,
    pub monotone_within: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    pub summary: DecaySummary,
}

/// Relative uptick allowed between consecutive grid points.
pub const MONOTONE_TOLERANCE: f64 = 0.05;

/// True when each error is at most `(1 + tol)` times the previous one.
pub fn is_monotone(errors: &[f64], tol: f64) -> bool {
    errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol))
}

/// Least-squares slope of `log y` against `log x`, over points with `y > 0`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// For each `k` in the grid, trains the configured restarts and reports the best
/// by training loss. The first restart at each `k` is warm-started from the best
/// model of the previous grid point, padded with zero-weight blocks.
pub fn run_decay(cfg: &ExperimentConfig) -> Result<DecayReport> {
    if cfg.k_grid.len() < 3 {
        return Err(CliError::validation(format!(
            "k_grid needs at least 3 points, got {:?}",
            cfg.k_grid
        )));
    }
    let exp = Experiment::new(cfg)?;
    let eval = Dataset::sample(
        &exp.target,
        cfg.input_dim,
        cfg.domain_radius,
        cfg.eval_samples,
        derive_seed(cfg.seed, &[stream::EVAL]),
    )?;
    let c = eval.surrogate_constant();
    let r2 = cfg.domain_radius * cfg.domain_radius;
    let mut rows = Vec::with_capacity(cfg.k_grid.len());
    let mut warm = None;
    for &k in &cfg.k_grid {
        let bound = 4.0 * r2 * c / k as f64;
        let runs = train_restarts(cfg, &exp.pair, k, &exp.train, &exp.validation, warm.as_ref(), k as u64)?;
        match best_run(&runs) {
            Some(best) => {
                let run = &runs[best];
                rows.push(DecayRow {
                    k,
                    mse: eval.mse(&run.model)?,
                    train_mse: run.train_mse,
                    best_restart: run.restart,
                    bound,
                    surrogate_c: c,
                    flagged: false,
                    note: String::new(),
                });
                warm = Some(runs.into_iter().nth(best).expect("index in range").model);
            }
            None => rows.push(DecayRow {
                k,
                mse: f64::NAN,
                train_mse: f64::NAN,
                best_restart: 0,
                bound,
                surrogate_c: c,
                flagged: true,
                note: failures(&runs),
            }),
        }
    }
    let ks: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.mse).collect();
    let summary = DecaySummary {
        slope: log_log_slope(&ks, &errors),
        surrogate_c: c,
        domain_radius: cfg.domain_radius,
        monotone_within: MONOTONE_TOLERANCE,
        monotone: !rows.iter().any(|r| r.flagged) && is_monotone(&errors, MONOTONE_TOLERANCE),
    };
    Ok(DecayReport { rows, summary })
}

/// Writes `decay.csv` and `decay_summary.json` to `out`.
pub fn cmd_decay(cfg: &ExperimentConfig, out: &Path) -> Result<DecayReport> {
    let report = run_decay(cfg)?;
    create_dir(out)?;
    write_csv(&out.join("decay.csv"), &report.rows)?;
    write_json(&out.join("decay_summary.json"), &report.summary)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 1.5).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_nan());
    }

    #[test]
    fn monotone_tolerance() {
        assert!(is_monotone(&[1.0, 0.5, 0.52, 0.4], 0.05));
        assert!(!is_monotone(&[1.0, 0.5, 0.53], 0.05));
    }
}
