//! Matrix-vector timings and analytic parameter counts.

use std::hint::black_box;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ldrkit::{DisplacementRep, Family, Matrix, OperatorPair, StructuredMatrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::derive_seed;
use crate::decay::log_log_slope;
use crate::error::{CliError, Result};
use crate::report::{create_dir, write_csv, write_json};

pub const DEFAULT_SIZES: [usize; 8] = [4, 256, 512, 1024, 2048, 4096, 8192, 16384];
pub const SLOPE_RANGE: (usize, usize) = (256, 16384);
pub const SLOPE_LIMIT: f64 = 1.5;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub rank: usize,
    /// Dense and LDR-block timings are skipped above this size.
    pub dense_max: usize,
    /// Minimum wall time of one timed repeat.
    pub min_repeat: Duration,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            sizes: DEFAULT_SIZES.to_vec(),
            repeats: 7,
            rank: 1,
            dense_max: 2048,
            min_repeat: Duration::from_millis(3),
            seed: 42,
        }
    }
}

pub fn dense_params(n: usize) -> usize {
    n * n
}

pub fn circulant_params(n: usize) -> usize {
    n
}

/// First column and first row, counted as `2n`.
pub fn toeplitz_params(n: usize) -> usize {
    2 * n
}

/// Two diagonal operators plus two `n × r` generators.
pub fn ldr_block_params(n: usize, r: usize) -> usize {
    2 * n + 2 * n * r
}

/// Timing columns (suffix `_volatile`) vary between runs; everything else is
/// deterministic. Timings are median nanoseconds per product.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub rank: usize,
    pub dense_params: usize,
    pub circulant_params: usize,
    pub toeplitz_params: usize,
    pub ldr_block_params: usize,
    pub dense_ns_volatile: Option<f64>,
    pub circulant_ns_volatile: f64,
    pub toeplitz_ns_volatile: f64,
    pub ldr_block_ns_volatile: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub slope_range: (usize, usize),
    pub slope_limit: f64,
    /// Fitted log-log slope of circulant time against `n` within the range.
    pub circulant_slope_volatile: f64,
    pub slope_ok_volatile: bool,
}

/// Median over `repeats` of the mean time per call, each repeat running `f`
/// until `min_repeat` has elapsed.
pub fn median_ns(repeats: usize, min_repeat: Duration, mut f: impl FnMut()) -> f64 {
    f();
    let mut samples: Vec<f64> = (0..repeats.max(1))
        .map(|_| {
            let start = Instant::now();
            let mut calls = 0u64;
            loop {
                f();
                calls += 1;
                let elapsed = start.elapsed();
                if elapsed >= min_repeat {
                    return elapsed.as_nanos() as f64 / calls as f64;
                }
            }
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

pub fn run_bench(opts: &BenchOptions) -> Result<(Vec<BenchRow>, BenchSummary)> {
    if opts.sizes.is_empty() || opts.sizes.contains(&0) {
        return Err(CliError::validation("sizes must be nonempty and positive"));
    }
    if opts.sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::validation(format!("sizes must be sorted ascending, got {:?}", opts.sizes)));
    }
    if opts.rank == 0 {
        return Err(CliError::validation("rank must be positive"));
    }
    let mut rows = Vec::with_capacity(opts.sizes.len());
    for &n in &opts.sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &[n as u64]));
        let x = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let circ = StructuredMatrix::random(Family::Circulant, n, &mut rng);
        let toep = StructuredMatrix::random(Family::Toeplitz, n, &mut rng);
        let circ_kernel = circ.prepare();
        let toep_kernel = toep.prepare();
        let circulant_ns = median_ns(opts.repeats, opts.min_repeat, || {
            black_box(circ_kernel.apply(black_box(&x)).expect("sizes match"));
        });
        let toeplitz_ns = median_ns(opts.repeats, opts.min_repeat, || {
            black_box(toep_kernel.apply(black_box(&x)).expect("sizes match"));
        });
        let (dense_ns, ldr_ns) = if n <= opts.dense_max {
            let dense = circ.to_dense();
            let d = median_ns(opts.repeats, opts.min_repeat, || {
                black_box(black_box(&dense) * black_box(&x));
            });
            let pair = Arc::new(OperatorPair::toeplitz(n));
            let g = Matrix::from_fn(n, opts.rank, |_, _| rng.random_range(-1.0..1.0));
            let h = Matrix::from_fn(n, opts.rank, |_, _| rng.random_range(-1.0..1.0));
            let block = DisplacementRep::new(pair, g, h)?;
            let l = median_ns(opts.repeats, opts.min_repeat, || {
                black_box(block.apply_transpose(black_box(&x)).expect("sizes match"));
            });
            (Some(d), Some(l))
        } else {
            (None, None)
        };
        rows.push(BenchRow {
            n,
            rank: opts.rank,
            dense_params: dense_params(n),
            circulant_params: circulant_params(n),
            toeplitz_params: toeplitz_params(n),
            ldr_block_params: ldr_block_params(n, opts.rank),
            dense_ns_volatile: dense_ns,
            circulant_ns_volatile: circulant_ns,
            toeplitz_ns_volatile: toeplitz_ns,
            ldr_block_ns_volatile: ldr_ns,
        });
    }
    let in_range: Vec<&BenchRow> = rows
        .iter()
        .filter(|r| r.n >= SLOPE_RANGE.0 && r.n <= SLOPE_RANGE.1)
        .collect();
    let xs: Vec<f64> = in_range.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = in_range.iter().map(|r| r.circulant_ns_volatile).collect();
    let slope = log_log_slope(&xs, &ys);
    let summary = BenchSummary {
        slope_range: SLOPE_RANGE,
        slope_limit: SLOPE_LIMIT,
        circulant_slope_volatile: slope,
        slope_ok_volatile: slope < SLOPE_LIMIT,
    };
    Ok((rows, summary))
}

/// Writes `bench.csv` and `bench_summary.json`.
pub fn cmd_bench(opts: &BenchOptions, out: &Path) -> Result<(Vec<BenchRow>, BenchSummary)> {
    let (rows, summary) = run_bench(opts)?;
    create_dir(out)?;
    write_csv(&out.join("bench.csv"), &rows)?;
    write_json(&out.join("bench_summary.json"), &summary)?;
    Ok((rows, summary))
}
