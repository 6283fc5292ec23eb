use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ldrkit::Family;
use ldrkit_cli::bench::{cmd_bench, BenchOptions};
use ldrkit_cli::construct::cmd_construct;
use ldrkit_cli::decay::cmd_decay;
use ldrkit_cli::rank_sweep::{cmd_rank_sweep, DEFAULT_SIZES, DEFAULT_TRIALS};
use ldrkit_cli::train::cmd_train;
use ldrkit_cli::{CliError, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "ldrkit", version, about = "Low displacement rank networks: experiments and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train an LDR network with SGD and restarts.
    Train(Common),
    /// Best-of-restarts error for each k in the configured grid.
    Decay(Common),
    /// Measure displacement ranks of random structured matrices.
    RankSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated families (default: all five).
        #[arg(long, value_delimiter = ',')]
        families: Vec<Family>,
        /// Comma-separated sizes (default: 4,8,16,32)
        /// Comma-separated ascending sizes (default: 4 and doubling 256..16384)
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Embed each vector of a file as a column of a displacement-rank-1 matrix.
    Construct {
        #[command(flatten)]
        common: Common,
        /// One vector per line, entries separated by commas or spaces.
        #[arg(long)]
        vectors: PathBuf,
        /// Overrides the configured input_dim.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Time dense and structured matrix-vector products.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long, default_value_t = 2048)]
        dense_max: usize,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let cfg = load_config(&common)?;
            let out = cmd_train(&cfg, &common.out)?;
            println!(
                "best restart {}: train mse {:.6e}, validation mse {:.6e}",
                out.best.restart, out.best.train_mse, out.best.validation_mse
            );
            report_written(&common.out);
        }
        Command::Decay(common) => {
            let cfg = load_config(&common)?;
            let report = cmd_decay(&cfg, &common.out)?;
            println!("k,mse,bound");
            for r in &report.rows {
                println!("{},{:.6e},{:.6e}{}", r.k, r.mse, r.bound, if r.flagged { " (flagged)" } else { "" });
            }
            println!(
                "slope {:.3}, surrogate-C {:.4}, monotone within {}%: {}",
                report.summary.slope,
                report.summary.surrogate_c,
                report.summary.monotone_within * 100.0,
                report.summary.monotone
            );
            report_written(&common.out);
        }
        Command::RankSweep {
            common,
            families,
            sizes,
            trials,
        } => {
            let cfg = load_config(&common)?;
            let families = if families.is_empty() { Family::ALL.to_vec() } else { families };
            let sizes = if sizes.is_empty() { DEFAULT_SIZES.to_vec() } else { sizes };
            let rows = cmd_rank_sweep(&families, &sizes, trials, cfg.seed, &common.out)?;
            println!("{} instances within bound", rows.len());
            report_written(&common.out);
        }
        Command::Construct { common, vectors, n } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = n {
                cfg.input_dim = n;
            }
            let rows = cmd_construct(&cfg, &vectors, &common.out)?;
            let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
            println!("{} embeddings certified, worst residual {worst:.3e}", rows.len());
            report_written(&common.out);
        }
        Command::Bench {
            common,
            sizes,
            repeats,
            rank,
            dense_max,
        } => {
            let cfg = load_config(&common)?;
            let mut opts = BenchOptions {
                repeats,
                rank,
                dense_max,
                seed: cfg.seed,
                min_repeat: Duration::from_millis(3),
                ..Default::default()
            };
            if !sizes.is_empty() {
                opts.sizes = sizes;
            }
            let (_, summary) = cmd_bench(&opts, &common.out)?;
            println!(
                "circulant log-log slope over n in [{}, {}]: {:.3} (limit {})",
                summary.slope_range.0, summary.slope_range.1, summary.circulant_slope_volatile, summary.slope_limit
            );
            report_written(&common.out);
        }
    }
    Ok(())
}

fn report_written(out: &Path) {
    println!("outputs in {}", out.display());
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap reports usage errors with status 2, which is reserved here
            // for certificate and invariant failures.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}
