//! Embeds vectors read from a file as columns of displacement-rank-1 matrices.

use std::path::Path;
use std::sync::Arc;

use ldrkit::{displacement_rank, reconstruct, ColumnEmbedder, OperatorPair, Vector, RANK_TOL};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::model_file::PairRecord;
use crate::report::{create_dir, write_csv, write_json};

pub const EMBEDDING_FORMAT: &str = "ldrkit-embedding";
pub const EMBEDDING_VERSION: u32 = 1;

/// One vector per nonempty line, entries separated by commas or whitespace.
/// Lines starting with `#` are comments. Every vector must have `n` entries.
pub fn parse_vectors(text: &str, n: usize) -> Result<Vec<Vector>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let entries = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::validation(format!("line {}: bad entry {s:?}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if entries.len() != n {
            return Err(CliError::validation(format!(
                "line {}: expected {n} entries, found {}",
                lineno + 1,
                entries.len()
            )));
        }
        out.push(Vector::from_vec(entries));
    }
    if out.is_empty() {
        return Err(CliError::validation("no vectors in input"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingArtifact {
    pub format: &'static str,
    pub version: u32,
    pub pair: PairRecord,
    pub n: usize,
    pub j: usize,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub v: Vec<f64>,
    /// `‖M e_j - v‖_∞ / ‖v‖_∞`.
    pub residual: f64,
    pub displacement_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructRow {
    pub index: usize,
    pub j: usize,
    pub residual: f64,
    pub displacement_rank: usize,
    pub artifact: String,
}

pub fn run_construct(pair: &Arc<OperatorPair>, vectors: &[Vector], seed: u64) -> Result<Vec<EmbeddingArtifact>> {
    if !pair.supports_embedding() {
        return Err(CliError::validation(
            "pair: column construction needs a diagonalizable A with A^q = aI and an invertible I - aB^q",
        ));
    }
    let embedder = ColumnEmbedder::new(Arc::clone(pair), seed)?;
    let record = PairRecord::from_pair(pair);
    let mut out = Vec::with_capacity(vectors.len());
    for v in vectors {
        let e = embedder.embed(v)?;
        let rank = displacement_rank(&reconstruct(&e.rep)?, pair, RANK_TOL)?;
        if rank > 1 {
            return Err(CliError::invariant(format!(
                "constructed matrix has displacement rank {rank}, expected at most 1"
            )));
        }
        out.push(EmbeddingArtifact {
            format: EMBEDDING_FORMAT,
            version: EMBEDDING_VERSION,
            pair: record.clone(),
            n: pair.n(),
            j: e.j,
            h: e.h().iter().copied().collect(),
            g: e.g().iter().copied().collect(),
            v: v.iter().copied().collect(),
            residual: e.residual,
            displacement_rank: rank,
        });
    }
    Ok(out)
}

/// Writes `embedding_NNNN.json` per vector and an index `construct.csv`.
pub fn cmd_construct(cfg: &ExperimentConfig, vectors_path: &Path, out: &Path) -> Result<Vec<ConstructRow>> {
    cfg.validate()?;
    let text = std::fs::read_to_string(vectors_path).map_err(|e| CliError::io(vectors_path, e))?;
    let vectors = parse_vectors(&text, cfg.input_dim)
        .map_err(|e| CliError::validation(format!("{}: {e}", vectors_path.display())))?;
    let pair = cfg.pair.build(cfg.input_dim)?;
    let artifacts = run_construct(&pair, &vectors, cfg.seed)?;
    create_dir(out)?;
    let mut rows = Vec::with_capacity(artifacts.len());
    for (i, a) in artifacts.iter().enumerate() {
        let name = format!("embedding_{i:04}.json");
        write_json(&out.join(&name), a)?;
        rows.push(ConstructRow {
            index: i,
            j: a.j,
            residual: a.residual,
            displacement_rank: a.displacement_rank,
            artifact: name,
        });
    }
    write_csv(&out.join("construct.csv"), &rows)?;
    Ok(rows)
}
