//! Measured displacement rank of random structured matrices against the family bound.

use std::path::Path;

use ldrkit::{displacement_rank_with, DisplacementForm, Family, StructuredMatrix, RANK_TOL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::derive_seed;
use crate::error::{CliError, Result};
use crate::report::{create_dir, write_csv};

pub const DEFAULT_TRIALS: usize = 20;
pub const DEFAULT_SIZES: [usize; 4] = [4, 8, 16, 32];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub family: &'static str,
    pub n: usize,
    pub trial: usize,
    pub form: &'static str,
    pub rank: usize,
    pub bound: usize,
    pub ok: bool,
}

pub fn form_name(form: DisplacementForm) -> &'static str {
    match form {
        DisplacementForm::Stein => "stein",
        DisplacementForm::Sylvester => "sylvester",
    }
}

pub fn measure(m: &StructuredMatrix, trial: usize) -> Result<RankRow> {
    let (pair, form) = m.reference_operators()?;
    let rank = displacement_rank_with(&m.to_dense(), &pair, form, RANK_TOL)?;
    let bound = m.family().rank_bound();
    Ok(RankRow {
        family: m.family().name(),
        n: m.n(),
        trial,
        form: form_name(form),
        rank,
        bound,
        ok: rank <= bound,
    })
}

pub fn run_rank_sweep(families: &[Family], sizes: &[usize], trials: usize, seed: u64) -> Result<Vec<RankRow>> {
    if let Some(&n) = sizes.iter().find(|&&n| n < 3) {
        return Err(CliError::validation(format!("sizes must be at least 3, got {n}")));
    }
    if families.is_empty() || sizes.is_empty() || trials == 0 {
        return Err(CliError::validation("families, sizes and trials must be nonempty"));
    }
    let mut rows = Vec::with_capacity(families.len() * sizes.len() * trials);
    for (fi, &family) in families.iter().enumerate() {
        for &n in sizes {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[fi as u64, n as u64]));
            for trial in 0..trials {
                rows.push(measure(&StructuredMatrix::random(family, n, &mut rng), trial)?);
            }
        }
    }
    Ok(rows)
}

/// Writes `rank_sweep.csv`; any row over its bound is an invariant failure.
pub fn cmd_rank_sweep(families: &[Family], sizes: &[usize], trials: usize, seed: u64, out: &Path) -> Result<Vec<RankRow>> {
    let rows = run_rank_sweep(families, sizes, trials, seed)?;
    create_dir(out)?;
    write_csv(&out.join("rank_sweep.csv"), &rows)?;
    let bad = rows.iter().filter(|r| !r.ok).count();
    if bad > 0 {
        return Err(CliError::invariant(format!(
            "{bad} of {} instances exceed their displacement-rank bound",
            rows.len()
        )));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ldrkit::Vector;

    #[test]
    fn zero_members_have_rank_zero() {
        let n = 6;
        let z = Vector::zeros(n);
        let zeros = [
            StructuredMatrix::circulant(z.clone()),
            StructuredMatrix::toeplitz(z.clone(), z.clone()).unwrap(),
            StructuredMatrix::hankel(z.clone(), z.clone()).unwrap(),
        ];
        for m in &zeros {
            assert_eq!(measure(m, 0).unwrap().rank, 0, "{}", m.family().name());
        }
    }

    #[test]
    fn small_sizes_rejected() {
        assert!(run_rank_sweep(&Family::ALL, &[2], 1, 0).is_err());
    }

    #[test]
    fn circulant_sixteen() {
        let rows = run_rank_sweep(&[Family::Circulant], &[16], 20, 7).unwrap();
        assert_eq!(rows.len(), 20);
        assert!(rows.iter().all(|r| r.ok && r.rank <= 2));
    }
}
