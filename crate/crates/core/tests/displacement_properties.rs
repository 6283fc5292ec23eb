mod common;

use std::sync::Arc;

use common::*;
use ldrkit::{
    check_potency, compress, displacement_rank, displacement_rank_with, reconstruct, stein_displacement,
    DisplacementRep, Family, Matrix, OperatorMatrix, OperatorPair, RANK_TOL,
};
use ldrkit::linalg::norm_inf;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pairs(n: usize, rng: &mut ChaCha8Rng) -> Vec<(&'static str, Arc<OperatorPair>)> {
    let dense_b = rand_mat(rng, n, n) * (0.5 / n as f64);
    vec![
        ("toeplitz", Arc::new(OperatorPair::toeplitz(n))),
        (
            "z1_diag",
            Arc::new(OperatorPair::new(OperatorMatrix::unit_circulant(n, 1.0), scaled_diag(n)).unwrap()),
        ),
        (
            "zf_diag",
            Arc::new(OperatorPair::new(OperatorMatrix::unit_circulant(n, -2.0), scaled_diag(n)).unwrap()),
        ),
        (
            "z1_dense",
            Arc::new(
                OperatorPair::new(OperatorMatrix::unit_circulant(n, 1.0), OperatorMatrix::dense(dense_b).unwrap())
                    .unwrap(),
            ),
        ),
        ("low_rank", Arc::new(OperatorPair::low_rank(n))),
    ]
}

#[test]
fn compress_reconstruct_round_trip_over_sizes_and_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for &n in &[4usize, 8, 16, 32, 64] {
        for (name, pair) in pairs(n, &mut rng) {
            let mut worst = 0.0_f64;
            for trial in 0..100 {
                let r = 1 + trial % 2;
                let rep = DisplacementRep::new(Arc::clone(&pair), rand_mat(&mut rng, n, r), rand_mat(&mut rng, n, r))
                    .unwrap();
                let m = reconstruct(&rep).unwrap();
                let back = reconstruct(&compress(&m, &pair, r).unwrap()).unwrap();
                worst = worst.max(norm_inf(&(back - &m)) / norm_inf(&m));
            }
            assert!(worst <= 1e-9, "{name} n={n}: relative error {worst:e}");
        }
    }
}

#[test]
fn family_rank_bounds_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for family in Family::ALL {
        for &n in &[4usize, 8, 16, 32] {
            for _ in 0..20 {
                let s = random_structured(&mut rng, family, n);
                let (pair, form) = s.reference_operators().unwrap();
                let rank = displacement_rank_with(&s.to_dense(), &pair, form, RANK_TOL).unwrap();
                assert!(rank <= family.rank_bound(), "{family:?} n={n}: rank {rank}");
            }
        }
    }
}

#[test]
fn circulant_displacement_is_low_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = ldrkit::StructuredMatrix::circulant(rand_vec(&mut rng, 8));
    let pair = OperatorPair::toeplitz(8);
    assert!(displacement_rank(&c.to_dense(), &pair, RANK_TOL).unwrap() <= 2);
    let pair = Arc::new(pair);
    let rep = compress(&c.to_dense(), &pair, 2).unwrap();
    assert!((reconstruct(&rep).unwrap() - c.to_dense()).amax() <= 1e-10);
}

#[test]
fn potency_is_consistent_with_dense_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ops = vec![
        OperatorMatrix::unit_circulant(6, 1.0),
        OperatorMatrix::unit_circulant(5, 0.5),
        OperatorMatrix::unit_circulant_transposed(4, -3.0),
        OperatorMatrix::diagonal(ldrkit::Vector::from_vec(vec![2.0, -2.0, 2.0])),
        OperatorMatrix::dense(rand_mat(&mut rng, 4, 4)).unwrap(),
    ];
    for op in ops {
        if let Some(p) = check_potency(&op, op.n()) {
            let pw = op.power_dense(p.q);
            let scale = norm_inf(&op.to_dense()).powi(p.q as i32);
            let resid = norm_inf(&(pw - Matrix::identity(op.n(), op.n()) * p.a)) / scale;
            assert!(resid <= 1e-10, "{op:?}: {resid:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stein_is_linear(seed in any::<u64>(), n in 1usize..=16, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = OperatorPair::new(OperatorMatrix::unit_circulant(n, 1.0), scaled_diag(n)).unwrap();
        let m = rand_mat(&mut rng, n, n);
        let k = rand_mat(&mut rng, n, n);
        let lhs = stein_displacement(&(&m * alpha + &k * beta), &pair).unwrap();
        let rhs = stein_displacement(&m, &pair).unwrap() * alpha + stein_displacement(&k, &pair).unwrap() * beta;
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn rank_is_monotone_in_tolerance(seed in any::<u64>(), n in 2usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = OperatorPair::toeplitz(n);
        // mixture of a Toeplitz part and a small random perturbation
        let t = random_structured(&mut rng, Family::Toeplitz, n).to_dense() + rand_mat(&mut rng, n, n) * 1e-6;
        let tols = [1e-12, 1e-9, 1e-7, 1e-5, 1e-3, 1e-1];
        let ranks: Vec<usize> = tols.iter().map(|&tol| displacement_rank(&t, &pair, tol).unwrap()).collect();
        prop_assert!(ranks.windows(2).all(|w| w[1] <= w[0]), "{ranks:?}");
    }
}
