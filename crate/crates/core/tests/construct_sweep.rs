mod common;

use common::*;
use ldrkit::{
    construct_with_column, displacement_rank, embed_as_network, reconstruct, Activation, ColumnEmbedder, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn certificate_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for &n in &[4usize, 8, 16] {
        let pair = embeddable_pair(n);
        let mut passed = 0;
        for i in 0..100 {
            let v = rand_vec(&mut rng, n);
            let v = &v / v.norm();
            let e = construct_with_column(&pair, &v, i).unwrap();
            let m = reconstruct(&e.rep).unwrap();
            assert!(e.residual <= 1e-8);
            assert!(displacement_rank(&m, &pair, 1e-8).unwrap() <= 1);
            passed += 1;
        }
        assert_eq!(passed, 100);
    }
}

#[test]
fn generator_is_linear_in_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let embedder = ColumnEmbedder::new(embeddable_pair(8), 3).unwrap();
    let v1 = rand_vec(&mut rng, 8);
    let v2 = rand_vec(&mut rng, 8);
    let (a, b) = (1.7, -0.4);
    let lhs = embedder.solve_generator(&(&v1 * a + &v2 * b)).unwrap();
    let rhs = embedder.solve_generator(&v1).unwrap() * a + embedder.solve_generator(&v2).unwrap() * b;
    assert!((lhs - rhs).amax() <= 1e-10);
}

#[test]
fn network_reproduces_single_neuron() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let n = 6;
    let pair = embeddable_pair(n);
    let v = rand_vec(&mut rng, n);
    let theta = rng.random_range(-1.0..1.0);
    let net = embed_as_network(&pair, &v, theta, Activation::Sigmoid, 9).unwrap();
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let x = Vector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
        let expected = Activation::Sigmoid.eval(v.dot(&x) + theta);
        worst = worst.max((net.evaluate(&x).unwrap() - expected).abs());
    }
    assert!(worst <= 1e-8, "{worst:e}");
}
