use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ldrkit::{Family, Matrix, StructuredMatrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn matvec(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("matvec");
    for n in [64usize, 256, 1024, 4096] {
        let x = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        group.throughput(Throughput::Elements(n as u64));
        for family in [Family::Circulant, Family::Toeplitz] {
            let kernel = StructuredMatrix::random(family, n, &mut rng).prepare();
            group.bench_with_input(BenchmarkId::new(family.name(), n), &x, |b, x| {
                b.iter(|| kernel.apply(black_box(x)).unwrap())
            });
        }
        // dense baseline gets expensive quickly
        if n <= 1024 {
            let dense = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            group.bench_with_input(BenchmarkId::new("dense", n), &x, |b, x| b.iter(|| &dense * black_box(x)));
        }
    }
    group.finish();
}

criterion_group!(benches, matvec);
criterion_main!(benches);
