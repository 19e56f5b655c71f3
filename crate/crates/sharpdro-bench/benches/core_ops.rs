//! Forward/backward and perturbation micro-benchmarks.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sharpdro::autodiff::{forward, loss_and_grad, Activation, ModelSpec, Tensor};
use sharpdro::methods::{epsilon_star, PerturbKind, PerturbRule};
use sharpdro::rng::{stream, Purpose};

fn batch(n: usize, d: usize, c: usize, seed: u64) -> (Tensor, Vec<usize>) {
    use rand::Rng;
    let mut rng = stream(seed, Purpose::Test, 0);
    let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
    (Tensor::matrix(n, d, data).unwrap(), y)
}

fn bench_forward_backward(criterion: &mut Criterion) {
    let mut group = criterion.benchmark_group("loss_and_grad");
    for &hidden in &[8usize, 32, 128] {
        let model = ModelSpec::new(8, vec![hidden], 3, Activation::Tanh).unwrap();
        let theta = model.init_params(1);
        let (x, y) = batch(64, 8, 3, 2);
        group.bench_with_input(BenchmarkId::from_parameter(hidden), &hidden, |b, _| {
            b.iter(|| loss_and_grad(&model, &theta, black_box(&x), &y, None).unwrap())
        });
    }
    group.finish();
}

fn bench_forward_only(criterion: &mut Criterion) {
    let model = ModelSpec::new(8, vec![32], 3, Activation::Tanh).unwrap();
    let theta = model.init_params(1);
    let (x, _) = batch(256, 8, 3, 3);
    criterion.bench_function("forward_256x8_h32", |b| {
        b.iter(|| forward(&model, &theta, black_box(&x)).unwrap())
    });
}

fn bench_epsilon_star(criterion: &mut Criterion) {
    let model = ModelSpec::new(8, vec![128], 3, Activation::Tanh).unwrap();
    let g = model.init_params(4);
    let mut group = criterion.benchmark_group("epsilon_star");
    for (name, kind) in [
        ("sign", PerturbKind::Sign),
        ("l2", PerturbKind::L2Normalized),
        ("raw", PerturbKind::RawGradient),
    ] {
        let rule = PerturbRule::new(kind, 0.05).unwrap();
        group.bench_function(name, |b| b.iter(|| epsilon_star(black_box(&g), &rule)));
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_forward_backward,
    bench_forward_only,
    bench_epsilon_star
);
criterion_main!(benches);
