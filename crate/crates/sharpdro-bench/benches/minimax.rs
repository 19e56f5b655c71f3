//! Minimax testbed throughput: recursion steps and the envelope-minimum
//! oracle.

use criterion::{criterion_group, criterion_main, Criterion};
use sharpdro::minimax::{min_l_star, run_sgda_sam, QuadraticCoupledProblem, RateParams};

fn bench_sgda(criterion: &mut Criterion) {
    let problem = QuadraticCoupledProblem::default_problem();
    let rates = RateParams::new(0.0015, 0.1, 0.0004, 1, 1000);
    criterion.bench_function("sgda_sam_1k_iters", |b| {
        b.iter(|| run_sgda_sam(&problem, &rates, None, 3).unwrap())
    });
}

fn bench_min_oracle(criterion: &mut Criterion) {
    let problem = QuadraticCoupledProblem::default_problem();
    criterion.bench_function("min_l_star_grid_200k", |b| {
        b.iter(|| min_l_star(&problem, 2.0, 200_000))
    });
}

criterion_group!(benches, bench_sgda, bench_min_oracle);
criterion_main!(benches);
