use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use shiftfact::cholesky::{factor_batch, factor_batch_seq};
use shiftfact::{par, random, solve_lqr, Network, OpMatrix};

fn tree_matrices(count: usize, n: usize) -> Vec<OpMatrix> {
    let mut rng = random::rng(1);
    (0..count)
        .map(|_| {
            let g = random::tree(&mut rng, n);
            random::mg_matrix(&mut rng, &g, 2)
        })
        .collect()
}

fn networks(count: usize) -> Vec<Network> {
    let mut rng = random::rng(2);
    (0..count)
        .map(|_| {
            let n = rng.random_range(4..=12);
            Network::random(&mut rng, n, 0.7).unwrap()
        })
        .collect()
}

fn factorisation(c: &mut Criterion) {
    let mut group = c.benchmark_group("factor_batch");
    for n in [8, 16, 32] {
        let ms = tree_matrices(64, n);
        group.bench_with_input(BenchmarkId::new("parallel", n), &ms, |b, ms| {
            b.iter(|| factor_batch(ms))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &ms, |b, ms| {
            b.iter(|| factor_batch_seq(ms))
        });
    }
    group.finish();
}

fn control_laws(c: &mut Criterion) {
    let nets = networks(32);
    let mut group = c.benchmark_group("lqr_batch");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| par::map(&nets, solve_lqr)));
    group.bench_function("sequential", |b| b.iter(|| par::map_seq(&nets, solve_lqr)));
    group.finish();
}

criterion_group!(benches, factorisation, control_laws);
criterion_main!(benches);
