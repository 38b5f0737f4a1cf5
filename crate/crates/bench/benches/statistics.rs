use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pitgof::stats::{box_pierce, cvm_stat, ks_stat, residuals_gaussian, Process};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniforms(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn empirical_processes(c: &mut Criterion) {
    let mut g = c.benchmark_group("empirical");
    for &t in &[100usize, 500] {
        let u = uniforms(t);
        for (label, p) in [
            ("marginal", Process::Marginal),
            ("pair1", Process::Pair(1)),
            ("joint2", Process::Joint2),
        ] {
            g.bench_with_input(BenchmarkId::new(format!("cvm_{label}"), t), &u, |b, u| {
                b.iter(|| cvm_stat(black_box(u), p).unwrap())
            });
            g.bench_with_input(BenchmarkId::new(format!("ks_{label}"), t), &u, |b, u| {
                b.iter(|| ks_stat(black_box(u), p).unwrap())
            });
        }
    }
    g.finish();
}

fn portmanteau(c: &mut Criterion) {
    let u = uniforms(500);
    let e = residuals_gaussian(&u).unwrap();
    c.bench_function("box_pierce_25/500", |b| {
        b.iter(|| box_pierce(black_box(&e), 25).unwrap())
    });
}

criterion_group!(benches, empirical_processes, portmanteau);
criterion_main!(benches);
