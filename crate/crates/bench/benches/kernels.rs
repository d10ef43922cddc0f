use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use dnad_bench::samples;
use dnad_core::kernels::{b_alpha, flux, SignedPow};

fn kernels(c: &mut Criterion) {
    let xs = samples(4096);
    let mut g = c.benchmark_group("kernels");
    g.throughput(Throughput::Elements(xs.len() as u64));
    for p in [2.0, 2.4, 3.0] {
        g.bench_function(format!("flux p={p}"), |b| {
            b.iter(|| xs.iter().map(|&s| flux(black_box(s), p, 1e-12)).sum::<f64>())
        });
    }
    for gamma in [2.0, 2.5, 1.0 / 0.7] {
        let sp = SignedPow::new(gamma);
        g.bench_function(format!("signed pow {gamma:.3}"), |b| {
            b.iter(|| xs.iter().map(|&x| sp.apply(black_box(x))).sum::<f64>())
        });
    }
    g.bench_function("b_alpha 0.5", |b| {
        b.iter(|| xs.windows(2).map(|w| b_alpha(black_box(w[0]), w[1], 0.5)).sum::<f64>())
    });
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
