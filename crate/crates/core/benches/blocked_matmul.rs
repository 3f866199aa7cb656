//! Timing for the (d, d^2, d) product that dominates every estimator pass:
//! multiplying a d x N block against its transpose with N ~ d^2.

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use std::hint::black_box;

fn bench_gram(c: &mut Criterion) {
    for &d in &[8usize, 16, 32] {
        let n = d * d;
        let a = Array2::from_shape_fn((d, n), |(i, j)| ((i * 31 + j * 17) % 13) as f64 - 6.0);
        c.bench_function(&format!("gram {d}x{n}"), |b| {
            b.iter(|| {
                let g = a.dot(&a.t());
                black_box(g);
            })
        });
    }
}

criterion_group!(benches, bench_gram);
criterion_main!(benches);
