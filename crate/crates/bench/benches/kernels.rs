use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rangelens::kernels;

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| PI * (i as f64 / (n - 1) as f64)).collect()
}

fn bench_kernels(c: &mut Criterion) {
    let thetas = grid(1024);
    c.bench_function("dist_kernel_1024", |b| {
        b.iter(|| thetas.iter().map(|&t| kernels::dist_kernel(black_box(t)).unwrap()).sum::<f64>())
    });
    c.bench_function("angle_map_depth16", |b| {
        b.iter(|| kernels::angle_map(black_box(PI / 4.0), 16).unwrap())
    });
    c.bench_function("higher_moments_64", |b| {
        b.iter(|| {
            grid(64)
                .into_iter()
                .map(|t| kernels::higher_moments(black_box(t)).unwrap().z_var)
                .fold(f64::MIN, f64::max)
        })
    });
}

criterion_group!(benches, bench_kernels);
criterion_main!(benches);
