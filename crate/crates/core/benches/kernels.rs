//! One-thread pool against the full pool on the three hot loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPoolBuilder;

use circrad::cancel::phantom;
use circrad::fields::{gaussian_field, GridSpec};
use circrad::geometry::Curve;
use circrad::radon::{forward_sinogram, radial_transform, uniform_grid};
use circrad::wave::{evolve, WaveConfig};
use circrad::{par, Vec2};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let full = rayon::current_num_threads();
    let mut sizes = vec![1];
    if full > 1 {
        sizes.push(full);
    }
    sizes
        .into_iter()
        .map(|n| (format!("{n}-thread"), ThreadPoolBuilder::new().num_threads(n).build().unwrap()))
        .collect()
}

fn kernels(c: &mut Criterion) {
    let curve = Curve::unit_circle();
    let spec = GridSpec::centered(1.0, 0.01).unwrap();
    let f = gaussian_field(spec, Vec2::new(0.1, 0.0), 0.1, 1.0).unwrap();
    let r = uniform_grid(0.01, 0.01, 150);
    let s = curve.uniform_parameters(128);
    let wave_cfg = WaveConfig::new(GridSpec::centered(1.5, 0.01).unwrap(), 1.0, 0.5);
    let wave_f = gaussian_field(wave_cfg.grid, Vec2::zeros(), 0.1, 1.0).unwrap();
    let profile = phantom();
    let radii: Vec<f64> = (0..200).map(|k| 0.3 + 0.004 * k as f64).collect();

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    println!("parallel backend: {}", par::is_parallel());
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("sinogram", &name), |b| {
            b.iter(|| pool.install(|| forward_sinogram(&f, &curve, &r, &s, 256).unwrap()))
        });
        group.bench_function(BenchmarkId::new("fdtd_100_steps", &name), |b| {
            b.iter(|| pool.install(|| evolve(&wave_f, &wave_cfg, 100).unwrap()))
        });
        group.bench_function(BenchmarkId::new("radial_sweep", &name), |b| {
            b.iter(|| {
                pool.install(|| par::map_slice(&radii, |&r| radial_transform(&profile, r).unwrap()))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
