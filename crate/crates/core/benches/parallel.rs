use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rmframe::frames::{default_normal, rm_frame_integrate, rm_frames_batch, CatalogCurve, RmOptions};
use rmframe::par::Exec;
use rmframe::reconstruct::sweep_surface;
use rmframe::verify::{run_all, VerifyOptions};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn rm_batch(c: &mut Criterion) {
    let curves: Vec<_> = (0..16).map(|seed| CatalogCurve::RandomFourier { seed, modes: 3 }.sample(10.0, 1e-3)).collect();
    let v0: Vec<_> = curves.iter().map(|c| default_normal(&c.d1[0])).collect();
    let mut g = c.benchmark_group("rm_frames_batch_16");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| b.iter(|| rm_frames_batch(&curves, &v0, RmOptions::default(), exec)));
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let curve = CatalogCurve::Helix { a: 1.0, b: 1.0 }.sample(20.0, 1e-3);
    let frame = rm_frame_integrate(&curve, default_normal(&curve.d1[0]), RmOptions::default()).unwrap();
    let mut g = c.benchmark_group("sweep_surface_64");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| b.iter(|| sweep_surface(&curve, &frame, 0.1, 64, exec).unwrap()));
    }
    g.finish();
}

fn verify_quick(c: &mut Criterion) {
    let mut g = c.benchmark_group("verify_quick");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = VerifyOptions { quick: true, exec, ..VerifyOptions::default() };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| b.iter(|| run_all(opts)));
    }
    g.finish();
}

criterion_group!(benches, rm_batch, sweep, verify_quick);
criterion_main!(benches);
