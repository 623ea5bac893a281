use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use inkmotion::diffusion::{make_schedule, Conditioning, LatentVideo, OracleDenoiser, ScheduleKind};
use inkmotion::geometry::{marching_cubes, sphere_sdf, GridGeometry, ScalarField3D};
use inkmotion::guidance::PoseFrame;
use inkmotion::parallel;
use inkmotion::pipeline::commands::prepare_guidance;
use inkmotion::pipeline::{write_demo_project, DemoOptions, ProjectConfig};
use inkmotion::poisson::{seamless_clone, SolverOptions};
use inkmotion::sdi::sample;
use inkmotion::{BinaryMap, Image};

const MODES: [&str; 2] = ["parallel", "sequential"];

/// Runs `f` on the rayon pool or forced onto one thread.
fn in_mode<R>(mode: &str, f: impl FnOnce() -> R) -> R {
    if mode == "sequential" {
        parallel::sequential(f)
    } else {
        f()
    }
}

fn ddim(c: &mut Criterion) {
    let (n, h, w) = (16, 64, 64);
    let target = LatentVideo::gaussian(n, 3, h, w, 1);
    let noise = LatentVideo::gaussian(n, 3, h, w, 2);
    let oracle = OracleDenoiser::new(target).unwrap();
    let schedule = make_schedule(ScheduleKind::Cosine, 1000).unwrap().subsample(20).unwrap();
    let cond = Conditioning {
        reference: Image::zeros(w, h, 3),
        ref_pose: PoseFrame::default(),
        poses: vec![Image::zeros(w, h, 3); n],
        coarse: None,
        masks: None,
    };
    let mut group = c.benchmark_group("ddim_20_steps_16x64x64");
    for mode in MODES {
        group.bench_function(BenchmarkId::from_parameter(mode), |b| {
            b.iter(|| in_mode(mode, || sample(&oracle, &noise, &schedule, &cond).unwrap()))
        });
    }
    group.finish();
}

fn mc(c: &mut Criterion) {
    let geom = GridGeometry::new([96, 96, 96], [-47.5; 3], 1.0).unwrap();
    let field = ScalarField3D::from_fn(geom, sphere_sdf([0.0; 3], 30.0));
    let mut group = c.benchmark_group("marching_cubes_96");
    for mode in MODES {
        group.bench_function(BenchmarkId::from_parameter(mode), |b| {
            b.iter(|| in_mode(mode, || marching_cubes(&field, 0.0)))
        });
    }
    group.finish();
}

fn poisson(c: &mut Criterion) {
    let (w, h) = (128, 128);
    let target = Image::from_fn(w, h, 3, |x, y, k| ((x * 3 + y * 5 + k) % 17) as f64 / 16.0);
    let source = Image::from_fn(w, h, 3, |x, y, k| ((x + y) as f64 / 254.0 + k as f64 * 0.1).min(1.0));
    let mask = BinaryMap::from_fn(w, h, |x, y| (x as f64 - 64.0).hypot(y as f64 - 64.0) < 40.0);
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("poisson_clone_128");
    for mode in MODES {
        group.bench_function(BenchmarkId::from_parameter(mode), |b| {
            b.iter(|| in_mode(mode, || seamless_clone(&target, &source, &mask, opts).unwrap()))
        });
    }
    group.finish();
}

fn guidance(c: &mut Criterion) {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ProjectConfig::load(&write_demo_project(tmp.path(), DemoOptions::default()).unwrap()).unwrap();
    let mut group = c.benchmark_group("guidance_demo_16x64x64");
    group.sample_size(10);
    for mode in MODES {
        group.bench_function(BenchmarkId::from_parameter(mode), |b| {
            b.iter(|| in_mode(mode, || prepare_guidance(&cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, ddim, mc, poisson, guidance);
criterion_main!(benches);
