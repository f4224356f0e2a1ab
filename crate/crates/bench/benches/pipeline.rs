use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use phstab_bench::sample_images;
use phstab_core::experiment::{image_diagrams, FiltrationConfig};
use phstab_core::metrics::{wasserstein_with, WassersteinSolver};
use phstab_core::signatures::{
    default_variance, fit_range, landscape_vector, persistence_image, PiWeight, DEFAULT_GRID, DEFAULT_LAYERS,
    DEFAULT_RESOLUTION,
};
use phstab_core::svm::{kernel_from_distances, train};
use phstab_core::{FiltrationKind, PersistenceDiagram};

fn diagrams(kind: FiltrationKind, n: usize) -> Vec<[PersistenceDiagram; 2]> {
    let cfg = FiltrationConfig::new(kind);
    sample_images(n)
        .iter()
        .map(|img| image_diagrams(img, &cfg).expect("diagrams"))
        .collect()
}

fn persistence(c: &mut Criterion) {
    let img = &sample_images(1)[0];
    let mut group = c.benchmark_group("persistence");
    for kind in [
        FiltrationKind::Binary,
        FiltrationKind::Greyscale,
        FiltrationKind::Density,
        FiltrationKind::Radial,
        FiltrationKind::Rips,
        FiltrationKind::Dtm,
    ] {
        let cfg = FiltrationConfig::new(kind);
        group.bench_with_input(BenchmarkId::from_parameter(kind.name()), &cfg, |b, cfg| {
            b.iter(|| image_diagrams(black_box(img), cfg).unwrap())
        });
    }
    group.finish();
}

fn wasserstein(c: &mut Criterion) {
    let mut group = c.benchmark_group("wasserstein");
    group.sample_size(20);
    for kind in [FiltrationKind::Greyscale, FiltrationKind::Dtm] {
        let d = diagrams(kind, 2);
        let cap = 1e3;
        let a = d[0][0].truncate_essential(cap).unwrap();
        let b = d[1][0].truncate_essential(cap).unwrap();
        for solver in [WassersteinSolver::Transport, WassersteinSolver::Hungarian] {
            let id = BenchmarkId::new(format!("{solver:?}"), format!("{} dim 0", kind.name()));
            group.bench_function(id, |bench| bench.iter(|| wasserstein_with(&a, &b, 2.0, solver).unwrap()));
        }
    }
    group.finish();
}

fn signatures(c: &mut Criterion) {
    let d: Vec<PersistenceDiagram> = diagrams(FiltrationKind::Greyscale, 20)
        .into_iter()
        .map(|[_, one]| one.truncate_essential(255.0).unwrap())
        .collect();
    let range = fit_range(&d).unwrap();
    let variance = default_variance(&d).unwrap();
    c.bench_function("landscape", |b| {
        b.iter(|| landscape_vector(black_box(&d[0]), DEFAULT_LAYERS, DEFAULT_RESOLUTION, &range).unwrap())
    });
    c.bench_function("persistence image", |b| {
        b.iter(|| {
            persistence_image(black_box(&d[0]), DEFAULT_GRID, DEFAULT_GRID, variance, &range, PiWeight::LifespanSquared)
                .unwrap()
        })
    });
}

fn svm(c: &mut Criterion) {
    // ten well separated clusters on a line, one per class
    let n = 200;
    let xs: Vec<f64> = (0..n).map(|i| (i % 10) as f64 * 3.0 + (i / 10) as f64 * 0.01).collect();
    let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    let dist: Vec<f64> = xs.iter().flat_map(|a| xs.iter().map(move |b| (a - b).abs())).collect();
    let kernel = kernel_from_distances(&dist, 0.1);
    c.bench_function("svm train 200x10", |b| b.iter(|| train(black_box(&kernel), &labels, 10.0).unwrap()));
}

criterion_group!(benches, persistence, wasserstein, signatures, svm);
criterion_main!(benches);
