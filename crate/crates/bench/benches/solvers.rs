//! Timings for the 1D selections, the grid projection, a batch of
//! Douglas-Rachford iterations and the Weiszfeld kernel.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmedian::dr::{solve_median, DrParams};
use wmedian::experiments::{random_atomic, random_blob};
use wmedian::geom::weiszfeld;
use wmedian::grid2d::{FlowField, PoissonBackend, ScalarField};
use wmedian::median1d::{horizontal_selection, vertical_selection};
use wmedian::prox::{FlowProjector, FlowTuple};
use wmedian::{Error, Weights};

fn selections(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("selection_1d");
    for atoms in [100, 1000] {
        let samples: Vec<_> = (0..7).map(|_| random_atomic(&mut rng, atoms, 10.0).unwrap()).collect();
        let w = Weights::uniform(7);
        group.bench_with_input(BenchmarkId::new("vertical", atoms), &samples, |b, s| {
            b.iter(|| vertical_selection(&w, black_box(s), 0.5).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("horizontal", atoms), &samples, |b, s| {
            b.iter(|| horizontal_selection(&w, black_box(s), 0.5).unwrap())
        });
    }
    group.finish();
}

fn projection(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("projection");
    for p in [64, 128] {
        let samples: Vec<_> = (0..3).map(|_| random_blob(&mut rng, p).unwrap()).collect();
        let mut field = || (0..p * p).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let tuple = FlowTuple {
            flows: (0..3).map(|_| FlowField::new(p, field(), field()).unwrap()).collect(),
            measure: ScalarField::new(p, field()).unwrap(),
        };
        let backends = [("direct", PoissonBackend::Direct), ("cg", PoissonBackend::ConjugateGradient { max_iter: 5000 })];
        for (name, backend) in backends {
            let mut projector = FlowProjector::new(p, 3, backend, 1e-10).unwrap();
            group.bench_function(BenchmarkId::new(name, p), |b| {
                b.iter(|| projector.project(black_box(&tuple), &samples).unwrap())
            });
        }
    }
    group.finish();
}

fn dr_iterations(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = 64;
    let samples: Vec<_> = (0..3).map(|_| random_blob(&mut rng, p).unwrap()).collect();
    let params = DrParams { max_iter: 50, tol: 0.0, ..DrParams::default() };
    let mut group = c.benchmark_group("douglas_rachford");
    group.sample_size(10);
    group.bench_function("64x64_50_iterations", |b| {
        b.iter(|| match solve_median(black_box(&samples), &Weights::uniform(3), &params) {
            Ok(s) => s.iterations,
            Err(Error::MedianNoConvergence(s)) => s.iterations,
            Err(e) => panic!("{e}"),
        })
    });
    group.finish();
}

fn geometric_median(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<[f64; 2]> = (0..100).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let w = Weights::uniform(100);
    c.bench_function("weiszfeld_100_points", |b| {
        b.iter(|| weiszfeld(black_box(&points), &w, 1e-10, 10_000).unwrap())
    });
}

criterion_group!(benches, selections, projection, dr_iterations, geometric_median);
criterion_main!(benches);
