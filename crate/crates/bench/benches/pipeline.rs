use criterion::{black_box, criterion_group, criterion_main, Criterion};

use covkit_bench::{gaussian_fixture, po_fixture, quadratic_fixture};
use covkit_core::hessian::{assemble_hessian, HessianMethod};
use covkit_core::posterior::{run_batch, BatchSettings, WeightConvention};
use covkit_core::sampler::{mvt_draw, RngStream};
use covkit_core::spectral::invert_spectral;
use covkit_core::DVector;

fn hessian_assembly(c: &mut Criterion) {
    let (model, theta) = po_fixture();
    let mut group = c.benchmark_group("hessian/po-256");
    group.sample_size(20);
    group.bench_function("standard", |b| {
        b.iter(|| assemble_hessian(black_box(&model), &theta, HessianMethod::Standard).unwrap())
    });
    group.bench_function("quick", |b| {
        b.iter(|| assemble_hessian(black_box(&model), &theta, HessianMethod::Quick).unwrap())
    });
    group.finish();
}

fn spectral_inversion(c: &mut Criterion) {
    let (model, theta) = quadratic_fixture(20);
    let hessian = assemble_hessian(&model, &theta, HessianMethod::Standard)
        .unwrap()
        .hessian;
    let mut group = c.benchmark_group("spectral/quadratic-20");
    group.bench_function("invert", |b| {
        b.iter(|| invert_spectral(&model, &theta, black_box(&hessian), false).unwrap())
    });
    group.bench_function("invert+polish", |b| {
        b.iter(|| invert_spectral(&model, &theta, black_box(&hessian), true).unwrap())
    });
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let (_, _, chol) = gaussian_fixture();
    let mut rng = RngStream::new(1, 0);
    c.bench_function("sampler/mvt-draw-2d", |b| {
        b.iter(|| black_box(mvt_draw(&chol, 6, &mut rng)))
    });
}

fn posterior_batch(c: &mut Criterion) {
    let (model, h, chol) = gaussian_fixture();
    let theta_hat = DVector::zeros(2);
    let settings = BatchSettings {
        nu: 6,
        n_sims: 1_000,
        convention: WeightConvention::Consistent,
        control_variate: true,
    };
    let mut group = c.benchmark_group("posterior/gaussian-2d");
    group.sample_size(30);
    group.bench_function("batch-1k-pairs", |b| {
        b.iter(|| {
            let mut rng = RngStream::new(5, 0);
            run_batch(
                black_box(&model),
                &theta_hat,
                0.0,
                &h,
                &chol,
                &settings,
                &[],
                &mut rng,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    hessian_assembly,
    spectral_inversion,
    sampling,
    posterior_batch
);
criterion_main!(benches);
