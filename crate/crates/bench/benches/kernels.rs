use std::hint::black_box;
use std::sync::Arc;

use anongcn::gepa::{run_attack, AttackSpec};
use anongcn::graph::{eigendecompose, synth_graph, SbmSpec, SynthSpec};
use anongcn::model::{train_semi, train_spectral, FilterInit, SemiGcnModel, SpectralModel, TrainConfig};
use anongcn::rng::substream;
use anongcn::signal::dft;
use anongcn::{Graph, LaplacianKind, SpectralBasis};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn sbm(per_class: usize, p_in: f64) -> Graph {
    synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![per_class, per_class], p_in, 0.02, 3))).unwrap()
}

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigendecompose");
    group.sample_size(10);
    for n in [100, 400] {
        let l = sbm(n / 2, 0.1).laplacian(LaplacianKind::SymmetricNormalized);
        group.bench_with_input(BenchmarkId::from_parameter(n), &l, |b, l| {
            b.iter(|| eigendecompose(black_box(l)).unwrap())
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let g = sbm(100, 0.1);
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let basis = Arc::new(SpectralBasis::of_graph(&g, LaplacianKind::SymmetricNormalized).unwrap());
    let mut group = c.benchmark_group("train_10_epochs");
    group.sample_size(20);
    group.bench_function("spectral_200", |b| {
        b.iter(|| {
            let mut rng = substream(0, "model-init");
            let mut m = SpectralModel::new(basis.clone(), g.n_features(), 2, FilterInit::default(), &mut rng);
            train_spectral(&mut m, &g, &cfg).unwrap()
        })
    });
    group.bench_function("semi_200", |b| {
        b.iter(|| {
            let mut rng = substream(0, "model-init");
            let mut m = SemiGcnModel::new(g.n_features(), 16, 2, &mut rng);
            train_semi(&mut m, &g, &cfg).unwrap()
        })
    });
    group.finish();
}

fn attack(c: &mut Criterion) {
    let g = sbm(50, 0.1);
    let mut m = SemiGcnModel::new(g.n_features(), 16, 2, &mut substream(0, "model-init"));
    train_semi(&mut m, &g, &TrainConfig::default()).unwrap();
    let target = g.masks().test[0];
    let desired = 1 - g.labels().unwrap()[target];
    let spec = AttackSpec::single(target, desired);
    let mut group = c.benchmark_group("attack");
    group.sample_size(10);
    group.bench_function("single_target_100", |b| {
        b.iter(|| run_attack(&m, &g, black_box(&spec)).unwrap())
    });
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("dft");
    for e in [64usize, 1500] {
        let x: Vec<f64> = (0..e).map(|t| (t as f64 * 0.37).sin()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(e), &x, |b, x| b.iter(|| dft(black_box(x))));
    }
    group.finish();
}

criterion_group!(benches, eigen, training, attack, spectrum);
criterion_main!(benches);
