use std::sync::Arc;

use anongcn::graph::{synth_graph, SbmSpec, SynthSpec};
use anongcn::model::{
    train_model, train_semi, train_spectral, Activation, AnyModel, FilterInit, Propagation, SemiGcnModel,
    SpectralModel, TrainConfig,
};
use anongcn::nn::{gaussian, renormalize};
use anongcn::rng::{rng_from_seed, substream};
use anongcn::{Graph, LaplacianKind, Matrix, SpectralBasis};

fn separable() -> Graph {
    synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![10, 10], 0.9, 0.05, 7))).unwrap()
}

fn spectral(g: &Graph, seed: u64) -> SpectralModel {
    let basis = Arc::new(SpectralBasis::of_graph(g, LaplacianKind::SymmetricNormalized).unwrap());
    SpectralModel::new(
        basis,
        g.n_features(),
        g.n_classes().unwrap(),
        FilterInit::default(),
        &mut substream(seed, "model-init"),
    )
}

fn semi(g: &Graph, seed: u64) -> SemiGcnModel {
    SemiGcnModel::new(
        g.n_features(),
        16,
        g.n_classes().unwrap(),
        &mut substream(seed, "model-init"),
    )
}

fn naive(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            for k in 0..a.cols() {
                out[(i, j)] += a[(i, k)] * b[(k, j)];
            }
        }
    }
    out
}

fn naive_softmax(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..x.rows() {
        let m = x.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = x.row(i).iter().map(|v| (v - m).exp()).sum();
        for (o, v) in out.row_mut(i).iter_mut().zip(x.row(i)) {
            *o = (v - m).exp() / z;
        }
    }
    out
}

/// Nearest-centroid classifier on neighborhood-averaged features `(A + I) f`:
/// a linear oracle confirming the instance is separable once edges are used.
#[test]
fn separable_instance_is_linearly_separable() {
    let g = separable();
    let labels = g.labels().unwrap();
    let mut a = g.adjacency();
    for i in 0..g.n_nodes() {
        a[(i, i)] = 1.0;
    }
    let f = &naive(&a, g.features());
    let mut centroids = vec![vec![0.0; f.cols()]; 2];
    let mut counts = [0.0; 2];
    for i in 0..g.n_nodes() {
        counts[labels[i]] += 1.0;
        for (c, x) in centroids[labels[i]].iter_mut().zip(f.row(i)) {
            *c += x;
        }
    }
    for (c, n) in centroids.iter_mut().zip(counts) {
        c.iter_mut().for_each(|x| *x /= n);
    }
    let dist = |row: &[f64], c: &[f64]| row.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    for (i, &label) in labels.iter().enumerate() {
        let pred = if dist(f.row(i), &centroids[0]) <= dist(f.row(i), &centroids[1]) {
            0
        } else {
            1
        };
        assert_eq!(pred, label);
    }
}

#[test]
fn both_models_fit_the_separable_instance() {
    let g = separable();
    let cfg = TrainConfig::default();
    let mut m = spectral(&g, 1);
    let trace = train_spectral(&mut m, &g, &cfg).unwrap();
    assert_eq!(trace.len(), 200);
    assert_eq!(trace.last().unwrap().train_acc, 1.0);

    let mut s = semi(&g, 1);
    let trace = train_semi(&mut s, &g, &cfg).unwrap();
    assert_eq!(trace.last().unwrap().train_acc, 1.0);
}

#[test]
fn loss_is_non_increasing_over_ten_epoch_windows() {
    let g = separable();
    for mut model in [AnyModel::Spectral(spectral(&g, 2)), AnyModel::Semi(semi(&g, 2))] {
        let trace = train_model(&mut model, &g, &TrainConfig::default()).unwrap();
        for w in trace.windows(11) {
            assert!(w[10].train_loss <= w[0].train_loss + 1e-12, "epoch {}", w[0].epoch);
        }
    }
}

#[test]
fn zero_epochs_leave_parameters_unchanged() {
    let g = separable();
    let cfg = TrainConfig {
        epochs: 0,
        ..Default::default()
    };
    for model in [AnyModel::Spectral(spectral(&g, 3)), AnyModel::Semi(semi(&g, 3))] {
        let before = model.params();
        let mut trained = model.clone();
        assert!(train_model(&mut trained, &g, &cfg).unwrap().is_empty());
        assert_eq!(trained.params(), before);
    }
}

#[test]
fn same_seed_gives_identical_traces() {
    let g = separable();
    let cfg = TrainConfig {
        epochs: 40,
        ..Default::default()
    };
    for make in [
        |g: &Graph| AnyModel::Spectral(spectral(g, 4)),
        |g: &Graph| AnyModel::Semi(semi(g, 4)),
    ] {
        let (mut a, mut b) = (make(&g), make(&g));
        assert_eq!(
            train_model(&mut a, &g, &cfg).unwrap(),
            train_model(&mut b, &g, &cfg).unwrap()
        );
        assert_eq!(a.params(), b.params());
    }
}

#[test]
fn empty_train_mask_rejected() {
    let g = separable();
    let mut masks = g.masks().clone();
    masks.train.clear();
    let g = g.with_masks(masks).unwrap();
    let mut m = semi(&g, 0);
    assert!(train_semi(&mut m, &g, &TrainConfig::default()).is_err());
}

#[test]
fn spectral_forward_matches_product_chain() {
    let g = synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![3, 3], 0.8, 0.3, 5))).unwrap();
    let mut rng = rng_from_seed(5);
    let basis = Arc::new(SpectralBasis::of_graph(&g, LaplacianKind::Combinatorial).unwrap());
    let theta = gaussian(1, 6, 1.0, &mut rng);
    let w = gaussian(g.n_features(), 2, 1.0, &mut rng);
    let m = SpectralModel::from_parts(basis.clone(), theta.clone(), w.clone(), Activation::Relu).unwrap();

    let u = basis.vectors();
    let filtered = naive(&naive(u, &Matrix::diag(theta.row(0))), &u.transpose());
    let emb = naive(&filtered, g.features()).map(|x| x.max(0.0));
    let expected = naive(&emb, &w);
    assert!(m.forward(g.features()).unwrap().max_abs_diff(&expected) < 1e-10);
    for v in 0..6 {
        let row = m.node_embedding(g.features(), v).unwrap();
        assert!(row.iter().zip(emb.row(v)).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}

#[test]
fn semi_forward_matches_independent_evaluation() {
    let g = synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![4, 4], 0.7, 0.2, 6))).unwrap();
    let mut rng = rng_from_seed(6);
    let m = SemiGcnModel {
        w1: gaussian(g.n_features(), 5, 1.0, &mut rng),
        w2: gaussian(5, 2, 1.0, &mut rng),
        propagation: Propagation::Renormalized,
    };
    let a = g.adjacency();
    let mut a_loop = a.clone();
    for i in 0..8 {
        a_loop[(i, i)] += 1.0;
    }
    let d: Vec<f64> = a_loop.row_sums().iter().map(|s| 1.0 / s.sqrt()).collect();
    let p = naive(&naive(&Matrix::diag(&d), &a_loop), &Matrix::diag(&d));
    assert!(p.max_abs_diff(&renormalize(&a).unwrap()) < 1e-14);

    let h = naive(&naive(&p, g.features()), &m.w1).map(|x| x.max(0.0));
    let expected = naive_softmax(&naive(&naive(&p, &h), &m.w2));
    let probs = m.predict_proba(&a, g.features()).unwrap();
    assert!(probs.max_abs_diff(&expected) < 1e-10);
    for s in probs.row_sums() {
        assert!((s - 1.0).abs() < 1e-12);
    }
}
