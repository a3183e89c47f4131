#![allow(dead_code)]

use std::sync::Arc;

use anongcn::angcn::{
    discriminator_loss_on_tape, generator_loss_on_tape, sample_noise, staggered_spec, AnGcnState, Discriminator,
    Generator, GeneratorOutput,
};
use anongcn::gepa::{AttackProblem, AttackSpec};
use anongcn::graph::{synth_graph, SbmSpec, SynthSpec};
use anongcn::model::{train_semi, Activation, FilterInit, SemiGcnModel, TrainConfig};
use anongcn::nn::{gaussian, one_hot, Tape, Var};
use anongcn::rng::rng_from_seed;
use anongcn::{Edge, Graph, LaplacianKind, Matrix, Result, SpectralBasis};
use rand::seq::SliceRandom;
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL: f64 = 1e-4;
pub const FD_ABS: f64 = 1e-6;

/// Loss and analytic gradients for one set of parameter values.
pub type Eval<'a> = dyn Fn(&[Matrix]) -> Result<(f64, Vec<Matrix>)> + 'a;

/// Worst `|analytic - numeric| / (FD_REL max(|a|, |n|) + FD_ABS)` over every
/// entry; values `<= 1` pass.
pub fn fd_ratio(params: &[Matrix], eval: &Eval) -> Result<f64> {
    let (_, grads) = eval(params)?;
    let mut worst: f64 = 0.0;
    for (pi, p) in params.iter().enumerate() {
        for k in 0..p.as_slice().len() {
            let mut shifted = params.to_vec();
            shifted[pi].as_mut_slice()[k] = p.as_slice()[k] + FD_STEP;
            let (up, _) = eval(&shifted)?;
            shifted[pi].as_mut_slice()[k] = p.as_slice()[k] - FD_STEP;
            let (down, _) = eval(&shifted)?;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads[pi].as_slice()[k];
            let tol = FD_REL * analytic.abs().max(numeric.abs()) + FD_ABS;
            worst = worst.max((analytic - numeric).abs() / tol);
        }
    }
    Ok(worst)
}

/// Builds `f` over fresh parameter leaves and differentiates it.
pub fn on_tape(f: impl Fn(&mut Tape, &[Var]) -> Result<Var>) -> impl Fn(&[Matrix]) -> Result<(f64, Vec<Matrix>)> {
    move |params: &[Matrix]| {
        let mut tape = Tape::new();
        let vars = params
            .iter()
            .map(|p| tape.param(p.clone()))
            .collect::<Result<Vec<_>>>()?;
        let loss = f(&mut tape, &vars)?;
        tape.backward(loss)?;
        Ok((tape.scalar(loss), vars.iter().map(|&v| tape.grad_or_zeros(v)).collect()))
    }
}

/// Gaussian entries pushed at least `gap` away from zero, so `relu` and
/// `abs` are differentiable at every sampled point.
pub fn away_from_zero(rows: usize, cols: usize, gap: f64, seed: u64) -> Matrix {
    gaussian(rows, cols, 1.0, &mut rng_from_seed(seed)).map(|x| if x.abs() < gap { x.signum() * gap + x } else { x })
}

fn weighted_sum(tape: &mut Tape, x: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.shape(x);
    let w = tape.constant(gaussian(r, c, 1.0, &mut rng_from_seed(seed)))?;
    let h = tape.hadamard(x, w)?;
    tape.sum(h)
}

/// One finite-difference check per tape operation, each reduced to a scalar
/// through a random weighting.
pub fn op_checks() -> Result<Vec<(&'static str, f64)>> {
    type Build = fn(&mut Tape, &[Var]) -> Result<Var>;
    let x34 = || away_from_zero(3, 4, 0.1, 1);
    let y34 = || away_from_zero(3, 4, 0.1, 2);
    let cases: Vec<(&'static str, Vec<Matrix>, Build)> = vec![
        ("matmul", vec![x34(), away_from_zero(4, 2, 0.1, 3)], |t, v| {
            let o = t.matmul(v[0], v[1])?;
            weighted_sum(t, o, 10)
        }),
        ("add", vec![x34(), y34()], |t, v| {
            let o = t.add(v[0], v[1])?;
            weighted_sum(t, o, 11)
        }),
        ("sub", vec![x34(), y34()], |t, v| {
            let o = t.sub(v[0], v[1])?;
            weighted_sum(t, o, 12)
        }),
        ("hadamard", vec![x34(), y34()], |t, v| {
            let o = t.hadamard(v[0], v[1])?;
            weighted_sum(t, o, 13)
        }),
        ("add_row", vec![x34(), away_from_zero(1, 4, 0.1, 4)], |t, v| {
            let o = t.add_row(v[0], v[1])?;
            weighted_sum(t, o, 14)
        }),
        ("diag_scale", vec![x34(), away_from_zero(1, 4, 0.1, 5)], |t, v| {
            let o = t.diag_scale(v[0], v[1])?;
            weighted_sum(t, o, 15)
        }),
        ("transpose", vec![x34()], |t, v| {
            let o = t.transpose(v[0])?;
            weighted_sum(t, o, 16)
        }),
        ("scale", vec![x34()], |t, v| {
            let o = t.scale(v[0], -1.7)?;
            weighted_sum(t, o, 17)
        }),
        ("relu", vec![x34()], |t, v| {
            let o = t.relu(v[0])?;
            weighted_sum(t, o, 18)
        }),
        ("sigmoid", vec![x34()], |t, v| {
            let o = t.sigmoid(v[0])?;
            weighted_sum(t, o, 19)
        }),
        ("tanh", vec![x34()], |t, v| {
            let o = t.tanh(v[0])?;
            weighted_sum(t, o, 40)
        }),
        ("softmax_rows", vec![x34()], |t, v| {
            let o = t.softmax_rows(v[0])?;
            weighted_sum(t, o, 20)
        }),
        ("abs", vec![x34()], |t, v| {
            let o = t.abs(v[0])?;
            weighted_sum(t, o, 21)
        }),
        ("sum", vec![x34()], |t, v| {
            let s = t.sum(v[0])?;
            let s2 = t.hadamard(s, s)?;
            t.sum(s2)
        }),
        ("select_rows", vec![x34()], |t, v| {
            let o = t.select_rows(v[0], &[2, 0, 2])?;
            weighted_sum(t, o, 22)
        }),
        ("overwrite", vec![x34()], |t, v| {
            let mask = Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 4], vec![0.0, 1.0, 0.0, 0.0]])?;
            let o = t.overwrite(v[0], &mask, &Matrix::filled(3, 4, 0.3))?;
            weighted_sum(t, o, 23)
        }),
        (
            "sym_normalize",
            vec![away_from_zero(4, 4, 0.1, 6).map(|x| x.abs())],
            |t, v| {
                let o = t.sym_normalize(v[0])?;
                weighted_sum(t, o, 24)
            },
        ),
        ("cross_entropy", vec![x34()], |t, v| {
            let p = t.softmax_rows(v[0])?;
            t.cross_entropy(p, &one_hot(&[1, 3, 0], 4)?)
        }),
        ("softmax_cross_entropy", vec![x34()], |t, v| {
            t.softmax_cross_entropy(v[0], &[1, 3, 0])
        }),
        ("sigmoid_bce", vec![x34()], |t, v| {
            let target = Matrix::from_rows(&[vec![1.0, 0.0, 0.2, 0.0], vec![0.0, 0.0, 1.0, 0.5], vec![0.0; 4]])?;
            t.sigmoid_bce(v[0], &target)
        }),
    ];
    cases
        .into_iter()
        .map(|(name, params, build)| Ok((name, fd_ratio(&params, &on_tape(build))?)))
        .collect()
}

/// Labeled sbm with a trained semi-GCN, small enough for dense FD sweeps.
pub fn small_semi(seed: u64) -> Result<(Graph, SemiGcnModel)> {
    let g = synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![5, 5], 0.5, 0.1, seed)))?;
    let mut model = SemiGcnModel::new(g.n_features(), 8, 2, &mut rng_from_seed(seed));
    train_semi(
        &mut model,
        &g,
        &TrainConfig {
            epochs: 30,
            ..Default::default()
        },
    )?;
    Ok((g, model))
}

pub fn semi_loss_check(seed: u64) -> Result<f64> {
    let (g, model) = small_semi(seed)?;
    let labels = g.require_labels()?.to_vec();
    let train = g.masks().train.clone();
    let prop = Arc::new(model.propagation.apply(&g.adjacency())?);
    let f = Arc::new(g.features().clone());
    let targets = one_hot(&train.iter().map(|&i| labels[i]).collect::<Vec<_>>(), 2)?;
    let eval = on_tape(move |t, v| {
        let p = t.constant_shared(prop.clone())?;
        let fv = t.constant_shared(f.clone())?;
        let probs = SemiGcnModel::forward_on_tape(t, p, fv, v[0], v[1])?;
        let tp = t.select_rows(probs, &train)?;
        let ce = t.cross_entropy(tp, &targets)?;
        t.scale(ce, 1.0 / train.len() as f64)
    });
    fd_ratio(&[model.w1.clone(), model.w2.clone()], &eval)
}

/// FD check of the G-EPA objective at a random interior `H`.
pub fn attack_objective_check(seed: u64, multi: bool) -> Result<f64> {
    let (g, model) = small_semi(seed)?;
    let pred = model.predict(&g.adjacency(), g.features())?;
    let spec = if multi {
        AttackSpec::multi(vec![0, 7], vec![1 - pred[0], 1 - pred[7]])
    } else {
        AttackSpec::single(0, 1 - pred[0])
    };
    let problem = AttackProblem::new(&model, &g, &spec)?;
    let a = problem.adjacency().clone();
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    // Interior H keeps every |A - H'| term away from its kink.
    let n = a.rows();
    let mut h = Matrix::zeros(n, n);
    for x in h.as_mut_slice() {
        *x = rng.random_range(0.15..0.85);
    }
    let eval = on_tape(|t, v| Ok(problem.objective_on_tape(t, v[0])?.0));
    fd_ratio(&[h], &eval)
}

struct GanFixture {
    state: AnGcnState,
    disc: Discriminator,
    gen: Generator,
    z: Vec<f64>,
    generated: Vec<f64>,
}

/// `bounded` swaps in a tanh generator output and a sigmoid discriminator.
fn gan_fixture(seed: u64, bounded: bool) -> Result<GanFixture> {
    let g = synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![4, 4], 0.6, 0.1, seed)))?;
    let n = g.n_nodes();
    let basis = Arc::new(SpectralBasis::of_graph(&g, LaplacianKind::SymmetricNormalized)?);
    let mut state = AnGcnState::new(basis.clone(), g.features(), 0.3)?;
    let mut rng = rng_from_seed(seed);
    let spec = staggered_spec(n, 1.0, anongcn::angcn::default_epsilon())?;
    let mut gen = Generator::new(6, 5, n, 1.0 / (n as f64 * spec.r), &mut rng);
    // Positive hidden biases keep units alive; zero biases can leave the
    // generated row exactly on a relu kink.
    gen.b1 = away_from_zero(1, 5, 0.2, seed + 2).map(f64::abs);
    gen.b2 = away_from_zero(1, n, 0.1, seed + 3);
    let mut disc = Discriminator::new(basis.eigenvalues(), g.n_features(), 2, FilterInit::Ones, &mut rng);
    disc.enc = away_from_zero(1, n, 0.1, seed + 1);
    if bounded {
        gen.output = GeneratorOutput::Tanh;
        disc.activation = Activation::Sigmoid;
    }
    let z = sample_noise(&spec, 3, 6, &mut rng)?;
    let generated = gen.generate_row(&z)?;
    state.update_ud(2, &generated)?;
    Ok(GanFixture {
        state,
        disc,
        gen,
        z,
        generated,
    })
}

/// FD check of `Loss_D(real) + Loss_D(fake)` in `(D_enc, D_dec)`.
pub fn discriminator_loss_check(seed: u64, bounded: bool) -> Result<f64> {
    let fx = gan_fixture(seed, bounded)?;
    let eval = |p: &[Matrix]| {
        let mut d = fx.disc.clone();
        d.enc = p[0].clone();
        d.dec = p[1].clone();
        let mut tape = Tape::new();
        let (loss, enc, dec) = discriminator_loss_on_tape(&mut tape, &fx.state, &d, &fx.generated, 2, 0, 1)?;
        tape.backward(loss)?;
        Ok((
            tape.scalar(loss),
            vec![tape.grad_or_zeros(enc), tape.grad_or_zeros(dec)],
        ))
    };
    fd_ratio(&[fx.disc.enc.clone(), fx.disc.dec.clone()], &eval)
}

/// FD check of the generator fool loss in all four generator blocks.
pub fn generator_loss_check(seed: u64, bounded: bool) -> Result<f64> {
    let fx = gan_fixture(seed, bounded)?;
    let eval = |p: &[Matrix]| {
        let mut g = fx.gen.clone();
        g.w1 = p[0].clone();
        g.b1 = p[1].clone();
        g.w2 = p[2].clone();
        g.b2 = p[3].clone();
        let mut tape = Tape::new();
        let (loss, w) = generator_loss_on_tape(&mut tape, &fx.state, &g, &fx.disc, &fx.z, 1)?;
        tape.backward(loss)?;
        Ok((tape.scalar(loss), w.iter().map(|&v| tape.grad_or_zeros(v)).collect()))
    };
    let g = &fx.gen;
    fd_ratio(&[g.w1.clone(), g.b1.clone(), g.w2.clone(), g.b2.clone()], &eval)
}

/// Every gradient check under its name.
pub fn gradient_suite() -> Result<Vec<(String, f64)>> {
    let mut out: Vec<(String, f64)> = op_checks()?.into_iter().map(|(n, r)| (n.to_string(), r)).collect();
    for seed in 0..3 {
        out.push((format!("semi_gcn_loss/{seed}"), semi_loss_check(seed)?));
        out.push((format!("attack_objective/{seed}"), attack_objective_check(seed, false)?));
        out.push((
            format!("attack_objective_multi/{seed}"),
            attack_objective_check(seed, true)?,
        ));
        out.push((
            format!("discriminator_loss/{seed}"),
            discriminator_loss_check(seed, false)?,
        ));
        out.push((format!("generator_loss/{seed}"), generator_loss_check(seed, false)?));
        out.push((
            format!("discriminator_loss_sigmoid/{seed}"),
            discriminator_loss_check(seed, true)?,
        ));
        out.push((format!("generator_loss_tanh/{seed}"), generator_loss_check(seed, true)?));
    }
    Ok(out)
}

/// Spectral model trained on the perturb-u desk graph.
pub fn perturb_desk() -> Result<(Graph, anongcn::model::SpectralModel)> {
    use anongcn::model::{train_spectral, SpectralModel};
    let g = synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![20, 20], 0.3, 0.05, 1)))?;
    let basis = Arc::new(SpectralBasis::of_graph(&g, LaplacianKind::SymmetricNormalized)?);
    let mut m = SpectralModel::new(
        basis,
        g.n_features(),
        2,
        FilterInit::default(),
        &mut anongcn::rng::substream(1, "model-init"),
    );
    train_spectral(&mut m, &g, &TrainConfig::default())?;
    Ok((g, m))
}

/// `(own deviation, largest neighbor deviation)` at `δ = 0.5` for the
/// highest-degree node of the perturb-u desk.
pub fn perturb_desk_deviations() -> Result<(f64, f64)> {
    use anongcn::signal::{perturb_u_experiment, top_degree_nodes, DEFAULT_CV};
    let (g, m) = perturb_desk()?;
    let v = top_degree_nodes(&g, 1)[0];
    let nb = g.neighbors();
    let c_v = nb[v].len().min(DEFAULT_CV);
    let t = perturb_u_experiment(m.basis(), m.filter.row(0), g.features(), &nb[v], v, c_v, &[0.5])?;
    let worst = t.deviation[1..].iter().map(|r| r[0]).fold(0.0, f64::max);
    Ok((t.deviation[0][0], worst))
}

/// Mean `|C|` for orders 1, 2, 3 on a connected 200-node sbm, deleting the
/// five highest-degree nodes.
pub fn delete_desk_means() -> Result<Vec<f64>> {
    use anongcn::signal::{delete_node_experiment, top_degree_nodes};
    let g = synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![100, 100], 0.05, 0.005, 1)))?;
    let taus = top_degree_nodes(&g, 5);
    let report = delete_node_experiment(&g, &taus, &[1, 2, 3], LaplacianKind::SymmetricNormalized)?;
    Ok(report.mean_abs_c().into_iter().map(|m| m.unwrap_or(f64::NAN)).collect())
}

pub struct Instance {
    pub g: Graph,
    pub model: SemiGcnModel,
    pub target: usize,
    pub desired: usize,
}

/// Semi-GCN (hidden 16) trained with the default config.
pub fn trained_semi(g: &Graph, seed: u64) -> SemiGcnModel {
    let mut rng = anongcn::rng::substream(seed, "model-init");
    let mut m = SemiGcnModel::new(g.n_features(), 16, g.n_classes().unwrap(), &mut rng);
    train_semi(&mut m, g, &TrainConfig::default()).unwrap();
    m
}

/// Small sbm with the least confidently classified node as target.
pub fn small_instance(seed: u64) -> Instance {
    let g = synth_graph(&SynthSpec::Sbm(
        SbmSpec::new(vec![10, 10], 0.4, 0.08, seed).with_noise(1.0),
    ))
    .unwrap();
    let model = trained_semi(&g, seed);
    let probs = model.predict_proba(&g.adjacency(), g.features()).unwrap();
    let target = (0..g.n_nodes())
        .min_by(|&a, &b| {
            let ma = (probs[(a, 0)] - probs[(a, 1)]).abs();
            let mb = (probs[(b, 0)] - probs[(b, 1)]).abs();
            ma.total_cmp(&mb)
        })
        .unwrap();
    let desired = 1 - probs
        .row(target)
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    Instance {
        g,
        model,
        target,
        desired,
    }
}

fn flipped(a: &Matrix, pairs: &[(usize, usize)]) -> Matrix {
    let mut out = a.clone();
    for &(i, j) in pairs {
        let v = 1.0 - out[(i, j)];
        out[(i, j)] = v;
        out[(j, i)] = v;
    }
    out
}

/// Exhaustive search over every 1- and 2-pair flip that leaves the target's
/// own row alone. Returns the smallest successful flip count.
pub fn brute_force(inst: &Instance) -> Option<usize> {
    let a = inst.g.adjacency();
    let n = a.rows();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != inst.target && j != inst.target)
        .collect();
    let hits = |edits: &[(usize, usize)]| {
        let pred = inst.model.predict(&flipped(&a, edits), inst.g.features()).unwrap();
        pred[inst.target] == inst.desired
    };
    if pairs.iter().any(|&p| hits(&[p])) {
        return Some(1);
    }
    for (x, &p) in pairs.iter().enumerate() {
        for &q in &pairs[x + 1..] {
            if hits(&[p, q]) {
                return Some(2);
            }
        }
    }
    None
}

/// Moves `fraction` of the edges to random absent pairs, keeping the count.
pub fn rewire(g: &Graph, fraction: f64, seed: u64) -> Graph {
    let mut rng = rng_from_seed(seed);
    let n = g.n_nodes();
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut rng);
    let k = ((edges.len() as f64 * fraction).ceil() as usize).max(1);
    let mut kept: Vec<Edge> = edges[k..].to_vec();
    let present = |e: &[Edge], i: usize, j: usize| e.iter().any(|x| (x.i, x.j) == (i, j) || (x.i, x.j) == (j, i));
    while kept.len() < edges.len() {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j && !present(&kept, i, j) {
            kept.push(Edge::new(i, j));
        }
    }
    g.with_edges(kept).unwrap()
}
