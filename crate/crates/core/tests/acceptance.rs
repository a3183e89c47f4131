//! One line per acceptance criterion. Cora criteria run only when
//! `CORA_DIR` names a directory holding `cora.content` and `cora.cites`.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anongcn::angcn::{infer_anonymous, staggered_spec, train_angcn, AnGcnConfig};
use anongcn::gepa::{run_attack, AttackSpec};
use anongcn::graph::{load_cora, SplitSizes};
use anongcn::graph::{synth_graph, SbmSpec, SynthSpec};
use anongcn::model::{evaluate_spectral, train_spectral, write_jsonl, FilterInit, SpectralModel, TrainConfig};
use anongcn::rng::{rng_from_seed, substream};
use anongcn::signal::{dft, initial_signal, reconstruct};
use anongcn::{Graph, LaplacianKind, Result, SpectralBasis};
use num_complex::Complex64;
use rand::Rng as _;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn cora() -> Result<Option<Graph>> {
    let Some(dir) = std::env::var_os("CORA_DIR").map(PathBuf::from) else {
        return Ok(None);
    };
    let load = load_cora(dir.join("cora.content"), dir.join("cora.cites"), SplitSizes::default())?;
    Ok(Some(load.graph))
}

fn baseline_accuracy() -> Result<Outcome> {
    let Some(g) = cora()? else {
        return Ok(Outcome::Skip("CORA_DIR unset".into()));
    };
    let basis = Arc::new(SpectralBasis::of_graph(&g, LaplacianKind::SymmetricNormalized)?);
    let mut m = SpectralModel::new(
        basis,
        g.n_features(),
        g.n_classes().unwrap_or(0),
        FilterInit::default(),
        &mut substream(0, "model-init"),
    );
    train_spectral(&mut m, &g, &TrainConfig::default())?;
    let acc = evaluate_spectral(&m, &g, &g.masks().test)?.unwrap_or(0.0);
    Ok(verdict(acc >= 0.74, format!("test accuracy {acc:.4}")))
}

fn angcn_accuracy() -> Result<Outcome> {
    let Some(g) = cora()? else {
        return Ok(Outcome::Skip("CORA_DIR unset".into()));
    };
    let mut best = 0.0f64;
    for seed in 0..3 {
        let cfg = AnGcnConfig {
            seed,
            eval_every: 25,
            ..Default::default()
        };
        let r = train_angcn(&g, &cfg)?;
        best = best.max(r.best_acc_g.unwrap_or(0.0));
    }
    Ok(verdict(best >= 0.75, format!("best-of-three acc_G {best:.4}")))
}

fn attack_efficacy() -> Result<Outcome> {
    let (mut flipped, mut min_retention, mut rows_held) = (0, 1.0f64, true);
    for seed in 0..10 {
        let g = synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![50, 50], 0.1, 0.02, seed)))?;
        let m = common::trained_semi(&g, seed);
        let pred = m.predict(&g.adjacency(), g.features())?;
        let target = g.masks().test[0];
        let r = run_attack(&m, &g, &AttackSpec::single(target, 1 - pred[target]))?;
        if r.all_succeeded() {
            flipped += 1;
        }
        min_retention = min_retention.min(r.retention);
        let a = g.adjacency();
        rows_held &= r.a_hat.row(target) == a.row(target) && r.a_hat.column(target) == a.column(target);
    }
    Ok(verdict(
        flipped >= 9 && min_retention >= 0.95 && rows_held,
        format!("{flipped}/10 flipped, min retention {min_retention:.3}, target rows held {rows_held}"),
    ))
}

fn oracle_equivalence() -> Result<Outcome> {
    let (mut solvable, mut agreed) = (0, 0);
    for seed in 0..25 {
        let inst = common::small_instance(seed);
        if common::brute_force(&inst).is_none() {
            continue;
        }
        solvable += 1;
        let r = run_attack(&inst.model, &inst.g, &AttackSpec::single(inst.target, inst.desired))?;
        if r.all_succeeded() {
            agreed += 1;
        }
    }
    Ok(verdict(
        solvable > 0 && agreed == solvable,
        format!("{agreed}/{solvable} oracle-solvable instances attacked"),
    ))
}

fn structural_anonymity() -> Result<Outcome> {
    let g = synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![10, 10], 0.5, 0.05, 4)))?;
    let r = train_angcn(
        &g,
        &AnGcnConfig {
            outer_epochs: 200,
            seed: 4,
            ..Default::default()
        },
    )?;
    let all: Vec<usize> = (0..g.n_nodes()).collect();
    let clean = infer_anonymous(&r.best, g.features(), &all, 11)?;
    let rewired = common::rewire(&g, 0.1, 5);
    let moved = rewired.edges() != g.edges();
    let after = infer_anonymous(&r.best, rewired.features(), &all, 11)?;
    Ok(verdict(
        moved && after == clean,
        format!("edges moved {moved}, labels identical {}", after == clean),
    ))
}

fn signal_invariants() -> Result<Outcome> {
    let mut rng = rng_from_seed(6);
    let (mut worst_round, mut worst_conj) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let e = rng.random_range(1..=64);
        let x: Vec<f64> = (0..e).map(|_| rng.random_range(-100.0..100.0)).collect();
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let s = dft(&x);
        let rec = reconstruct(&s);
        for (a, b) in rec.standard.iter().zip(&x) {
            worst_round = worst_round.max((a - b).abs() / scale);
        }
        for nu in 1..e {
            let d: Complex64 = s.coeffs[e - nu] - s.coeffs[nu].conj();
            worst_conj = worst_conj.max(d.norm() / (1.0 + s.coeffs[nu].norm()));
        }
    }
    let row: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
    let theta0 = 0.37;
    let init_err = (initial_signal(theta0, &row) - 2.0 * theta0 * row.iter().sum::<f64>()).abs();
    Ok(verdict(
        worst_round < 1e-9 && worst_conj < 1e-10 && init_err < 1e-12,
        format!("round trip {worst_round:.1e}, conjugate {worst_conj:.1e}, initial {init_err:.1e}"),
    ))
}

fn staggered_gaussian() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for n in [2usize, 5, 101] {
        let spec = staggered_spec(n, 1.0, anongcn::angcn::default_epsilon())?;
        let eps = spec.epsilon;
        for v in 1..=n {
            let mu = spec.mean(v)?;
            worst = worst.max((spec.pdf(mu + spec.r, v)? - eps).abs());
            worst = worst.max((spec.pdf(mu - spec.r, v)? - eps).abs());
            if v < n {
                worst = worst.max((mu + spec.r - (spec.mean(v + 1)? - spec.r)).abs());
            }
        }
    }
    Ok(verdict(worst < 1e-12, format!("worst residual {worst:.1e}")))
}

fn gradient_integrity() -> Result<Outcome> {
    let suite = common::gradient_suite()?;
    let failed: Vec<&str> = suite
        .iter()
        .filter(|(_, r)| r.is_nan() || *r > 1.0)
        .map(|(n, _)| n.as_str())
        .collect();
    let worst = suite.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    Ok(verdict(
        failed.is_empty(),
        format!(
            "{} checks, worst tolerance ratio {worst:.2e}, failing {failed:?}",
            suite.len()
        ),
    ))
}

fn localization() -> Result<Outcome> {
    let (own, neighbor) = common::perturb_desk_deviations()?;
    let means = common::delete_desk_means()?;
    let ratio = own / neighbor;
    let decreasing = means[0] > means[1] && means[1] > means[2];
    Ok(verdict(
        ratio >= 5.0 && decreasing,
        format!("perturb-u ratio {ratio:.2}, mean |C| by order {means:.4?}"),
    ))
}

/// Every metric file the library writes, as bytes.
fn metric_files(seed: u64) -> Result<Vec<Vec<u8>>> {
    let g = synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![10, 10], 0.5, 0.05, seed)))?;
    let basis = Arc::new(SpectralBasis::of_graph(&g, LaplacianKind::SymmetricNormalized)?);
    let mut m = SpectralModel::new(
        basis,
        g.n_features(),
        2,
        FilterInit::default(),
        &mut substream(seed, "model-init"),
    );
    let mut spectral = Vec::new();
    write_jsonl(&mut spectral, &train_spectral(&mut m, &g, &TrainConfig::default())?)?;

    let semi = common::trained_semi(&g, seed);
    let pred = semi.predict(&g.adjacency(), g.features())?;
    let t = g.masks().test[0];
    let attack = serde_json::to_vec(&run_attack(&semi, &g, &AttackSpec::single(t, 1 - pred[t]))?.report())?;

    let r = train_angcn(
        &g,
        &AnGcnConfig {
            outer_epochs: 50,
            seed,
            ..Default::default()
        },
    )?;
    let mut trace = Vec::new();
    write_jsonl(&mut trace, &r.trace)?;
    let checkpoint = r.best.to_json()?.into_bytes();

    let taus = anongcn::signal::top_degree_nodes(&g, 2);
    let report = anongcn::signal::delete_node_experiment(&g, &taus, &[1, 2], LaplacianKind::SymmetricNormalized)?;
    let mut delete = Vec::new();
    report.write_csv(&mut delete)?;
    Ok(vec![spectral, attack, trace, checkpoint, delete])
}

fn determinism() -> Result<Outcome> {
    let first = metric_files(8)?;
    let second = metric_files(8)?;
    let same = first == second;
    Ok(verdict(
        same,
        format!("{} metric files byte-identical {same}", first.len()),
    ))
}

fn main() -> ExitCode {
    type Check = fn() -> Result<Outcome>;
    let criteria: [(&str, Check); 10] = [
        ("baseline accuracy", baseline_accuracy),
        ("AN-GCN accuracy", angcn_accuracy),
        ("attack efficacy", attack_efficacy),
        ("attack oracle equivalence", oracle_equivalence),
        ("structural anonymity", structural_anonymity),
        ("signal-model invariants", signal_invariants),
        ("staggered Gaussian", staggered_gaussian),
        ("gradient integrity", gradient_integrity),
        ("localization experiments", localization),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::Fail(format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {:2} {tag} {name}: {detail} ({secs:.1}s)", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
