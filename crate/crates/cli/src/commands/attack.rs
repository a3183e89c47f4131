use std::path::PathBuf;

use anongcn::gepa::{degree_distribution_report, extract_victim_graph, run_attack, AttackMode, AttackSpec};
use anongcn::model::{accuracy, AnyModel, Propagation};
use serde::{Deserialize, Serialize};

use super::load_model;
use crate::run::{load_graph, path_value, resolve, Failure, Outcome, Run};
use crate::Global;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    #[arg(long)]
    #[serde(skip)]
    graph: PathBuf,

    /// Semi-GCN checkpoint written by `train --model semi`.
    #[arg(long)]
    #[serde(skip)]
    model: PathBuf,

    /// Target nodes (comma-separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    targets: Option<Vec<usize>>,
    /// Desired class per target (comma-separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    desired: Option<Vec<usize>>,
    /// `single` or `multi`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    /// Weight of the target-row penalty in multi mode.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    /// Weight of the concealment regularizer.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    reg_weight: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lr: Option<f64>,
    /// Maximum edge flips of the greedy repair.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    flip_budget: Option<usize>,
    /// Candidate pairs the greedy repair considers.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    candidate_pool: Option<usize>,
    /// Surrogate propagation, `raw` or `renormalized` (default: the model's).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    surrogate: Option<String>,
    /// Feed the hard 0/1 matrix forward during optimization.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    binarize_in_loop: bool,

    /// Verify that every target row of the emitted adjacency is unchanged.
    #[arg(long)]
    #[serde(skip)]
    freeze_check: bool,
}

#[derive(Serialize, Deserialize)]
struct Params {
    targets: Vec<usize>,
    desired: Vec<usize>,
    mode: AttackMode,
    theta: f64,
    reg_weight: f64,
    epochs: usize,
    lr: f64,
    flip_budget: usize,
    candidate_pool: usize,
    surrogate: Option<Propagation>,
    binarize_in_loop: bool,
}

impl Default for Params {
    fn default() -> Self {
        let s = AttackSpec::single(0, 0);
        Self {
            targets: Vec::new(),
            desired: Vec::new(),
            mode: s.mode,
            theta: s.theta,
            reg_weight: s.reg_weight,
            epochs: s.epochs,
            lr: s.lr,
            flip_budget: s.flip_budget,
            candidate_pool: s.candidate_pool,
            surrogate: s.surrogate_propagation,
            binarize_in_loop: s.binarize_in_loop,
        }
    }
}

#[derive(Serialize)]
struct Metrics {
    targets: usize,
    success_rate: f64,
    perturbation_count: usize,
    retention: f64,
    clean_accuracy: Option<f64>,
    attacked_accuracy: Option<f64>,
}

pub fn run(global: &Global, args: Args) -> Outcome {
    let p: Params = resolve(Params::default(), global.config.section("attack"), &args)?;
    if p.targets.is_empty() {
        return Err(Failure::usage("--targets is required"));
    }
    let g = load_graph(&args.graph)?;
    let model = match load_model(&args.model, &g)? {
        AnyModel::Semi(m) => m,
        AnyModel::Spectral(_) => return Err(Failure::usage("the attack targets a semi-GCN checkpoint")),
    };
    let clean_pred = model.predict(&g.adjacency(), g.features())?;
    for (&t, &d) in p.targets.iter().zip(&p.desired) {
        if clean_pred.get(t) == Some(&d) {
            return Err(Failure::usage(format!(
                "node {t} is already classified as {d}; nothing to attack"
            )));
        }
    }
    let spec = AttackSpec {
        targets: p.targets.clone(),
        desired_labels: p.desired.clone(),
        mode: p.mode,
        theta: p.theta,
        reg_weight: p.reg_weight,
        epochs: p.epochs,
        lr: p.lr,
        seed: global.seed,
        surrogate_propagation: p.surrogate,
        binarize_in_loop: p.binarize_in_loop,
        flip_budget: p.flip_budget,
        candidate_pool: p.candidate_pool,
    };
    let result = run_attack(&model, &g, &spec)?;
    let victim = extract_victim_graph(&result, &g)?;

    let mut run = Run::new(&global.out_dir, "attack", global.seed)?;
    run.input("graph", path_value(&args.graph));
    run.input("model", path_value(&args.model));
    run.write_json("attack.json", &result.report())?;
    run.write("victim.json", serde_json::to_string(&victim.to_json())?)?;
    run.write_json("degree_report.json", &degree_distribution_report(&g, &victim)?)?;

    let test = &g.masks().test;
    let labels = g.labels();
    let attacked_pred = model.predict(&result.a_hat, g.features())?;
    let score = |pred: &[usize]| labels.and_then(|l| accuracy(pred, l, test));
    let hits = result.success.iter().filter(|&&s| s).count();
    let metrics = Metrics {
        targets: result.targets.len(),
        success_rate: hits as f64 / result.targets.len() as f64,
        perturbation_count: result.perturbation_count,
        retention: result.retention,
        clean_accuracy: score(&clean_pred),
        attacked_accuracy: score(&attacked_pred),
    };
    run.write_json("metrics.json", &metrics)?;
    println!(
        "attack: {hits}/{} targets flipped with {} edge edits, retention {:.4}",
        metrics.targets, metrics.perturbation_count, metrics.retention
    );

    if args.freeze_check {
        let a = g.adjacency();
        let held = result
            .targets
            .iter()
            .all(|&t| result.a_hat.row(t) == a.row(t) && result.a_hat.column(t) == a.column(t));
        if !held {
            return Err(Failure::Internal(anyhow::anyhow!(
                "a target row of the emitted adjacency changed"
            )));
        }
        println!("freeze check: target rows unchanged");
    }
    run.finish(&p)
}
