use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use anongcn::model::{AnyModel, FilterInit, SpectralModel, TrainConfig};
use anongcn::rng::substream;
use anongcn::signal::{
    capture_trajectories, default_deltas, delete_node_experiment, dft, perturb_u_experiment, reconstruct,
    top_degree_nodes, Projection, DEFAULT_CV,
};
use anongcn::{LaplacianKind, SpectralBasis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::load_model;
use crate::run::{load_graph, path_value, resolve, Failure, Outcome, Run};
use crate::Global;

#[derive(clap::Subcommand, Debug)]
pub enum Kind {
    /// Node trajectories of a spectral training run and their spectra.
    Signal(SignalArgs),
    /// Embedding deviation when one node's eigenvector row is scaled by δ.
    PerturbU(PerturbArgs),
    /// Eigenvector change of neighbors when a node is deleted.
    DeleteNode(DeleteArgs),
}

pub fn run(global: &Global, kind: Kind) -> Outcome {
    match kind {
        Kind::Signal(a) => signal(global, a),
        Kind::PerturbU(a) => perturb_u(global, a),
        Kind::DeleteNode(a) => delete_node(global, a),
    }
}

/// Largest `|x̂ - x| / max|x|` over a set of trajectories.
fn round_trip_residual<'a>(trajectories: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let mut worst = 0.0f64;
    for x in trajectories {
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            continue;
        }
        let rec = reconstruct(&dft(x));
        for (a, b) in rec.standard.iter().zip(x) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    worst
}

#[derive(clap::Args, Debug, Serialize)]
pub struct SignalArgs {
    /// Graph to train on; omit to run the self-test alone.
    #[arg(long)]
    #[serde(skip)]
    graph: Option<PathBuf>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lr: Option<f64>,
    /// Embedding column tracked per node.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    coordinate: Option<usize>,

    /// DFT round trip on 200 random trajectories.
    #[arg(long)]
    #[serde(skip)]
    self_test: bool,
}

#[derive(Serialize, Deserialize)]
struct SignalParams {
    epochs: usize,
    lr: f64,
    coordinate: usize,
}

impl Default for SignalParams {
    fn default() -> Self {
        Self {
            epochs: 64,
            lr: TrainConfig::default().lr,
            coordinate: 0,
        }
    }
}

#[derive(Serialize)]
struct SignalMetrics {
    max_residual: Option<f64>,
    self_test_residual: Option<f64>,
}

const SELF_TEST_TOLERANCE: f64 = 1e-9;

fn signal(global: &Global, args: SignalArgs) -> Outcome {
    let p: SignalParams = resolve(SignalParams::default(), global.config.section("signal"), &args)?;
    if args.graph.is_none() && !args.self_test {
        return Err(Failure::usage("give --graph, --self-test, or both"));
    }
    let mut run = Run::new(&global.out_dir, "experiment signal", global.seed)?;
    let mut metrics = SignalMetrics {
        max_residual: None,
        self_test_residual: None,
    };

    if let Some(path) = &args.graph {
        let g = load_graph(path)?;
        let n_classes = g
            .n_classes()
            .ok_or_else(|| Failure::usage("graph has no labels; training needs labels"))?;
        let basis = Arc::new(SpectralBasis::of_graph(&g, LaplacianKind::SymmetricNormalized)?);
        let mut rng = substream(global.seed, "model-init");
        let mut model = SpectralModel::new(basis, g.n_features(), n_classes, FilterInit::default(), &mut rng);
        let cfg = TrainConfig {
            epochs: p.epochs,
            lr: p.lr,
            ..TrainConfig::default()
        };
        let trajectories = capture_trajectories(&mut model, &g, &cfg, Projection::Coordinate(p.coordinate))?;
        run.input("graph", path_value(path));

        let mut traj_csv = String::from("node,epoch,value\n");
        let mut spec_csv = String::from("node,nu,re,im,amplitude,phase\n");
        for t in &trajectories {
            for (e, v) in t.values.iter().enumerate() {
                writeln!(traj_csv, "{},{e},{v}", t.node).unwrap();
            }
            let s = dft(&t.values);
            let (amp, phase) = (s.amplitude(), s.phase());
            for (nu, c) in s.coeffs.iter().enumerate() {
                writeln!(spec_csv, "{},{nu},{},{},{},{}", t.node, c.re, c.im, amp[nu], phase[nu]).unwrap();
            }
        }
        run.write("trajectories.csv", traj_csv)?;
        run.write("spectrum.csv", spec_csv)?;
        let r = round_trip_residual(trajectories.iter().map(|t| t.values.as_slice()));
        println!("trajectory round trip max residual {r:.3e}");
        metrics.max_residual = Some(r);
    }

    if args.self_test {
        let mut rng = substream(global.seed, "signal-self-test");
        let random: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let e = rng.random_range(1..=64);
                (0..e).map(|_| rng.random_range(-100.0..100.0)).collect()
            })
            .collect();
        let r = round_trip_residual(random.iter().map(Vec::as_slice));
        println!("self-test max residual {r:.3e}");
        metrics.self_test_residual = Some(r);
    }

    run.write_json("metrics.json", &metrics)?;
    run.finish(&p)?;
    match metrics.self_test_residual {
        Some(r) if r >= SELF_TEST_TOLERANCE => Err(Failure::Internal(anyhow::anyhow!(
            "self-test residual {r:.3e} exceeds {SELF_TEST_TOLERANCE:e}"
        ))),
        _ => Ok(()),
    }
}

#[derive(clap::Args, Debug, Serialize)]
pub struct PerturbArgs {
    #[arg(long)]
    #[serde(skip)]
    graph: PathBuf,

    /// Spectral checkpoint written by `train --model spectral`.
    #[arg(long)]
    #[serde(skip)]
    model: PathBuf,

    /// Perturbed node (default: highest degree).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    node: Option<usize>,
    /// Neighbors tracked alongside the node.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<usize>,
    /// Scale factors (comma-separated; default 0.99, 0.98, ..., 0.50).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    deltas: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PerturbParams {
    node: Option<usize>,
    cv: usize,
    deltas: Vec<f64>,
}

impl Default for PerturbParams {
    fn default() -> Self {
        Self {
            node: None,
            cv: DEFAULT_CV,
            deltas: default_deltas(),
        }
    }
}

fn perturb_u(global: &Global, args: PerturbArgs) -> Outcome {
    let p: PerturbParams = resolve(PerturbParams::default(), global.config.section("perturb-u"), &args)?;
    let g = load_graph(&args.graph)?;
    let model = match load_model(&args.model, &g)? {
        AnyModel::Spectral(m) => m,
        AnyModel::Semi(_) => return Err(Failure::usage("perturb-u needs a spectral checkpoint")),
    };
    let v = match p.node {
        Some(v) => v,
        None => *top_degree_nodes(&g, 1)
            .first()
            .ok_or_else(|| Failure::usage("graph has no nodes"))?,
    };
    let nb = g.neighbors();
    let neighbors = nb
        .get(v)
        .ok_or_else(|| Failure::usage(format!("node {v} is out of range for {} nodes", g.n_nodes())))?;
    let table = perturb_u_experiment(
        model.basis(),
        model.filter.row(0),
        g.features(),
        neighbors,
        v,
        p.cv,
        &p.deltas,
    )?;

    let mut run = Run::new(&global.out_dir, "experiment perturb-u", global.seed)?;
    run.input("graph", path_value(&args.graph));
    run.input("model", path_value(&args.model));
    let mut long = Vec::new();
    table.write_csv(&mut long)?;
    run.write("deviation.csv", long)?;
    let mut wide = Vec::new();
    table.write_wide_csv(&mut wide)?;
    run.write("deviation_wide.csv", wide)?;
    run.write_json("deviation.json", &table)?;
    println!(
        "perturb-u: node {v}, {} neighbors, {} deltas",
        table.targets.len() - 1,
        table.deltas.len()
    );
    run.finish(&PerturbParams { node: Some(v), ..p })
}

#[derive(clap::Args, Debug, Serialize)]
pub struct DeleteArgs {
    #[arg(long)]
    #[serde(skip)]
    graph: PathBuf,

    /// Nodes to delete (comma-separated; default the `--top` highest-degree).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    taus: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    top: Option<usize>,
    /// Neighbor orders (comma-separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    orders: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    laplacian: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct DeleteParams {
    taus: Option<Vec<usize>>,
    top: usize,
    orders: Vec<usize>,
    laplacian: LaplacianKind,
}

impl Default for DeleteParams {
    fn default() -> Self {
        Self {
            taus: None,
            top: 5,
            orders: vec![1, 2, 3],
            laplacian: LaplacianKind::SymmetricNormalized,
        }
    }
}

fn delete_node(global: &Global, args: DeleteArgs) -> Outcome {
    let p: DeleteParams = resolve(DeleteParams::default(), global.config.section("delete-node"), &args)?;
    let g = load_graph(&args.graph)?;
    let taus = p.taus.clone().unwrap_or_else(|| top_degree_nodes(&g, p.top));
    let report = delete_node_experiment(&g, &taus, &p.orders, p.laplacian)?;

    let mut run = Run::new(&global.out_dir, "experiment delete-node", global.seed)?;
    run.input("graph", path_value(&args.graph));
    let mut changes = Vec::new();
    report.write_csv(&mut changes)?;
    run.write("changes.csv", changes)?;
    let mut summary = Vec::new();
    report.write_summary_csv(&mut summary)?;
    run.write("summary.csv", summary)?;
    let means = report.mean_abs_c();
    run.write_json(
        "metrics.json",
        &serde_json::json!({ "orders": p.orders, "mean_abs_c": means }),
    )?;
    let shown: Vec<String> = p
        .orders
        .iter()
        .zip(&means)
        .map(|(o, m)| m.map_or_else(|| format!("{o}: -"), |v| format!("{o}: {v:.4}")))
        .collect();
    println!("delete-node: mean |C| by order {}", shown.join(", "));
    run.finish(&DeleteParams { taus: Some(taus), ..p })
}
