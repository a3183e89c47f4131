use std::path::PathBuf;

use anongcn::graph::{load_cora, synth_graph, SplitSizes, SynthSpec};
use serde::{Deserialize, Serialize};

use super::features_csv;
use crate::run::{path_value, resolve, Failure, Outcome, Run};
use crate::Global;

#[derive(clap::Args, Debug, Serialize)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["cora", "synth"])))]
pub struct Args {
    /// Cora `content` and `cites` files.
    #[arg(long, num_args = 2, value_names = ["CONTENT", "CITES"])]
    #[serde(skip)]
    cora: Option<Vec<PathBuf>>,

    /// `ring:N`, `barbell:K` or `sbm:SIZES:P_IN:P_OUT:SEED[:NOISE]`.
    #[arg(long)]
    #[serde(skip)]
    synth: Option<String>,

    /// Graph file to write (default `<out-dir>/graph.json`).
    #[arg(short, long)]
    #[serde(skip)]
    output: Option<PathBuf>,

    /// Cora split: labeled nodes per class.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    train_per_class: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    val: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct Params {
    train_per_class: usize,
    val: usize,
    test: usize,
}

impl Default for Params {
    fn default() -> Self {
        let s = SplitSizes::default();
        Self {
            train_per_class: s.train_per_class,
            val: s.val,
            test: s.test,
        }
    }
}

#[derive(Serialize)]
struct Report {
    source: String,
    n_nodes: usize,
    n_edges: usize,
    n_features: usize,
    n_classes: Option<usize>,
    skipped_cites: usize,
    duplicate_cites: usize,
}

pub fn run(global: &Global, args: Args) -> Outcome {
    let params: Params = resolve(Params::default(), global.config.section("ingest"), &args)?;
    let mut run = Run::new(&global.out_dir, "ingest", global.seed)?;
    let (graph, source, skipped_cites, duplicate_cites) = if let Some(paths) = &args.cora {
        let [content, cites] = paths.as_slice() else {
            return Err(Failure::usage("--cora takes a content file and a cites file"));
        };
        for p in [content, cites] {
            if !p.is_file() {
                return Err(Failure::usage(format!("cannot read {}", p.display())));
            }
        }
        run.input("content", path_value(content));
        run.input("cites", path_value(cites));
        let split = SplitSizes {
            train_per_class: params.train_per_class,
            val: params.val,
            test: params.test,
        };
        let load = load_cora(content, cites, split)?;
        (load.graph, "cora".to_string(), load.skipped_cites, load.duplicate_cites)
    } else {
        let text = args.synth.as_deref().expect("clap enforces one source");
        let spec: SynthSpec = text.parse()?;
        run.input("synth", spec.to_string());
        (synth_graph(&spec)?, spec.to_string(), 0, 0)
    };
    let report = Report {
        source,
        n_nodes: graph.n_nodes(),
        n_edges: graph.edges().len(),
        n_features: graph.n_features(),
        n_classes: graph.n_classes(),
        skipped_cites,
        duplicate_cites,
    };

    let text = serde_json::to_string(&graph.to_json())?;
    match &args.output {
        Some(path) => run.write_to(path, text)?,
        None => run.write("graph.json", text)?,
    }
    run.write("features.csv", features_csv(graph.features()))?;
    if let Some(labels) = graph.labels() {
        run.write_json("labels.json", &labels)?;
    }
    run.write_json("ingest_report.json", &report)?;
    println!(
        "ingested {} nodes, {} edges, {} features",
        report.n_nodes, report.n_edges, report.n_features
    );
    run.finish(&params)
}
