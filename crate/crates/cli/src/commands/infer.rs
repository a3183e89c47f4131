use std::path::PathBuf;

use anongcn::angcn::{infer_anonymous, AnGcn};
use anongcn::model::accuracy;
use serde::{Deserialize, Serialize};

use super::read_features_csv;
use crate::run::{path_value, read_input, resolve, Failure, Outcome, Run};
use crate::Global;

/// Edge-free inference. There is deliberately no flag for edges or a graph.
#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// AN-GCN checkpoint written by `defend`.
    #[arg(long)]
    #[serde(skip)]
    checkpoint: PathBuf,

    /// Node features, one CSV row per node.
    #[arg(long)]
    #[serde(skip)]
    features: PathBuf,

    /// JSON array of labels; when given, accuracy over the indices is reported.
    #[arg(long)]
    #[serde(skip)]
    labels: Option<PathBuf>,

    /// Nodes to classify (comma-separated; default all).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    indices: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize, Default)]
struct Params {
    indices: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct Predictions<'a> {
    indices: &'a [usize],
    labels: &'a [usize],
}

#[derive(Serialize)]
struct Metrics {
    n: usize,
    accuracy: Option<f64>,
}

pub fn run(global: &Global, args: Args) -> Outcome {
    let p: Params = resolve(Params::default(), global.config.section("infer"), &args)?;
    let model = AnGcn::from_json(&read_input(&args.checkpoint)?)?;
    let features = read_features_csv(&args.features)?;
    let n = model.noise.n;
    if features.rows() != n {
        return Err(Failure::usage(format!(
            "{} has {} rows; the checkpoint was trained on {n} nodes",
            args.features.display(),
            features.rows()
        )));
    }
    let indices = p.indices.clone().unwrap_or_else(|| (0..n).collect());
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Failure::usage(format!("index {bad} is out of range for {n} nodes")));
    }
    let truth: Option<Vec<usize>> = match &args.labels {
        None => None,
        Some(path) => {
            let v: Vec<usize> = serde_json::from_str(&read_input(path)?)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            if v.len() != n {
                return Err(Failure::usage(format!(
                    "{}: expected {n} labels, found {}",
                    path.display(),
                    v.len()
                )));
            }
            Some(v)
        }
    };
    let pred = infer_anonymous(&model, &features, &indices, global.seed)?;

    let mut run = Run::new(&global.out_dir, "infer", global.seed)?;
    run.input("checkpoint", path_value(&args.checkpoint));
    run.input("features", path_value(&args.features));
    if let Some(path) = &args.labels {
        run.input("labels", path_value(path));
    }
    run.write_json(
        "predictions.json",
        &Predictions {
            indices: &indices,
            labels: &pred,
        },
    )?;
    // `pred` is aligned with `indices`, so score it against the gathered labels.
    let accuracy = truth.map(|t| {
        let gathered: Vec<usize> = indices.iter().map(|&i| t[i]).collect();
        let all: Vec<usize> = (0..indices.len()).collect();
        accuracy(&pred, &gathered, &all)
    });
    let metrics = Metrics {
        n: indices.len(),
        accuracy: accuracy.flatten(),
    };
    run.write_json("metrics.json", &metrics)?;
    match metrics.accuracy {
        Some(a) => println!("accuracy {a:.4} over {} nodes", metrics.n),
        None => println!("classified {} nodes", metrics.n),
    }
    run.finish(&p)
}
