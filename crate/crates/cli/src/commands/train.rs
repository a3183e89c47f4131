use std::path::PathBuf;
use std::sync::Arc;

use anongcn::model::{train_model, write_jsonl, AnyModel, FilterInit, SemiGcnModel, SpectralModel, TrainConfig};
use anongcn::nn::Algorithm;
use anongcn::rng::substream;
use anongcn::{LaplacianKind, SpectralBasis};
use serde::{Deserialize, Serialize};

use crate::run::{load_graph, path_value, resolve, Failure, Outcome, Run};
use crate::Global;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Native graph file.
    #[arg(long)]
    #[serde(skip)]
    graph: PathBuf,

    /// `spectral` or `semi`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    l2: Option<f64>,
    /// Learning rate of the spectral filter.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_lr: Option<f64>,
    /// `adam` or `sgd`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    optimizer: Option<String>,
    /// Hidden width of the semi-GCN.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden: Option<usize>,
    /// `combinatorial` or `symmetric-normalized` (spectral model).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    laplacian: Option<String>,
    /// Initial filter `(1 - λ/λ_max)^k`; 0 starts from all ones.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    low_pass_order: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Spectral,
    Semi,
}

#[derive(Serialize, Deserialize)]
pub struct Params {
    pub model: ModelChoice,
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub filter_lr: f64,
    pub optimizer: Algorithm,
    pub hidden: usize,
    pub laplacian: LaplacianKind,
    pub low_pass_order: u32,
}

impl Default for Params {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            model: ModelChoice::Spectral,
            epochs: t.epochs,
            lr: t.lr,
            l2: t.l2,
            filter_lr: t.filter_lr,
            optimizer: t.algorithm,
            hidden: 16,
            laplacian: LaplacianKind::SymmetricNormalized,
            low_pass_order: 2,
        }
    }
}

#[derive(Serialize)]
struct Metrics {
    model: ModelChoice,
    epochs: usize,
    train_accuracy: Option<f64>,
    val_accuracy: Option<f64>,
    test_accuracy: Option<f64>,
}

pub fn run(global: &Global, args: Args) -> Outcome {
    let p: Params = resolve(Params::default(), global.config.section("train"), &args)?;
    let g = load_graph(&args.graph)?;
    let n_classes = match g.n_classes() {
        Some(c) if g.labels().is_some() => c,
        _ => return Err(Failure::usage("graph has no labels; training needs labels")),
    };
    let mut rng = substream(global.seed, "model-init");
    let mut model = match p.model {
        ModelChoice::Spectral => {
            let basis = Arc::new(SpectralBasis::of_graph(&g, p.laplacian)?);
            let init = match p.low_pass_order {
                0 => FilterInit::Ones,
                order => FilterInit::LowPass { order },
            };
            AnyModel::Spectral(SpectralModel::new(basis, g.n_features(), n_classes, init, &mut rng))
        }
        ModelChoice::Semi => AnyModel::Semi(SemiGcnModel::new(g.n_features(), p.hidden, n_classes, &mut rng)),
    };
    let cfg = TrainConfig {
        epochs: p.epochs,
        lr: p.lr,
        l2: p.l2,
        algorithm: p.optimizer,
        filter_lr: p.filter_lr,
    };
    let trace = train_model(&mut model, &g, &cfg)?;

    let mut run = Run::new(&global.out_dir, "train", global.seed)?;
    run.input("graph", path_value(&args.graph));
    run.write("model.json", model.to_json()?)?;
    let mut lines = Vec::new();
    write_jsonl(&mut lines, &trace)?;
    run.write("trace.jsonl", lines)?;
    let masks = g.masks();
    let metrics = Metrics {
        model: p.model,
        epochs: p.epochs,
        train_accuracy: model.accuracy(&g, &masks.train)?,
        val_accuracy: model.accuracy(&g, &masks.val)?,
        test_accuracy: model.accuracy(&g, &masks.test)?,
    };
    run.write_json("metrics.json", &metrics)?;
    match metrics.test_accuracy {
        Some(a) => println!("test accuracy {a:.4}"),
        None => println!("test accuracy n/a (empty test mask)"),
    }
    run.finish(&p)
}
