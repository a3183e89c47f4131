use std::path::PathBuf;

use anongcn::angcn::{train_angcn, AnGcnConfig, GeneratorOutput, SampleScope};
use anongcn::model::{write_jsonl, Activation};
use anongcn::LaplacianKind;
use serde::{Deserialize, Serialize};

use crate::run::{load_graph, path_value, resolve, Failure, Outcome, Run};
use crate::Global;

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    #[arg(long)]
    #[serde(skip)]
    graph: PathBuf,

    /// Outer epochs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    /// Discriminator and generator steps per outer epoch.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    inner_epochs: Option<usize>,
    /// Noise dimension fed to the generator.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_width: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden: Option<usize>,
    /// Probability of a decoy sample.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lr_d: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lr_g: Option<f64>,
    /// Standard deviation of each noise component.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    /// Minimum density where adjacent noise components meet.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eval_every: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    laplacian: Option<String>,
    /// `all` or `labeled`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    scope: Option<String>,
    /// `linear` or `tanh`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    generator_output: Option<String>,
    /// `relu`, `identity`, `sigmoid` or `tanh`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    disc_activation: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Params {
    epochs: usize,
    inner_epochs: usize,
    noise_width: usize,
    hidden: usize,
    q: f64,
    lr_d: f64,
    lr_g: f64,
    sigma: f64,
    epsilon: f64,
    eval_every: usize,
    laplacian: LaplacianKind,
    scope: SampleScope,
    generator_output: GeneratorOutput,
    disc_activation: Activation,
}

impl Default for Params {
    fn default() -> Self {
        let c = AnGcnConfig::default();
        Self {
            epochs: c.outer_epochs,
            inner_epochs: c.inner_epochs,
            noise_width: c.noise_width,
            hidden: c.hidden,
            q: c.q,
            lr_d: c.lr_d,
            lr_g: c.lr_g,
            sigma: c.sigma,
            epsilon: c.epsilon,
            eval_every: c.eval_every,
            laplacian: c.laplacian,
            scope: c.scope,
            generator_output: c.generator_output,
            disc_activation: c.disc_activation,
        }
    }
}

#[derive(Serialize)]
struct Metrics {
    epochs: usize,
    best_epoch: usize,
    best_acc_g: Option<f64>,
    final_acc_d: Option<f64>,
    final_acc_g: Option<f64>,
}

pub fn run(global: &Global, args: Args) -> Outcome {
    let p: Params = resolve(Params::default(), global.config.section("defend"), &args)?;
    if p.epochs == 0 {
        return Err(Failure::usage("--epochs must be at least 1; nothing would be trained"));
    }
    let g = load_graph(&args.graph)?;
    if g.labels().is_none() {
        return Err(Failure::usage("graph has no labels; training needs labels"));
    }
    let cfg = AnGcnConfig {
        noise_width: p.noise_width,
        hidden: p.hidden,
        q: p.q,
        lr_d: p.lr_d,
        lr_g: p.lr_g,
        inner_epochs: p.inner_epochs,
        outer_epochs: p.epochs,
        sigma: p.sigma,
        epsilon: p.epsilon,
        seed: global.seed,
        eval_every: p.eval_every,
        laplacian: p.laplacian,
        scope: p.scope,
        generator_output: p.generator_output,
        disc_activation: p.disc_activation,
        ..AnGcnConfig::default()
    };
    let trained = train_angcn(&g, &cfg)?;

    let mut run = Run::new(&global.out_dir, "defend", global.seed)?;
    run.input("graph", path_value(&args.graph));
    run.write("angcn.json", trained.best.to_json()?)?;
    let mut lines = Vec::new();
    write_jsonl(&mut lines, &trained.trace)?;
    run.write("trace.jsonl", lines)?;
    let last = trained.trace.iter().rev().find(|r| r.acc_g.is_some());
    let metrics = Metrics {
        epochs: p.epochs,
        best_epoch: trained.best_epoch,
        best_acc_g: trained.best_acc_g,
        final_acc_d: last.and_then(|r| r.acc_d),
        final_acc_g: last.and_then(|r| r.acc_g),
    };
    run.write_json("metrics.json", &metrics)?;
    match metrics.best_acc_g {
        Some(a) => println!("best acc_G {a:.4} at epoch {}", metrics.best_epoch),
        None => println!("best acc_G n/a (empty test mask)"),
    }
    run.finish(&p)
}
