use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::semi::SemiGcnModel;
use super::spectral::SpectralModel;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::nn::{one_hot, Algorithm, Optimizer, Tape, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Coefficient of `½‖W‖²` on the feature-facing weights (`W_1` for the
    /// semi-GCN, `W^D` for the spectral model).
    pub l2: f64,
    pub algorithm: Algorithm,
    /// Learning rate of the spectral filter `θ`. One free weight per
    /// eigenvalue memorizes the train mask quickly, so it moves slower than
    /// the decoder by default.
    pub filter_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.01,
            l2: 5e-4,
            algorithm: Algorithm::Adam,
            filter_lr: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(mut out: impl Write, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Fraction of `idx` whose prediction equals the label (`None` when empty).
pub fn accuracy(pred: &[usize], labels: &[usize], idx: &[usize]) -> Option<f64> {
    if idx.is_empty() {
        return None;
    }
    let hits = idx.iter().filter(|&&i| pred[i] == labels[i]).count();
    Some(hits as f64 / idx.len() as f64)
}

fn accuracy_rows(pred_rows: &[usize], labels: &[usize], idx: &[usize]) -> Option<f64> {
    if idx.is_empty() {
        return None;
    }
    let hits = pred_rows.iter().zip(idx).filter(|(p, &i)| **p == labels[i]).count();
    Some(hits as f64 / idx.len() as f64)
}

fn l2_term(tape: &mut Tape, w: Var, coeff: f64) -> Result<Var> {
    let sq = tape.hadamard(w, w)?;
    let s = tape.sum(sq)?;
    tape.scale(s, 0.5 * coeff)
}

fn training_labels(g: &Graph) -> Result<(&[usize], &[usize])> {
    let labels = g.require_labels()?;
    let train = g.masks().train.as_slice();
    if train.is_empty() {
        return Err(Error::precondition("train mask is empty"));
    }
    Ok((labels, train))
}

/// Full-batch training of the spectral model on the train mask.
pub fn train_spectral(model: &mut SpectralModel, g: &Graph, cfg: &TrainConfig) -> Result<Vec<EpochRecord>> {
    train_spectral_observed(model, g, cfg, |_, _| Ok(()))
}

/// [`train_spectral`] calling `observe(model, Uᵀf)` after every update.
pub fn train_spectral_observed(
    model: &mut SpectralModel,
    g: &Graph,
    cfg: &TrainConfig,
    mut observe: impl FnMut(&SpectralModel, &Matrix) -> Result<()>,
) -> Result<Vec<EpochRecord>> {
    let (labels, train) = training_labels(g)?;
    let proj = Arc::new(model.project(g.features())?);
    let u_train = Arc::new(model.basis().vectors().select_rows(train));
    let targets = one_hot(
        &train.iter().map(|&i| labels[i]).collect::<Vec<_>>(),
        model.decoder.cols(),
    )?;
    let val = &g.masks().val;
    let mut opt = Optimizer::new(cfg.algorithm, cfg.lr);
    let mut filter_opt = Optimizer::new(cfg.algorithm, cfg.filter_lr);
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let filter = tape.param(model.filter.clone())?;
        let decoder = tape.param(model.decoder.clone())?;
        let u = tape.constant_shared(u_train.clone())?;
        let p = tape.constant_shared(proj.clone())?;
        let logits = SpectralModel::logits_on_tape(&mut tape, model.activation, filter, decoder, u, p)?;
        let probs = tape.softmax_rows(logits)?;
        let ce = tape.cross_entropy(probs, &targets)?;
        let ce = tape.scale(ce, 1.0 / train.len() as f64)?;
        let reg = l2_term(&mut tape, decoder, cfg.l2)?;
        let loss = tape.add(ce, reg)?;
        tape.backward(loss)?;

        let train_acc = accuracy_rows(&tape.value(logits).argmax_rows(), labels, train).unwrap_or(0.0);
        let train_loss = tape.scalar(loss);
        let (gf, gd) = (tape.grad_or_zeros(filter), tape.grad_or_zeros(decoder));
        filter_opt.step(&mut [&mut model.filter], &[&gf])?;
        opt.step(&mut [&mut model.decoder], &[&gd])?;
        observe(model, &proj)?;

        let val_acc = if val.is_empty() {
            None
        } else {
            let emb = model.embed_rows(&proj, val)?;
            accuracy_rows(&emb.matmul(&model.decoder)?.argmax_rows(), labels, val)
        };
        trace.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            train_acc,
            val_acc,
        });
    }
    Ok(trace)
}

/// Accuracy of the spectral model on a node subset.
pub fn evaluate_spectral(model: &SpectralModel, g: &Graph, idx: &[usize]) -> Result<Option<f64>> {
    let labels = g.require_labels()?;
    if idx.is_empty() {
        return Ok(None);
    }
    let proj = model.project(g.features())?;
    let pred = model.embed_rows(&proj, idx)?.matmul(&model.decoder)?.argmax_rows();
    Ok(accuracy_rows(&pred, labels, idx))
}

/// Full-batch training of the semi-GCN on the clean adjacency.
pub fn train_semi(model: &mut SemiGcnModel, g: &Graph, cfg: &TrainConfig) -> Result<Vec<EpochRecord>> {
    let (labels, train) = training_labels(g)?;
    let prop = Arc::new(model.propagation.apply(&g.adjacency())?);
    let features = Arc::new(g.features().clone());
    let targets = one_hot(&train.iter().map(|&i| labels[i]).collect::<Vec<_>>(), model.n_classes())?;
    let val = &g.masks().val;
    let mut opt = Optimizer::new(cfg.algorithm, cfg.lr);
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let w1 = tape.param(model.w1.clone())?;
        let w2 = tape.param(model.w2.clone())?;
        let p = tape.constant_shared(prop.clone())?;
        let f = tape.constant_shared(features.clone())?;
        let probs = SemiGcnModel::forward_on_tape(&mut tape, p, f, w1, w2)?;
        let train_probs = tape.select_rows(probs, train)?;
        let ce = tape.cross_entropy(train_probs, &targets)?;
        let ce = tape.scale(ce, 1.0 / train.len() as f64)?;
        let reg = l2_term(&mut tape, w1, cfg.l2)?;
        let loss = tape.add(ce, reg)?;
        tape.backward(loss)?;

        let pred = tape.value(probs).argmax_rows();
        let train_acc = accuracy(&pred, labels, train).unwrap_or(0.0);
        let train_loss = tape.scalar(loss);
        let (g1, g2) = (tape.grad_or_zeros(w1), tape.grad_or_zeros(w2));
        opt.step(&mut [&mut model.w1, &mut model.w2], &[&g1, &g2])?;

        let val_acc = if val.is_empty() {
            None
        } else {
            accuracy(&model.forward(&prop, &features)?.argmax_rows(), labels, val)
        };
        trace.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            train_acc,
            val_acc,
        });
    }
    Ok(trace)
}

/// Either trainable model, for callers that pick the architecture at run time.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Spectral(SpectralModel),
    Semi(SemiGcnModel),
}

impl AnyModel {
    pub fn params(&self) -> crate::nn::checkpoint::ParamMap {
        match self {
            AnyModel::Spectral(m) => m.params(),
            AnyModel::Semi(m) => m.params(),
        }
    }

    /// Predicted class for every node of `g`.
    pub fn predict(&self, g: &Graph) -> Result<Vec<usize>> {
        match self {
            AnyModel::Spectral(m) => Ok(m.forward(g.features())?.argmax_rows()),
            AnyModel::Semi(m) => m.predict(&g.adjacency(), g.features()),
        }
    }

    pub fn accuracy(&self, g: &Graph, idx: &[usize]) -> Result<Option<f64>> {
        match self {
            AnyModel::Spectral(m) => evaluate_spectral(m, g, idx),
            AnyModel::Semi(_) => Ok(accuracy(&self.predict(g)?, g.require_labels()?, idx)),
        }
    }
}

pub fn train_model(model: &mut AnyModel, g: &Graph, cfg: &TrainConfig) -> Result<Vec<EpochRecord>> {
    match model {
        AnyModel::Spectral(m) => train_spectral(m, g, cfg),
        AnyModel::Semi(m) => train_semi(m, g, cfg),
    }
}

/// Mean softmax cross-entropy of `probs` rows against `classes`.
pub fn mean_cross_entropy(probs: &Matrix, classes: &[usize]) -> f64 {
    let total: f64 = classes
        .iter()
        .enumerate()
        .map(|(i, &c)| -probs[(i, c)].max(crate::nn::PROB_FLOOR).ln())
        .sum();
    total / classes.len().max(1) as f64
}
