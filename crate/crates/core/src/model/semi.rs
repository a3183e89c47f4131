use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::checkpoint::{take_param, ParamMap};
use crate::nn::{glorot, renormalize, softmax_rows, Tape, Var};
use crate::rng::Rng;

/// How an adjacency matrix becomes the propagation matrix `P`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    /// `P = Â` as given.
    Raw,
    /// `P = D^{-1/2} (Â + I) D^{-1/2}`.
    #[default]
    Renormalized,
}

impl Propagation {
    pub fn apply(self, adjacency: &Matrix) -> Result<Matrix> {
        match self {
            Propagation::Raw => Ok(adjacency.clone()),
            Propagation::Renormalized => renormalize(adjacency),
        }
    }

    pub fn on_tape(self, tape: &mut Tape, adjacency: Var) -> Result<Var> {
        match self {
            Propagation::Raw => Ok(adjacency),
            Propagation::Renormalized => tape.sym_normalize(adjacency),
        }
    }
}

/// Two-layer semi-supervised GCN: `softmax(P relu(P f W_1) W_2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemiGcnModel {
    pub w1: Matrix,
    pub w2: Matrix,
    pub propagation: Propagation,
}

impl SemiGcnModel {
    pub fn new(n_features: usize, hidden: usize, n_classes: usize, rng: &mut Rng) -> Self {
        Self {
            w1: glorot(n_features, hidden, rng),
            w2: glorot(hidden, n_classes, rng),
            propagation: Propagation::Renormalized,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.w2.cols()
    }

    fn check(&self, p: &Matrix, f: &Matrix) -> Result<()> {
        if p.rows() != p.cols() || p.cols() != f.rows() {
            return Err(Error::Shape {
                op: "forward_semi",
                left: p.shape(),
                right: f.shape(),
            });
        }
        if f.cols() != self.w1.rows() || self.w1.cols() != self.w2.rows() {
            return Err(Error::Shape {
                op: "forward_semi",
                left: f.shape(),
                right: self.w1.shape(),
            });
        }
        Ok(())
    }

    /// Class probabilities for an explicit propagation matrix.
    pub fn forward(&self, p: &Matrix, f: &Matrix) -> Result<Matrix> {
        self.check(p, f)?;
        let hidden = p.matmul(&f.matmul(&self.w1)?)?.map(|v| v.max(0.0));
        let logits = p.matmul(&hidden.matmul(&self.w2)?)?;
        Ok(softmax_rows(&logits))
    }

    /// Class probabilities on an adjacency, using the model's propagation.
    pub fn predict_proba(&self, adjacency: &Matrix, f: &Matrix) -> Result<Matrix> {
        self.forward(&self.propagation.apply(adjacency)?, f)
    }

    pub fn predict(&self, adjacency: &Matrix, f: &Matrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(adjacency, f)?.argmax_rows())
    }

    /// Forward pass on a tape with `P`, `f`, `W_1`, `W_2` as variables.
    pub fn forward_on_tape(tape: &mut Tape, p: Var, f: Var, w1: Var, w2: Var) -> Result<Var> {
        let fw = tape.matmul(f, w1)?;
        let h = tape.matmul(p, fw)?;
        let h = tape.relu(h)?;
        let hw = tape.matmul(h, w2)?;
        let logits = tape.matmul(p, hw)?;
        tape.softmax_rows(logits)
    }

    pub fn params(&self) -> ParamMap {
        ParamMap::from([("w1".to_string(), self.w1.clone()), ("w2".to_string(), self.w2.clone())])
    }

    pub fn from_params(mut params: ParamMap, propagation: Propagation) -> Result<Self> {
        let w1 = take_param(&mut params, "w1")?;
        let w2 = take_param(&mut params, "w2")?;
        if w1.cols() != w2.rows() {
            return Err(Error::Checkpoint(format!(
                "w1 {:?} does not chain into w2 {:?}",
                w1.shape(),
                w2.shape()
            )));
        }
        Ok(Self { w1, w2, propagation })
    }
}
