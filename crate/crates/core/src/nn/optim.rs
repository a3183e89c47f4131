use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sgd,
    Adam,
}

/// SGD or Adam over an ordered list of parameter slots. Slot `i` of every
/// [`Optimizer::step`] call must refer to the same parameter.
#[derive(Clone, Debug)]
pub struct Optimizer {
    algorithm: Algorithm,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    steps: u64,
    moments: Vec<(Matrix, Matrix)>,
}

impl Optimizer {
    pub fn new(algorithm: Algorithm, lr: f64) -> Self {
        Self {
            algorithm,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            moments: Vec::new(),
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self::new(Algorithm::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(Algorithm::Adam, lr)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Shape {
                    op: "optimizer_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }
        if self.algorithm == Algorithm::Adam {
            if self.moments.is_empty() {
                self.moments = params
                    .iter()
                    .map(|p| (Matrix::zeros(p.rows(), p.cols()), Matrix::zeros(p.rows(), p.cols())))
                    .collect();
            } else if self.moments.len() != params.len()
                || self
                    .moments
                    .iter()
                    .zip(params.iter())
                    .any(|(m, p)| m.0.shape() != p.shape())
            {
                return Err(Error::invalid("parameter list changed between optimizer steps"));
            }
        }
        self.steps += 1;

        match self.algorithm {
            Algorithm::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.axpy(-self.lr, g)?;
                }
            }
            Algorithm::Adam => {
                let t = self.steps as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(&mut self.moments) {
                    let it = p
                        .as_mut_slice()
                        .iter_mut()
                        .zip(g.as_slice())
                        .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
                    for ((pi, gi), (mi, vi)) in it {
                        *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                        *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *pi -= self.lr * mhat / (vhat.sqrt() + self.eps);
                    }
                }
            }
        }
        Ok(())
    }
}
