//! Dense differentiable kernel shared by every trainable model.

pub mod checkpoint;
mod optim;
mod tape;

pub use optim::{Algorithm, Optimizer};
pub use tape::{one_hot, renormalize, sigmoid, sigmoid_bce, softmax_rows, Tape, Var, PROB_FLOOR};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::matrix::Matrix;
use crate::rng::Rng;

/// Glorot-uniform initialization for a `fan_in x fan_out` weight.
pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("length matches shape")
}

/// Entries drawn from `N(0, std²)`.
pub fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Matrix {
    let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
    let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}
