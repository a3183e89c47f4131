use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SpectralBasis;
use crate::matrix::Matrix;
use crate::nn::checkpoint::{take_param, ParamMap};
use crate::nn::{glorot, Tape, Var};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
            Activation::Sigmoid => crate::nn::sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn on_tape(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Identity => Ok(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Tanh => tape.tanh(x),
        }
    }
}

/// Initial spectral filter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterInit {
    /// `θ = 1`, i.e. `U diag(θ) Uᵀ = I`.
    Ones,
    /// `θ_l = (1 - λ_l / λ_max)^order`, a smoothing filter.
    LowPass { order: u32 },
}

impl FilterInit {
    pub fn build(self, eigenvalues: &[f64]) -> Matrix {
        let values: Vec<f64> = match self {
            FilterInit::Ones => vec![1.0; eigenvalues.len()],
            FilterInit::LowPass { order } => {
                let max = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(*v));
                let max = if max > 0.0 { max } else { 1.0 };
                eigenvalues
                    .iter()
                    .map(|l| (1.0 - l / max).max(0.0).powi(order as i32))
                    .collect()
            }
        };
        Matrix::row_vector(&values)
    }
}

impl Default for FilterInit {
    fn default() -> Self {
        FilterInit::LowPass { order: 2 }
    }
}

/// Single-layer spectral GCN: `σ(U diag(θ) Uᵀ f) W^D`.
#[derive(Clone, Debug)]
pub struct SpectralModel {
    basis: Arc<SpectralBasis>,
    /// `θ`, stored as a `1 x N` row.
    pub filter: Matrix,
    /// `W^D`, `d x ι`, no bias.
    pub decoder: Matrix,
    pub activation: Activation,
}

impl SpectralModel {
    pub fn new(
        basis: Arc<SpectralBasis>,
        n_features: usize,
        n_classes: usize,
        init: FilterInit,
        rng: &mut Rng,
    ) -> Self {
        let filter = init.build(basis.eigenvalues());
        Self {
            basis,
            filter,
            decoder: glorot(n_features, n_classes, rng),
            activation: Activation::Relu,
        }
    }

    pub fn from_parts(
        basis: Arc<SpectralBasis>,
        filter: Matrix,
        decoder: Matrix,
        activation: Activation,
    ) -> Result<Self> {
        if filter.shape() != (1, basis.n()) {
            return Err(Error::Shape {
                op: "spectral_model",
                left: filter.shape(),
                right: (1, basis.n()),
            });
        }
        Ok(Self {
            basis,
            filter,
            decoder,
            activation,
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn n_nodes(&self) -> usize {
        self.basis.n()
    }

    fn check_features(&self, f: &Matrix) -> Result<()> {
        if f.rows() != self.n_nodes() || f.cols() != self.decoder.rows() {
            return Err(Error::Shape {
                op: "spectral_forward",
                left: f.shape(),
                right: (self.n_nodes(), self.decoder.rows()),
            });
        }
        Ok(())
    }

    /// `Uᵀ f`, the feature matrix in the spectral domain.
    pub fn project(&self, f: &Matrix) -> Result<Matrix> {
        self.check_features(f)?;
        self.basis.vectors().tr_matmul(f)
    }

    /// Pre-decoder embedding of the given rows from a projected feature matrix.
    pub fn embed_rows(&self, proj: &Matrix, rows: &[usize]) -> Result<Matrix> {
        let u = self.basis.vectors().select_rows(rows);
        let mut scaled = u;
        let theta = self.filter.row(0);
        for i in 0..scaled.rows() {
            for (v, t) in scaled.row_mut(i).iter_mut().zip(theta) {
                *v *= t;
            }
        }
        let act = self.activation;
        Ok(scaled.matmul(proj)?.map(|x| act.apply(x)))
    }

    /// `σ(U diag(θ) Uᵀ f)` for every node.
    pub fn embedding(&self, f: &Matrix) -> Result<Matrix> {
        let proj = self.project(f)?;
        let all: Vec<usize> = (0..self.n_nodes()).collect();
        self.embed_rows(&proj, &all)
    }

    /// `σ(U diag(θ) Uᵀ f) W^D`.
    pub fn forward(&self, f: &Matrix) -> Result<Matrix> {
        self.embedding(f)?.matmul(&self.decoder)
    }

    /// `σ(u(v) diag(θ) Uᵀ f)`.
    pub fn node_embedding(&self, f: &Matrix, v: usize) -> Result<Vec<f64>> {
        if v >= self.n_nodes() {
            return Err(Error::OutOfRange {
                index: v,
                len: self.n_nodes(),
            });
        }
        let proj = self.project(f)?;
        Ok(self.embed_rows(&proj, &[v])?.row(0).to_vec())
    }

    /// Logits for `rows` recorded on a tape. `u_rows` holds the matching rows
    /// of `U`, `proj` the projected features.
    pub fn logits_on_tape(
        tape: &mut Tape,
        activation: Activation,
        filter: Var,
        decoder: Var,
        u_rows: Var,
        proj: Var,
    ) -> Result<Var> {
        let scaled = tape.diag_scale(u_rows, filter)?;
        let pre = tape.matmul(scaled, proj)?;
        let emb = activation.on_tape(tape, pre)?;
        tape.matmul(emb, decoder)
    }

    pub fn params(&self) -> ParamMap {
        ParamMap::from([
            ("filter".to_string(), self.filter.clone()),
            ("decoder".to_string(), self.decoder.clone()),
        ])
    }

    pub fn load_params(&mut self, mut params: ParamMap) -> Result<()> {
        let filter = take_param(&mut params, "filter")?;
        let decoder = take_param(&mut params, "decoder")?;
        if filter.shape() != self.filter.shape() || decoder.shape() != self.decoder.shape() {
            return Err(Error::Checkpoint(
                "spectral parameter shapes do not match the model".into(),
            ));
        }
        self.filter = filter;
        self.decoder = decoder;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{eigendecompose, synth_graph, LaplacianKind, SynthSpec};
    use crate::rng::rng_from_seed;

    fn ring_model(n: usize, d: usize) -> (SpectralModel, Matrix, Matrix) {
        let g = synth_graph(&SynthSpec::Ring(n)).unwrap();
        let lap = g.laplacian(LaplacianKind::Combinatorial);
        let basis = Arc::new(eigendecompose(&lap).unwrap());
        let mut rng = rng_from_seed(3);
        let mut m = SpectralModel::new(basis, d, d, FilterInit::Ones, &mut rng);
        m.decoder = Matrix::identity(d);
        m.activation = Activation::Identity;
        let f = crate::nn::gaussian(n, d, 1.0, &mut rng);
        (m, f, lap)
    }

    #[test]
    fn eigenvalue_filter_reproduces_laplacian() {
        let (mut m, f, lap) = ring_model(6, 3);
        m.filter = Matrix::row_vector(m.basis().eigenvalues());
        let out = m.forward(&f).unwrap();
        assert!(out.max_abs_diff(&lap.matmul(&f).unwrap()) < 1e-12);
    }

    #[test]
    fn unit_filter_is_identity() {
        let (m, f, _) = ring_model(5, 2);
        assert!(m.forward(&f).unwrap().max_abs_diff(&f) < 1e-12);
        assert!(m
            .node_embedding(&f, 3)
            .unwrap()
            .iter()
            .zip(f.row(3))
            .all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn node_embedding_matches_full_embedding() {
        let (mut m, f, _) = ring_model(5, 3);
        m.activation = Activation::Relu;
        m.filter = Matrix::row_vector(&[0.3, -1.2, 0.8, 2.0, 0.1]);
        let full = m.embedding(&f).unwrap();
        for v in 0..5 {
            assert_eq!(m.node_embedding(&f, v).unwrap(), full.row(v));
        }
        assert!(m.node_embedding(&f, 5).is_err());
    }

    #[test]
    fn mismatched_features_rejected() {
        let (m, _, _) = ring_model(5, 3);
        assert!(matches!(m.forward(&Matrix::zeros(4, 3)), Err(Error::Shape { .. })));
    }

    #[test]
    fn low_pass_filter_shape() {
        let f = FilterInit::LowPass { order: 2 }.build(&[0.0, 1.0, 2.0]);
        assert_eq!(f.row(0), &[1.0, 0.25, 0.0]);
    }
}
