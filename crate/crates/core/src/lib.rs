//! Graph adversarial-robustness toolkit.
//!
//! * [`graph`]: graphs, Laplacians, spectral bases, Cora ingestion and
//!   synthetic generators.
//! * [`nn`]: dense reverse-mode kernel, optimizers and checkpoints.
//! * [`model`]: the single-layer spectral GCN and the two-layer semi-GCN.
//! * [`gepa`]: the general edge-perturbing attack.
//! * [`signal`]: node-signal DFT model and the localization experiments.
//! * [`angcn`]: the anonymous GCN defense.

pub mod angcn;
pub mod error;
pub mod gepa;
pub mod graph;
pub mod matrix;
pub mod model;
pub mod nn;
pub mod rng;
pub mod signal;

pub use error::{Error, Result};
pub use graph::{Edge, Graph, LaplacianKind, Masks, SpectralBasis};
pub use matrix::Matrix;
