//! Spectral GCN (the defense backbone) and the two-layer semi-GCN (the
//! attack target), plus full-batch training.

mod file;
mod semi;
mod spectral;
mod train;

pub use file::ModelKind;
pub use semi::{Propagation, SemiGcnModel};
pub use spectral::{Activation, FilterInit, SpectralModel};
pub use train::{
    accuracy, evaluate_spectral, mean_cross_entropy, train_model, train_semi, train_spectral, train_spectral_observed,
    write_jsonl, AnyModel, EpochRecord, TrainConfig,
};
