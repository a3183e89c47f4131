use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Activation, AnyModel, Propagation, SemiGcnModel, SpectralModel};
use crate::error::{Error, Result};
use crate::graph::{Graph, LaplacianKind, SpectralBasis};
use crate::nn::checkpoint::{params_from_value, params_to_json, take_param};

/// Architecture header stored next to the parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    Spectral {
        laplacian: LaplacianKind,
        activation: Activation,
    },
    Semi {
        propagation: Propagation,
    },
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    kind: ModelKind,
    params: serde_json::Value,
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Spectral(m) => ModelKind::Spectral {
                laplacian: m.basis().laplacian_kind().unwrap_or(LaplacianKind::SymmetricNormalized),
                activation: m.activation,
            },
            AnyModel::Semi(m) => ModelKind::Semi {
                propagation: m.propagation,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            kind: self.kind(),
            params: serde_json::from_str(&params_to_json(&self.params())?)?,
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Rebuilds a model. Spectral models recompute their basis from `g`.
    pub fn from_json(text: &str, g: &Graph) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let mut params = params_from_value(file.params)?;
        match file.kind {
            ModelKind::Spectral { laplacian, activation } => {
                let filter = take_param(&mut params, "filter")?;
                let decoder = take_param(&mut params, "decoder")?;
                if filter.cols() != g.n_nodes() || decoder.rows() != g.n_features() {
                    return Err(Error::Checkpoint(format!(
                        "spectral checkpoint ({} nodes, {} features) does not fit the graph ({} nodes, {} features)",
                        filter.cols(),
                        decoder.rows(),
                        g.n_nodes(),
                        g.n_features()
                    )));
                }
                let basis = Arc::new(SpectralBasis::of_graph(g, laplacian)?);
                Ok(AnyModel::Spectral(SpectralModel::from_parts(
                    basis, filter, decoder, activation,
                )?))
            }
            ModelKind::Semi { propagation } => {
                let m = SemiGcnModel::from_params(params, propagation)?;
                if m.w1.rows() != g.n_features() {
                    return Err(Error::Checkpoint(format!(
                        "semi checkpoint expects {} features, graph has {}",
                        m.w1.rows(),
                        g.n_features()
                    )));
                }
                Ok(AnyModel::Semi(m))
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, g: &Graph) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?, g)
    }
}
