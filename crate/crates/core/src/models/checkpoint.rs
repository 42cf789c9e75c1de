//! JSON checkpoints: weights plus content hashes of the frozen operators and
//! input, so a checkpoint can only be restored onto the model it came from.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GeneratorModel, ModelKind};
use crate::error::{Error, Result};

/// SHA-256 over the shape and the little-endian bytes of every entry.
pub fn operator_hash(m: &Array2<f64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((m.nrows() as u64).to_le_bytes());
    hasher.update((m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub widths: Vec<usize>,
    pub seed: u64,
    pub operator_hashes: Vec<String>,
    pub input_hash: String,
    pub weights: Vec<Array2<f64>>,
}

impl Checkpoint {
    pub fn from_model(model: &GeneratorModel) -> Self {
        Checkpoint {
            kind: model.kind(),
            widths: model.widths().to_vec(),
            seed: model.seed(),
            operator_hashes: model.operators().iter().map(operator_hash).collect(),
            input_hash: operator_hash(model.input()),
            weights: model.weights().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Copies the stored weights into a model with identical architecture,
    /// operators and input.
    pub fn restore(&self, template: &GeneratorModel) -> Result<GeneratorModel> {
        let same = Checkpoint::from_model(template);
        if same.kind != self.kind || same.widths != self.widths {
            return Err(Error::InvalidArgument(
                "checkpoint architecture does not match the model".into(),
            ));
        }
        if same.operator_hashes != self.operator_hashes || same.input_hash != self.input_hash {
            return Err(Error::InvalidArgument(
                "checkpoint operators or input differ from the model".into(),
            ));
        }
        let mut model = template.clone();
        model.set_weights(self.weights.clone())?;
        Ok(model)
    }
}
