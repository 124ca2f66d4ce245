//! JSON checkpoints: parameter name → shape → row-major values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Matrix, NnError, ParamSet};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Free-form tags, e.g. the architecture a parameter set belongs to.
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    pub params: BTreeMap<String, StoredTensor>,
}

impl Checkpoint {
    pub fn from_params(params: &ParamSet) -> Self {
        let params = params
            .iter()
            .map(|p| {
                let (r, c) = p.value.shape();
                (
                    p.name.clone(),
                    StoredTensor {
                        shape: [r, c],
                        values: p.value.data().to_vec(),
                    },
                )
            })
            .collect();
        Self {
            version: CHECKPOINT_VERSION,
            meta: BTreeMap::new(),
            params,
        }
    }

    /// Overwrites the values of `params` with the stored tensors. Every
    /// parameter must be present with a matching shape.
    pub fn load_into(&self, params: &mut ParamSet) -> Result<(), NnError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.params.len() != params.len() {
            return Err(NnError::Checkpoint(format!(
                "expected {} parameters, found {}",
                params.len(),
                self.params.len()
            )));
        }
        for p in params.iter_mut() {
            let stored = self
                .params
                .get(&p.name)
                .ok_or_else(|| NnError::Checkpoint(format!("missing parameter {}", p.name)))?;
            let [r, c] = stored.shape;
            if (r, c) != p.value.shape() {
                return Err(NnError::Checkpoint(format!(
                    "{}: stored shape {:?} vs {:?}",
                    p.name,
                    stored.shape,
                    p.value.shape()
                )));
            }
            p.value = Matrix::from_vec(r, c, stored.values.clone())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        serde_json::to_string(self).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_json()?).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
