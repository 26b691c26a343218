//! Versioned model checkpoints.
//!
//! A checkpoint is a single JSON document holding the hyperparameters, every
//! parameter tensor, the normalization statistics frozen at training time,
//! and a digest of the neighbour graph it was trained against. Loading
//! refuses to proceed when the graph digest of the farm at hand differs, so
//! a model can never silently run on the wrong layout or neighbour order.
//!
//! Values are serialized with shortest-round-trip float formatting; saving
//! and loading is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Normalizer;
use crate::model::ModelParams;
use crate::util::atomic_write;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint version {found} is not supported (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error(
        "checkpoint was trained against farm graph {expected} but the \
         provided layout and k give {actual}"
    )]
    GraphMismatch { expected: String, actual: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub params: ModelParams,
    pub normalizer: Normalizer,
    /// Digest of the [`crate::graph::NeighborIndex`] plus layout used in
    /// training; see `NeighborIndex::digest`.
    pub graph_digest: String,
}

impl Checkpoint {
    pub fn new(params: ModelParams, normalizer: Normalizer, graph_digest: String) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            params,
            normalizer,
            graph_digest,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let json = serde_json::to_vec_pretty(self)?;
        atomic_write(path, &json).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::UnsupportedVersion {
                found: ckpt.version,
                supported: CHECKPOINT_VERSION,
            });
        }
        Ok(ckpt)
    }

    /// Refuse to pair this checkpoint with a farm graph other than the one
    /// it was trained on. The error names both digests.
    pub fn verify_graph(&self, actual_digest: &str) -> Result<(), CheckpointError> {
        if self.graph_digest != actual_digest {
            return Err(CheckpointError::GraphMismatch {
                expected: self.graph_digest.clone(),
                actual: actual_digest.to_string(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_farm, SynthConfig, TargetKind};
    use crate::graph::build_knn;
    use crate::model::{CellKind, HyperParams};

    fn sample_checkpoint() -> Checkpoint {
        let (layout, table) = synth_farm(&SynthConfig {
            n_turbines: 3,
            days: 2,
            seed: 31,
            ..Default::default()
        })
        .unwrap();
        let nbr = build_knn(&layout, 2).unwrap();
        let norm = Normalizer::fit(&table, TargetKind::Power).unwrap();
        let hyper = HyperParams {
            m: 4,
            k: 2,
            hidden: 4,
            embed_dim: 2,
            mlp_hidden: 3,
            tau_max: 2,
            n_turbines: 3,
            power_history: false,
            embed_encoder: false,
            southern: false,
        };
        let params = ModelParams::init(hyper, CellKind::Gru, 31);
        Checkpoint::new(params, norm, nbr.digest(&layout))
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let ckpt = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ckpt);
        let before: Vec<u64> = ckpt
            .params
            .tensors()
            .iter()
            .flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits()))
            .collect();
        let after: Vec<u64> = loaded
            .params
            .tensors()
            .iter()
            .flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits()))
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn graph_mismatch_names_both_digests() {
        let ckpt = sample_checkpoint();
        let err = ckpt.verify_graph("deadbeef").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(&ckpt.graph_digest), "{msg}");
        assert!(msg.contains("deadbeef"), "{msg}");
        assert!(ckpt.verify_graph(&ckpt.graph_digest).is_ok());
    }

    #[test]
    fn future_versions_are_refused() {
        let mut ckpt = sample_checkpoint();
        ckpt.version = 99;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        ckpt.save(&path).unwrap();
        let err = Checkpoint::load(&path).unwrap_err();
        assert!(matches!(
            err,
            CheckpointError::UnsupportedVersion { found: 99, supported: 1 }
        ));
    }

    #[test]
    fn missing_file_error_names_the_path() {
        let err = Checkpoint::load(Path::new("/nonexistent/model.json")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/model.json"));
    }
}
