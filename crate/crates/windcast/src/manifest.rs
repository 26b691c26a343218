//! Run manifests: every output directory gets a JSON record of what
//! produced it.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::util::{atomic_write, sha256_file};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run: the tool version, the subcommand
/// and its resolved settings, the seed, digests of every input file, and the
/// wall-clock duration. Written atomically as `manifest.json` next to the
/// outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub seed: u64,
    /// Resolved configuration snapshot (defaults, file, and flags merged).
    pub settings: BTreeMap<String, String>,
    /// Input path -> SHA-256 of its bytes at read time.
    pub inputs: BTreeMap<String, String>,
    pub wall_ms: u128,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            subcommand: subcommand.to_string(),
            seed,
            settings: BTreeMap::new(),
            inputs: BTreeMap::new(),
            wall_ms: 0,
        }
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) {
        self.settings.insert(key.to_string(), value.to_string());
    }

    /// Digest an input file into the manifest.
    pub fn record_input(&mut self, path: &Path) -> io::Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Write `manifest.json` into `dir` atomically.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let json = serde_json::to_vec_pretty(self).expect("manifest serializes");
        atomic_write(&dir.join(MANIFEST_FILE), &json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn manifest_round_trips_and_digests_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.csv");
        fs::write(&input, "a,b\n1,2\n").unwrap();

        let mut manifest = RunManifest::new("train", 7);
        manifest.setting("epochs", 3);
        manifest.record_input(&input).unwrap();
        manifest.wall_ms = 1234;
        manifest.write(dir.path()).unwrap();

        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let loaded: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(loaded, manifest);
        assert_eq!(loaded.subcommand, "train");
        assert_eq!(loaded.settings.get("epochs").unwrap(), "3");
        assert_eq!(
            loaded.inputs.get(&input.display().to_string()).unwrap(),
            &sha256_file(&input).unwrap()
        );
        assert_eq!(loaded.tool_version, TOOL_VERSION);
    }
}
