//! Run manifests written next to every output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Command, configuration echo, seed, artifact hashes and timings. Only
/// `timings_ms` varies between identical runs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
            started: Some(Instant::now()),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn output(&mut self, path: &Path, bytes: &[u8]) {
        self.outputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn lap(&mut self, name: &str, since: Instant) {
        self.timings_ms.insert(name.to_string(), since.elapsed().as_secs_f64() * 1e3);
    }

    /// `<out>.manifest.json`.
    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn finish(mut self) -> Self {
        if let Some(start) = self.started.take() {
            self.lap("total", start);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_path() {
        assert_eq!(
            RunManifest::path_for(Path::new("out/d.csv")),
            PathBuf::from("out/d.csv.manifest.json")
        );
    }
}
