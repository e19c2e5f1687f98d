use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;

pub const FILE_NAME: &str = "manifest.json";

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    /// Seconds from start of the command to writing the manifest. The only
    /// field that differs between otherwise identical runs.
    pub wall_time: f64,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            manifest: RunManifest {
                command: command.into(),
                config_path: None,
                seed: None,
                inputs: Vec::new(),
                outputs: Vec::new(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                wall_time: 0.0,
            },
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, path: &Path) -> &mut Self {
        self.manifest.config_path = Some(io::display(path));
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.manifest.seed = Some(seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.manifest.inputs.push(io::display(path));
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.manifest.outputs.push(io::display(path));
        self
    }

    /// Writes `dir/manifest.json` and returns its path.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.manifest.wall_time = self.started.elapsed().as_secs_f64();
        let path = dir.join(FILE_NAME);
        io::write_json(&path, &self.manifest)?;
        Ok(path)
    }
}
