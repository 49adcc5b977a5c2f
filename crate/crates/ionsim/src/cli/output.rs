//! Output directory bookkeeping and the run manifest.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cli::config::ExperimentConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// Collects data files written during one command.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<OutputFile>,
    started: Instant,
    extra: serde_json::Map<String, Value>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new(), started: Instant::now(), extra: Default::default() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.root.join(name), contents)?;
        let digest = Sha256::digest(contents.as_bytes());
        self.files.push(OutputFile { file: name.to_string(), sha256: format!("{digest:x}") });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Attach a named section to the manifest.
    pub fn note(&mut self, key: &str, value: Value) {
        self.extra.insert(key.to_string(), value);
    }

    /// Write `config.toml` and `manifest.json`; returns the output directory.
    pub fn finish(mut self, command: &str, cfg: &ExperimentConfig) -> Result<PathBuf> {
        self.write("config.toml", &cfg.to_toml())?;
        let finished = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let mut manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": cfg.seed,
            "config": serde_json::to_value(cfg)?,
            "outputs": self.files,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "finished_unix_s": finished,
        });
        let obj = manifest.as_object_mut().expect("manifest is an object");
        for (k, v) in std::mem::take(&mut self.extra) {
            obj.insert(k, v);
        }
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(self.root.join("manifest.json"), text + "\n")?;
        Ok(self.root)
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
