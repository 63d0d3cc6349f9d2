//! Output files and their metadata sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// Directory plus the resolved settings of one command run.
pub struct Outputs {
    dir: PathBuf,
    command: String,
    config: Value,
    config_hash: String,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, config: &impl Serialize) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let config = serde_json::to_value(config)?;
        let config_hash = sha256_hex(serde_json::to_string(&config)?.as_bytes());
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config,
            config_hash,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// True when `names` all exist with sidecars recording this config.
    pub fn up_to_date(&self, names: &[&str]) -> bool {
        names.iter().all(|name| {
            let sidecar = sidecar_path(&self.path(name));
            let Ok(text) = fs::read_to_string(sidecar) else {
                return false;
            };
            let Ok(meta) = serde_json::from_str::<Value>(&text) else {
                return false;
            };
            let Ok(data) = fs::read(self.path(name)) else {
                return false;
            };
            meta["config_sha256"] == self.config_hash.as_str()
                && meta["output_sha256"] == sha256_hex(&data).as_str()
                && meta["version"] == VERSION
        })
    }

    /// Writes `name` and its `name.meta.json` sidecar.
    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        let meta = serde_json::json!({
            "tool": "ribodelay",
            "version": VERSION,
            "command": self.command,
            "file": name,
            "config_sha256": self.config_hash,
            "output_sha256": sha256_hex(data),
            "config": self.config,
        });
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        fs::write(sidecar_path(&path), text)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}
