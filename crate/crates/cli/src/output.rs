// SPDX-License-Identifier: Apache-2.0

//! Output directories, embedded provenance and the file manifest.
//!
//! Every JSON file carries a `provenance` object and every CSV starts with
//! a `# provenance {...}` comment line. Both hold the canonical config, so
//! any file is enough to re-run the command that wrote it. Nothing
//! time-dependent is written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, ExperimentConfig};
use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub environment: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk_base: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub config: ExperimentConfig,
}

impl Provenance {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: cfg.hash(),
            seeds: Seeds {
                environment: cfg.environment.seed,
                walk_base: cfg.simulation.map(|s| s.base_seed),
                env_seeds: cfg.sweep.as_ref().map(|s| s.env_seeds.clone()),
            },
            config: cfg.canonical(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sha256: String,
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub files: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Option<Manifest>, CliError> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map(Some).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }
}

#[derive(Serialize)]
struct Doc<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: T,
}

/// One command's view of an output directory. A directory holds the
/// results of a single config; a different config is refused.
pub struct OutDir {
    dir: PathBuf,
    prov: Provenance,
    written: Vec<(String, String)>,
}

impl OutDir {
    pub fn open(dir: &Path, command: &str, cfg: &ExperimentConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        let prov = Provenance::new(command, cfg);
        if let Some(m) = Manifest::load(dir)? {
            if m.config_sha256 != prov.config_sha256 {
                return Err(CliError::validation(format!(
                    "{} holds results of config {}, not {}",
                    dir.display(),
                    m.config_sha256,
                    prov.config_sha256
                )));
            }
        }
        let mut out = OutDir { dir: dir.to_path_buf(), prov, written: Vec::new() };
        out.write_bytes(CONFIG_FILE, cfg.canonical_json().as_bytes())?;
        Ok(out)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.prov
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    /// Writes `body`'s fields after a leading `provenance` object.
    pub fn write_json<T: Serialize>(&mut self, name: &str, body: T) -> Result<(), CliError> {
        let doc = Doc { provenance: &self.prov, body };
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::io(format!("{name}: {e}")))? + "\n";
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes the provenance comment line, then whatever `fill` produces.
    pub fn write_csv<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        let mut buf = b"# provenance ".to_vec();
        serde_json::to_writer(&mut buf, &self.prov).map_err(|e| CliError::io(e.to_string()))?;
        buf.push(b'\n');
        fill(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    /// Merges this command's files into the manifest.
    pub fn finish(self) -> Result<Vec<PathBuf>, CliError> {
        let mut m = Manifest::load(&self.dir)?.unwrap_or_default();
        m.config_sha256 = self.prov.config_sha256.clone();
        for (name, sha256) in &self.written {
            m.files.insert(name.clone(), ManifestEntry { sha256: sha256.clone(), command: self.prov.command.clone() });
        }
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Ok(self.written.iter().map(|(n, _)| self.dir.join(n)).collect())
    }
}

/// Reads a CSV written by [`OutDir::write_csv`], skipping the provenance line.
pub fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}
