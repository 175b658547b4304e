// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{sha256_hex, ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::Manifest;
use crate::Cli;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub config_sha256: String,
    pub verified: Vec<String>,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
}

impl Verification {
    pub fn ok(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty()
    }
}

/// Rehashes every file listed in the manifest of `dir`.
pub fn verify(dir: &Path) -> Result<Verification, CliError> {
    let m = Manifest::load(dir)?.ok_or_else(|| CliError::io(format!("{}: no manifest", dir.display())))?;
    let mut v = Verification { config_sha256: m.config_sha256.clone(), ..Default::default() };
    for (name, entry) in &m.files {
        match fs::read(dir.join(name)) {
            Ok(bytes) if sha256_hex(&bytes) == entry.sha256 => v.verified.push(name.clone()),
            Ok(_) => v.mismatched.push(name.clone()),
            Err(_) => v.missing.push(name.clone()),
        }
    }
    Ok(v)
}

fn read_json(dir: &Path, name: &str) -> Option<Value> {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).ok()?).ok()
}

fn summarize(dir: &Path, files: &[String]) -> Value {
    let mut s = serde_json::Map::new();
    let has = |n: &str| files.iter().any(|f| f == n);
    if has("validation.json") {
        if let Some(v) = read_json(dir, "validation.json") {
            s.insert("validation_passed".into(), v["passed"].clone());
        }
    }
    if has("verdict.json") {
        if let Some(v) = read_json(dir, "verdict.json") {
            s.insert("verdict".into(), json!({ "label": v["label"], "rule": v["rule"], "grid": v["grid"] }));
        }
    }
    if has("ensemble.json") {
        if let Some(v) = read_json(dir, "ensemble.json") {
            s.insert("ensemble".into(), v["summary"]["aggregates"].clone());
        }
    }
    if has("sweep_summary.json") {
        if let Some(v) = read_json(dir, "sweep_summary.json") {
            s.insert("sweep".into(), v["alphas"].clone());
        }
    }
    Value::Object(s)
}

pub(super) fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let dir: PathBuf = match (&cli.out, &cli.config) {
        (Some(d), _) => d.clone(),
        (None, Some(c)) => ExperimentConfig::load(c)?
            .output
            .dir
            .ok_or_else(|| CliError::validation("config has no output.dir; pass --out"))?,
        (None, None) => return Err(CliError::validation("report needs --out or --config")),
    };
    let v = verify(&dir)?;
    let summary = summarize(&dir, &v.verified);
    if cli.format == Some(Format::Json) {
        let doc = json!({ "directory": dir, "verification": &v, "summary": summary });
        writeln!(stdout, "{}", serde_json::to_string_pretty(&doc).expect("report serializes"))?;
    } else {
        writeln!(stdout, "directory {}", dir.display())?;
        writeln!(stdout, "config sha256 {}", v.config_sha256)?;
        for f in &v.verified {
            writeln!(stdout, "  ok        {f}")?;
        }
        for f in &v.mismatched {
            writeln!(stdout, "  MODIFIED  {f}")?;
        }
        for f in &v.missing {
            writeln!(stdout, "  MISSING   {f}")?;
        }
        if let Value::Object(m) = &summary {
            for (k, val) in m {
                writeln!(stdout, "{k}: {val}")?;
            }
        }
    }
    if !v.missing.is_empty() {
        return Err(CliError::io(format!("{} listed files missing", v.missing.len())));
    }
    if !v.mismatched.is_empty() {
        return Err(CliError::validation(format!("{} files do not match the manifest", v.mismatched.len())));
    }
    Ok(())
}
