//! Report assembly: one JSON document with per-suite verdicts, key scalars
//! and a content-hash manifest of every artifact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Suite;
use crate::error::CliError;
use crate::suites::{Artifact, SuiteRun, Verdict};

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub suite: Suite,
    pub verdict: Verdict,
    pub message: String,
    pub scalars: BTreeMap<String, f64>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub name: String,
    pub seed: u64,
    pub all_passed: bool,
    pub suites: Vec<SuiteEntry>,
    pub manifest: Vec<ManifestEntry>,
}

impl Report {
    pub fn suite(&self, suite: Suite) -> Option<&SuiteEntry> {
        self.suites.iter().find(|s| s.suite == suite)
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds the report. `extra` holds artifacts not owned by a suite (the
/// resolved configuration).
pub fn emit_report(name: &str, seed: u64, runs: &[SuiteRun], extra: &[Artifact]) -> Result<Report, CliError> {
    if runs.is_empty() {
        return Err(CliError::Precondition("a report needs at least one completed suite".into()));
    }
    let mut manifest: Vec<ManifestEntry> = extra
        .iter()
        .chain(runs.iter().flat_map(|r| r.artifacts.iter()))
        .map(|a| ManifestEntry { path: a.path.clone(), sha256: sha256_hex(a.contents.as_bytes()) })
        .collect();
    manifest.sort_by(|a, b| a.path.cmp(&b.path));
    let suites = runs
        .iter()
        .map(|r| SuiteEntry {
            suite: r.suite,
            verdict: r.verdict,
            message: r.message.clone(),
            scalars: r.scalars.clone(),
            files: r.artifacts.iter().map(|a| a.path.clone()).collect(),
        })
        .collect();
    Ok(Report {
        name: name.to_string(),
        seed,
        all_passed: runs.iter().all(|r| r.verdict == Verdict::Pass),
        suites,
        manifest,
    })
}

pub fn write_file(out: &Path, rel: &str, contents: &str) -> Result<(), CliError> {
    let path = out.join(rel);
    let io = |source| CliError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(&path, contents).map_err(io)
}
