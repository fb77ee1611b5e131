//! CSV tables and the JSON run manifest.

use std::path::Path;
use std::process::Command;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

/// Fidelities below `1e-4` switch to scientific notation.
pub fn fmt_fidelity(f: f64) -> String {
    if f < 1e-4 {
        format!("{f:.6e}")
    } else {
        format!("{f:.10}")
    }
}

pub fn fmt_real(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

/// `log10(1 - F)`, floored at `-16`.
pub fn log_infidelity(f: f64) -> f64 {
    (1.0 - f).max(1e-16).log10()
}

pub fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>().join(";")
}

#[derive(Clone, Debug)]
pub struct Table {
    pub file: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &'static str, header: &[&'static str]) -> Self {
        Table { file, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(dir.join(self.file))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One computed cell; CSV rows reference it by `run_id`.
#[derive(Clone, Debug, Serialize)]
pub struct ManifestRow {
    pub run_id: String,
    pub config_hash: String,
    pub n: usize,
    pub ell: Option<usize>,
    pub tau: Option<f64>,
    pub files: Vec<&'static str>,
    pub elapsed_ms: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: u32,
    config: &'a Config,
    git_describe: String,
    started: String,
    finished: String,
    rows: &'a [ManifestRow],
}

/// SHA-256 over the resolved config and the seed.
pub fn config_hash(cfg: &Config, seed: u64) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let mut h = Sha256::new();
    h.update(json.as_bytes());
    h.update(seed.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn write_manifest(
    dir: &Path,
    cfg: &Config,
    started: &str,
    finished: &str,
    rows: &[ManifestRow],
) -> Result<(), CliError> {
    let m = Manifest {
        version: MANIFEST_VERSION,
        config: cfg,
        git_describe: git_describe(),
        started: started.to_string(),
        finished: finished.to_string(),
        rows,
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fidelity_format_switches() {
        assert_eq!(fmt_fidelity(0.5), "0.5000000000");
        assert_eq!(fmt_fidelity(1.5e-5), "1.500000e-5");
        assert_eq!(fmt_fidelity(0.0), "0.000000e0");
    }

    #[test]
    fn log_infidelity_floor() {
        assert_eq!(log_infidelity(1.0), -16.0);
        assert!((log_infidelity(0.9) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hash_depends_on_seed() {
        let cfg = crate::config::parse("[model]\nkind = \"short_range_ising\"\nn = 4\n").unwrap();
        assert_eq!(config_hash(&cfg, 1), config_hash(&cfg, 1));
        assert_ne!(config_hash(&cfg, 1), config_hash(&cfg, 2));
        assert_eq!(config_hash(&cfg, 1).len(), 64);
    }
}
