//! Output files and the manifest that makes an output directory self-describing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::equilibrium::{EdgeClass, EquilibriumSolution};
use crate::error::{Error, Result};
use crate::sampler::ObservableRecord;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_file(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads `node,weight` lines; a non-numeric first line is taken as a header.
pub fn read_measure_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let parsed = (
            fields.next().and_then(|s| s.parse::<f64>().ok()),
            fields.next().and_then(|s| s.parse::<f64>().ok()),
        );
        match parsed {
            (Some(x), Some(w)) => {
                nodes.push(x);
                weights.push(w);
            }
            _ if nodes.is_empty() && k == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    message: format!("line {}: expected node,weight", k + 1),
                })
            }
        }
    }
    Ok((nodes, weights))
}

/// `node,weight,density` for every grid cell.
pub fn measure_csv(solution: &EquilibriumSolution) -> String {
    let m = &solution.measure;
    let mut out = String::from("node,weight,density\n");
    for (i, (x, w)) in m.nodes().iter().zip(m.weights()).enumerate() {
        let _ = writeln!(out, "{x:e},{w:e},{:e}", m.density(i));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportSummary {
    pub lo: f64,
    pub hi: f64,
    pub lo_class: EdgeClass,
    pub hi_class: EdgeClass,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub nodes: usize,
    pub support: Vec<SupportSummary>,
    pub robin_constant: f64,
    pub filling_fractions: Vec<f64>,
    pub on_support_residual: f64,
    pub off_support_violation: f64,
    pub kkt_residual: f64,
    pub log_energy: f64,
    pub iterations: usize,
    pub cut_sensitivity: Vec<(f64, usize)>,
}

impl EquilibriumSummary {
    pub fn new(s: &EquilibriumSolution) -> Self {
        Self {
            nodes: s.measure.len(),
            support: s
                .support
                .iter()
                .map(|i| SupportSummary {
                    lo: i.lo,
                    hi: i.hi,
                    lo_class: i.lo_class,
                    hi_class: i.hi_class,
                })
                .collect(),
            robin_constant: s.robin_constant,
            filling_fractions: s.filling_fractions.clone(),
            on_support_residual: s.residuals.on_support,
            off_support_violation: s.residuals.off_support,
            kkt_residual: s.kkt_residual,
            log_energy: s.log_energy,
            iterations: s.iterations,
            cut_sensitivity: s.cut_sensitivity.clone(),
        }
    }
}

pub fn records_jsonl(records: &[ObservableRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).unwrap_or_default());
        out.push('\n');
    }
    out
}

pub fn records_csv(records: &[ObservableRecord]) -> String {
    let mut out = String::from("sweep,log_density,escape_count,near_count,acceptance\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{:e},{},{},{:e}",
            r.sweep, r.log_density, r.escape_count, r.near_count, r.acceptance
        );
    }
    out
}

/// Two whitespace-separated columns, ready for gnuplot.
pub fn two_column(rows: impl IntoIterator<Item = (f64, f64)>, header: &str) -> String {
    let mut out = format!("# {header}\n");
    for (x, y) in rows {
        let _ = writeln!(out, "{x:e} {y:e}");
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_seconds: f64,
    /// SHA-256 of every data file, by name.
    pub files: BTreeMap<String, String>,
    /// SHA-256 over the sorted `name  digest` lines of `files`.
    pub data_sha256: String,
}

fn data_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

impl Manifest {
    /// Hashes every file under `dir` except the manifest itself.
    pub fn collect(
        dir: &Path,
        subcommand: &str,
        config_text: &str,
        seed: u64,
        workers: usize,
        wall_time_seconds: f64,
    ) -> Result<Self> {
        let mut files = BTreeMap::new();
        for path in data_files(dir)? {
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let name = path
                .strip_prefix(dir)
                .unwrap_or(&path)
                .to_string_lossy()
                .replace('\\', "/");
            files.insert(name, sha256_hex(&bytes));
        }
        let listing: String = files.iter().map(|(n, h)| format!("{n}  {h}\n")).collect();
        Ok(Self {
            tool: "betagas".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            seed,
            workers,
            wall_time_seconds,
            data_sha256: sha256_hex(listing.as_bytes()),
            files,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }
}
