//! Result documents and atomic file output.
//!
//! JSON results echo the merged configuration and are byte-identical for
//! identical config + version, modulo the wall-time field. CSV uses RFC
//! quoting with a fixed column order and 17 significant digits.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Serialize)]
pub struct ResultDocument<T: Serialize> {
    pub command: String,
    pub config: ExperimentConfig,
    #[serde(flatten)]
    pub payload: T,
    pub version: String,
    pub wall_time_ms: f64,
}

impl<T: Serialize> ResultDocument<T> {
    pub fn new(command: &str, config: &ExperimentConfig, payload: T, started: std::time::Instant) -> Self {
        ResultDocument {
            command: command.into(),
            config: config.clone(),
            payload,
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

/// One bound state in the JSON schema.
#[derive(Serialize)]
pub struct StateRecord {
    pub k: usize,
    pub e_old: Option<f64>,
    pub e_star: f64,
    pub kind: String,
    pub bracket: [f64; 2],
    pub residual: f64,
}

impl From<&deltaspec::krein::BoundState> for StateRecord {
    fn from(s: &deltaspec::krein::BoundState) -> Self {
        StateRecord {
            k: s.label,
            e_old: s.old_energy,
            e_star: s.energy,
            kind: match s.kind {
                deltaspec::krein::BoundStateKind::Shifted => "shifted".into(),
                deltaspec::krein::BoundStateKind::UnchangedNode => "unchanged-node".into(),
            },
            bracket: [s.bracket.0, s.bracket.1],
            residual: s.residual,
        }
    }
}

/// Resolve `path` against the output directory when it is relative.
pub fn resolve(path: &Path, outdir: Option<&Path>) -> PathBuf {
    match outdir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::fs::write(tmp.path(), contents)?;
    tmp.persist(path)
        .with_context(|| format!("cannot persist output {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    write_atomic(path, &text)
}

/// Format a float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write CSV rows with a header, RFC quoting, fixed column order.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_float(*v)))?;
    }
    let bytes = w.into_inner()?;
    write_atomic(path, std::str::from_utf8(&bytes)?)
}
