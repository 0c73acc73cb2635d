//! Summary tables built from certificate files.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::output::fmt17;
use crate::CliError;

pub const SUMMARY_HEADER: &str = "experiment_id,theorem_id,N,lhs,rhs,margin,holds,wall_time_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment_id: String,
    pub theorem_id: String,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
    pub wall_time_ms: f64,
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn malformed(path: &Path, what: &str) -> CliError {
    CliError::Config(format!("{}: not a certificate file ({what})", path.display()))
}

/// One row per certified theorem in a certificate file.
pub fn rows_from_certificate(text: &str, path: &Path) -> Result<Vec<SummaryRow>, CliError> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", path.display())))?;
    let id = v["experiment_id"]
        .as_str()
        .ok_or_else(|| malformed(path, "missing experiment_id"))?;
    let certs = v["certificates"]
        .as_array()
        .ok_or_else(|| malformed(path, "missing certificates"))?;
    let wall = num(&v["wall_time_ms"]);
    let mut rows = Vec::new();
    for c in certs {
        if c["status"] != "certified" {
            continue;
        }
        rows.push(SummaryRow {
            experiment_id: id.to_string(),
            theorem_id: c["theorem_id"]
                .as_str()
                .ok_or_else(|| malformed(path, "missing theorem_id"))?
                .to_string(),
            n: c["n"].as_u64().ok_or_else(|| malformed(path, "missing n"))? as usize,
            lhs: num(&c["lhs"]),
            rhs: num(&c["rhs"]),
            margin: num(&c["margin"]),
            holds: c["holds"].as_bool().ok_or_else(|| malformed(path, "missing holds"))?,
            wall_time_ms: wall,
        });
    }
    Ok(rows)
}

/// Reads every path, then sorts rows by `(theorem_id, experiment_id)`.
pub fn collect_rows(paths: &[PathBuf]) -> Result<Vec<SummaryRow>, CliError> {
    let mut rows = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Io {
            path: p.clone(),
            source: e,
        })?;
        rows.extend(rows_from_certificate(&text, p)?);
    }
    rows.sort_by(|a, b| {
        (&a.theorem_id, &a.experiment_id, a.n).cmp(&(&b.theorem_id, &b.experiment_id, b.n))
    });
    Ok(rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.experiment_id,
            r.theorem_id,
            r.n,
            fmt17(r.lhs),
            fmt17(r.rhs),
            fmt17(r.margin),
            r.holds,
            fmt17(r.wall_time_ms)
        ));
    }
    out
}
