//! On-disk formats: trace CSV, certificate JSON and audit JSON.
//!
//! Every float is written with 17 significant digits, so files round-trip
//! exactly and identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use serde_json::Value;

use riemopt::certificates::{AuditReport, BoundCertificate, BoundCheck, CertificateOutcome, InputsEcho};
use riemopt::solvers::Trace;

/// A float serialized as a JSON number with 17 significant digits; non-finite
/// values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let text = if self.0.is_finite() { fmt17(self.0) } else { "null".to_string() };
        RawValue::from_string(text)
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

pub const TRACE_HEADER: [&str; 6] = ["k", "f_value", "step_t", "dir_norm", "dist_to_opt", "f_gap"];

pub fn trace_csv(trace: &Trace) -> String {
    let mut out = String::new();
    out.push_str(&TRACE_HEADER.join(","));
    let width = trace.records.first().map_or(0, |r| r.point.as_slice().len());
    for i in 0..width {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
    for r in &trace.records {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            r.k,
            fmt17(r.f_value),
            fmt17(r.step_t),
            fmt17(r.dir_norm),
            opt(r.dist_to_opt),
            opt(r.f_gap)
        );
        for x in r.point.as_slice() {
            out.push(',');
            out.push_str(&fmt17(*x));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
pub struct InputsJson {
    pub constant_name: String,
    pub constant: F17,
    pub dist0: F17,
    pub gap0: F17,
    pub f_star: F17,
    pub oracle_residual: F17,
}

impl From<&InputsEcho> for InputsJson {
    fn from(i: &InputsEcho) -> Self {
        InputsJson {
            constant_name: i.constant_name.clone(),
            constant: F17(i.constant),
            dist0: F17(i.dist0),
            gap0: F17(i.gap0),
            f_star: F17(i.f_star),
            oracle_residual: F17(i.oracle_residual),
        }
    }
}

#[derive(Serialize)]
pub struct CheckJson {
    pub label: String,
    pub lhs: F17,
    pub rhs: F17,
    pub margin: F17,
    pub tol: F17,
    pub holds: bool,
}

impl From<&BoundCheck> for CheckJson {
    fn from(c: &BoundCheck) -> Self {
        CheckJson {
            label: c.label.clone(),
            lhs: F17(c.lhs),
            rhs: F17(c.rhs),
            margin: F17(c.margin),
            tol: F17(c.tol),
            holds: c.holds,
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CertificateJson {
    Certified {
        theorem_id: String,
        n: usize,
        lhs: F17,
        rhs: F17,
        margin: F17,
        tol: F17,
        holds: bool,
        inputs: InputsJson,
        extra_checks: Vec<CheckJson>,
        diagnostics: BTreeMap<String, F17>,
    },
    NotApplicable {
        theorem_id: String,
        reason: String,
    },
}

impl From<&BoundCertificate> for CertificateJson {
    fn from(c: &BoundCertificate) -> Self {
        CertificateJson::Certified {
            theorem_id: c.theorem_id.to_string(),
            n: c.n,
            lhs: F17(c.lhs),
            rhs: F17(c.rhs),
            margin: F17(c.margin),
            tol: F17(c.tol),
            holds: c.holds,
            inputs: (&c.inputs).into(),
            extra_checks: c.extra_checks.iter().map(Into::into).collect(),
            diagnostics: c.diagnostics.iter().map(|(k, v)| (k.clone(), F17(*v))).collect(),
        }
    }
}

impl From<&CertificateOutcome> for CertificateJson {
    fn from(o: &CertificateOutcome) -> Self {
        match o {
            CertificateOutcome::Certified(c) => c.into(),
            CertificateOutcome::NotApplicable { theorem_id, reason } => CertificateJson::NotApplicable {
                theorem_id: theorem_id.to_string(),
                reason: reason.clone(),
            },
        }
    }
}

#[derive(Serialize)]
pub struct AuditJson {
    pub suite_id: String,
    pub samples: usize,
    pub violations: usize,
    pub errors: usize,
    /// `null` when nothing was sampled.
    pub worst_margin: F17,
    pub seed: u64,
    pub passed: bool,
}

impl From<&AuditReport> for AuditJson {
    fn from(r: &AuditReport) -> Self {
        AuditJson {
            suite_id: r.suite_id.as_str().to_string(),
            samples: r.samples,
            violations: r.violations,
            errors: r.errors,
            worst_margin: F17(r.worst_margin),
            seed: r.seed,
            passed: r.passed(),
        }
    }
}

#[derive(Serialize)]
pub struct ManifoldJson {
    pub kind: String,
    pub dim: usize,
}

#[derive(Serialize)]
pub struct CertificateFile {
    pub schema_version: u64,
    pub experiment_id: String,
    pub objective_id: String,
    pub manifold: ManifoldJson,
    pub method: String,
    pub terminated_reason: String,
    pub n: usize,
    pub wall_time_ms: F17,
    pub oracle_provenance: Option<String>,
    pub certificates: Vec<CertificateJson>,
    pub prefix_audits: Vec<PrefixAuditJson>,
    pub trace_audits: Vec<AuditJson>,
    pub passed: bool,
    pub config: Value,
}

#[derive(Serialize)]
pub struct PrefixAuditJson {
    pub theorem_id: String,
    #[serde(flatten)]
    pub report: AuditJson,
}

#[derive(Serialize)]
pub struct AuditEntryJson {
    pub experiment_id: String,
    pub objective_id: String,
    pub manifold: ManifoldJson,
    pub reports: Vec<AuditJson>,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct AuditFile {
    pub schema_version: u64,
    pub seed: u64,
    pub samples: usize,
    pub tol: F17,
    pub experiments: Vec<AuditEntryJson>,
    pub passed: bool,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types always serialize");
    s.push('\n');
    s
}
