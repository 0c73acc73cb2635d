//! Executing experiments: solver run, certificates, audits and file output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use riemopt::certificates::{
    audit_trace, certify_all, check_prefix_monotonicity, run_audit_suites, AuditReport,
    CertificateOutcome, CertifyOptions, TheoremId, CERT_REL_TOL,
};
use riemopt::objectives::Objective;
use riemopt::solvers::{run, Termination, Trace};

use crate::config::{build, build_objective, output_paths, ConfigFile, LoadedExperiment, SCHEMA_VERSION};
use crate::output::{
    to_json, trace_csv, AuditEntryJson, AuditFile, AuditJson, CertificateFile, ManifoldJson,
    PrefixAuditJson, F17,
};
use crate::CliError;

/// Default relative tolerance for certificates and audits.
pub const DEFAULT_TOL: f64 = CERT_REL_TOL;
pub const DEFAULT_AUDIT_SAMPLES: usize = 1000;
/// Random prefixes re-certified per run for the value-rate theorems.
pub const PREFIX_SAMPLES: usize = 10;

/// Tolerances in effect for one experiment.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub certificate_rel_tol: f64,
    pub audit_tol: f64,
}

impl Tolerances {
    pub fn global(tol: f64) -> Self {
        Tolerances {
            certificate_rel_tol: tol,
            audit_tol: tol,
        }
    }

    fn for_experiment(self, e: &LoadedExperiment) -> Self {
        let o = e.config.tol_overrides.clone().unwrap_or_default();
        Tolerances {
            certificate_rel_tol: o.certificate_rel_tol.unwrap_or(self.certificate_rel_tol),
            audit_tol: o.audit_tol.unwrap_or(self.audit_tol),
        }
    }
}

/// In-memory result of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub id: String,
    pub trace: Trace,
    pub certificates: Vec<CertificateOutcome>,
    pub prefix_audits: Vec<(TheoremId, AuditReport)>,
    pub trace_audits: Vec<AuditReport>,
    pub audits: Option<Vec<AuditReport>>,
    pub wall_time_ms: f64,
    pub trace_path: PathBuf,
    pub certificate_path: PathBuf,
    pub audit_path: Option<PathBuf>,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.certificates.iter().all(CertificateOutcome::passed)
            && self.prefix_audits.iter().all(|(_, r)| r.passed())
            && self.trace_audits.iter().all(AuditReport::passed)
            && self.audits.as_ref().is_none_or(|a| a.iter().all(AuditReport::passed))
    }
}

fn manifold_json(e: &LoadedExperiment) -> ManifoldJson {
    ManifoldJson {
        kind: e.config.manifold.kind.to_string(),
        dim: e.config.manifold.dim,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run_error(e: &LoadedExperiment, err: riemopt::Error) -> CliError {
    let at = if e.location.is_empty() {
        e.config.id.clone()
    } else {
        format!("{} ({})", e.location, e.config.id)
    };
    CliError::Config(format!("{at}: {err}"))
}

/// Runs one experiment and writes its trace, certificate and audit files.
pub fn run_experiment(
    e: &LoadedExperiment,
    base_dir: &Path,
    tol: Tolerances,
) -> Result<ExperimentResult, CliError> {
    let tol = tol.for_experiment(e);
    let built = build(e)?;
    let paths = output_paths(&e.config, base_dir);
    let opts = CertifyOptions {
        rel_tol: tol.certificate_rel_tol,
    };

    let start = Instant::now();
    let trace = run(&built.objective, &built.p0, &built.solver).map_err(|err| run_error(e, err))?;
    let certificates = certify_all(&trace, &opts);
    let mut prefix_audits = Vec::new();
    for c in &certificates {
        let th = c.theorem_id();
        let monotone = matches!(th, TheoremId::GradValueRate | TheoremId::ProxValueRate);
        if let (true, CertificateOutcome::Certified(_)) = (monotone, c) {
            let r = check_prefix_monotonicity(&trace, th, PREFIX_SAMPLES, &opts)
                .map_err(|err| run_error(e, err))?;
            prefix_audits.push((th, r));
        }
    }
    let usable = !matches!(
        trace.terminated_reason,
        Termination::DomainExit | Termination::NumericalFailure
    );
    let trace_audits = if usable {
        audit_trace(&trace, &built.objective, tol.audit_tol).map_err(|err| run_error(e, err))?
    } else {
        Vec::new()
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let audits = if e.config.outputs.audit {
        let samples = e.config.outputs.audit_samples.unwrap_or(DEFAULT_AUDIT_SAMPLES);
        Some(
            run_audit_suites(&built.objective, built.solver.seed, samples, tol.audit_tol)
                .map_err(|err| run_error(e, err))?,
        )
    } else {
        None
    };

    let result = ExperimentResult {
        id: e.config.id.clone(),
        trace,
        certificates,
        prefix_audits,
        trace_audits,
        audits,
        wall_time_ms,
        trace_path: paths.trace,
        certificate_path: paths.certificate,
        audit_path: paths.audit,
    };

    write_file(&result.trace_path, &trace_csv(&result.trace))?;
    let file = CertificateFile {
        schema_version: SCHEMA_VERSION,
        experiment_id: result.id.clone(),
        objective_id: built.objective.id().to_string(),
        manifold: manifold_json(e),
        method: result.trace.config.method.name().to_string(),
        terminated_reason: result.trace.terminated_reason.to_string(),
        n: result.trace.n(),
        wall_time_ms: F17(result.wall_time_ms),
        oracle_provenance: built.oracle_provenance.clone(),
        certificates: result.certificates.iter().map(Into::into).collect(),
        prefix_audits: result
            .prefix_audits
            .iter()
            .map(|(th, r)| PrefixAuditJson {
                theorem_id: th.to_string(),
                report: r.into(),
            })
            .collect(),
        trace_audits: result.trace_audits.iter().map(Into::into).collect(),
        passed: result.passed(),
        config: e.raw.clone(),
    };
    write_file(&result.certificate_path, &to_json(&file))?;
    if let (Some(path), Some(reports)) = (&result.audit_path, &result.audits) {
        let samples = e.config.outputs.audit_samples.unwrap_or(DEFAULT_AUDIT_SAMPLES);
        let audit = AuditFile {
            schema_version: SCHEMA_VERSION,
            seed: built.solver.seed,
            samples,
            tol: F17(tol.audit_tol),
            experiments: vec![audit_entry(e, &built.objective, reports)],
            passed: reports.iter().all(AuditReport::passed),
        };
        write_file(path, &to_json(&audit))?;
    }
    Ok(result)
}

fn audit_entry(e: &LoadedExperiment, f: &dyn Objective, reports: &[AuditReport]) -> AuditEntryJson {
    AuditEntryJson {
        experiment_id: e.config.id.clone(),
        objective_id: f.id().to_string(),
        manifold: manifold_json(e),
        reports: reports.iter().map(AuditJson::from).collect(),
        passed: reports.iter().all(AuditReport::passed),
    }
}

fn check_distinct_outputs(file: &ConfigFile) -> Result<(), CliError> {
    let base = file.base_dir();
    let mut seen = std::collections::BTreeMap::new();
    for e in &file.experiments {
        let p = output_paths(&e.config, &base);
        for path in [Some(p.trace), Some(p.certificate), p.audit].into_iter().flatten() {
            if let Some(other) = seen.insert(path.clone(), e.config.id.clone()) {
                return Err(CliError::Config(format!(
                    "{}: output path {} is also used by {other}",
                    e.config.id,
                    path.display()
                )));
            }
        }
    }
    Ok(())
}

/// Runs every experiment of a config file concurrently. All experiments are
/// validated before any of them starts.
pub fn run_config(file: &ConfigFile, tol: Tolerances) -> Result<Vec<ExperimentResult>, CliError> {
    check_distinct_outputs(file)?;
    for e in &file.experiments {
        build(e)?;
    }
    let base = file.base_dir();
    let results: Vec<Result<ExperimentResult, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = file
            .experiments
            .iter()
            .map(|e| s.spawn(|| run_experiment(e, &base, tol)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

/// Audit suites for every experiment's objective; writes `out` when given
/// and returns the report JSON.
pub fn audit_config(
    file: &ConfigFile,
    seed: u64,
    samples: usize,
    tol: f64,
    out: Option<&Path>,
) -> Result<(bool, String), CliError> {
    if samples == 0 {
        return Err(CliError::Config("invalid argument: --samples must be >= 1".into()));
    }
    let built = file
        .experiments
        .iter()
        .map(|e| build_objective(e).map(|(_, f)| (e, f)))
        .collect::<Result<Vec<_>, _>>()?;
    let reports: Vec<Result<Vec<AuditReport>, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = built
            .iter()
            .map(|(e, f)| {
                s.spawn(move || {
                    let t = Tolerances::global(tol).for_experiment(e).audit_tol;
                    run_audit_suites(f, seed, samples, t).map_err(|err| run_error(e, err))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("audit thread panicked"))
            .collect()
    });
    let mut entries = Vec::new();
    for ((e, f), r) in built.iter().zip(reports) {
        entries.push(audit_entry(e, f, &r?));
    }
    let passed = entries.iter().all(|e| e.passed);
    let json = to_json(&AuditFile {
        schema_version: SCHEMA_VERSION,
        seed,
        samples,
        tol: F17(tol),
        experiments: entries,
        passed,
    });
    if let Some(path) = out {
        write_file(path, &json)?;
    }
    Ok((passed, json))
}
