//! Experiment configuration files.
//!
//! A config file is a JSON object with a `schema_version` field and either an
//! `experiments` list or the fields of a single experiment inline.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;

use riemopt::certificates::{reference_optimum, ReferenceOptions};
use riemopt::objectives::{
    distance_objective, fermat_weber_objective, karcher_objective, squared_distance_objective,
    AnchorObjective, AnchorSet, Objective, Optimum,
};
use riemopt::solvers::{GradientStep, InnerSolver, Method, Schedule, SolverConfig, SubgradientStep};
use riemopt::{make_manifold, Geometry, Manifold, ManifoldKind, Point};

use crate::CliError;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    SquaredDistance,
    Distance,
    Karcher,
    FermatWeber,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OracleSpec {
    Given {
        point: Vec<f64>,
        f_star: f64,
        #[serde(default)]
        residual: f64,
        #[serde(default)]
        provenance: Option<String>,
    },
    /// `"reference"`: computed before the run by grid search and refinement.
    Computed(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub anchors: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Missing or null means unbounded.
    #[serde(default)]
    pub domain_radius: Option<f64>,
    #[serde(default)]
    pub oracle_optimum: Option<OracleSpec>,
    /// Replaces the declared gradient Lipschitz constant.
    #[serde(default)]
    pub grad_lipschitz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Gradient,
    Subgradient,
    ProximalPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    InvSqrt,
    Harmonic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSpec {
    ConstantInvL,
    FixedSequence {
        steps: Vec<f64>,
    },
    Exogenous {
        schedule: ScheduleKind,
        alpha0: f64,
    },
    Polyak {
        #[serde(default)]
        f_star: Option<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerSpec {
    pub eps: f64,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
}

fn default_max_inner() -> usize {
    InnerSolver::default().max_inner
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub method: MethodName,
    #[serde(default)]
    pub step: Option<StepSpec>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub lambda_cap: Option<f64>,
    #[serde(default)]
    pub inner: Option<InnerSpec>,
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub relaxed: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Coords(Vec<f64>),
    /// `"random(<seed>)"`: a seeded draw from the objective's domain.
    Random(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub trace_path: Option<String>,
    #[serde(default)]
    pub certificate_path: Option<String>,
    #[serde(default)]
    pub audit: bool,
    #[serde(default)]
    pub audit_path: Option<String>,
    #[serde(default)]
    pub audit_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolOverrides {
    #[serde(default)]
    pub certificate_rel_tol: Option<f64>,
    #[serde(default)]
    pub audit_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub manifold: ManifoldSpec,
    pub objective: ObjectiveSpec,
    pub solver: SolverSpec,
    pub p0: StartSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub tol_overrides: Option<TolOverrides>,
}

/// One experiment as read from disk, with its raw JSON for the config echo.
#[derive(Debug, Clone)]
pub struct LoadedExperiment {
    pub config: ExperimentConfig,
    pub raw: Value,
    /// Location prefix for diagnostics, e.g. `experiments[2]`.
    pub location: String,
}

#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub path: PathBuf,
    pub experiments: Vec<LoadedExperiment>,
}

impl ConfigFile {
    /// Directory that relative output paths resolve against.
    pub fn base_dir(&self) -> PathBuf {
        self.path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn field_error(location: &str, field: &str, msg: impl std::fmt::Display) -> CliError {
    let at = match (location.is_empty(), field.is_empty()) {
        (true, _) => field.to_string(),
        (false, true) => location.to_string(),
        (false, false) => format!("{location}.{field}"),
    };
    CliError::Config(format!("{at}: {msg}"))
}

fn parse_experiment(value: Value, location: String) -> Result<LoadedExperiment, CliError> {
    let config: ExperimentConfig = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { String::new() } else { path };
        field_error(&location, &field, e.inner())
    })?;
    Ok(LoadedExperiment {
        config,
        raw: value,
        location,
    })
}

pub fn parse_config(text: &str, path: &Path) -> Result<ConfigFile, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", path.display())))?;
    let Value::Object(mut obj) = value else {
        return Err(CliError::Config(format!(
            "{}: top level must be a JSON object",
            path.display()
        )));
    };
    match obj.remove("schema_version") {
        None => return Err(field_error("", "schema_version", "missing field")),
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(field_error(
                "",
                "schema_version",
                format!("unsupported version {other}; expected {SCHEMA_VERSION}"),
            ))
        }
    }
    let experiments = match obj.remove("experiments") {
        Some(Value::Array(list)) => {
            if let Some(key) = obj.keys().next() {
                return Err(field_error("", key, "unknown top-level field next to `experiments`"));
            }
            list.into_iter()
                .enumerate()
                .map(|(i, v)| parse_experiment(v, format!("experiments[{i}]")))
                .collect::<Result<Vec<_>, _>>()?
        }
        Some(_) => return Err(field_error("", "experiments", "expected a list")),
        None => vec![parse_experiment(Value::Object(obj), String::new())?],
    };
    let file = ConfigFile {
        path: path.to_path_buf(),
        experiments,
    };
    validate_ids(&file)?;
    Ok(file)
}

pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text, path)
}

fn validate_ids(file: &ConfigFile) -> Result<(), CliError> {
    let mut seen = std::collections::BTreeSet::new();
    for e in &file.experiments {
        let id = &e.config.id;
        let ok = !id.is_empty()
            && id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if !ok {
            return Err(field_error(
                &e.location,
                "id",
                format!("{id:?} must be non-empty and use only [A-Za-z0-9._-]"),
            ));
        }
        if !seen.insert(id.clone()) {
            return Err(field_error(&e.location, "id", format!("duplicate id {id:?}")));
        }
    }
    Ok(())
}

/// Everything needed to execute one experiment.
pub struct Built {
    pub manifold: Manifold,
    pub objective: AnchorObjective,
    pub solver: SolverConfig,
    pub p0: Point,
    pub oracle_provenance: Option<String>,
}

fn build_point(m: &Manifold, coords: &[f64], location: &str, field: &str) -> Result<Point, CliError> {
    let want = m.descriptor().ambient_len();
    if coords.len() != want {
        return Err(field_error(
            location,
            field,
            format!("expected {want} coordinates for {}, got {}", m.descriptor(), coords.len()),
        ));
    }
    m.point(coords.to_vec())
        .map_err(|e| field_error(location, field, e))
}

/// Manifold and objective only; used by the audit command.
pub fn build_objective(e: &LoadedExperiment) -> Result<(Manifold, AnchorObjective), CliError> {
    let c = &e.config;
    let loc = e.location.as_str();
    let m = make_manifold(c.manifold.kind, c.manifold.dim)
        .map_err(|err| field_error(loc, "manifold", err))?;
    let o = &c.objective;
    if o.anchors.is_empty() {
        return Err(field_error(loc, "objective.anchors", "at least one anchor is required"));
    }
    let anchors = o
        .anchors
        .iter()
        .enumerate()
        .map(|(i, a)| build_point(&m, a, loc, &format!("objective.anchors[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let radius = o.domain_radius.unwrap_or(f64::INFINITY);
    let set = match &o.weights {
        Some(w) => AnchorSet::new(anchors.clone(), w.clone())
            .map_err(|err| field_error(loc, "objective.weights", err))?,
        None => AnchorSet::unit(anchors.clone())
            .map_err(|err| field_error(loc, "objective.anchors", err))?,
    };
    let single = |kind: &str| -> Result<Point, CliError> {
        if anchors.len() != 1 {
            return Err(field_error(
                loc,
                "objective.anchors",
                format!("{kind} takes exactly one anchor, got {}", anchors.len()),
            ));
        }
        Ok(anchors[0].clone())
    };
    let built = match o.kind {
        ObjectiveKind::SquaredDistance => {
            let q = single("squared_distance")?;
            if o.weights.is_some() {
                karcher_objective(&m, set, radius)
                    .map(|f| f.with_known_optimum(Optimum::exact(q.clone(), 0.0)))
            } else {
                squared_distance_objective(&m, q, radius)
            }
        }
        ObjectiveKind::Distance => {
            let q = single("distance")?;
            if o.weights.is_some() {
                fermat_weber_objective(&m, set, radius)
                    .map(|f| f.with_known_optimum(Optimum::exact(q.clone(), 0.0)))
            } else {
                distance_objective(&m, q, radius)
            }
        }
        ObjectiveKind::Karcher => karcher_objective(&m, set, radius),
        ObjectiveKind::FermatWeber => fermat_weber_objective(&m, set, radius),
    };
    let mut f = built.map_err(|err| field_error(loc, "objective", err))?;
    if let Some(l) = o.grad_lipschitz {
        if !(l > 0.0 && l.is_finite()) {
            return Err(field_error(loc, "objective.grad_lipschitz", "must be positive and finite"));
        }
        f = f.with_grad_lipschitz(l);
    }
    Ok((m, f.with_id(c.id.clone())))
}

fn positive(x: f64, loc: &str, field: &str) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(field_error(loc, field, format!("{x} must be positive and finite")))
    }
}

fn build_method(s: &SolverSpec, loc: &str) -> Result<Method, CliError> {
    let rule_mismatch = |rule: &str| {
        field_error(
            loc,
            "solver.step.rule",
            format!("rule {rule} does not match method {:?}", s.method),
        )
    };
    match s.method {
        MethodName::Gradient => match &s.step {
            None | Some(StepSpec::ConstantInvL) => Ok(Method::Gradient(GradientStep::ConstantInvL)),
            Some(StepSpec::FixedSequence { steps }) => {
                if steps.is_empty() {
                    return Err(field_error(loc, "solver.step.steps", "must not be empty"));
                }
                for (i, &t) in steps.iter().enumerate() {
                    positive(t, loc, &format!("solver.step.steps[{i}]"))?;
                }
                Ok(Method::Gradient(GradientStep::FixedSequence(steps.clone())))
            }
            Some(StepSpec::Exogenous { .. }) => Err(rule_mismatch("exogenous")),
            Some(StepSpec::Polyak { .. }) => Err(rule_mismatch("polyak")),
        },
        MethodName::Subgradient => match &s.step {
            None => Err(field_error(loc, "solver.step", "subgradient method needs a step rule")),
            Some(StepSpec::Exogenous { schedule, alpha0 }) => {
                let a = positive(*alpha0, loc, "solver.step.alpha0")?;
                let sched = match schedule {
                    ScheduleKind::Constant => Schedule::Constant(a),
                    ScheduleKind::InvSqrt => Schedule::InvSqrt(a),
                    ScheduleKind::Harmonic => Schedule::Harmonic(a),
                };
                Ok(Method::Subgradient(SubgradientStep::Exogenous(sched)))
            }
            Some(StepSpec::Polyak { f_star }) => {
                Ok(Method::Subgradient(SubgradientStep::Polyak { f_star: *f_star }))
            }
            Some(StepSpec::ConstantInvL) => Err(rule_mismatch("constant_inv_l")),
            Some(StepSpec::FixedSequence { .. }) => Err(rule_mismatch("fixed_sequence")),
        },
        MethodName::ProximalPoint => {
            if s.step.is_some() {
                return Err(field_error(loc, "solver.step", "proximal point method takes lambda, not a step rule"));
            }
            let lambda = s
                .lambda
                .ok_or_else(|| field_error(loc, "solver.lambda", "missing for proximal_point"))?;
            let lambda = positive(lambda, loc, "solver.lambda")?;
            let cap = positive(s.lambda_cap.unwrap_or(lambda), loc, "solver.lambda_cap")?;
            Ok(Method::ProximalPoint { lambda, cap })
        }
    }
}

fn parse_random_seed(s: &str) -> Option<u64> {
    s.trim()
        .strip_prefix("random(")?
        .strip_suffix(')')?
        .trim()
        .parse()
        .ok()
}

/// Builds manifold, objective, solver config and start point.
pub fn build(e: &LoadedExperiment) -> Result<Built, CliError> {
    let c = &e.config;
    let loc = e.location.as_str();
    let (m, f) = build_objective(e)?;

    let method = build_method(&c.solver, loc)?;
    if c.solver.max_iters < 1 {
        return Err(field_error(loc, "solver.max_iters", "must be >= 1"));
    }
    let mut solver = SolverConfig::new(method, c.solver.max_iters)
        .with_seed(c.solver.seed)
        .relaxed(c.solver.relaxed);
    if let Some(inner) = &c.solver.inner {
        if c.solver.method != MethodName::ProximalPoint {
            return Err(field_error(loc, "solver.inner", "only the proximal point method uses an inner solver"));
        }
        positive(inner.eps, loc, "solver.inner.eps")?;
        if inner.max_inner < 1 {
            return Err(field_error(loc, "solver.inner.max_inner", "must be >= 1"));
        }
        solver = solver.with_inner(InnerSolver {
            eps: inner.eps,
            max_inner: inner.max_inner,
        });
    }

    let mut oracle_provenance = None;
    match &c.objective.oracle_optimum {
        None => {}
        Some(OracleSpec::Given {
            point,
            f_star,
            residual,
            provenance,
        }) => {
            let p = build_point(&m, point, loc, "objective.oracle_optimum.point")?;
            if !f_star.is_finite() || !(*residual >= 0.0 && residual.is_finite()) {
                return Err(field_error(
                    loc,
                    "objective.oracle_optimum",
                    "f_star must be finite and residual finite and >= 0",
                ));
            }
            solver = solver.with_optimum(Optimum {
                point: p,
                f_star: *f_star,
                residual: *residual,
            });
            oracle_provenance = provenance.clone();
        }
        Some(OracleSpec::Computed(s)) if s == "reference" => {
            let opt = reference_optimum(&f, &ReferenceOptions::default())
                .map_err(|err| field_error(loc, "objective.oracle_optimum", err))?;
            solver = solver.with_optimum(opt);
            oracle_provenance = Some("reference: grid search and fixed-point refinement".into());
        }
        Some(OracleSpec::Computed(s)) => {
            return Err(field_error(
                loc,
                "objective.oracle_optimum",
                format!("expected an object or \"reference\", got {s:?}"),
            ))
        }
    }

    let p0 = match &c.p0 {
        StartSpec::Coords(x) => build_point(&m, x, loc, "p0")?,
        StartSpec::Random(s) => {
            let seed = parse_random_seed(s).ok_or_else(|| {
                field_error(loc, "p0", format!("expected coordinates or \"random(<seed>)\", got {s:?}"))
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            f.domain()
                .sample(&m, 1.0, &mut rng)
                .map_err(|err| field_error(loc, "p0", err))?
        }
    };
    Ok(Built {
        manifold: m,
        objective: f,
        solver,
        p0,
        oracle_provenance,
    })
}

/// Output file locations for one experiment, relative paths resolved against `base`.
pub struct OutputPaths {
    pub trace: PathBuf,
    pub certificate: PathBuf,
    pub audit: Option<PathBuf>,
}

pub fn output_paths(e: &ExperimentConfig, base: &Path) -> OutputPaths {
    let resolve = |given: &Option<String>, suffix: &str| {
        let p = given
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(format!("{}.{suffix}", e.id)));
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    OutputPaths {
        trace: resolve(&e.outputs.trace_path, "trace.csv"),
        certificate: resolve(&e.outputs.certificate_path, "certificate.json"),
        audit: e
            .outputs
            .audit
            .then(|| resolve(&e.outputs.audit_path, "audit.json")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ConfigFile, CliError> {
        parse_config(text, Path::new("/tmp/x.json"))
    }

    const SPHERE: &str = r#"{
        "schema_version": 1,
        "id": "s",
        "manifold": {"kind": "sphere", "dim": 2},
        "objective": {"kind": "squared_distance", "anchors": [[0, 0, 1]], "domain_radius": 1.0},
        "solver": {"method": "gradient", "max_iters": 10},
        "p0": [0.6, 0, 0.8]
    }"#;

    #[test]
    fn single_experiment_form() {
        let cfg = parse(SPHERE).unwrap();
        assert_eq!(cfg.experiments.len(), 1);
        let b = build(&cfg.experiments[0]).unwrap();
        assert_eq!(b.solver.max_iters, 10);
        assert!(b.objective.known_optimum().is_some());
    }

    #[test]
    fn missing_schema_version() {
        let text = SPHERE.replace("\"schema_version\": 1,", "");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("schema_version"), "{err}");
    }

    #[test]
    fn errors_name_the_field() {
        let text = format!(
            r#"{{"schema_version": 1, "experiments": [{}, {}]}}"#,
            SPHERE.replace("\"schema_version\": 1,", ""),
            SPHERE
                .replace("\"schema_version\": 1,", "")
                .replace("\"id\": \"s\"", "\"id\": \"t\"")
                .replace("\"max_iters\": 10", "\"max_iters\": \"ten\"")
        );
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("experiments[1].solver.max_iters"), "{err}");
    }

    #[test]
    fn anchor_dimension_mismatch() {
        let cfg = parse(&SPHERE.replace("[[0, 0, 1]]", "[[0, 1]]")).unwrap();
        let err = build(&cfg.experiments[0]).err().unwrap().to_string();
        assert!(err.contains("objective.anchors[0]"), "{err}");
    }

    #[test]
    fn rule_must_match_method() {
        let text = SPHERE.replace(
            "\"method\": \"gradient\"",
            "\"method\": \"gradient\", \"step\": {\"rule\": \"polyak\"}",
        );
        let cfg = parse(&text).unwrap();
        let err = build(&cfg.experiments[0]).err().unwrap().to_string();
        assert!(err.contains("solver.step.rule"), "{err}");
    }

    #[test]
    fn random_start_is_seeded() {
        let text = SPHERE.replace("[0.6, 0, 0.8]", "\"random(3)\"");
        let cfg = parse(&text).unwrap();
        let a = build(&cfg.experiments[0]).unwrap().p0;
        let b = build(&cfg.experiments[0]).unwrap().p0;
        assert_eq!(a, b);
        assert_eq!(parse_random_seed("random( 17 )"), Some(17));
        assert_eq!(parse_random_seed("random"), None);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let one = SPHERE.replace("\"schema_version\": 1,", "");
        let text = format!(r#"{{"schema_version": 1, "experiments": [{one}, {one}]}}"#);
        assert!(parse(&text).unwrap_err().to_string().contains("duplicate"));
    }
}
