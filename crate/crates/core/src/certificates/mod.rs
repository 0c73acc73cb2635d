//! Iteration-complexity certificates, sampled audit suites and reference optima.
//!
//! A [`BoundCertificate`] compares a quantity measured on a completed
//! [`Trace`] (`lhs`) against a worst-case bound (`rhs`) computed only from the
//! run's constants, its endpoints `p0`, `p*`, `f*`, the iteration count and
//! the step schedule.

mod audits;
mod reference;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use audits::{
    audit_trace, check_prefix_monotonicity, run_audit_suites, run_geometry_suites,
    run_objective_suites, run_solver_suites, AuditReport, AuditSuite,
};
pub use reference::{reference_optimum, ReferenceOptions};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::manifolds::Manifold;
use crate::objectives::Optimum;
use crate::solvers::{GradientStep, Method, SubgradientStep, Termination, Trace};

/// Relative part of the certificate tolerance: `tol = 1e-9 (1 + |rhs|)`.
pub const CERT_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    /// `min ‖grad f(p_k)‖ <= √(2L(f(p0) - f*) / (N+1))`
    GradNormSqrt,
    /// `f(p_N) - f* <= L d²(p*, p0) / (2N)`
    GradValueRate,
    /// `min ‖grad f(p_k)‖ <= √8 L d(p*, p0) / N`
    GradNormLinear,
    /// `min (f(p_k) - f*) <= τ (d²(p0, p*) + Σ α_k²) / (2 Σ α_k)`
    SubgradExogenous,
    /// `Σ (f(p_k) - f*)² <= τ² d²(p0, p*)` and `min (f(p_k) - f*) <= τ d(p0, p*) / √(N+1)`
    SubgradPolyak,
    /// `f(p_N) - f* <= λ d²(p*, p0) / (2(N+1))`
    ProxValueRate,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [
        TheoremId::GradNormSqrt,
        TheoremId::GradValueRate,
        TheoremId::GradNormLinear,
        TheoremId::SubgradExogenous,
        TheoremId::SubgradPolyak,
        TheoremId::ProxValueRate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::GradNormSqrt => "GradNormSqrt",
            TheoremId::GradValueRate => "GradValueRate",
            TheoremId::GradNormLinear => "GradNormLinear",
            TheoremId::SubgradExogenous => "SubgradExogenous",
            TheoremId::SubgradPolyak => "SubgradPolyak",
            TheoremId::ProxValueRate => "ProxValueRate",
        }
    }

    /// Theorems whose method matches the trace.
    pub fn for_method(method: &Method) -> &'static [TheoremId] {
        match method {
            Method::Gradient(GradientStep::ConstantInvL) => &[
                TheoremId::GradNormSqrt,
                TheoremId::GradValueRate,
                TheoremId::GradNormLinear,
            ],
            Method::Gradient(GradientStep::FixedSequence(_)) => &[],
            Method::Subgradient(SubgradientStep::Exogenous(_)) => &[TheoremId::SubgradExogenous],
            Method::Subgradient(SubgradientStep::Polyak { .. }) => &[TheoremId::SubgradPolyak],
            Method::ProximalPoint { .. } => &[TheoremId::ProxValueRate],
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single inequality `lhs <= rhs` checked with tolerance `tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tol: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn new(label: &str, lhs: f64, rhs: f64, tol: f64) -> BoundCheck {
        let margin = rhs - lhs;
        BoundCheck {
            label: label.to_string(),
            lhs,
            rhs,
            margin,
            tol,
            holds: margin >= -tol,
        }
    }
}

/// The run constants a certificate depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputsEcho {
    /// `"L"`, `"tau"` or `"lambda"`.
    pub constant_name: String,
    pub constant: f64,
    pub dist0: f64,
    pub gap0: f64,
    pub f_star: f64,
    pub oracle_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub theorem_id: TheoremId,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tol: f64,
    pub holds: bool,
    pub inputs: InputsEcho,
    /// Further inequalities of the same theorem; all must hold.
    pub extra_checks: Vec<BoundCheck>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl BoundCertificate {
    fn from_checks(
        theorem_id: TheoremId,
        n: usize,
        main: BoundCheck,
        extra_checks: Vec<BoundCheck>,
        inputs: InputsEcho,
    ) -> BoundCertificate {
        let holds = main.holds && extra_checks.iter().all(|c| c.holds);
        BoundCertificate {
            theorem_id,
            n,
            lhs: main.lhs,
            rhs: main.rhs,
            margin: main.margin,
            tol: main.tol,
            holds,
            inputs,
            extra_checks,
            diagnostics: BTreeMap::new(),
        }
    }
}

/// Result of attempting one theorem on one trace.
#[derive(Debug, Clone, PartialEq)]
pub enum CertificateOutcome {
    Certified(BoundCertificate),
    NotApplicable { theorem_id: TheoremId, reason: String },
}

impl CertificateOutcome {
    pub fn theorem_id(&self) -> TheoremId {
        match self {
            CertificateOutcome::Certified(c) => c.theorem_id,
            CertificateOutcome::NotApplicable { theorem_id, .. } => *theorem_id,
        }
    }

    /// Not-applicable outcomes count as passing.
    pub fn passed(&self) -> bool {
        match self {
            CertificateOutcome::Certified(c) => c.holds,
            CertificateOutcome::NotApplicable { .. } => true,
        }
    }
}

/// Options shared by all certificates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    /// Replaces the relative factor `1e-9` of `tol = 1e-9 (1 + |rhs|)`.
    pub rel_tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            rel_tol: CERT_REL_TOL,
        }
    }
}

/// Reference quantities common to all bounds.
struct Basis<'a> {
    n: usize,
    optimum: &'a Optimum,
    dist0: f64,
    gap0: f64,
}

fn base_tol(opts: &CertifyOptions, rhs: f64) -> f64 {
    opts.rel_tol * (1.0 + rhs.abs())
}

fn basis(trace: &Trace) -> Result<Basis<'_>> {
    if trace.records.is_empty() {
        return Err(Error::invalid("trace has no records"));
    }
    match trace.terminated_reason {
        Termination::DomainExit => {
            return Err(Error::not_applicable(
                "run left the objective domain; the declared constants do not cover it",
            ))
        }
        Termination::NumericalFailure => {
            return Err(Error::not_applicable("run ended in a numerical failure"))
        }
        _ => {}
    }
    let optimum = trace
        .constants
        .optimum
        .as_ref()
        .ok_or_else(|| Error::invalid("certificate needs p* and f*"))?;
    let m = Manifold::from_descriptor(trace.manifold)?;
    let p0 = &trace.initial().point;
    let dist0 = m.distance(p0, &optimum.point)?;
    let gap0 = trace.initial().f_value - optimum.f_star;
    Ok(Basis {
        n: trace.n(),
        optimum,
        dist0,
        gap0,
    })
}

fn gaps(trace: &Trace, f_star: f64) -> impl Iterator<Item = f64> + '_ {
    trace.records.iter().map(move |r| r.f_value - f_star)
}

fn min_dir_norm(trace: &Trace) -> f64 {
    trace
        .records
        .iter()
        .map(|r| r.dir_norm)
        .fold(f64::INFINITY, f64::min)
}

fn require_gradient_inv_l(trace: &Trace) -> Result<f64> {
    if trace.config.method != Method::Gradient(GradientStep::ConstantInvL) {
        return Err(Error::invalid("certificate needs a gradient run with t_k = 1/L"));
    }
    trace
        .constants
        .grad_lipschitz
        .ok_or_else(|| Error::invalid("certificate needs the gradient Lipschitz constant"))
}

fn require_nonnegative_curvature(trace: &Trace) -> Result<()> {
    if !trace.manifold.curvature.is_nonnegative() {
        return Err(Error::invalid(format!(
            "theorem needs non-negative curvature; {} has {:?}",
            trace.manifold, trace.manifold.curvature
        )));
    }
    Ok(())
}

fn require_positive_n(b: &Basis) -> Result<()> {
    if b.n < 1 {
        return Err(Error::invalid("bound needs N >= 1"));
    }
    Ok(())
}

fn echo(name: &str, constant: f64, b: &Basis) -> InputsEcho {
    InputsEcho {
        constant_name: name.to_string(),
        constant,
        dist0: b.dist0,
        gap0: b.gap0,
        f_star: b.optimum.f_star,
        oracle_residual: b.optimum.residual,
    }
}

pub fn certify_grad_norm_sqrt(trace: &Trace, opts: &CertifyOptions) -> Result<BoundCertificate> {
    let l = require_gradient_inv_l(trace)?;
    let b = basis(trace)?;
    let lhs = min_dir_norm(trace);
    let rhs = (2.0 * l * b.gap0.max(0.0) / (b.n + 1) as f64).sqrt();
    // f* enters under the square root; a residual r moves rhs by at most √(2Lr/(N+1)).
    let res = (2.0 * l * b.optimum.residual / (b.n + 1) as f64).sqrt();
    let check = BoundCheck::new("min_grad_norm", lhs, rhs, base_tol(opts, rhs) + res);
    Ok(BoundCertificate::from_checks(
        TheoremId::GradNormSqrt,
        b.n,
        check,
        vec![],
        echo("L", l, &b),
    ))
}

pub fn certify_grad_value_rate(trace: &Trace, opts: &CertifyOptions) -> Result<BoundCertificate> {
    let l = require_gradient_inv_l(trace)?;
    require_nonnegative_curvature(trace)?;
    let b = basis(trace)?;
    require_positive_n(&b)?;
    let lhs = trace.last().f_value - b.optimum.f_star;
    let rhs = l * b.dist0 * b.dist0 / (2 * b.n) as f64;
    let check = BoundCheck::new("final_gap", lhs, rhs, base_tol(opts, rhs) + b.optimum.residual);
    Ok(BoundCertificate::from_checks(
        TheoremId::GradValueRate,
        b.n,
        check,
        vec![],
        echo("L", l, &b),
    ))
}

pub fn certify_grad_norm_linear(trace: &Trace, opts: &CertifyOptions) -> Result<BoundCertificate> {
    let l = require_gradient_inv_l(trace)?;
    require_nonnegative_curvature(trace)?;
    let b = basis(trace)?;
    require_positive_n(&b)?;
    let n = b.n as f64;
    let lhs = min_dir_norm(trace);
    let rhs = 8f64.sqrt() * l * b.dist0 / n;
    let check = BoundCheck::new("min_grad_norm", lhs, rhs, base_tol(opts, rhs));
    let mut cert = BoundCertificate::from_checks(
        TheoremId::GradNormLinear,
        b.n,
        check,
        vec![],
        echo("L", l, &b),
    );
    // The argument behind the bound gives ⌈N/2⌉ m² <= 4 L² d² / N.
    let half = b.n.div_ceil(2) as f64;
    cert.diagnostics.insert(
        "proof_level_rhs".to_string(),
        2.0 * l * b.dist0 / (n * half).sqrt(),
    );
    Ok(cert)
}

fn require_subgradient(trace: &Trace) -> Result<f64> {
    require_nonnegative_curvature(trace)?;
    trace
        .constants
        .func_lipschitz
        .ok_or_else(|| Error::invalid("certificate needs the Lipschitz constant tau"))
}

pub fn certify_subgrad_exogenous(trace: &Trace, opts: &CertifyOptions) -> Result<BoundCertificate> {
    let Method::Subgradient(SubgradientStep::Exogenous(schedule)) = trace.config.method else {
        return Err(Error::invalid("certificate needs an exogenous subgradient run"));
    };
    let tau = require_subgradient(trace)?;
    let b = basis(trace)?;
    let lhs = gaps(trace, b.optimum.f_star).fold(f64::INFINITY, f64::min);
    let (sum, sum_sq) = schedule.sums(b.n);
    let rhs = tau * (b.dist0 * b.dist0 + sum_sq) / (2.0 * sum);
    let check = BoundCheck::new("min_gap", lhs, rhs, base_tol(opts, rhs) + b.optimum.residual);
    let mut cert = BoundCertificate::from_checks(
        TheoremId::SubgradExogenous,
        b.n,
        check,
        vec![],
        echo("tau", tau, &b),
    );
    cert.diagnostics.insert("sum_alpha".to_string(), sum);
    cert.diagnostics.insert("sum_alpha_sq".to_string(), sum_sq);
    if let crate::solvers::Schedule::Constant(a) = schedule {
        cert.diagnostics
            .insert("schedule_floor".to_string(), tau * a / 2.0);
    }
    Ok(cert)
}

pub fn certify_subgrad_polyak(trace: &Trace, opts: &CertifyOptions) -> Result<BoundCertificate> {
    let Method::Subgradient(SubgradientStep::Polyak { .. }) = trace.config.method else {
        return Err(Error::invalid("certificate needs a Polyak subgradient run"));
    };
    let tau = require_subgradient(trace)?;
    let b = basis(trace)?;
    let r = b.optimum.residual;
    let gaps: Vec<f64> = gaps(trace, b.optimum.f_star).collect();

    let sum_sq: f64 = gaps.iter().map(|g| g * g).sum();
    let rhs_sq = tau * tau * b.dist0 * b.dist0;
    // Shifting every gap by at most r moves Σ g² by at most 2rΣ|g| + (N+1)r².
    let res_sq = 2.0 * r * gaps.iter().map(|g| g.abs()).sum::<f64>() + (b.n + 1) as f64 * r * r;
    let main = BoundCheck::new("sum_sq_gap", sum_sq, rhs_sq, base_tol(opts, rhs_sq) + res_sq);

    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let rhs_min = tau * b.dist0 / ((b.n + 1) as f64).sqrt();
    let extra = BoundCheck::new("min_gap", min_gap, rhs_min, base_tol(opts, rhs_min) + r);

    Ok(BoundCertificate::from_checks(
        TheoremId::SubgradPolyak,
        b.n,
        main,
        vec![extra],
        echo("tau", tau, &b),
    ))
}

pub fn certify_prox_value_rate(trace: &Trace, opts: &CertifyOptions) -> Result<BoundCertificate> {
    let Method::ProximalPoint { cap, .. } = trace.config.method else {
        return Err(Error::invalid("certificate needs a proximal point run"));
    };
    if !trace.manifold.is_hadamard() {
        return Err(Error::invalid(format!(
            "theorem needs a Hadamard manifold, got {}",
            trace.manifold
        )));
    }
    let b = basis(trace)?;
    require_positive_n(&b)?;
    let lhs = trace.last().f_value - b.optimum.f_star;
    let rhs = cap * b.dist0 * b.dist0 / (2 * (b.n + 1)) as f64;

    let mut slack = b.optimum.residual;
    let mut max_step = 0.0f64;
    if !trace.constants.exact_prox {
        let m = Manifold::from_descriptor(trace.manifold)?;
        for w in trace.records.windows(2) {
            max_step = max_step.max(m.distance(&w[0].point, &w[1].point)?);
        }
        let eps = trace.config.inner.map(|i| i.eps).unwrap_or(0.0);
        slack += b.n as f64 * eps * max_step;
    }
    let check = BoundCheck::new("final_gap", lhs, rhs, base_tol(opts, rhs) + slack);
    let mut cert = BoundCertificate::from_checks(
        TheoremId::ProxValueRate,
        b.n,
        check,
        vec![],
        echo("lambda", cap, &b),
    );
    // Summing the per-step decrease over k < N gives N (f(p_N) - f*) <= λ d² / 2.
    cert.diagnostics.insert(
        "proof_level_rhs".to_string(),
        cap * b.dist0 * b.dist0 / (2 * b.n) as f64,
    );
    if !trace.constants.exact_prox {
        cert.diagnostics.insert("max_step".to_string(), max_step);
    }
    Ok(cert)
}

pub fn certify(theorem: TheoremId, trace: &Trace, opts: &CertifyOptions) -> Result<BoundCertificate> {
    match theorem {
        TheoremId::GradNormSqrt => certify_grad_norm_sqrt(trace, opts),
        TheoremId::GradValueRate => certify_grad_value_rate(trace, opts),
        TheoremId::GradNormLinear => certify_grad_norm_linear(trace, opts),
        TheoremId::SubgradExogenous => certify_subgrad_exogenous(trace, opts),
        TheoremId::SubgradPolyak => certify_subgrad_polyak(trace, opts),
        TheoremId::ProxValueRate => certify_prox_value_rate(trace, opts),
    }
}

/// Every theorem matching the trace's method. Unmet hypotheses are
/// reported as not applicable instead of failing.
pub fn certify_all(trace: &Trace, opts: &CertifyOptions) -> Vec<CertificateOutcome> {
    TheoremId::for_method(&trace.config.method)
        .iter()
        .map(|&theorem_id| match certify(theorem_id, trace, opts) {
            Ok(c) => CertificateOutcome::Certified(c),
            Err(e) => CertificateOutcome::NotApplicable {
                theorem_id,
                reason: e.to_string(),
            },
        })
        .collect()
}
