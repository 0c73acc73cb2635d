//! Gradient, subgradient and proximal point methods.
//!
//! Every solver returns a [`Trace`] holding one [`IterateRecord`] per visited
//! point. Record `k` stores `p_k`, `f(p_k)`, the step taken from `p_k` and the
//! norm of the direction used there, so certificates can be evaluated from
//! the trace alone.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point};
use crate::manifolds::ManifoldDescriptor;
use crate::objectives::{Objective, Optimum};

#[derive(Debug, Clone, PartialEq)]
pub enum GradientStep {
    /// `t_k = 1/L` with `L` the objective's declared gradient Lipschitz constant.
    ConstantInvL,
    /// Explicit steps; the last entry repeats once the list runs out.
    FixedSequence(Vec<f64>),
}

/// `α_k` schedules for the exogenous subgradient rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `α₀ / √(k+1)`
    InvSqrt(f64),
    /// `α₀ / (k+1)`
    Harmonic(f64),
}

impl Schedule {
    pub fn alpha(&self, k: usize) -> f64 {
        let k1 = (k + 1) as f64;
        match *self {
            Schedule::Constant(a) => a,
            Schedule::InvSqrt(a) => a / k1.sqrt(),
            Schedule::Harmonic(a) => a / k1,
        }
    }

    /// `(Σ α_k, Σ α_k²)` over `k = 0..=n`.
    pub fn sums(&self, n: usize) -> (f64, f64) {
        (0..=n).fold((0.0, 0.0), |(s, s2), k| {
            let a = self.alpha(k);
            (s + a, s2 + a * a)
        })
    }

    fn validate(&self) -> Result<()> {
        let a = match *self {
            Schedule::Constant(a) | Schedule::InvSqrt(a) | Schedule::Harmonic(a) => a,
        };
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("step schedule scale {a} must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubgradientStep {
    /// `t_k = α_k / ‖s_k‖`
    Exogenous(Schedule),
    /// `t_k = (f(p_k) - f*) / ‖s_k‖²`. Without an explicit value, `f*` comes
    /// from the config optimum or the objective's known optimum.
    Polyak { f_star: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Gradient(GradientStep),
    Subgradient(SubgradientStep),
    /// Constant `λ_k = lambda`, required to satisfy `λ_k <= cap`.
    ProximalPoint { lambda: f64, cap: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gradient(_) => "gradient",
            Method::Subgradient(_) => "subgradient",
            Method::ProximalPoint { .. } => "proximal_point",
        }
    }
}

/// Inner gradient solver for proximal steps without a closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolver {
    pub eps: f64,
    pub max_inner: usize,
}

impl Default for InnerSolver {
    fn default() -> Self {
        InnerSolver {
            eps: 1e-10,
            max_inner: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iters: usize,
    pub inner: Option<InnerSolver>,
    pub seed: u64,
    /// Reference optimum; overrides the objective's known optimum.
    pub optimum: Option<Optimum>,
    /// Allow the subgradient method on manifolds of non-positive curvature.
    pub relaxed: bool,
}

impl SolverConfig {
    pub fn new(method: Method, max_iters: usize) -> Self {
        SolverConfig {
            method,
            max_iters,
            inner: None,
            seed: 0,
            optimum: None,
            relaxed: false,
        }
    }

    pub fn gradient(max_iters: usize) -> Self {
        Self::new(Method::Gradient(GradientStep::ConstantInvL), max_iters)
    }

    pub fn subgradient(step: SubgradientStep, max_iters: usize) -> Self {
        Self::new(Method::Subgradient(step), max_iters)
    }

    pub fn proximal(lambda: f64, max_iters: usize) -> Self {
        Self::new(Method::ProximalPoint { lambda, cap: lambda }, max_iters)
    }

    pub fn with_optimum(mut self, optimum: Optimum) -> Self {
        self.optimum = Some(optimum);
        self
    }

    pub fn with_inner(mut self, inner: InnerSolver) -> Self {
        self.inner = Some(inner);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn relaxed(mut self, relaxed: bool) -> Self {
        self.relaxed = relaxed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub point: Point,
    pub f_value: f64,
    /// Step taken from this point; 0 on the last record.
    pub step_t: f64,
    /// `‖grad f(p_k)‖`, `‖s_k‖`, or the prox optimality residual at `p_k`.
    pub dir_norm: f64,
    pub dist_to_opt: Option<f64>,
    pub f_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    MaxIters,
    ToleranceMet,
    DomainExit,
    NumericalFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Constants fixed before the run; certificates read their bounds from here.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConstants {
    pub grad_lipschitz: Option<f64>,
    pub func_lipschitz: Option<f64>,
    pub optimum: Option<Optimum>,
    /// Whether proximal steps used the closed-form prox.
    pub exact_prox: bool,
    /// Resolved `f*` used by Polyak steps.
    pub polyak_f_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub config: SolverConfig,
    pub objective_id: String,
    pub manifold: ManifoldDescriptor,
    pub records: Vec<IterateRecord>,
    pub terminated_reason: Termination,
    pub constants: RunConstants,
}

impl Trace {
    /// Index of the last record.
    pub fn n(&self) -> usize {
        self.records.len() - 1
    }

    pub fn initial(&self) -> &IterateRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &IterateRecord {
        &self.records[self.records.len() - 1]
    }

    /// The trace a run with `max_iters = n` would have produced.
    pub fn truncated(&self, n: usize) -> Trace {
        let mut t = self.clone();
        if n < self.n() {
            t.records.truncate(n + 1);
            if let Some(last) = t.records.last_mut() {
                last.step_t = 0.0;
            }
            t.terminated_reason = Termination::MaxIters;
            t.config.max_iters = n;
        }
        t
    }
}

/// Runs the method selected by `config.method`.
pub fn run(objective: &dyn Objective, p0: &Point, config: &SolverConfig) -> Result<Trace> {
    match config.method {
        Method::Gradient(_) => gradient_method(objective, p0, config),
        Method::Subgradient(_) => subgradient_method(objective, p0, config),
        Method::ProximalPoint { .. } => proximal_point_method(objective, p0, config),
    }
}

struct Recorder<'a> {
    objective: &'a dyn Objective,
    optimum: Option<Optimum>,
    records: Vec<IterateRecord>,
}

impl<'a> Recorder<'a> {
    fn new(objective: &'a dyn Objective, config: &SolverConfig) -> Self {
        let optimum = config
            .optimum
            .clone()
            .or_else(|| objective.known_optimum().cloned());
        Recorder {
            objective,
            optimum,
            records: Vec::new(),
        }
    }

    fn push(&mut self, point: Point, f_value: f64, step_t: f64, dir_norm: f64) -> Result<()> {
        let m = self.objective.manifold();
        let (dist_to_opt, f_gap) = match &self.optimum {
            Some(o) => (Some(m.distance(&point, &o.point)?), Some(f_value - o.f_star)),
            None => (None, None),
        };
        self.records.push(IterateRecord {
            k: self.records.len(),
            point,
            f_value,
            step_t,
            dir_norm,
            dist_to_opt,
            f_gap,
        });
        Ok(())
    }

    fn set_last_step(&mut self, t: f64) {
        if let Some(r) = self.records.last_mut() {
            r.step_t = t;
        }
    }

    fn finish(
        self,
        config: &SolverConfig,
        reason: Termination,
        exact_prox: bool,
        polyak_f_star: Option<f64>,
    ) -> Trace {
        let obj = self.objective;
        Trace {
            config: config.clone(),
            objective_id: obj.id().to_string(),
            manifold: obj.manifold().descriptor(),
            records: self.records,
            terminated_reason: reason,
            constants: RunConstants {
                grad_lipschitz: obj.grad_lipschitz().map(|l| l.constant),
                func_lipschitz: obj.func_lipschitz(),
                optimum: self.optimum,
                exact_prox,
                polyak_f_star,
            },
        }
    }
}

fn check_start(objective: &dyn Objective, p0: &Point, config: &SolverConfig) -> Result<()> {
    let m = objective.manifold();
    m.check_point(p0)?;
    if config.max_iters < 1 {
        return Err(Error::invalid("max_iters must be >= 1"));
    }
    if let Some(o) = &config.optimum {
        m.check_point(&o.point)?;
    }
    if !objective.domain().contains(m, p0)? {
        return Err(Error::invalid("p0 lies outside the objective domain"));
    }
    Ok(())
}

fn finite_value(objective: &dyn Objective, p: &Point) -> Result<f64> {
    let f = objective.value(p)?;
    if !f.is_finite() {
        return Err(Error::numerical("objective value is not finite"));
    }
    Ok(f)
}

/// Outcome of one step attempt inside a solver loop.
enum Next {
    Continue(Point),
    Stop(Termination),
}

/// Moves to `next` unless it left the domain, in which case the exiting
/// iterate is recorded and the run ends.
fn admit(rec: &mut Recorder, next: Result<Point>) -> Next {
    let obj = rec.objective;
    let next = match next {
        Ok(p) => p,
        Err(_) => return Next::Stop(Termination::NumericalFailure),
    };
    match obj.domain().contains(obj.manifold(), &next) {
        Ok(true) => Next::Continue(next),
        Ok(false) => {
            if let Ok(f) = finite_value(obj, &next) {
                let dir = obj
                    .subgradient(&next)
                    .map(|s| obj.manifold().norm(&s))
                    .unwrap_or(f64::NAN);
                if rec.push(next, f, 0.0, dir).is_err() {
                    rec.records.pop();
                }
            }
            Next::Stop(Termination::DomainExit)
        }
        Err(_) => Next::Stop(Termination::NumericalFailure),
    }
}

/// `p_{k+1} = exp_{p_k}(-t_k grad f(p_k))`.
pub fn gradient_method(
    objective: &dyn Objective,
    p0: &Point,
    config: &SolverConfig,
) -> Result<Trace> {
    let Method::Gradient(rule) = &config.method else {
        return Err(Error::invalid("gradient_method needs a gradient step rule"));
    };
    if !objective.is_smooth() {
        return Err(Error::invalid("gradient method needs a smooth objective"));
    }
    check_start(objective, p0, config)?;
    let steps: Box<dyn Fn(usize) -> f64> = match rule {
        GradientStep::ConstantInvL => {
            let l = objective
                .grad_lipschitz()
                .ok_or_else(|| {
                    Error::invalid("constant 1/L step needs a declared gradient Lipschitz constant")
                })?
                .constant;
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("gradient Lipschitz constant {l} must be positive")));
            }
            Box::new(move |_| 1.0 / l)
        }
        GradientStep::FixedSequence(ts) => {
            if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(Error::invalid("fixed step sequence must be non-empty and positive"));
            }
            let ts = ts.clone();
            Box::new(move |k| ts[k.min(ts.len() - 1)])
        }
    };

    let m = objective.manifold();
    let mut rec = Recorder::new(objective, config);
    let mut p = p0.clone();
    let mut reason = Termination::MaxIters;
    for k in 0..=config.max_iters {
        let (f, g) = match (finite_value(objective, &p), objective.subgradient(&p)) {
            (Ok(f), Ok(g)) => (f, g),
            (Err(e), _) | (_, Err(e)) if k == 0 => return Err(e),
            _ => {
                reason = Termination::NumericalFailure;
                break;
            }
        };
        rec.push(p.clone(), f, 0.0, m.norm(&g))?;
        if k == config.max_iters {
            break;
        }
        let t = steps(k);
        rec.set_last_step(t);
        match admit(&mut rec, m.exp(&p, &g.scale(-t))) {
            Next::Continue(next) => p = next,
            Next::Stop(r) => {
                reason = r;
                break;
            }
        }
    }
    Ok(rec.finish(config, reason, false, None))
}

/// `p_{k+1} = exp_{p_k}(-t_k s_k)` with `s_k ∈ ∂f(p_k)`.
pub fn subgradient_method(
    objective: &dyn Objective,
    p0: &Point,
    config: &SolverConfig,
) -> Result<Trace> {
    let Method::Subgradient(rule) = &config.method else {
        return Err(Error::invalid("subgradient_method needs a subgradient step rule"));
    };
    let m = objective.manifold();
    if !m.curvature().is_nonnegative() && !config.relaxed {
        return Err(Error::invalid(
            "subgradient method is analyzed on non-negative curvature; set relaxed to run anyway",
        ));
    }
    let polyak_f_star = match rule {
        SubgradientStep::Exogenous(s) => {
            s.validate()?;
            None
        }
        SubgradientStep::Polyak { f_star } => Some(
            f_star
                .or_else(|| config.optimum.as_ref().map(|o| o.f_star))
                .or_else(|| objective.known_optimum().map(|o| o.f_star))
                .ok_or_else(|| Error::invalid("polyak requires f_star"))?,
        ),
    };
    check_start(objective, p0, config)?;

    let mut rec = Recorder::new(objective, config);
    let mut p = p0.clone();
    let mut reason = Termination::MaxIters;
    for k in 0..=config.max_iters {
        let (f, s) = match (finite_value(objective, &p), objective.subgradient(&p)) {
            (Ok(f), Ok(s)) => (f, s),
            (Err(e), _) | (_, Err(e)) if k == 0 => return Err(e),
            _ => {
                reason = Termination::NumericalFailure;
                break;
            }
        };
        let sn = m.norm(&s);
        rec.push(p.clone(), f, 0.0, sn)?;
        if k == config.max_iters {
            break;
        }
        if sn == 0.0 {
            reason = Termination::ToleranceMet;
            break;
        }
        let t = match (rule, polyak_f_star) {
            (SubgradientStep::Exogenous(sched), _) => sched.alpha(k) / sn,
            (SubgradientStep::Polyak { .. }, Some(f_star)) => {
                let gap = f - f_star;
                if gap <= 0.0 {
                    reason = Termination::ToleranceMet;
                    break;
                }
                gap / (sn * sn)
            }
            (SubgradientStep::Polyak { .. }, None) => unreachable!("resolved above"),
        };
        rec.set_last_step(t);
        match admit(&mut rec, m.exp(&p, &s.scale(-t))) {
            Next::Continue(next) => p = next,
            Next::Stop(r) => {
                reason = r;
                break;
            }
        }
    }
    Ok(rec.finish(config, reason, false, polyak_f_star))
}

/// `‖grad f(p) - λ log_p(anchor)‖`, the optimality residual of the prox subproblem.
pub fn prox_residual(
    objective: &dyn Objective,
    anchor: &Point,
    p: &Point,
    lambda: f64,
) -> Result<f64> {
    let m = objective.manifold();
    let g = objective.subgradient(p)?;
    let pull = m.log(p, anchor)?.scale(-lambda);
    Ok(m.norm(&g.add(&pull)?))
}

/// Gradient descent on `f + (λ/2) d²(anchor, ·)` started at `anchor`.
/// Returns the final point and its residual.
pub fn inner_prox(
    objective: &dyn Objective,
    anchor: &Point,
    lambda: f64,
    inner: &InnerSolver,
) -> Result<(Point, f64)> {
    let m = objective.manifold();
    let l = objective
        .grad_lipschitz()
        .ok_or_else(|| Error::invalid("inner prox solver needs a declared gradient Lipschitz constant"))?
        .constant;
    let step = 1.0 / (l + lambda);
    let mut p = anchor.clone();
    for i in 0..=inner.max_inner {
        let g = objective.subgradient(&p)?;
        let pull = m.log(&p, anchor)?.scale(-lambda);
        let grad_f = g.add(&pull)?;
        let r = m.norm(&grad_f);
        if r <= inner.eps || i == inner.max_inner {
            return Ok((p, r));
        }
        p = m.exp(&p, &grad_f.scale(-step))?;
    }
    unreachable!("loop returns on its last iteration")
}

/// `p_{k+1} = argmin_p f(p) + (λ_k/2) d²(p_k, p)`.
pub fn proximal_point_method(
    objective: &dyn Objective,
    p0: &Point,
    config: &SolverConfig,
) -> Result<Trace> {
    let Method::ProximalPoint { lambda, cap } = config.method else {
        return Err(Error::invalid("proximal_point_method needs a proximal schedule"));
    };
    let m = objective.manifold();
    if !m.descriptor().is_hadamard() {
        return Err(Error::invalid(format!(
            "proximal point method needs a Hadamard manifold, got {}",
            m.descriptor()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda {lambda} must be positive")));
    }
    if !(lambda <= cap) {
        return Err(Error::invalid(format!("lambda {lambda} exceeds its cap {cap}")));
    }
    let exact = objective.has_exact_prox();
    let inner = match (exact, config.inner) {
        (true, _) => None,
        (false, Some(inner)) => {
            if !(inner.eps > 0.0) || inner.max_inner < 1 {
                return Err(Error::invalid("inner solver needs eps > 0 and max_inner >= 1"));
            }
            if !objective.is_smooth() {
                return Err(Error::invalid("inner prox solver needs a smooth objective"));
            }
            if objective.grad_lipschitz().is_none() {
                return Err(Error::invalid(
                    "inner prox solver needs a declared gradient Lipschitz constant",
                ));
            }
            Some(inner)
        }
        (false, None) => {
            return Err(Error::invalid(
                "objective has no closed-form prox and no inner solver is configured",
            ))
        }
    };
    check_start(objective, p0, config)?;

    let mut rec = Recorder::new(objective, config);
    let mut p = p0.clone();
    let mut residual = 0.0;
    let mut reason = Termination::MaxIters;
    for k in 0..=config.max_iters {
        let f = match finite_value(objective, &p) {
            Ok(f) => f,
            Err(e) if k == 0 => return Err(e),
            Err(_) => {
                reason = Termination::NumericalFailure;
                break;
            }
        };
        rec.push(p.clone(), f, 0.0, residual)?;
        if k == config.max_iters {
            break;
        }
        rec.set_last_step(lambda);
        let next = match &inner {
            None => objective
                .exact_prox(&p, lambda)
                .expect("exact prox advertised")
                .and_then(|q| {
                    residual = if objective.is_smooth() {
                        prox_residual(objective, &p, &q, lambda)?
                    } else {
                        0.0
                    };
                    Ok(q)
                }),
            Some(inner) => inner_prox(objective, &p, lambda, inner).map(|(q, r)| {
                residual = r;
                q
            }),
        };
        match admit(&mut rec, next) {
            Next::Continue(q) => p = q,
            Next::Stop(r) => {
                reason = r;
                break;
            }
        }
    }
    Ok(rec.finish(config, reason, exact, None))
}
