//! Sampled property checks over geometry, objectives and solver steps, plus
//! per-step checks over completed traces.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{certify, CertifyOptions, TheoremId};
use crate::error::{Error, Result};
use crate::geometry::{
    check_comparison_nonneg, check_comparison_nonpos, CurvatureClass, Geometry, Point,
    TangentVector,
};
use crate::manifolds::{Manifold, ManifoldKind};
use crate::objectives::Objective;
use crate::solvers::{prox_residual, GradientStep, Method, SubgradientStep, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditSuite {
    ExpLogRoundtrip,
    DistanceConsistency,
    TransportIsometry,
    TriangleInequality,
    ComparisonNonneg,
    ComparisonNonpos,
    ExpZero,
    FlatEquality,
    SpdCongruence,
    FiniteDifferenceSlope,
    FirstOrderConvexity,
    SubgradientInequality,
    GeodesicConvexity,
    DescentLemma,
    TauLipschitz,
    ProxOptimality,
    OptimumLowerBound,
    StepDecrease,
    VariationalStep,
    SubgradientFundamental,
    ProxCharacterization,
    ExactProxResidual,
    TraceStepDecrease,
    TraceVariationalStep,
    TraceFundamentalInequality,
    TracePolyakDistance,
    TraceProxCharacterization,
    TraceProxResidual,
    PrefixMonotonicity,
}

impl AuditSuite {
    pub fn as_str(&self) -> &'static str {
        use AuditSuite::*;
        match self {
            ExpLogRoundtrip => "exp-log-roundtrip",
            DistanceConsistency => "distance-consistency",
            TransportIsometry => "transport-isometry",
            TriangleInequality => "triangle-inequality",
            ComparisonNonneg => "comparison-nonneg",
            ComparisonNonpos => "comparison-nonpos",
            ExpZero => "exp-zero",
            FlatEquality => "flat-equality",
            SpdCongruence => "spd-congruence",
            FiniteDifferenceSlope => "finite-difference-slope",
            FirstOrderConvexity => "first-order-convexity",
            SubgradientInequality => "subgradient-inequality",
            GeodesicConvexity => "geodesic-convexity",
            DescentLemma => "descent-lemma",
            TauLipschitz => "tau-lipschitz",
            ProxOptimality => "prox-optimality",
            OptimumLowerBound => "optimum-lower-bound",
            StepDecrease => "step-decrease",
            VariationalStep => "variational-step",
            SubgradientFundamental => "subgradient-fundamental",
            ProxCharacterization => "prox-characterization",
            ExactProxResidual => "exact-prox-residual",
            TraceStepDecrease => "trace-step-decrease",
            TraceVariationalStep => "trace-variational-step",
            TraceFundamentalInequality => "trace-fundamental-inequality",
            TracePolyakDistance => "trace-polyak-distance",
            TraceProxCharacterization => "trace-prox-characterization",
            TraceProxResidual => "trace-prox-residual",
            PrefixMonotonicity => "prefix-monotonicity",
        }
    }

    /// Per-suite generator so that suites do not perturb each other's samples.
    fn rng(&self, seed: u64) -> ChaCha8Rng {
        // FNV-1a of the suite id.
        let h = self
            .as_str()
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
                (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
            });
        ChaCha8Rng::seed_from_u64(seed ^ h)
    }
}

impl fmt::Display for AuditSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub suite_id: AuditSuite,
    pub samples: usize,
    pub violations: usize,
    /// Smallest `rhs - lhs` over the samples of a check `lhs <= rhs`;
    /// `+inf` when nothing was sampled.
    pub worst_margin: f64,
    pub seed: u64,
    /// Samples whose evaluation raised an error; each also counts as a violation.
    pub errors: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Tally {
    report: AuditReport,
}

impl Tally {
    fn new(suite: AuditSuite, seed: u64) -> Tally {
        Tally {
            report: AuditReport {
                suite_id: suite,
                samples: 0,
                violations: 0,
                worst_margin: f64::INFINITY,
                seed,
                errors: 0,
            },
        }
    }

    /// Records the check `lhs <= rhs + tol`.
    fn check(&mut self, lhs: f64, rhs: f64, tol: f64) {
        let r = &mut self.report;
        r.samples += 1;
        let margin = rhs - lhs;
        if !(margin >= -tol) {
            r.violations += 1;
        }
        if margin.is_nan() {
            r.worst_margin = f64::NAN;
        } else if !r.worst_margin.is_nan() {
            r.worst_margin = r.worst_margin.min(margin);
        }
    }

    fn record(&mut self, sample: Result<()>) {
        if sample.is_err() {
            let r = &mut self.report;
            r.samples += 1;
            r.violations += 1;
            r.errors += 1;
        }
    }

    fn done(self) -> AuditReport {
        self.report
    }
}

/// Runs `body` once per sample with the suite's own generator.
fn suite(
    id: AuditSuite,
    seed: u64,
    samples: usize,
    mut body: impl FnMut(&mut Tally, &mut dyn RngCore) -> Result<()>,
) -> AuditReport {
    let mut rng = id.rng(seed);
    let mut tally = Tally::new(id, seed);
    for _ in 0..samples {
        let r = body(&mut tally, &mut rng);
        tally.record(r);
    }
    tally.done()
}

/// Norm cap for random tangent vectors in the geometry suites.
fn tangent_radius(m: &Manifold, use_: TangentUse) -> f64 {
    match (m.kind(), use_) {
        (ManifoldKind::Sphere, TangentUse::Roundtrip) => 0.9 * m.injectivity_bound(),
        (ManifoldKind::Sphere, TangentUse::Comparison) => PI / 2.0,
        _ => 2.0,
    }
}

#[derive(Clone, Copy)]
enum TangentUse {
    Roundtrip,
    Comparison,
}

fn random_vector(m: &Manifold, p: &Point, max_norm: f64, rng: &mut dyn RngCore) -> TangentVector {
    let r: f64 = rng.random::<f64>() * max_norm;
    m.random_tangent_with_norm(p, r, rng)
}

/// The geometry invariants: roundtrip, distance consistency, transport
/// isometry, triangle inequality, the comparison inequalities matching the
/// curvature class, `exp(p, 0) = p`, and the manifold-specific checks.
pub fn run_geometry_suites(
    m: &Manifold,
    seed: u64,
    samples: usize,
    tol: f64,
) -> Result<Vec<AuditReport>> {
    if samples == 0 {
        return Err(Error::invalid("audit samples must be >= 1"));
    }
    let mut out = Vec::new();
    let r_trip = tangent_radius(m, TangentUse::Roundtrip);
    let r_cmp = tangent_radius(m, TangentUse::Comparison);

    out.push(suite(AuditSuite::ExpLogRoundtrip, seed, samples, |t, rng| {
        let p = m.random_point(rng);
        let v = random_vector(m, &p, r_trip, rng);
        let back = m.log(&p, &m.exp(&p, &v)?)?;
        let err = m.norm(&back.sub(&v)?);
        t.check(err, 1e-8, 0.0);
        Ok(())
    }));

    out.push(suite(AuditSuite::DistanceConsistency, seed, samples, |t, rng| {
        let p = m.random_point(rng);
        let v = random_vector(m, &p, r_trip, rng);
        let d = m.distance(&p, &m.exp(&p, &v)?)?;
        t.check((d - m.norm(&v)).abs(), 1e-8, 0.0);
        Ok(())
    }));

    out.push(suite(AuditSuite::TransportIsometry, seed, samples, |t, rng| {
        let p = m.random_point(rng);
        let q = m.exp(&p, &random_vector(m, &p, r_trip, rng))?;
        let u = random_vector(m, &p, 2.0, rng);
        let v = random_vector(m, &p, 2.0, rng);
        let pu = m.parallel_transport(&p, &q, &u)?;
        let pv = m.parallel_transport(&p, &q, &v)?;
        t.check((m.norm(&pu) - m.norm(&u)).abs(), 1e-10, 0.0);
        t.check((m.inner(&pu, &pv) - m.inner(&u, &v)).abs(), 1e-10, 0.0);
        Ok(())
    }));

    out.push(suite(AuditSuite::TriangleInequality, seed, samples, |t, rng| {
        let p = m.random_point(rng);
        let q = m.random_point(rng);
        let r = m.random_point(rng);
        t.check(
            m.distance(&p, &r)?,
            m.distance(&p, &q)? + m.distance(&q, &r)?,
            1e-10,
        );
        Ok(())
    }));

    let curvature = m.curvature();
    if curvature.is_nonnegative() {
        out.push(suite(AuditSuite::ComparisonNonneg, seed, samples, |t, rng| {
            let p = m.random_point(rng);
            let u = random_vector(m, &p, r_cmp, rng);
            let w = random_vector(m, &p, r_cmp, rng);
            let a = check_comparison_nonneg(m, &p, &u, &w, tol)?;
            t.check(a.lhs, a.rhs, tol);
            Ok(())
        }));
    }
    if curvature.is_nonpositive() {
        out.push(suite(AuditSuite::ComparisonNonpos, seed, samples, |t, rng| {
            let p = m.random_point(rng);
            let u = random_vector(m, &p, r_cmp, rng);
            let w = random_vector(m, &p, r_cmp, rng);
            let a = check_comparison_nonpos(m, &p, &u, &w, tol)?;
            t.check(a.rhs, a.lhs, tol);
            Ok(())
        }));
    }

    out.push(suite(AuditSuite::ExpZero, seed, samples, |t, rng| {
        let p = m.random_point(rng);
        let q = m.exp(&p, &m.zero_vector(&p))?;
        t.check((q.coords() - p.coords()).amax(), 1e-12, 0.0);
        Ok(())
    }));

    if curvature == CurvatureClass::Zero {
        out.push(suite(AuditSuite::FlatEquality, seed, samples, |t, rng| {
            let p = m.random_point(rng);
            let u = random_vector(m, &p, r_cmp, rng);
            let w = random_vector(m, &p, r_cmp, rng);
            let a = check_comparison_nonneg(m, &p, &u, &w, tol)?;
            t.check((a.lhs - a.rhs).abs(), 1e-10, 0.0);
            Ok(())
        }));
    }

    if let Manifold::Spd(spd) = m {
        out.push(suite(AuditSuite::SpdCongruence, seed, samples, |t, rng| {
            let p = m.random_point(rng);
            let q = m.random_point(rng);
            let a = well_conditioned_matrix(spd.size(), 1e3, rng);
            let congr = |x: &Point| -> Result<Point> {
                let c = &a * spd.to_matrix(x.coords()) * a.transpose();
                m.point(spd.from_matrix(&((&c + c.transpose()) * 0.5)).as_slice().to_vec())
            };
            let d0 = m.distance(&p, &q)?;
            let d1 = m.distance(&congr(&p)?, &congr(&q)?)?;
            t.check((d0 - d1).abs(), 1e-8, 0.0);
            Ok(())
        }));
    }
    Ok(out)
}

/// `U diag(σ) Vᵀ` with random orthogonal factors and singular values
/// spread log-uniformly over `[1, cond]`.
fn well_conditioned_matrix(n: usize, cond: f64, rng: &mut dyn RngCore) -> nalgebra::DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut gauss = || nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut *rng));
    let u = gauss().qr().q();
    let v = gauss().qr().q();
    let sigma = nalgebra::DVector::from_fn(n, |_, _| cond.powf(rng.random::<f64>()));
    u * nalgebra::DMatrix::from_diagonal(&sigma) * v.transpose()
}

/// Two domain points and the minimal geodesic between them.
fn domain_pair(
    f: &dyn Objective,
    rng: &mut dyn RngCore,
) -> Result<(Point, Point, TangentVector)> {
    let m = f.manifold();
    let p = f.domain().sample(m, 1.0, rng)?;
    let q = f.domain().sample(m, 1.0, rng)?;
    let v = m.log(&p, &q)?;
    Ok((p, q, v))
}

/// Objective-level suites: finite-difference slope, first-order convexity
/// (or the subgradient inequality), geodesic convexity, descent lemma,
/// Lipschitz continuity, prox optimality and the optimum lower bound.
pub fn run_objective_suites(
    f: &dyn Objective,
    seed: u64,
    samples: usize,
    tol: f64,
) -> Result<Vec<AuditReport>> {
    if samples == 0 {
        return Err(Error::invalid("audit samples must be >= 1"));
    }
    let m = f.manifold();
    let mut out = Vec::new();

    if f.is_smooth() {
        out.push(suite(
            AuditSuite::FiniteDifferenceSlope,
            seed,
            samples,
            |t, rng| {
                let p = f.domain().sample(m, 0.9, rng)?;
                let v = m.random_tangent_with_norm(&p, 1.0, rng);
                let g = f.subgradient(&p)?;
                let fp = f.value(&p)?;
                let slope = m.inner(&g, &v);
                let steps = [1e-3, 1e-4, 1e-5];
                let mut errs = [0.0; 3];
                for (e, &h) in errs.iter_mut().zip(&steps) {
                    let fh = f.value(&m.exp(&p, &v.scale(h))?)?;
                    *e = ((fh - fp) / h - slope).abs();
                }
                if errs[0] <= 1e-10 * (1.0 + fp.abs()) {
                    // Curvature along v is below round-off: the difference
                    // quotient is exact to working precision.
                    t.check(0.0, 0.2, 0.0);
                    return Ok(());
                }
                let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
                let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
                let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
                let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
                let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
                t.check((num / den - 1.0).abs(), 0.2, 0.0);
                Ok(())
            },
        ));
    }

    let convexity_id = if f.is_smooth() {
        AuditSuite::FirstOrderConvexity
    } else {
        AuditSuite::SubgradientInequality
    };
    out.push(suite(convexity_id, seed, samples, |t, rng| {
        let (p, q, v) = domain_pair(f, rng)?;
        let s = f.subgradient(&p)?;
        t.check(f.value(&p)? + m.inner(&s, &v), f.value(&q)?, tol);
        Ok(())
    }));

    out.push(suite(AuditSuite::GeodesicConvexity, seed, samples, |t, rng| {
        let (p, q, v) = domain_pair(f, rng)?;
        let s: f64 = rng.random();
        let mid = m.exp(&p, &v.scale(s))?;
        t.check(f.value(&mid)?, (1.0 - s) * f.value(&p)? + s * f.value(&q)?, tol);
        Ok(())
    }));

    if let Some(l) = f.grad_lipschitz() {
        let l = l.constant;
        out.push(suite(AuditSuite::DescentLemma, seed, samples, |t, rng| {
            let (p, q, v) = domain_pair(f, rng)?;
            let g = f.subgradient(&p)?;
            let nv = m.norm(&v);
            t.check(f.value(&q)?, f.value(&p)? + m.inner(&g, &v) + 0.5 * l * nv * nv, tol);
            Ok(())
        }));
    }

    if let Some(tau) = f.func_lipschitz() {
        out.push(suite(AuditSuite::TauLipschitz, seed, samples, |t, rng| {
            let (p, q, _) = domain_pair(f, rng)?;
            t.check((f.value(&p)? - f.value(&q)?).abs(), tau * m.distance(&p, &q)?, tol);
            Ok(())
        }));
    }

    if f.has_exact_prox() {
        out.push(suite(AuditSuite::ProxOptimality, seed, samples, |t, rng| {
            let pk = f.domain().sample(m, 1.0, rng)?;
            let lambda = 10f64.powf(rng.random_range(-1.0..1.0));
            let x = f.exact_prox(&pk, lambda).expect("advertised")?;
            let big_f = |r: &Point| -> Result<f64> {
                let d = m.distance(&pk, r)?;
                Ok(f.value(r)? + 0.5 * lambda * d * d)
            };
            let r = if rng.random::<bool>() {
                let radius = 10f64.powf(rng.random_range(-3.0..0.0));
                m.exp(&x, &m.random_tangent_with_norm(&x, radius, rng))?
            } else {
                f.domain().sample(m, 1.0, rng)?
            };
            t.check(big_f(&x)?, big_f(&r)?, tol);
            Ok(())
        }));
    }

    if let Some(opt) = f.known_optimum() {
        out.push(suite(AuditSuite::OptimumLowerBound, seed, samples, |t, rng| {
            let p = f.domain().sample(m, 1.0, rng)?;
            t.check(opt.f_star, f.value(&p)?, tol);
            Ok(())
        }));
    }
    Ok(out)
}

/// Single-step solver properties checked at sampled points: the sufficient
/// decrease of a `1/L` step, the variational form of the gradient step, the
/// fundamental subgradient inequality, the proximal characterization and the
/// exact-prox optimality residual.
pub fn run_solver_suites(
    f: &dyn Objective,
    seed: u64,
    samples: usize,
    tol: f64,
) -> Result<Vec<AuditReport>> {
    if samples == 0 {
        return Err(Error::invalid("audit samples must be >= 1"));
    }
    let m = f.manifold();
    let mut out = Vec::new();

    if let (true, Some(l)) = (f.is_smooth(), f.grad_lipschitz()) {
        let l = l.constant;
        out.push(suite(AuditSuite::StepDecrease, seed, samples, |t, rng| {
            let p = f.domain().sample(m, 1.0, rng)?;
            let g = f.subgradient(&p)?;
            let q = m.exp(&p, &g.scale(-1.0 / l))?;
            if !f.domain().contains(m, &q)? {
                // The step left the set on which L is declared.
                return Ok(());
            }
            let ng = m.norm(&g);
            t.check(ng * ng / (2.0 * l), f.value(&p)? - f.value(&q)?, tol);
            Ok(())
        }));

        out.push(suite(AuditSuite::VariationalStep, seed, samples, |t, rng| {
            let p = f.domain().sample(m, 1.0, rng)?;
            let g = f.subgradient(&p)?;
            variational_check(m, &g, 1.0 / l, t, rng)
        }));
    }

    if m.curvature().is_nonnegative() {
        let max_step = f.domain().radius.min(1.0);
        out.push(suite(AuditSuite::SubgradientFundamental, seed, samples, |t, rng| {
            let (pk, p, _) = domain_pair(f, rng)?;
            let s = f.subgradient(&pk)?;
            let ns = m.norm(&s);
            let step = if ns > 0.0 {
                rng.random::<f64>() * max_step / ns
            } else {
                0.0
            };
            let next = m.exp(&pk, &s.scale(-step))?;
            let (d_next, d_k) = (m.distance(&next, &p)?, m.distance(&pk, &p)?);
            t.check(
                d_next * d_next,
                d_k * d_k + step * step * ns * ns + 2.0 * step * (f.value(&p)? - f.value(&pk)?),
                tol,
            );
            Ok(())
        }));
    }

    if m.descriptor().is_hadamard() {
        out.push(suite(AuditSuite::ProxCharacterization, seed, samples, |t, rng| {
            let (p, q, v) = domain_pair(f, rng)?;
            let bar = f.domain().sample(m, 1.0, rng)?;
            let mu = 10f64.powf(rng.random_range(-1.0..1.0));
            let s = f.subgradient(&p)?;
            let w = s.add(&m.log(&p, &bar)?.scale(-mu))?;
            let (dq, dp, dqp) = (m.distance(&q, &bar)?, m.distance(&p, &bar)?, m.norm(&v));
            t.check(
                f.value(&p)? + 0.5 * mu * dp * dp + m.inner(&w, &v) + 0.5 * mu * dqp * dqp,
                f.value(&q)? + 0.5 * mu * dq * dq,
                tol,
            );
            Ok(())
        }));
    }

    if f.has_exact_prox() && f.is_smooth() {
        out.push(suite(AuditSuite::ExactProxResidual, seed, samples, |t, rng| {
            let pk = f.domain().sample(m, 1.0, rng)?;
            let lambda = 10f64.powf(rng.random_range(-1.0..1.0));
            let x = f.exact_prox(&pk, lambda).expect("advertised")?;
            t.check(prox_residual(f, &pk, &x, lambda)?, 1e-8, 0.0);
            Ok(())
        }));
    }
    Ok(out)
}

/// The model `v ↦ <g, v> + |v|² / (2t)` is minimal at `v = -t g`.
fn variational_check(
    m: &Manifold,
    g: &TangentVector,
    step: f64,
    t: &mut Tally,
    rng: &mut dyn RngCore,
) -> Result<()> {
    let model = |v: &TangentVector| {
        let n = m.norm(v);
        m.inner(g, v) + n * n / (2.0 * step)
    };
    let vk = g.scale(-step);
    let v = random_vector(m, g.base(), 2.0 * m.norm(&vk), rng);
    t.check(model(&vk), model(&v), 1e-12);
    Ok(())
}

/// Every suite that applies to the objective and its manifold.
pub fn run_audit_suites(
    f: &dyn Objective,
    seed: u64,
    samples: usize,
    tol: f64,
) -> Result<Vec<AuditReport>> {
    let mut out = run_geometry_suites(f.manifold(), seed, samples, tol)?;
    out.extend(run_objective_suites(f, seed, samples, tol)?);
    out.extend(run_solver_suites(f, seed, samples, tol)?);
    Ok(out)
}

/// Per-step checks along a completed trace.
pub fn audit_trace(trace: &Trace, f: &dyn Objective, tol: f64) -> Result<Vec<AuditReport>> {
    let m = f.manifold();
    let seed = trace.config.seed;
    let recs = &trace.records;
    let mut out = Vec::new();

    match &trace.config.method {
        Method::Gradient(rule) => {
            if *rule == GradientStep::ConstantInvL {
                if let Some(l) = trace.constants.grad_lipschitz {
                    let mut t = Tally::new(AuditSuite::TraceStepDecrease, seed);
                    for w in recs.windows(2) {
                        let dn = w[0].dir_norm;
                        t.check(dn * dn / (2.0 * l), w[0].f_value - w[1].f_value, tol);
                    }
                    out.push(t.done());
                }
            }
            let steps: Vec<usize> = (0..recs.len()).filter(|&k| recs[k].step_t > 0.0).collect();
            if !steps.is_empty() {
                let mut rng = AuditSuite::TraceVariationalStep.rng(seed);
                let mut t = Tally::new(AuditSuite::TraceVariationalStep, seed);
                for i in 0..100 {
                    let r = &recs[steps[i % steps.len()]];
                    let res = f
                        .subgradient(&r.point)
                        .and_then(|g| variational_check(m, &g, r.step_t, &mut t, &mut rng));
                    t.record(res);
                }
                out.push(t.done());
            }
        }
        Method::Subgradient(rule) => {
            let opt = trace.constants.optimum.as_ref();
            if let (true, Some(opt)) = (trace.manifold.curvature.is_nonnegative(), opt) {
                // Valid for any reference point, so the oracle point is used
                // with its own value rather than the estimate of f*.
                let f_ref = f.value(&opt.point)?;
                let dists = recs
                    .iter()
                    .map(|r| m.distance(&r.point, &opt.point))
                    .collect::<Result<Vec<f64>>>()?;
                // Rounding in f enters through 2t (f(p*) - f(p_k)), and t = α/‖s‖
                // blows up near a kink.
                let f_err = |k: usize| 8.0 * f64::EPSILON * (f_ref.abs() + recs[k].f_value.abs());
                let mut t = Tally::new(AuditSuite::TraceFundamentalInequality, seed);
                for k in 0..recs.len() - 1 {
                    let (tk, sk) = (recs[k].step_t, recs[k].dir_norm);
                    t.check(
                        dists[k + 1] * dists[k + 1],
                        dists[k] * dists[k] + tk * tk * sk * sk + 2.0 * tk * (f_ref - recs[k].f_value),
                        tol + 2.0 * tk * f_err(k),
                    );
                }
                out.push(t.done());

                if let SubgradientStep::Polyak { .. } = rule {
                    let f_star = trace.constants.polyak_f_star.unwrap_or(opt.f_star);
                    let excess = (f_ref - f_star).max(0.0);
                    let mut t = Tally::new(AuditSuite::TracePolyakDistance, seed);
                    for k in 0..recs.len() - 1 {
                        t.check(
                            dists[k + 1] * dists[k + 1],
                            dists[k] * dists[k],
                            tol + 2.0 * recs[k].step_t * (excess + f_err(k)),
                        );
                    }
                    out.push(t.done());
                }
            }
        }
        Method::ProximalPoint { lambda, .. } => {
            let eps = if trace.constants.exact_prox {
                0.0
            } else {
                trace.config.inner.map(|i| i.eps).unwrap_or(0.0)
            };
            let mut t = Tally::new(AuditSuite::TraceProxCharacterization, seed);
            for w in recs.windows(2) {
                let d = m.distance(&w[0].point, &w[1].point)?;
                t.check(w[1].f_value + lambda * d * d, w[0].f_value, tol + eps * d);
            }
            out.push(t.done());
            if trace.constants.exact_prox && f.is_smooth() {
                let mut t = Tally::new(AuditSuite::TraceProxResidual, seed);
                for r in &recs[1..] {
                    t.check(r.dir_norm, 1e-8, 0.0);
                }
                out.push(t.done());
            }
        }
    }
    Ok(out)
}

/// Recertifies `theorem` on `count` random prefixes `1 <= N' <= N`.
pub fn check_prefix_monotonicity(
    trace: &Trace,
    theorem: TheoremId,
    count: usize,
    opts: &CertifyOptions,
) -> Result<AuditReport> {
    let n = trace.n();
    if n < 1 {
        return Err(Error::invalid("prefix audit needs N >= 1"));
    }
    let mut rng = AuditSuite::PrefixMonotonicity.rng(trace.config.seed);
    let mut t = Tally::new(AuditSuite::PrefixMonotonicity, trace.config.seed);
    for _ in 0..count {
        let k = rng.random_range(1..=n);
        let c = certify(theorem, &trace.truncated(k), opts)?;
        t.check(c.lhs, c.rhs, c.tol);
    }
    Ok(t.done())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::make_manifold;
    use crate::objectives::{distance_objective, squared_distance_objective};

    #[test]
    fn euclidean_passes_every_suite() {
        let m = make_manifold(ManifoldKind::Euclidean, 3).unwrap();
        let q = m.point(vec![0.5, -1.0, 2.0]).unwrap();
        for f in [
            squared_distance_objective(&m, q.clone(), f64::INFINITY).unwrap(),
            distance_objective(&m, q.clone(), f64::INFINITY).unwrap(),
        ] {
            let reports = run_audit_suites(&f, 1, 300, 1e-9).unwrap();
            assert!(reports.len() >= 10);
            for r in &reports {
                assert!(r.passed(), "{r:?}");
                assert!(r.samples > 0, "{r:?}");
            }
        }
    }

    #[test]
    fn halved_lipschitz_constant_is_caught() {
        let h = make_manifold(ManifoldKind::Hyperboloid, 2).unwrap();
        let q = h.point(vec![0.0, 0.0, 1.0]).unwrap();
        let f = squared_distance_objective(&h, q, 1.5).unwrap();
        let half = f.grad_lipschitz().unwrap().constant / 2.0;
        let bad = f.with_grad_lipschitz(half);
        let reports = run_objective_suites(&bad, 3, 200, 1e-9).unwrap();
        let descent = reports
            .iter()
            .find(|r| r.suite_id == AuditSuite::DescentLemma)
            .unwrap();
        assert!(descent.violations > 0);
    }

    #[test]
    fn zero_samples_is_invalid() {
        let m = make_manifold(ManifoldKind::Euclidean, 2).unwrap();
        assert!(run_geometry_suites(&m, 0, 0, 1e-9).is_err());
    }

    #[test]
    fn suites_are_deterministic() {
        let s = make_manifold(ManifoldKind::Sphere, 3).unwrap();
        let a = run_geometry_suites(&s, 9, 50, 1e-9).unwrap();
        let b = run_geometry_suites(&s, 9, 50, 1e-9).unwrap();
        assert_eq!(a, b);
    }
}
