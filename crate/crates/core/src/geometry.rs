//! Points, tangent vectors and the [`Geometry`] abstraction.
//!
//! Every manifold in the crate is embedded in an ambient coordinate space.
//! Implementors supply the closed-form primitives on raw ambient
//! coordinates (`*_map`, `dist`, `transport`); the provided methods wrap them
//! with argument validation and re-projection onto the embedding so that
//! callers only ever see well-formed [`Point`]s and [`TangentVector`]s.

use nalgebra::DVector;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::ManifoldDescriptor;

/// Tolerance for the embedding and tangency invariants of points and vectors.
pub const EMBEDDING_TOL: f64 = 1e-10;

/// Default tolerance of the comparison-inequality audits.
pub const DEFAULT_AUDIT_TOL: f64 = 1e-9;

/// Sign class of the sectional curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CurvatureClass {
    NonNegative,
    NonPositive,
    Zero,
}

impl CurvatureClass {
    /// Whether the lower law-of-cosines comparison `d(exp u, exp w) <= |u - w|` applies.
    pub fn is_nonnegative(self) -> bool {
        matches!(self, CurvatureClass::NonNegative | CurvatureClass::Zero)
    }

    /// Whether the upper comparison `d(exp u, exp w) >= |u - w|` applies.
    /// For the simply connected manifolds in this crate this is also the
    /// Hadamard property.
    pub fn is_nonpositive(self) -> bool {
        matches!(self, CurvatureClass::NonPositive | CurvatureClass::Zero)
    }
}

/// A location on a manifold, stored in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    manifold: ManifoldDescriptor,
    coords: DVector<f64>,
}

impl Point {
    /// Wraps coordinates without checking the embedding. Use
    /// [`Geometry::point`] for untrusted input.
    pub(crate) fn new_unchecked(manifold: ManifoldDescriptor, coords: DVector<f64>) -> Self {
        Point { manifold, coords }
    }

    pub fn manifold(&self) -> ManifoldDescriptor {
        self.manifold
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.as_slice().to_vec()
    }
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: Point,
    comps: DVector<f64>,
}

impl TangentVector {
    pub(crate) fn new_unchecked(base: Point, comps: DVector<f64>) -> Self {
        TangentVector { base, comps }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn comps(&self) -> &DVector<f64> {
        &self.comps
    }

    pub fn as_slice(&self) -> &[f64] {
        self.comps.as_slice()
    }

    /// `c * self`, same base point.
    pub fn scale(&self, c: f64) -> TangentVector {
        TangentVector::new_unchecked(self.base.clone(), &self.comps * c)
    }

    /// Componentwise sum; both vectors must share a base point.
    pub fn add(&self, other: &TangentVector) -> Result<TangentVector> {
        ensure_same_base(self.base(), other.base())?;
        Ok(TangentVector::new_unchecked(
            self.base.clone(),
            &self.comps + &other.comps,
        ))
    }

    pub fn sub(&self, other: &TangentVector) -> Result<TangentVector> {
        ensure_same_base(self.base(), other.base())?;
        Ok(TangentVector::new_unchecked(
            self.base.clone(),
            &self.comps - &other.comps,
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }
}

/// The geodesic `t -> exp_start(t * direction)` for `t` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSegment {
    pub start: Point,
    pub direction: TangentVector,
    pub length: f64,
}

impl GeodesicSegment {
    pub fn new<G: Geometry + ?Sized>(geom: &G, direction: TangentVector) -> Self {
        let length = geom.norm(&direction);
        GeodesicSegment {
            start: direction.base().clone(),
            direction,
            length,
        }
    }

    /// The minimal segment from `p` to `q`.
    pub fn between<G: Geometry + ?Sized>(geom: &G, p: &Point, q: &Point) -> Result<Self> {
        let direction = geom.log(p, q)?;
        Ok(Self::new(geom, direction))
    }

    pub fn at<G: Geometry + ?Sized>(&self, geom: &G, t: f64) -> Result<Point> {
        geom.exp(&self.start, &self.direction.scale(t))
    }

    pub fn end<G: Geometry + ?Sized>(&self, geom: &G) -> Result<Point> {
        self.at(geom, 1.0)
    }
}

/// One evaluation of a law-of-cosines comparison inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonAudit {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Closed-form Riemannian geometry of an embedded manifold.
///
/// Raw methods operate on ambient coordinates and may assume their inputs
/// satisfy the embedding; they should not re-project their output (the typed
/// wrappers do that).
pub trait Geometry {
    fn descriptor(&self) -> ManifoldDescriptor;

    fn curvature(&self) -> CurvatureClass {
        self.descriptor().curvature
    }

    /// Length of the ambient coordinate vector.
    fn ambient_len(&self) -> usize {
        self.descriptor().ambient_len()
    }

    /// Radius within which `log` is defined; infinite on Hadamard manifolds.
    fn injectivity_bound(&self) -> f64 {
        f64::INFINITY
    }

    /// Distance of `x` from satisfying the embedding constraint.
    /// Infinite when the constraint fails qualitatively (e.g. not positive definite).
    fn embedding_residual(&self, x: &DVector<f64>) -> f64;

    /// Distance of `v` from the tangent space at `base`.
    fn tangent_residual(&self, base: &DVector<f64>, v: &DVector<f64>) -> f64;

    fn project_point(&self, x: &DVector<f64>) -> DVector<f64>;

    fn project_tangent(&self, base: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    fn metric(&self, base: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64;

    fn exp_map(&self, base: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>>;

    fn log_map(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>>;

    fn dist(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<f64>;

    fn transport(
        &self,
        p: &DVector<f64>,
        q: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>>;

    /// Ambient Gaussian sample mapped onto the manifold.
    fn sample_point(&self, rng: &mut dyn RngCore) -> DVector<f64>;

    // ---- typed API ----

    /// Validates coordinates and wraps them as a point.
    fn point(&self, coords: Vec<f64>) -> Result<Point> {
        let desc = self.descriptor();
        if coords.len() != self.ambient_len() {
            return Err(Error::invalid(format!(
                "{desc}: expected {} coordinates, got {}",
                self.ambient_len(),
                coords.len()
            )));
        }
        let x = DVector::from_vec(coords);
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("{desc}: non-finite coordinate")));
        }
        let residual = self.embedding_residual(&x);
        if !(residual <= EMBEDDING_TOL) {
            return Err(Error::invalid(format!(
                "{desc}: point violates the embedding constraint (residual {residual:e})"
            )));
        }
        Ok(Point::new_unchecked(desc, x))
    }

    /// Re-projects arbitrary coordinates onto the manifold.
    fn project(&self, coords: Vec<f64>) -> Result<Point> {
        if coords.len() != self.ambient_len() {
            return Err(Error::invalid(format!(
                "expected {} coordinates, got {}",
                self.ambient_len(),
                coords.len()
            )));
        }
        let x = self.project_point(&DVector::from_vec(coords));
        self.finish_point(x)
    }

    /// Validates components and wraps them as a tangent vector at `base`.
    fn tangent(&self, base: &Point, comps: Vec<f64>) -> Result<TangentVector> {
        self.check_point(base)?;
        if comps.len() != self.ambient_len() {
            return Err(Error::invalid(format!(
                "expected {} tangent components, got {}",
                self.ambient_len(),
                comps.len()
            )));
        }
        let v = DVector::from_vec(comps);
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite tangent component"));
        }
        let residual = self.tangent_residual(base.coords(), &v);
        let scale = 1.0 + v.norm();
        if !(residual <= EMBEDDING_TOL * scale) {
            return Err(Error::invalid(format!(
                "vector is not tangent at the base point (residual {residual:e})"
            )));
        }
        Ok(TangentVector::new_unchecked(base.clone(), v))
    }

    /// Projects arbitrary components onto the tangent space at `base`.
    fn project_to_tangent(&self, base: &Point, comps: &DVector<f64>) -> TangentVector {
        TangentVector::new_unchecked(base.clone(), self.project_tangent(base.coords(), comps))
    }

    fn zero_vector(&self, base: &Point) -> TangentVector {
        TangentVector::new_unchecked(base.clone(), DVector::zeros(self.ambient_len()))
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.manifold() != self.descriptor() || p.coords().len() != self.ambient_len() {
            return Err(Error::invalid(format!(
                "point belongs to {}, not {}",
                p.manifold(),
                self.descriptor()
            )));
        }
        Ok(())
    }

    fn inner(&self, u: &TangentVector, v: &TangentVector) -> f64 {
        self.metric(u.base().coords(), u.comps(), v.comps())
    }

    fn norm(&self, v: &TangentVector) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    fn exp(&self, p: &Point, v: &TangentVector) -> Result<Point> {
        self.check_point(p)?;
        ensure_same_base(p, v.base())?;
        if !v.is_finite() {
            return Err(Error::invalid("exp: non-finite tangent vector"));
        }
        if v.comps().iter().all(|&c| c == 0.0) {
            return Ok(p.clone());
        }
        let raw = self.exp_map(p.coords(), v.comps())?;
        self.finish_point(raw)
    }

    fn log(&self, p: &Point, q: &Point) -> Result<TangentVector> {
        self.check_point(p)?;
        self.check_point(q)?;
        if p.coords() == q.coords() {
            return Ok(self.zero_vector(p));
        }
        let raw = self.log_map(p.coords(), q.coords())?;
        if raw.iter().any(|c| !c.is_finite()) {
            return Err(Error::numerical("log produced a non-finite vector"));
        }
        Ok(self.project_to_tangent(p, &raw))
    }

    fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        if p.coords() == q.coords() {
            return Ok(0.0);
        }
        let d = self.dist(p.coords(), q.coords())?;
        if !d.is_finite() {
            return Err(Error::numerical("distance is not finite"));
        }
        Ok(d)
    }

    fn parallel_transport(&self, p: &Point, q: &Point, v: &TangentVector) -> Result<TangentVector> {
        self.check_point(p)?;
        self.check_point(q)?;
        ensure_same_base(p, v.base())?;
        if p.coords() == q.coords() {
            return Ok(v.clone());
        }
        let raw = self.transport(p.coords(), q.coords(), v.comps())?;
        Ok(self.project_to_tangent(q, &raw))
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        let x = self.project_point(&self.sample_point(rng));
        Point::new_unchecked(self.descriptor(), x)
    }

    /// Gaussian ambient sample projected onto the tangent space at `p`.
    fn random_tangent(&self, p: &Point, rng: &mut dyn RngCore) -> TangentVector {
        let g = DVector::from_fn(self.ambient_len(), |_, _| {
            StandardNormal.sample(&mut *rng)
        });
        self.project_to_tangent(p, &g)
    }

    /// Random tangent direction at `p` rescaled to the given norm.
    fn random_tangent_with_norm(
        &self,
        p: &Point,
        norm: f64,
        rng: &mut dyn RngCore,
    ) -> TangentVector {
        loop {
            let v = self.random_tangent(p, rng);
            let n = self.norm(&v);
            if n > 1e-12 {
                return v.scale(norm / n);
            }
        }
    }

    #[doc(hidden)]
    fn finish_point(&self, raw: DVector<f64>) -> Result<Point> {
        if raw.iter().any(|c| !c.is_finite()) {
            return Err(Error::numerical("non-finite point coordinates"));
        }
        let x = self.project_point(&raw);
        let residual = self.embedding_residual(&x);
        if !(residual <= EMBEDDING_TOL) {
            return Err(Error::numerical(format!(
                "result violates the embedding after re-projection (residual {residual:e})"
            )));
        }
        Ok(Point::new_unchecked(self.descriptor(), x))
    }
}

pub(crate) fn ensure_same_base(p: &Point, q: &Point) -> Result<()> {
    if p.manifold() != q.manifold() || p.coords().len() != q.coords().len() {
        return Err(Error::invalid("tangent vector belongs to another manifold"));
    }
    let scale = 1.0 + p.coords().amax();
    let gap = (p.coords() - q.coords()).amax();
    if gap > 1e-12 * scale {
        return Err(Error::invalid(format!(
            "tangent vector is based at another point (offset {gap:e})"
        )));
    }
    Ok(())
}

fn comparison_inputs<G: Geometry + ?Sized>(
    geom: &G,
    p: &Point,
    u: &TangentVector,
    w: &TangentVector,
) -> Result<(f64, f64)> {
    ensure_same_base(p, u.base())?;
    ensure_same_base(p, w.base())?;
    let lhs = geom.distance(&geom.exp(p, u)?, &geom.exp(p, w)?)?;
    let rhs = geom.norm(&u.sub(w)?);
    Ok((lhs, rhs))
}

/// Checks `d(exp_p u, exp_p w) <= |u - w|`, valid under non-negative curvature.
///
/// When the injectivity bound is finite both vectors must be no longer than
/// half of it so that the two geodesic segments stay minimal.
pub fn check_comparison_nonneg<G: Geometry + ?Sized>(
    geom: &G,
    p: &Point,
    u: &TangentVector,
    w: &TangentVector,
    tol: f64,
) -> Result<ComparisonAudit> {
    if !geom.curvature().is_nonnegative() {
        return Err(Error::invalid(format!(
            "{} has {:?} curvature; the non-negative comparison does not apply",
            geom.descriptor(),
            geom.curvature()
        )));
    }
    let limit = geom.injectivity_bound() / 2.0;
    for v in [u, w] {
        if geom.norm(v) > limit * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "comparison vectors must have norm <= {limit}"
            )));
        }
    }
    let (lhs, rhs) = comparison_inputs(geom, p, u, w)?;
    Ok(ComparisonAudit {
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    })
}

/// Checks `d(exp_p u, exp_p w) >= |u - w|`, valid under non-positive curvature.
pub fn check_comparison_nonpos<G: Geometry + ?Sized>(
    geom: &G,
    p: &Point,
    u: &TangentVector,
    w: &TangentVector,
    tol: f64,
) -> Result<ComparisonAudit> {
    if !geom.curvature().is_nonpositive() {
        return Err(Error::invalid(format!(
            "{} has {:?} curvature; the non-positive comparison does not apply",
            geom.descriptor(),
            geom.curvature()
        )));
    }
    let (lhs, rhs) = comparison_inputs(geom, p, u, w)?;
    Ok(ComparisonAudit {
        lhs,
        rhs,
        holds: lhs >= rhs - tol,
    })
}
