//! Geodesically convex objectives built from anchor points.
//!
//! All four objectives are weighted sums over an [`AnchorSet`]:
//!
//! | constructor                    | value                  | smooth |
//! |--------------------------------|------------------------|--------|
//! | [`squared_distance_objective`] | `½ d²(p, q)`           | yes    |
//! | [`karcher_objective`]          | `½ Σ wᵢ d²(p, qᵢ)`     | yes    |
//! | [`distance_objective`]         | `d(p, q)`              | no     |
//! | [`fermat_weber_objective`]     | `Σ wᵢ d(p, qᵢ)`        | no     |
//!
//! Each objective carries a [`Domain`]: the set of points within `radius` of
//! every anchor. The declared constants (gradient Lipschitz `L`, function
//! Lipschitz `τ`) are only claimed on that set, and solvers stop when an
//! iterate leaves it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CurvatureClass, Geometry, Point, TangentVector};
use crate::manifolds::{Manifold, ManifoldKind};

/// Declared gradient Lipschitz constant, valid on the objective's domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBound {
    pub constant: f64,
    pub radius: f64,
}

/// A minimizer and the optimal value, possibly approximate.
///
/// `residual` bounds `f(point) - f*` for oracle-computed optima and is zero
/// for analytic ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub point: Point,
    pub f_star: f64,
    pub residual: f64,
}

impl Optimum {
    pub fn exact(point: Point, f_star: f64) -> Self {
        Optimum {
            point,
            f_star,
            residual: 0.0,
        }
    }
}

/// Value and (sub)gradient oracles plus the metadata the certificates need.
pub trait Objective: Send + Sync {
    fn id(&self) -> &str;

    fn manifold(&self) -> &Manifold;

    fn value(&self, p: &Point) -> Result<f64>;

    /// The gradient when smooth, otherwise some element of the subdifferential.
    fn subgradient(&self, p: &Point) -> Result<TangentVector>;

    fn is_smooth(&self) -> bool;

    fn domain(&self) -> &Domain;

    fn grad_lipschitz(&self) -> Option<LipschitzBound>;

    fn func_lipschitz(&self) -> Option<f64>;

    fn known_optimum(&self) -> Option<&Optimum>;

    /// `argmin_q f(q) + (λ/2) d²(p, q)` in closed form, when available.
    fn exact_prox(&self, p: &Point, lambda: f64) -> Option<Result<Point>>;

    fn has_exact_prox(&self) -> bool;
}

/// Weighted anchor points parameterizing the test objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    anchors: Vec<Point>,
    weights: Vec<f64>,
    total_weight: f64,
}

impl AnchorSet {
    pub fn new(anchors: Vec<Point>, weights: Vec<f64>) -> Result<AnchorSet> {
        if anchors.is_empty() {
            return Err(Error::invalid("anchor set is empty"));
        }
        if anchors.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} anchors but {} weights",
                anchors.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("anchor weight {w} is not positive")));
        }
        let desc = anchors[0].manifold();
        if anchors.iter().any(|a| a.manifold() != desc) {
            return Err(Error::invalid("anchors lie on different manifolds"));
        }
        let total_weight = weights.iter().sum();
        Ok(AnchorSet {
            anchors,
            weights,
            total_weight,
        })
    }

    pub fn unit(anchors: Vec<Point>) -> Result<AnchorSet> {
        let w = vec![1.0; anchors.len()];
        AnchorSet::new(anchors, w)
    }

    pub fn single(q: Point) -> AnchorSet {
        AnchorSet {
            anchors: vec![q],
            weights: vec![1.0],
            total_weight: 1.0,
        }
    }

    pub fn anchors(&self) -> &[Point] {
        &self.anchors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.anchors.iter().zip(self.weights.iter().copied())
    }
}

/// Points within `radius` of every center. An infinite radius means the whole manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub centers: Vec<Point>,
    pub radius: f64,
}

/// Sampling radius used when the domain is unbounded.
pub const UNBOUNDED_SAMPLING_RADIUS: f64 = 2.0;

impl Domain {
    pub fn is_bounded(&self) -> bool {
        self.radius.is_finite()
    }

    pub fn contains<G: Geometry + ?Sized>(&self, geom: &G, p: &Point) -> Result<bool> {
        if !self.is_bounded() {
            return Ok(true);
        }
        let slack = self.radius * 1e-12 + 1e-12;
        for c in &self.centers {
            if geom.distance(c, p)? > self.radius + slack {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Largest distance from `p` to a center.
    pub fn max_center_distance<G: Geometry + ?Sized>(&self, geom: &G, p: &Point) -> Result<f64> {
        let mut worst = 0.0f64;
        for c in &self.centers {
            worst = worst.max(geom.distance(c, p)?);
        }
        Ok(worst)
    }

    /// Rejection sample from a geodesic ball around the first center.
    ///
    /// The ball has the domain radius (scaled by `shrink`), or
    /// [`UNBOUNDED_SAMPLING_RADIUS`] for unbounded domains.
    pub fn sample<G: Geometry + ?Sized>(
        &self,
        geom: &G,
        shrink: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Point> {
        use rand::Rng;
        let center = &self.centers[0];
        let r = if self.is_bounded() {
            self.radius * shrink
        } else {
            UNBOUNDED_SAMPLING_RADIUS * shrink
        };
        let d = geom.descriptor().intrinsic_dim() as f64;
        for _ in 0..10_000 {
            let u: f64 = rng.random();
            let v = geom.random_tangent_with_norm(center, r * u.powf(1.0 / d), rng);
            let p = geom.exp(center, &v)?;
            if self.contains(geom, &p)? {
                return Ok(p);
            }
        }
        Err(Error::invalid(
            "could not sample a point inside the objective domain",
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    /// `½ Σ wᵢ d²(·, qᵢ)`
    SquaredSum,
    /// `Σ wᵢ d(·, qᵢ)`
    DistanceSum,
}

/// The concrete objective behind all four constructors.
#[derive(Debug, Clone)]
pub struct AnchorObjective {
    id: String,
    shape: Shape,
    manifold: Manifold,
    anchors: AnchorSet,
    domain: Domain,
    grad_lipschitz: Option<LipschitzBound>,
    func_lipschitz: Option<f64>,
    known_optimum: Option<Optimum>,
}

/// `R coth R`, the Hessian bound of `½ d²` at distance `R` under curvature ≥ -1.
pub fn r_coth_r(r: f64) -> f64 {
    if r < 1e-8 {
        1.0 + r * r / 3.0
    } else {
        r / r.tanh()
    }
}

impl AnchorObjective {
    fn build(
        id: &str,
        shape: Shape,
        manifold: &Manifold,
        anchors: AnchorSet,
        radius: f64,
    ) -> Result<AnchorObjective> {
        for a in anchors.anchors() {
            manifold.check_point(a)?;
        }
        if !(radius > 0.0) {
            return Err(Error::invalid(format!("domain radius {radius} must be positive")));
        }
        if manifold.kind() == ManifoldKind::Sphere && !(radius < FRAC_PI_2) {
            return Err(Error::invalid(format!(
                "domain radius {radius} must be below pi/2 on the sphere"
            )));
        }
        let domain = Domain {
            centers: anchors.anchors().to_vec(),
            radius,
        };
        for a in anchors.anchors() {
            if !domain.contains(manifold, a)? {
                return Err(Error::invalid(
                    "anchors are farther apart than the domain radius",
                ));
            }
        }

        let w = anchors.total_weight();
        let curvature = manifold.curvature();
        let (grad_lipschitz, func_lipschitz) = match shape {
            Shape::SquaredSum => {
                let constant = match curvature {
                    CurvatureClass::NonNegative | CurvatureClass::Zero => Some(w),
                    CurvatureClass::NonPositive if radius.is_finite() => {
                        Some(w * r_coth_r(radius).max(1.0))
                    }
                    CurvatureClass::NonPositive => None,
                };
                (constant.map(|constant| LipschitzBound { constant, radius }), None)
            }
            Shape::DistanceSum => (None, Some(w)),
        };

        Ok(AnchorObjective {
            id: id.to_string(),
            shape,
            manifold: manifold.clone(),
            anchors,
            domain,
            grad_lipschitz,
            func_lipschitz,
            known_optimum: None,
        })
    }

    pub fn anchors(&self) -> &AnchorSet {
        &self.anchors
    }

    pub fn with_known_optimum(mut self, optimum: Optimum) -> Self {
        self.known_optimum = Some(optimum);
        self
    }

    /// Replaces the declared gradient Lipschitz constant, keeping the radius.
    pub fn with_grad_lipschitz(mut self, constant: f64) -> Self {
        self.grad_lipschitz = Some(LipschitzBound {
            constant,
            radius: self.domain.radius,
        });
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// `½ d²(·, q)` on the ball of radius `radius` around `q`.
pub fn squared_distance_objective(
    manifold: &Manifold,
    q: Point,
    radius: f64,
) -> Result<AnchorObjective> {
    let obj = AnchorObjective::build(
        "squared_distance",
        Shape::SquaredSum,
        manifold,
        AnchorSet::single(q.clone()),
        radius,
    )?;
    Ok(obj.with_known_optimum(Optimum::exact(q, 0.0)))
}

/// `d(·, q)`, 1-Lipschitz, nonsmooth at `q`.
pub fn distance_objective(manifold: &Manifold, q: Point, radius: f64) -> Result<AnchorObjective> {
    let obj = AnchorObjective::build(
        "distance",
        Shape::DistanceSum,
        manifold,
        AnchorSet::single(q.clone()),
        radius,
    )?;
    Ok(obj.with_known_optimum(Optimum::exact(q, 0.0)))
}

/// Weighted geometric median objective `Σ wᵢ d(·, qᵢ)`.
///
/// On the sphere the anchors must fit in a ball of radius π/4 around their
/// normalized centroid.
pub fn fermat_weber_objective(
    manifold: &Manifold,
    anchors: AnchorSet,
    radius: f64,
) -> Result<AnchorObjective> {
    if manifold.kind() == ManifoldKind::Sphere {
        let mut sum = nalgebra::DVector::zeros(manifold.ambient_len());
        for a in anchors.anchors() {
            sum += a.coords();
        }
        let centroid = manifold
            .project(sum.as_slice().to_vec())
            .map_err(|_| Error::invalid("anchors have no spherical centroid"))?;
        for a in anchors.anchors() {
            if manifold.distance(&centroid, a)? >= FRAC_PI_4 {
                return Err(Error::invalid(
                    "fermat-weber anchors must lie within pi/4 of their centroid on the sphere",
                ));
            }
        }
    }
    AnchorObjective::build("fermat_weber", Shape::DistanceSum, manifold, anchors, radius)
}

/// Weighted Fréchet (Karcher) mean objective `½ Σ wᵢ d²(·, qᵢ)`.
pub fn karcher_objective(
    manifold: &Manifold,
    anchors: AnchorSet,
    radius: f64,
) -> Result<AnchorObjective> {
    AnchorObjective::build("karcher", Shape::SquaredSum, manifold, anchors, radius)
}

impl Objective for AnchorObjective {
    fn id(&self) -> &str {
        &self.id
    }

    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn value(&self, p: &Point) -> Result<f64> {
        let m = &self.manifold;
        let mut total = 0.0;
        for (q, w) in self.anchors.iter() {
            let d = m.distance(p, q)?;
            total += match self.shape {
                Shape::SquaredSum => 0.5 * w * d * d,
                Shape::DistanceSum => w * d,
            };
        }
        Ok(total)
    }

    fn subgradient(&self, p: &Point) -> Result<TangentVector> {
        let m = &self.manifold;
        let mut g = m.zero_vector(p);
        for (q, w) in self.anchors.iter() {
            let toward = m.log(p, q)?;
            let term = match self.shape {
                Shape::SquaredSum => toward.scale(-w),
                Shape::DistanceSum => {
                    let d = m.norm(&toward);
                    if d == 0.0 {
                        // 0 is a subgradient of d(·, q) at q.
                        continue;
                    }
                    toward.scale(-w / d)
                }
            };
            g = g.add(&term)?;
        }
        Ok(g)
    }

    fn is_smooth(&self) -> bool {
        self.shape == Shape::SquaredSum
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn grad_lipschitz(&self) -> Option<LipschitzBound> {
        self.grad_lipschitz
    }

    fn func_lipschitz(&self) -> Option<f64> {
        self.func_lipschitz
    }

    fn known_optimum(&self) -> Option<&Optimum> {
        self.known_optimum.as_ref()
    }

    /// For `(w/2) d²(·, q)` on a Hadamard manifold the proximal point lies on
    /// the geodesic from `p` to `q` at fraction `w / (w + λ)`.
    fn exact_prox(&self, p: &Point, lambda: f64) -> Option<Result<Point>> {
        if !self.has_exact_prox() {
            return None;
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Some(Err(Error::invalid(format!(
                "prox parameter {lambda} must be positive"
            ))));
        }
        let m = &self.manifold;
        let (q, w) = (&self.anchors.anchors()[0], self.anchors.weights()[0]);
        Some(m.log(p, q).and_then(|v| m.exp(p, &v.scale(w / (w + lambda)))))
    }

    fn has_exact_prox(&self) -> bool {
        self.shape == Shape::SquaredSum
            && self.anchors.len() == 1
            && self.manifold.descriptor().is_hadamard()
    }
}
