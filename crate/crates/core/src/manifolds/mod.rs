//! Concrete manifolds: Euclidean space, the unit sphere, the hyperboloid
//! model of hyperbolic space and SPD matrices with the affine-invariant metric.

mod euclidean;
mod hyperboloid;
mod sphere;
mod spd;

use std::fmt;

use nalgebra::DVector;
use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use euclidean::Euclidean;
pub use hyperboloid::{minkowski, Hyperboloid};
pub use sphere::Sphere;
pub use spd::{spd_distance, spd_exp, Spd, MAX_SPD_SIZE};

use crate::error::{Error, Result};
use crate::geometry::{CurvatureClass, Geometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Euclidean,
    Sphere,
    Hyperboloid,
    Spd,
}

impl ManifoldKind {
    pub fn curvature(self) -> CurvatureClass {
        match self {
            ManifoldKind::Euclidean => CurvatureClass::Zero,
            ManifoldKind::Sphere => CurvatureClass::NonNegative,
            ManifoldKind::Hyperboloid | ManifoldKind::Spd => CurvatureClass::NonPositive,
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ManifoldKind::Euclidean => "euclidean",
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::Hyperboloid => "hyperboloid",
            ManifoldKind::Spd => "spd",
        };
        f.write_str(s)
    }
}

/// Identifies a manifold: its kind, its size parameter and its curvature class.
///
/// `dim` is the intrinsic dimension for Euclidean space, the sphere and the
/// hyperboloid, and the matrix size `n` for SPD(n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ManifoldDescriptor {
    pub kind: ManifoldKind,
    pub dim: usize,
    pub curvature: CurvatureClass,
}

impl ManifoldDescriptor {
    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Spd => self.dim * (self.dim + 1) / 2,
            _ => self.dim,
        }
    }

    pub fn ambient_len(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean => self.dim,
            ManifoldKind::Sphere | ManifoldKind::Hyperboloid => self.dim + 1,
            ManifoldKind::Spd => self.dim * self.dim,
        }
    }

    pub fn is_hadamard(&self) -> bool {
        self.curvature.is_nonpositive()
    }
}

impl fmt::Display for ManifoldDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ManifoldKind::Spd => write!(f, "spd({})", self.dim),
            kind => write!(f, "{kind}({})", self.dim),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DescriptorRepr {
    kind: ManifoldKind,
    dim: usize,
}

impl Serialize for ManifoldDescriptor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DescriptorRepr {
            kind: self.kind,
            dim: self.dim,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ManifoldDescriptor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = DescriptorRepr::deserialize(d)?;
        make_manifold(repr.kind, repr.dim)
            .map(|m| m.descriptor())
            .map_err(serde::de::Error::custom)
    }
}

/// Any of the supported manifolds.
#[derive(Debug, Clone, PartialEq)]
pub enum Manifold {
    Euclidean(Euclidean),
    Sphere(Sphere),
    Hyperboloid(Hyperboloid),
    Spd(Spd),
}

/// Builds a manifold; `dim` is the matrix size for SPD.
pub fn make_manifold(kind: ManifoldKind, dim: usize) -> Result<Manifold> {
    if dim < 1 {
        return Err(Error::invalid(format!("{kind}: dimension must be >= 1")));
    }
    Ok(match kind {
        ManifoldKind::Euclidean => Manifold::Euclidean(Euclidean::new(dim)),
        ManifoldKind::Sphere => Manifold::Sphere(Sphere::new(dim)),
        ManifoldKind::Hyperboloid => Manifold::Hyperboloid(Hyperboloid::new(dim)),
        ManifoldKind::Spd => Manifold::Spd(Spd::new(dim)?),
    })
}

impl Manifold {
    pub fn from_descriptor(desc: ManifoldDescriptor) -> Result<Manifold> {
        make_manifold(desc.kind, desc.dim)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.descriptor().kind
    }
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $body:expr) => {
        match $self {
            Manifold::Euclidean($m) => $body,
            Manifold::Sphere($m) => $body,
            Manifold::Hyperboloid($m) => $body,
            Manifold::Spd($m) => $body,
        }
    };
}

impl Geometry for Manifold {
    fn descriptor(&self) -> ManifoldDescriptor {
        dispatch!(self, m => m.descriptor())
    }

    fn injectivity_bound(&self) -> f64 {
        dispatch!(self, m => m.injectivity_bound())
    }

    fn embedding_residual(&self, x: &DVector<f64>) -> f64 {
        dispatch!(self, m => m.embedding_residual(x))
    }

    fn tangent_residual(&self, base: &DVector<f64>, v: &DVector<f64>) -> f64 {
        dispatch!(self, m => m.tangent_residual(base, v))
    }

    fn project_point(&self, x: &DVector<f64>) -> DVector<f64> {
        dispatch!(self, m => m.project_point(x))
    }

    fn project_tangent(&self, base: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        dispatch!(self, m => m.project_tangent(base, v))
    }

    fn metric(&self, base: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        dispatch!(self, m => m.metric(base, u, v))
    }

    fn exp_map(&self, base: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        dispatch!(self, m => m.exp_map(base, v))
    }

    fn log_map(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        dispatch!(self, m => m.log_map(p, q))
    }

    fn dist(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
        dispatch!(self, m => m.dist(p, q))
    }

    fn transport(
        &self,
        p: &DVector<f64>,
        q: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        dispatch!(self, m => m.transport(p, q, v))
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        dispatch!(self, m => m.sample_point(rng))
    }
}

pub(crate) fn gaussian_vector(len: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    use rand_distr::{Distribution, StandardNormal};
    DVector::from_fn(len, |_, _| StandardNormal.sample(&mut *rng))
}
