use nalgebra::DVector;
use rand::RngCore;

use super::{gaussian_vector, ManifoldDescriptor, ManifoldKind};
use crate::error::Result;
use crate::geometry::Geometry;

/// Flat space ℝⁿ; exp is addition and transport is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Euclidean {
    n: usize,
}

impl Euclidean {
    pub fn new(n: usize) -> Self {
        Euclidean { n }
    }
}

impl Geometry for Euclidean {
    fn descriptor(&self) -> ManifoldDescriptor {
        ManifoldDescriptor {
            kind: ManifoldKind::Euclidean,
            dim: self.n,
            curvature: ManifoldKind::Euclidean.curvature(),
        }
    }

    fn embedding_residual(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn tangent_residual(&self, _base: &DVector<f64>, _v: &DVector<f64>) -> f64 {
        0.0
    }

    fn project_point(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }

    fn project_tangent(&self, _base: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }

    fn metric(&self, _base: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(v)
    }

    fn exp_map(&self, base: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(base + v)
    }

    fn log_map(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(q - p)
    }

    fn dist(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
        Ok((q - p).norm())
    }

    fn transport(
        &self,
        _p: &DVector<f64>,
        _q: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        Ok(v.clone())
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        gaussian_vector(self.n, rng)
    }
}
