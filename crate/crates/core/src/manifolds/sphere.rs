use std::f64::consts::PI;

use nalgebra::DVector;
use rand::RngCore;

use super::{gaussian_vector, ManifoldDescriptor, ManifoldKind};
use crate::error::{Error, Result};
use crate::geometry::Geometry;

/// Below this norm exp uses its Taylor expansion.
const SMALL_ANGLE: f64 = 1e-8;

/// `log` and transport reject pairs closer than this to antipodal.
pub const ANTIPODAL_MARGIN: f64 = 1e-6;

/// The unit sphere Sⁿ ⊂ ℝⁿ⁺¹ with the round metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    n: usize,
}

impl Sphere {
    pub fn new(n: usize) -> Self {
        Sphere { n }
    }
}

impl Geometry for Sphere {
    fn descriptor(&self) -> ManifoldDescriptor {
        ManifoldDescriptor {
            kind: ManifoldKind::Sphere,
            dim: self.n,
            curvature: ManifoldKind::Sphere.curvature(),
        }
    }

    fn injectivity_bound(&self) -> f64 {
        PI
    }

    fn embedding_residual(&self, x: &DVector<f64>) -> f64 {
        (x.norm() - 1.0).abs()
    }

    fn tangent_residual(&self, base: &DVector<f64>, v: &DVector<f64>) -> f64 {
        base.dot(v).abs()
    }

    fn project_point(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = x.norm();
        if n == 0.0 {
            let mut e = DVector::zeros(x.len());
            e[x.len() - 1] = 1.0;
            return e;
        }
        x / n
    }

    fn project_tangent(&self, base: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v - base * base.dot(v)
    }

    fn metric(&self, _base: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(v)
    }

    fn exp_map(&self, base: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let theta = v.norm();
        if theta < SMALL_ANGLE {
            let t2 = theta * theta;
            return Ok(base * (1.0 - t2 / 2.0) + v * (1.0 - t2 / 6.0));
        }
        Ok(base * theta.cos() + v * (theta.sin() / theta))
    }

    fn log_map(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        let theta = self.dist(p, q)?;
        if theta > PI - ANTIPODAL_MARGIN {
            return Err(Error::domain(format!(
                "sphere log undefined: points are {theta} apart (near antipodal)"
            )));
        }
        let u = q - p * p.dot(q);
        let nu = u.norm();
        if nu == 0.0 {
            return Ok(DVector::zeros(p.len()));
        }
        Ok(u * (theta / nu))
    }

    /// `2 asin(|p - q| / 2)`: well conditioned for nearby points, unlike `acos(<p, q>)`.
    fn dist(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
        let half_chord = (p - q).norm() / 2.0;
        if half_chord > 1.0 + 1e-7 {
            return Err(Error::numerical(format!(
                "chord length {} exceeds the sphere diameter",
                2.0 * half_chord
            )));
        }
        Ok(2.0 * half_chord.min(1.0).asin())
    }

    fn transport(
        &self,
        p: &DVector<f64>,
        q: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        if self.dist(p, q)? > PI - ANTIPODAL_MARGIN {
            return Err(Error::domain(
                "sphere transport undefined: minimal geodesic is not unique",
            ));
        }
        let c = 1.0 + p.dot(q);
        Ok(v - (p + q) * (q.dot(v) / c))
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        gaussian_vector(self.n + 1, rng)
    }
}
