use nalgebra::DVector;
use rand::RngCore;

use super::{gaussian_vector, ManifoldDescriptor, ManifoldKind};
use crate::error::{Error, Result};
use crate::geometry::Geometry;

const SMALL_NORM: f64 = 1e-8;

/// Minkowski product `<x, y>_L = x_0 y_0 + ... + x_{n-1} y_{n-1} - x_n y_n`.
pub fn minkowski(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let n = x.len() - 1;
    x.rows(0, n).dot(&y.rows(0, n)) - x[n] * y[n]
}

/// Hyperbolic space Hⁿ as the upper sheet `<x, x>_L = -1, x_n > 0` in ℝⁿ,¹.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperboloid {
    n: usize,
}

impl Hyperboloid {
    pub fn new(n: usize) -> Self {
        Hyperboloid { n }
    }
}

impl Geometry for Hyperboloid {
    fn descriptor(&self) -> ManifoldDescriptor {
        ManifoldDescriptor {
            kind: ManifoldKind::Hyperboloid,
            dim: self.n,
            curvature: ManifoldKind::Hyperboloid.curvature(),
        }
    }

    fn embedding_residual(&self, x: &DVector<f64>) -> f64 {
        if !(x[self.n] > 0.0) {
            return f64::INFINITY;
        }
        // Relative to the size of the coordinates: -<x,x>_L = 1 is a difference
        // of two numbers of size |x|^2.
        (minkowski(x, x) + 1.0).abs() / (1.0 + x[self.n] * x[self.n]).sqrt()
    }

    fn tangent_residual(&self, base: &DVector<f64>, v: &DVector<f64>) -> f64 {
        minkowski(base, v).abs() / (1.0 + base[self.n].abs())
    }

    /// Keeps the spatial part and recomputes the time coordinate.
    fn project_point(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        let spatial = x.rows(0, self.n).norm_squared();
        out[self.n] = (1.0 + spatial).sqrt();
        out
    }

    fn project_tangent(&self, base: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v + base * minkowski(base, v)
    }

    fn metric(&self, _base: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        minkowski(u, v)
    }

    fn exp_map(&self, base: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let theta = minkowski(v, v).max(0.0).sqrt();
        if theta < SMALL_NORM {
            let t2 = theta * theta;
            return Ok(base * (1.0 + t2 / 2.0) + v * (1.0 + t2 / 6.0));
        }
        Ok(base * theta.cosh() + v * (theta.sinh() / theta))
    }

    fn log_map(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.dist(p, q)?;
        let alpha = -minkowski(p, q);
        let u = q - p * alpha;
        let nu = minkowski(&u, &u).max(0.0).sqrt();
        if nu == 0.0 {
            return Ok(DVector::zeros(p.len()));
        }
        Ok(u * (d / nu))
    }

    /// `2 asinh(sqrt(<p - q, p - q>_L) / 2)`, accurate for nearby points where
    /// `acosh(-<p, q>_L)` loses half the digits.
    fn dist(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
        let diff = p - q;
        let chord2 = minkowski(&diff, &diff);
        let scale = 1.0 + p[self.n] * q[self.n];
        if chord2 < -1e-7 * scale {
            return Err(Error::numerical(format!(
                "negative Minkowski chord {chord2:e} between hyperboloid points"
            )));
        }
        Ok(2.0 * (chord2.max(0.0).sqrt() / 2.0).asinh())
    }

    fn transport(
        &self,
        p: &DVector<f64>,
        q: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let alpha = -minkowski(p, q);
        Ok(v + (p + q) * (minkowski(q, v) / (1.0 + alpha)))
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let mut x = gaussian_vector(self.n + 1, rng);
        x[self.n] = 1.0;
        x
    }
}
