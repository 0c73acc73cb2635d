use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::RngCore;

use super::{gaussian_vector, ManifoldDescriptor, ManifoldKind};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point, TangentVector};

/// Largest supported matrix size.
pub const MAX_SPD_SIZE: usize = 200;

/// Symmetric positive definite n×n matrices with the affine-invariant metric
/// `<U, V>_P = tr(P⁻¹ U P⁻¹ V)`.
///
/// Points and tangent vectors are stored as row-major flattened matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Spd {
    n: usize,
}

/// Eigendecomposition of a symmetric matrix.
struct Eigen {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl Eigen {
    fn of(m: &DMatrix<f64>) -> Result<Eigen> {
        let s = symmetrize(m);
        let eig = SymmetricEigen::try_new(s, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::numerical("symmetric eigendecomposition did not converge"))?;
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite eigenvalue"));
        }
        Ok(Eigen {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    /// `V f(Λ) Vᵀ`.
    fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * f(self.values[j])
        });
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    fn min(&self) -> f64 {
        self.values.min()
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `P^{1/2}` and `P^{-1/2}` of a positive definite matrix.
struct Whitening {
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

impl Whitening {
    fn of(p: &DMatrix<f64>) -> Result<Whitening> {
        let eig = Eigen::of(p)?;
        if !(eig.min() > 0.0) {
            return Err(Error::numerical("matrix is not positive definite"));
        }
        Ok(Whitening {
            sqrt: eig.apply(f64::sqrt),
            inv_sqrt: eig.apply(|x| 1.0 / x.sqrt()),
        })
    }

    /// `P^{-1/2} A P^{-1/2}`.
    fn whiten(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.inv_sqrt * a * &self.inv_sqrt))
    }

    /// `P^{1/2} A P^{1/2}`.
    fn color(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.sqrt * a * &self.sqrt))
    }
}

impl Spd {
    pub fn new(n: usize) -> Result<Spd> {
        if n < 1 {
            return Err(Error::invalid("spd: matrix size must be >= 1"));
        }
        if n > MAX_SPD_SIZE {
            return Err(Error::invalid(format!(
                "spd: matrix size {n} exceeds the supported maximum {MAX_SPD_SIZE}"
            )));
        }
        Ok(Spd { n })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn to_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, x.as_slice())
    }

    pub fn from_matrix(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n * self.n, m.transpose().iter().copied())
    }

    /// Eigenvalues of `P^{-1/2} Q P^{-1/2}` (the generalized eigenvalues of the pair).
    fn relative_eigenvalues(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        let w = Whitening::of(&self.to_matrix(p))?;
        let eig = Eigen::of(&w.whiten(&self.to_matrix(q)))?;
        if !(eig.min() > 0.0) {
            return Err(Error::numerical("relative eigenvalue is not positive"));
        }
        Ok(eig.values)
    }
}

/// `P^{1/2} mexp(P^{-1/2} V P^{-1/2}) P^{1/2}`.
pub fn spd_exp(m: &Spd, p: &Point, v: &TangentVector) -> Result<Point> {
    m.exp(p, v)
}

/// `|log λ(P^{-1/2} Q P^{-1/2})|₂`.
pub fn spd_distance(m: &Spd, p: &Point, q: &Point) -> Result<f64> {
    for x in [p, q] {
        if !(m.embedding_residual(x.coords()) <= crate::geometry::EMBEDDING_TOL) {
            return Err(Error::invalid("spd_distance: input is not positive definite"));
        }
    }
    m.distance(p, q)
}

impl Geometry for Spd {
    fn descriptor(&self) -> ManifoldDescriptor {
        ManifoldDescriptor {
            kind: ManifoldKind::Spd,
            dim: self.n,
            curvature: ManifoldKind::Spd.curvature(),
        }
    }

    fn embedding_residual(&self, x: &DVector<f64>) -> f64 {
        let m = self.to_matrix(x);
        let scale = 1.0 + m.amax();
        let asym = (&m - m.transpose()).amax() / scale;
        match Eigen::of(&m) {
            Ok(eig) if eig.min() > 0.0 => asym,
            _ => f64::INFINITY,
        }
    }

    fn tangent_residual(&self, _base: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let m = self.to_matrix(v);
        (&m - m.transpose()).amax()
    }

    fn project_point(&self, x: &DVector<f64>) -> DVector<f64> {
        self.from_matrix(&symmetrize(&self.to_matrix(x)))
    }

    fn project_tangent(&self, _base: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.from_matrix(&symmetrize(&self.to_matrix(v)))
    }

    fn metric(&self, base: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        // tr(P⁻¹UP⁻¹V) = <P^{-1/2}UP^{-1/2}, P^{-1/2}VP^{-1/2}>_F
        match Whitening::of(&self.to_matrix(base)) {
            Ok(w) => w
                .whiten(&self.to_matrix(u))
                .dot(&w.whiten(&self.to_matrix(v))),
            Err(_) => f64::NAN,
        }
    }

    fn exp_map(&self, base: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let w = Whitening::of(&self.to_matrix(base))?;
        let inner = Eigen::of(&w.whiten(&self.to_matrix(v)))?.apply(f64::exp);
        Ok(self.from_matrix(&w.color(&inner)))
    }

    fn log_map(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        let w = Whitening::of(&self.to_matrix(p))?;
        let eig = Eigen::of(&w.whiten(&self.to_matrix(q)))?;
        if !(eig.min() > 0.0) {
            return Err(Error::numerical("log of a matrix that is not positive definite"));
        }
        Ok(self.from_matrix(&w.color(&eig.apply(f64::ln))))
    }

    fn dist(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
        let lambdas = self.relative_eigenvalues(p, q)?;
        Ok(lambdas.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
    }

    /// `E V Eᵀ` with `E = (Q P⁻¹)^{1/2} = P^{1/2} (P^{-1/2} Q P^{-1/2})^{1/2} P^{-1/2}`.
    fn transport(
        &self,
        p: &DVector<f64>,
        q: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let w = Whitening::of(&self.to_matrix(p))?;
        let s = Eigen::of(&w.whiten(&self.to_matrix(q)))?;
        if !(s.min() > 0.0) {
            return Err(Error::numerical("transport target is not positive definite"));
        }
        let e = &w.sqrt * s.apply(f64::sqrt) * &w.inv_sqrt;
        let moved = &e * self.to_matrix(v) * e.transpose();
        Ok(self.from_matrix(&symmetrize(&moved)))
    }

    /// `mexp(S / 2)` of a symmetric Gaussian `S`.
    fn sample_point(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let g = self.to_matrix(&gaussian_vector(self.n * self.n, rng));
        let s = symmetrize(&g) * 0.5;
        match Eigen::of(&s) {
            Ok(eig) => self.from_matrix(&eig.apply(f64::exp)),
            Err(_) => self.from_matrix(&DMatrix::identity(self.n, self.n)),
        }
    }
}
