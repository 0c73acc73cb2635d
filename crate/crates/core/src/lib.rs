//! First-order Riemannian optimization with machine-checked
//! iteration-complexity certificates.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: points, tangent vectors and the [`Geometry`] trait;
//! * [`manifolds`]: Euclidean space, the sphere, the hyperboloid and SPD(n);
//! * [`objectives`]: geodesically convex test objectives with declared
//!   Lipschitz constants, optima and proximal maps;
//! * [`solvers`]: the gradient, subgradient and proximal point methods;
//! * [`certificates`]: complexity-bound certificates over traces, sampled
//!   audit suites and reference optima.

pub mod certificates;
pub mod error;
pub mod geometry;
pub mod manifolds;
pub mod objectives;
pub mod solvers;

pub use error::{Error, Result};
pub use geometry::{CurvatureClass, GeodesicSegment, Geometry, Point, TangentVector};
pub use manifolds::{make_manifold, Manifold, ManifoldDescriptor, ManifoldKind};
