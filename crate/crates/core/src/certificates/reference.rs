//! Reference optima for anchor objectives without a closed-form minimizer.
//!
//! A coarse grid in normal coordinates (low dimension only) picks the start;
//! fixed-point refinement then converges to the minimizer: the Karcher mean
//! iteration for squared-distance sums, Weiszfeld's iteration for distance
//! sums. The reported residual bounds `f(p̂) - f*` by convexity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point, TangentVector};
use crate::manifolds::Manifold;
use crate::objectives::{AnchorObjective, Objective, Optimum};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptions {
    /// Grid points per axis; the grid is skipped above three dimensions.
    pub grid_points: usize,
    pub max_iters: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            grid_points: 201,
            max_iters: 1_000_000,
        }
    }
}

/// Orthonormal basis of `T_p M` by Gram–Schmidt on random tangents.
fn tangent_basis(m: &Manifold, p: &Point) -> Vec<TangentVector> {
    let dim = m.descriptor().intrinsic_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut basis: Vec<TangentVector> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v = m.random_tangent(p, &mut rng);
        for _ in 0..2 {
            for b in &basis {
                v = v.sub(&b.scale(m.inner(&v, b))).expect("same base");
            }
        }
        let n = m.norm(&v);
        if n > 1e-6 {
            basis.push(v.scale(1.0 / n));
        }
    }
    basis
}

fn grid_start(f: &AnchorObjective, center: &Point, radius: f64, per_axis: usize) -> Result<Point> {
    let m = f.manifold();
    let basis = tangent_basis(m, center);
    let dim = basis.len();
    let mut best = (f.value(center)?, center.clone());
    let total = per_axis.pow(dim as u32);
    let coord = |i: usize| -radius + 2.0 * radius * i as f64 / (per_axis - 1) as f64;
    for idx in 0..total {
        let mut v = m.zero_vector(center);
        let mut rem = idx;
        let mut norm2 = 0.0;
        for b in &basis {
            let x = coord(rem % per_axis);
            rem /= per_axis;
            norm2 += x * x;
            v = v.add(&b.scale(x))?;
        }
        if norm2 > radius * radius {
            continue;
        }
        let p = m.exp(center, &v)?;
        if !f.domain().contains(m, &p)? {
            continue;
        }
        let val = f.value(&p)?;
        if val < best.0 {
            best = (val, p);
        }
    }
    Ok(best.1)
}

/// One Weiszfeld step, or `None` when `p` sits on an anchor that is optimal.
fn weiszfeld_direction(f: &AnchorObjective, p: &Point) -> Result<Option<TangentVector>> {
    let m = f.manifold();
    let anchors = f.anchors();
    let mut num = m.zero_vector(p);
    let mut den = 0.0;
    let mut on_anchor = None;
    for (q, &w) in anchors.anchors().iter().zip(anchors.weights()) {
        let v = m.log(p, q)?;
        let d = m.norm(&v);
        if d == 0.0 {
            on_anchor = Some(w);
            continue;
        }
        num = num.add(&v.scale(w / d))?;
        den += w / d;
    }
    if let Some(w) = on_anchor {
        // Resultant of the other unit pulls; the anchor is optimal if it is at most w.
        if m.norm(&num) <= w {
            return Ok(None);
        }
        // Step off the anchor along the resultant.
        return Ok(Some(num.scale(1e-6 / m.norm(&num))));
    }
    Ok(Some(num.scale(1.0 / den)))
}

/// Distance from 0 to the subdifferential at `p`.
fn stationarity(f: &AnchorObjective, p: &Point) -> Result<f64> {
    let m = f.manifold();
    let s = f.subgradient(p)?;
    if f.is_smooth() {
        return Ok(m.norm(&s));
    }
    // At an anchor the subdifferential is s + w B(0, 1).
    let anchors = f.anchors();
    let w_here: f64 = anchors
        .anchors()
        .iter()
        .zip(anchors.weights())
        .filter(|(q, _)| q.coords() == p.coords())
        .map(|(_, w)| *w)
        .sum();
    Ok((m.norm(&s) - w_here).max(0.0))
}

/// Minimizer and optimal value of an anchor objective, with a residual
/// bounding `f(p̂) - f*`.
pub fn reference_optimum(f: &AnchorObjective, opts: &ReferenceOptions) -> Result<Optimum> {
    let m = f.manifold();
    let anchors = f.anchors().anchors();
    let mut center = anchors[0].clone();
    for q in anchors {
        if f.value(q)? < f.value(&center)? {
            center = q.clone();
        }
    }
    let mut spread = 0.0f64;
    for q in anchors {
        spread = spread.max(m.distance(&center, q)?);
    }

    let mut p = if m.descriptor().intrinsic_dim() <= 3 && spread > 0.0 && opts.grid_points >= 2 {
        let per_axis = if m.descriptor().intrinsic_dim() == 3 {
            opts.grid_points.min(61)
        } else {
            opts.grid_points
        };
        grid_start(f, &center, spread, per_axis)?
    } else {
        center
    };

    let step = match f.grad_lipschitz() {
        Some(l) => 1.0 / l.constant,
        None => 1.0 / f.anchors().total_weight(),
    };
    for _ in 0..opts.max_iters {
        let dir = if f.is_smooth() {
            Some(f.subgradient(&p)?.scale(-step))
        } else {
            weiszfeld_direction(f, &p)?
        };
        let Some(dir) = dir else { break };
        let size = m.norm(&dir);
        if size <= 1e-16 {
            break;
        }
        let next = m.exp(&p, &dir)?;
        if next == p {
            break;
        }
        p = next;
    }

    let f_hat = f.value(&p)?;
    if !f_hat.is_finite() {
        return Err(Error::numerical("reference optimum has a non-finite value"));
    }
    // Convexity: f(p̂) - f* <= dist(0, ∂f(p̂)) d(p̂, p*), and p* lies in the
    // geodesic hull of the anchors, inside the ball through the farthest one.
    let mut reach = 0.0f64;
    for q in anchors {
        reach = reach.max(m.distance(&p, q)?);
    }
    let residual = stationarity(f, &p)? * reach + 1e-14 * (1.0 + f_hat.abs());
    Ok(Optimum {
        point: p,
        f_star: f_hat,
        residual,
    })
}
