//! Points, metric and charts on complex projective space P^k, k in {1, 2}.
//!
//! A point is stored as a unit-norm homogeneous coordinate vector in C^(k+1);
//! two vectors differing by a phase represent the same point. The metric is
//! the Fubini-Study geodesic distance `arccos |<x, y>|`, with values in
//! [0, pi/2].
//!
//! A chart at `x` is the map `u -> normalize(X + E u)` from C^k into P^k,
//! where the columns of `E` form a deterministic orthonormal basis of the
//! orthogonal complement of the lift `X`. This map is globally injective,
//! sends 0 to `x`, and pulls the Fubini-Study metric back to the standard
//! Hermitian metric at the origin, so chart coordinates are isometric to
//! first order. `chart_inverse` is defined away from the polar hyperplane
//! `<X, y> = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, hdot, norm, orthonormal_complement, C64, CMat, CVec};

/// Radius (in chart coordinates) inside which chart geometry stays close to
/// Euclidean; used by callers as a validity guard, not enforced by the chart
/// maps themselves (they are globally defined).
pub const CHART_VALIDITY_RADIUS: f64 = 0.5;

/// A point of P^k as a unit-norm lift in C^(k+1).
#[derive(Debug, Clone)]
pub struct ProjPoint {
    coords: CVec,
}

impl Serialize for ProjPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coord_pairs().serialize(s)
    }
}

impl ProjPoint {
    /// Normalize an arbitrary nonzero lift.
    pub fn new(coords: CVec) -> Result<Self> {
        let k = coords.len();
        if k != 2 && k != 3 {
            return Err(Error::invalid_input(format!(
                "ProjPoint: ambient dimension must be 2 or 3, got {k}"
            )));
        }
        if coords.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid_input("ProjPoint: non-finite coordinate"));
        }
        let n = norm(&coords);
        if n < 1e-150 {
            return Err(Error::invalid_input("ProjPoint: zero vector"));
        }
        Ok(ProjPoint {
            coords: coords / c64(n, 0.0),
        })
    }

    pub fn from_slice(parts: &[C64]) -> Result<Self> {
        ProjPoint::new(CVec::from_vec(parts.to_vec()))
    }

    /// Affine point (z : 1) on P^1 or (z, w, 1) on P^2.
    pub fn from_affine(parts: &[C64]) -> Result<Self> {
        let mut v = parts.to_vec();
        v.push(c64(1.0, 0.0));
        ProjPoint::from_slice(&v)
    }

    pub fn coords(&self) -> &CVec {
        &self.coords
    }

    /// Unit-lift coordinates as (re, im) pairs, for serialization.
    pub fn coord_pairs(&self) -> Vec<(f64, f64)> {
        self.coords.iter().map(|z| (z.re, z.im)).collect()
    }

    /// Dimension k of the projective space this point lives in.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    /// First affine coordinate x0/x_k where defined (used for P^1 charts and
    /// reporting); returns None for points on the hyperplane at infinity.
    pub fn affine(&self) -> Option<Vec<C64>> {
        let last = self.coords[self.coords.len() - 1];
        if last.norm() < 1e-14 {
            return None;
        }
        Some(
            self.coords
                .iter()
                .take(self.coords.len() - 1)
                .map(|z| z / last)
                .collect(),
        )
    }
}

/// Fubini-Study geodesic distance, in [0, pi/2].
pub fn fs_distance(x: &ProjPoint, y: &ProjPoint) -> f64 {
    assert_eq!(x.dim(), y.dim(), "fs_distance: dimension mismatch");
    let ip = hdot(&x.coords, &y.coords).norm();
    ip.clamp(0.0, 1.0).acos()
}

/// Sine of the Fubini-Study distance, from the 2x2 minors of the two lifts.
/// `arccos |<x,y>|` loses all accuracy below ~1e-8 (the square root of
/// machine epsilon); this form is cancellation-free, so it is the right
/// residual for near-equality checks. For small separations it agrees with
/// [`fs_distance`] to cubic order.
pub fn proj_residual(x: &ProjPoint, y: &ProjPoint) -> f64 {
    assert_eq!(x.dim(), y.dim(), "proj_residual: dimension mismatch");
    let a = &x.coords;
    let b = &y.coords;
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += (a[i] * b[j] - a[j] * b[i]).norm_sqr();
        }
    }
    s.sqrt().min(1.0)
}

/// An orthonormal chart at a point.
#[derive(Debug, Clone)]
pub struct Chart {
    pub center: ProjPoint,
    /// (k+1) x k matrix with orthonormal columns spanning the orthogonal
    /// complement of the center lift.
    pub frame: CMat,
}

/// Deterministic chart at `x`. The optional `hint` is a (k+1)x(k+1) unitary
/// whose columns replace the canonical basis before pivoted Gram-Schmidt;
/// estimates downstream must not depend on this choice.
pub fn chart_at(x: &ProjPoint, hint: Option<&CMat>) -> Result<Chart> {
    let frame = orthonormal_complement(x.coords(), hint)?;
    Ok(Chart {
        center: x.clone(),
        frame,
    })
}

/// Chart map: u in C^k to the projective point normalize(X + E u).
pub fn chart_apply(chart: &Chart, u: &CVec) -> Result<ProjPoint> {
    if u.len() != chart.center.dim() {
        return Err(Error::invalid_input("chart_apply: wrong tangent dimension"));
    }
    let v = chart.center.coords() + &chart.frame * u;
    ProjPoint::new(v)
}

/// Chart coordinates of a point `y`: the unique `u` with
/// `chart_apply(chart, u) = y`, defined away from the polar hyperplane of
/// the center. Errors when `y` is within 1e-9 of that hyperplane.
pub fn chart_inverse(chart: &Chart, y: &ProjPoint) -> Result<CVec> {
    let alpha = hdot(chart.center.coords(), y.coords());
    if alpha.norm() < 1e-9 {
        return Err(Error::numeric(
            "chart_inverse: point on the polar hyperplane of the chart center",
        ));
    }
    let w = chart.frame.adjoint() * y.coords();
    Ok(w / alpha)
}

/// A tangent vector expressed in the chart at its base point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TangentVector {
    /// Base point lift (unit norm), as re/im pairs.
    pub base: Vec<(f64, f64)>,
    /// Components in the chart frame at the base.
    pub components: Vec<(f64, f64)>,
}

impl TangentVector {
    pub fn new(base: &ProjPoint, components: &CVec) -> Result<Self> {
        if components.len() != base.dim() {
            return Err(Error::invalid_input("TangentVector: wrong dimension"));
        }
        if components
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::invalid_input("TangentVector: non-finite component"));
        }
        Ok(TangentVector {
            base: base.coords().iter().map(|z| (z.re, z.im)).collect(),
            components: components.iter().map(|z| (z.re, z.im)).collect(),
        })
    }

    pub fn components_vec(&self) -> CVec {
        CVec::from_vec(
            self.components
                .iter()
                .map(|&(re, im)| Complex64::new(re, im))
                .collect(),
        )
    }
}
