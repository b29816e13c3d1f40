//! Small dense complex linear algebra.
//!
//! Everything here is specialized to the sizes that occur on P^1 and P^2:
//! chart differentials are 1x1 or 2x2, ambient frames are 2x1 or 3x2. The
//! singular value decomposition for 2x2 complex matrices is written out
//! analytically so the caller controls accuracy in graded regimes (singular
//! values separated by hundreds of orders of magnitude), which a generic
//! iterative SVD does not guarantee.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Hermitian inner product, conjugate-linear in the first argument.
pub fn hdot(a: &CVec, b: &CVec) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = ZERO;
    for i in 0..a.len() {
        s += a[i].conj() * b[i];
    }
    s
}

pub fn norm(a: &CVec) -> f64 {
    hdot(a, a).re.sqrt()
}

/// Phase a/|a|, or 1 for a = 0.
pub fn phase(a: C64) -> C64 {
    let m = a.norm();
    if m == 0.0 {
        ONE
    } else {
        a / m
    }
}

/// Determinant of a 1x1 or 2x2 complex matrix.
pub fn det_small(m: &CMat) -> C64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        n => panic!("det_small: unsupported size {n}"),
    }
}

/// Singular value decomposition of a 1x1 or 2x2 complex matrix,
/// `m = u * diag(sigma) * vh` with `sigma` descending and `u`, `vh` unitary.
#[derive(Debug, Clone)]
pub struct SmallSvd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub vh: CMat,
}

/// Analytic SVD for 1x1 and 2x2 complex matrices.
///
/// The small singular value is recovered from the determinant identity
/// `sigma_1 * sigma_2 = |det m|`, which keeps full relative accuracy even
/// when the matrix is nearly singular; eigenvector formulas for the
/// Hermitian Gram matrix supply the singular directions.
pub fn svd_small(m: &CMat) -> SmallSvd {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "svd_small: square input required");
    match n {
        1 => {
            let a = m[(0, 0)];
            SmallSvd {
                u: CMat::from_element(1, 1, phase(a)),
                sigma: vec![a.norm()],
                vh: CMat::identity(1, 1),
            }
        }
        2 => svd2(m),
        _ => panic!("svd_small: unsupported size {n}"),
    }
}

fn svd2(m: &CMat) -> SmallSvd {
    let raw_scale = m.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if raw_scale == 0.0 {
        return SmallSvd {
            u: CMat::identity(2, 2),
            sigma: vec![0.0, 0.0],
            vh: CMat::identity(2, 2),
        };
    }
    // Prescale so Gram-matrix arithmetic cannot overflow; singular values
    // are rescaled at the end.
    let a = m[(0, 0)] / raw_scale;
    let b = m[(0, 1)] / raw_scale;
    let cc = m[(1, 0)] / raw_scale;
    let d = m[(1, 1)] / raw_scale;
    let scale = 1.0f64;
    let h11 = a.norm_sqr() + cc.norm_sqr();
    let h22 = b.norm_sqr() + d.norm_sqr();
    let h12 = a.conj() * b + cc.conj() * d;
    let disc = ((h11 - h22).powi(2) + 4.0 * h12.norm_sqr()).sqrt();
    let mu1 = 0.5 * (h11 + h22 + disc);
    let sigma1 = mu1.max(0.0).sqrt();
    let det = a * d - b * cc;
    let sigma2 = if sigma1 > 0.0 { det.norm() / sigma1 } else { 0.0 };

    // Right singular vector for the large singular value: eigenvector of H.
    // Two algebraically equivalent candidates; pick the better conditioned.
    let cand1 = (h12, c64(mu1 - h11, 0.0));
    let cand2 = (c64(mu1 - h22, 0.0), h12.conj());
    let n1 = cand1.0.norm_sqr() + cand1.1.norm_sqr();
    let n2 = cand2.0.norm_sqr() + cand2.1.norm_sqr();
    let (v0, v1, vn) = if n1 >= n2 {
        (cand1.0, cand1.1, n1.sqrt())
    } else {
        (cand2.0, cand2.1, n2.sqrt())
    };
    let (v0, v1) = if vn > scale * scale * 1e-14 {
        (v0 / vn, v1 / vn)
    } else {
        // Nearly equal singular values: any orthonormal pair works.
        (ONE, ZERO)
    };
    // Orthogonal complement in C^2.
    let w0 = -v1.conj();
    let w1 = v0.conj();

    // Left vectors: u1 = M v1 / sigma1; u2 = complement, phase-fixed so that
    // M v2 = sigma2 * u2 with sigma2 real nonnegative.
    let mv1 = (a * v0 + b * v1, cc * v0 + d * v1);
    let mv1n = (mv1.0.norm_sqr() + mv1.1.norm_sqr()).sqrt();
    let (u0, u1) = if mv1n > scale * 1e-150 {
        (mv1.0 / mv1n, mv1.1 / mv1n)
    } else {
        (ONE, ZERO)
    };
    let mut p0 = -u1.conj();
    let mut p1 = u0.conj();
    let mv2 = (a * w0 + b * w1, cc * w0 + d * w1);
    let s2c = p0.conj() * mv2.0 + p1.conj() * mv2.1;
    if s2c.norm() > 0.0 {
        let ph = phase(s2c);
        p0 *= ph;
        p1 *= ph;
    }

    let u = CMat::from_column_slice(2, 2, &[u0, u1, p0, p1]);
    let v = CMat::from_column_slice(2, 2, &[v0, v1, w0, w1]);
    SmallSvd {
        u,
        sigma: vec![
            sigma1.max(sigma2) * raw_scale,
            sigma2.min(sigma1) * raw_scale,
        ],
        vh: v.adjoint(),
    }
}

/// Orthonormal completion of a unit vector `x` in C^n to a frame of its
/// orthogonal complement (n x (n-1), columns orthonormal, all orthogonal to
/// `x`). Deterministic: starts from canonical basis vectors, skipping the one
/// most parallel to `x`, with two Gram-Schmidt passes for stability. An
/// optional unitary `hint` replaces the canonical basis by its image.
pub fn orthonormal_complement(x: &CVec, hint: Option<&CMat>) -> Result<CMat> {
    let n = x.len();
    let xn = norm(x);
    if !(xn.is_finite()) || xn < 1e-14 {
        return Err(Error::invalid_input("orthonormal_complement: zero vector"));
    }
    let xu = x / c64(xn, 0.0);
    if let Some(h) = hint {
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::invalid_input(
                "orthonormal_complement: hint must be (k+1)x(k+1)",
            ));
        }
    }
    let basis_col = |j: usize| -> CVec {
        match hint {
            Some(h) => CVec::from_iterator(n, h.column(j).iter().cloned()),
            None => {
                let mut e = CVec::zeros(n);
                e[j] = ONE;
                e
            }
        }
    };
    // Pivot away from the basis vector with the largest overlap with x.
    let mut overlaps: Vec<(usize, f64)> = (0..n)
        .map(|j| (j, hdot(&basis_col(j), &xu).norm()))
        .collect();
    let skip = overlaps
        .iter()
        .cloned()
        .fold((0usize, -1.0f64), |acc, it| if it.1 > acc.1 { it } else { acc })
        .0;
    overlaps.retain(|&(j, _)| j != skip);

    let mut cols: Vec<CVec> = Vec::with_capacity(n - 1);
    for &(j, _) in overlaps.iter() {
        let mut v = basis_col(j);
        for _pass in 0..2 {
            let c = hdot(&xu, &v);
            v -= &xu * c;
            for q in cols.iter() {
                let c = hdot(q, &v);
                v -= q * c;
            }
        }
        let vn = norm(&v);
        if vn < 1e-10 {
            return Err(Error::numeric(
                "orthonormal_complement: lost rank during orthogonalization",
            ));
        }
        cols.push(v / c64(vn, 0.0));
    }
    let mut out = CMat::zeros(n, n - 1);
    for (idx, col) in cols.iter().enumerate() {
        out.set_column(idx, col);
    }
    Ok(out)
}

/// A complex vector stored as a unit-scale direction together with a
/// separate logarithmic magnitude, so that vectors far below the f64
/// underflow threshold remain representable. Invariant: the direction has
/// norm in [0.5, 2] unless the vector is exactly zero.
#[derive(Debug, Clone)]
pub struct ScaledVec {
    pub dir: CVec,
    pub log_mag: f64,
}

impl ScaledVec {
    pub fn from_vec(v: &CVec) -> Self {
        let n = norm(v);
        if n == 0.0 || !n.is_finite() {
            return ScaledVec {
                dir: v.clone(),
                log_mag: f64::NEG_INFINITY,
            };
        }
        ScaledVec {
            dir: v / c64(n, 0.0),
            log_mag: n.ln(),
        }
    }

    pub fn is_zero(&self) -> bool {
        !self.log_mag.is_finite()
    }

    /// log of the Euclidean norm.
    pub fn log_norm(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.log_mag + norm(&self.dir).ln()
    }

    pub fn apply_unitary(&self, q: &CMat) -> ScaledVec {
        ScaledVec {
            dir: q * &self.dir,
            log_mag: self.log_mag,
        }
    }

    pub fn scale_log(&self, delta: f64) -> ScaledVec {
        ScaledVec {
            dir: self.dir.clone(),
            log_mag: self.log_mag + delta,
        }
    }

    /// Componentwise multiplication by `diag(exp(logs[i]))`, renormalized so
    /// the direction keeps unit scale. Components whose relative scale drops
    /// below e^-600 flush to zero; that error is far under any tolerance in
    /// the lab.
    pub fn apply_diag_exp(&self, logs: &[f64]) -> ScaledVec {
        assert_eq!(logs.len(), self.dir.len());
        if self.is_zero() {
            return self.clone();
        }
        let mut best = f64::NEG_INFINITY;
        for i in 0..logs.len() {
            let m = self.dir[i].norm();
            if m > 0.0 {
                let l = m.ln() + logs[i];
                if l > best {
                    best = l;
                }
            }
        }
        if !best.is_finite() {
            return ScaledVec {
                dir: CVec::zeros(self.dir.len()),
                log_mag: f64::NEG_INFINITY,
            };
        }
        let mut dir = CVec::zeros(self.dir.len());
        for i in 0..logs.len() {
            let m = self.dir[i].norm();
            if m > 0.0 {
                let rel = m.ln() + logs[i] - best;
                if rel > -600.0 {
                    dir[i] = phase(self.dir[i]) * rel.exp();
                }
            }
        }
        ScaledVec {
            dir,
            log_mag: self.log_mag + best,
        }
    }

    /// Multiply by a general matrix, folding the resulting norm change into
    /// the logarithmic magnitude so chains of moderate matrices never
    /// overflow or underflow.
    pub fn apply_matrix(&self, m: &CMat) -> ScaledVec {
        if self.is_zero() {
            return ScaledVec {
                dir: CVec::zeros(m.nrows()),
                log_mag: f64::NEG_INFINITY,
            };
        }
        let dir = m * &self.dir;
        let n = norm(&dir);
        if n == 0.0 || !n.is_finite() {
            return ScaledVec {
                dir: CVec::zeros(m.nrows()),
                log_mag: f64::NEG_INFINITY,
            };
        }
        ScaledVec {
            dir: dir / c64(n, 0.0),
            log_mag: self.log_mag + n.ln(),
        }
    }

    /// Materialize as a plain vector if the magnitude is representable.
    pub fn to_vec(&self) -> Option<CVec> {
        if self.is_zero() {
            return Some(CVec::zeros(self.dir.len()));
        }
        if self.log_mag.abs() > 690.0 {
            return None;
        }
        Some(&self.dir * c64(self.log_mag.exp(), 0.0))
    }
}

/// Frobenius distance, for tests and validation.
pub fn frobenius_distance(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        s += (x - y).norm_sqr();
    }
    s.sqrt()
}

/// Departure from unitarity ||Q^H Q - I||_F.
pub fn unitarity_defect(q: &CMat) -> f64 {
    let n = q.ncols();
    let g = q.adjoint() * q;
    frobenius_distance(&g, &CMat::identity(n, n))
}
