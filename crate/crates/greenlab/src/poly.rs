//! Homogeneous polynomials in 2 or 3 variables and univariate root finding.
//!
//! Polynomials are stored densely over the full monomial basis of their total
//! degree, so homogeneity is structural rather than checked. Degrees stay
//! small (<= 8), which keeps direct evaluation with power tables both fast
//! and deterministic.

use crate::error::{Error, Result};
use crate::linalg::{c64, C64, ZERO};

/// Monomial exponent list for `nvars` variables and total degree `d`,
/// ordered lexicographically with earlier variables decreasing first.
/// The order is part of the coefficient layout of [`HomPoly`].
pub fn monomials(nvars: usize, d: usize) -> Vec<Vec<usize>> {
    assert!(nvars == 2 || nvars == 3, "only P^1 and P^2 are supported");
    let mut out = Vec::new();
    if nvars == 2 {
        for e0 in (0..=d).rev() {
            out.push(vec![e0, d - e0]);
        }
    } else {
        for e0 in (0..=d).rev() {
            for e1 in (0..=d - e0).rev() {
                out.push(vec![e0, e1, d - e0 - e1]);
            }
        }
    }
    out
}

/// A homogeneous polynomial of fixed total degree.
#[derive(Debug, Clone, PartialEq)]
pub struct HomPoly {
    pub nvars: usize,
    pub degree: usize,
    /// Coefficients over [`monomials`]`(nvars, degree)`, same order.
    pub coeffs: Vec<C64>,
    exps: Vec<Vec<usize>>,
}

impl HomPoly {
    pub fn new(nvars: usize, degree: usize, coeffs: Vec<C64>) -> Result<Self> {
        let exps = monomials(nvars, degree);
        if coeffs.len() != exps.len() {
            return Err(Error::invalid_input(format!(
                "HomPoly: expected {} coefficients for degree {} in {} variables, got {}",
                exps.len(),
                degree,
                nvars,
                coeffs.len()
            )));
        }
        Ok(HomPoly {
            nvars,
            degree,
            coeffs,
            exps,
        })
    }

    pub fn zero(nvars: usize, degree: usize) -> Self {
        let exps = monomials(nvars, degree);
        HomPoly {
            nvars,
            degree,
            coeffs: vec![ZERO; exps.len()],
            exps,
        }
    }

    /// Build from sparse (exponents, coefficient) terms; repeated exponent
    /// tuples accumulate.
    pub fn from_terms(nvars: usize, degree: usize, terms: &[(Vec<usize>, C64)]) -> Result<Self> {
        let mut p = HomPoly::zero(nvars, degree);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::invalid_input(format!(
                    "term has {} exponents, expected {}",
                    e.len(),
                    nvars
                )));
            }
            let sum: usize = e.iter().sum();
            if sum != degree {
                return Err(Error::invalid_map(format!(
                    "term exponents {:?} sum to {}, expected degree {}",
                    e, sum, degree
                )));
            }
            let idx = p
                .exps
                .iter()
                .position(|x| x == e)
                .expect("exponent tuple enumerated");
            p.coeffs[idx] += *c;
        }
        Ok(p)
    }

    pub fn exponents(&self) -> &[Vec<usize>] {
        &self.exps
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, x: &[C64]) -> C64 {
        debug_assert_eq!(x.len(), self.nvars);
        // Power tables up to the degree.
        let d = self.degree;
        let mut pows: Vec<Vec<C64>> = Vec::with_capacity(self.nvars);
        for &xi in x {
            let mut row = Vec::with_capacity(d + 1);
            let mut acc = c64(1.0, 0.0);
            row.push(acc);
            for _ in 0..d {
                acc *= xi;
                row.push(acc);
            }
            pows.push(row);
        }
        let mut s = ZERO;
        for (c, e) in self.coeffs.iter().zip(self.exps.iter()) {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            let mut t = *c;
            for (v, &ev) in e.iter().enumerate() {
                t *= pows[v][ev];
            }
            s += t;
        }
        s
    }

    /// Partial derivative with respect to variable `var`; degree drops by 1.
    /// Constant derivative of a degree-1 polynomial is returned as a
    /// degree-0 "polynomial" with a single coefficient.
    pub fn derivative(&self, var: usize) -> HomPoly {
        assert!(var < self.nvars);
        assert!(self.degree >= 1, "derivative of a constant");
        let mut out = HomPoly::zero(self.nvars, self.degree - 1);
        for (c, e) in self.coeffs.iter().zip(self.exps.iter()) {
            if e[var] == 0 || c.norm_sqr() == 0.0 {
                continue;
            }
            let mut ne = e.clone();
            ne[var] -= 1;
            let idx = out
                .exps
                .iter()
                .position(|x| x == &ne)
                .expect("derivative exponent enumerated");
            out.coeffs[idx] += *c * c64(e[var] as f64, 0.0);
        }
        out
    }

    /// Restriction to the affine chart `x_last = 1`, as ascending univariate
    /// coefficients in the first variable (nvars must be 2).
    pub fn dehomogenize(&self) -> Vec<C64> {
        assert_eq!(self.nvars, 2, "dehomogenize: binary forms only");
        let mut out = vec![ZERO; self.degree + 1];
        for (c, e) in self.coeffs.iter().zip(self.exps.iter()) {
            out[e[0]] += *c;
        }
        out
    }
}

/// Evaluate an ascending-coefficient univariate polynomial (Horner).
pub fn eval_univariate(coeffs: &[C64], z: C64) -> C64 {
    let mut s = ZERO;
    for &c in coeffs.iter().rev() {
        s = s * z + c;
    }
    s
}

fn derivative_univariate(coeffs: &[C64]) -> Vec<C64> {
    if coeffs.len() <= 1 {
        return vec![ZERO];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c * c64(i as f64, 0.0))
        .collect()
}

/// All complex roots of a univariate polynomial with ascending coefficients,
/// via the Aberth-Ehrlich simultaneous iteration with one Newton polish per
/// root. Exact zero roots (vanishing trailing coefficients) are split off
/// first. The caller is responsible for interpreting dropped leading
/// coefficients (roots at infinity); this function trims them and reports
/// how many were trimmed.
#[derive(Debug, Clone)]
pub struct RootSet {
    pub roots: Vec<C64>,
    /// Number of leading coefficients trimmed as negligible: for a
    /// projective preimage problem these are roots at infinity.
    pub degree_deficiency: usize,
    /// Max relative residual |p(root)| / scale over returned finite roots.
    pub max_residual: f64,
}

pub fn univariate_roots(coeffs: &[C64]) -> Result<RootSet> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(Error::invalid_input("univariate_roots: zero polynomial"));
    }
    let full_degree = coeffs.len() - 1;
    // Trim negligible leading coefficients (projective roots at infinity).
    let mut top = coeffs.len();
    while top > 1 && coeffs[top - 1].norm() <= 1e-13 * scale {
        top -= 1;
    }
    let deficiency = full_degree - (top - 1);
    let mut work: Vec<C64> = coeffs[..top].to_vec();
    // Split off exact (or nearly exact) zero roots.
    let mut zero_roots = 0usize;
    while work.len() > 1 && work[0].norm() <= 1e-290 * scale {
        work.remove(0);
        zero_roots += 1;
    }
    let m = work.len() - 1;
    let mut roots: Vec<C64> = vec![ZERO; zero_roots];
    if m == 0 {
        return Ok(RootSet {
            roots,
            degree_deficiency: deficiency,
            max_residual: 0.0,
        });
    }

    // Initial guesses on a circle sized by a Cauchy-type bound, with an
    // angular offset breaking real-axis symmetry.
    let lead = work[m].norm();
    let mut radius = 0.0f64;
    for (i, c) in work.iter().enumerate().take(m) {
        let r = (c.norm() / lead).powf(1.0 / ((m - i) as f64));
        radius = radius.max(r);
    }
    radius = (1.5 * radius).max(1e-3);
    let mut zs: Vec<C64> = (0..m)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * (j as f64) / (m as f64) + 0.43;
            c64(radius * th.cos(), radius * th.sin())
        })
        .collect();

    let deriv = derivative_univariate(&work);
    let mut converged = false;
    for _iter in 0..120 {
        let mut max_step = 0.0f64;
        for i in 0..m {
            let p = eval_univariate(&work, zs[i]);
            let dp = eval_univariate(&deriv, zs[i]);
            let newton = if dp.norm() > 0.0 { p / dp } else { c64(1e-3, 1e-3) };
            let mut s = ZERO;
            for j in 0..m {
                if j != i {
                    let diff = zs[i] - zs[j];
                    if diff.norm() > 1e-300 {
                        s += c64(1.0, 0.0) / diff;
                    }
                }
            }
            let denom = c64(1.0, 0.0) - newton * s;
            let step = if denom.norm() > 1e-300 { newton / denom } else { newton };
            zs[i] -= step;
            let rel = step.norm() / (1.0 + zs[i].norm());
            max_step = max_step.max(rel);
        }
        if max_step < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        // Aberth converges linearly near multiple roots; the polish and the
        // residual gate below decide acceptability.
    }
    // One Newton polish per root.
    let mut max_res = 0.0f64;
    for z in zs.iter_mut() {
        let p = eval_univariate(&work, *z);
        let dp = eval_univariate(&deriv, *z);
        if dp.norm() > 0.0 {
            *z -= p / dp;
        }
        let res = eval_univariate(&work, *z).norm();
        let local_scale: f64 = work
            .iter()
            .enumerate()
            .map(|(i, cc)| cc.norm() * z.norm().max(1.0).powi(i as i32))
            .sum();
        max_res = max_res.max(res / local_scale.max(1e-300));
    }
    roots.extend(zs);
    Ok(RootSet {
        roots,
        degree_deficiency: deficiency,
        max_residual: max_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cr(re: f64) -> C64 {
        c64(re, 0.0)
    }

    #[test]
    fn monomial_count_matches_dimension() {
        assert_eq!(monomials(2, 4).len(), 5);
        assert_eq!(monomials(3, 4).len(), 15);
        for e in monomials(3, 5) {
            assert_eq!(e.iter().sum::<usize>(), 5);
        }
    }

    #[test]
    fn eval_matches_hand_expansion() {
        // p = x0^2 x2 + 2 x1^3 - x0 x1 x2 in 3 variables, degree 3.
        let p = HomPoly::from_terms(
            3,
            3,
            &[
                (vec![2, 0, 1], cr(1.0)),
                (vec![0, 3, 0], cr(2.0)),
                (vec![1, 1, 1], cr(-1.0)),
            ],
        )
        .unwrap();
        let x = [c64(1.0, 1.0), c64(2.0, 0.0), c64(0.0, -1.0)];
        let direct = x[0] * x[0] * x[2] + cr(2.0) * x[1] * x[1] * x[1] - x[0] * x[1] * x[2];
        assert!((p.eval(&x) - direct).norm() < 1e-13);
    }

    #[test]
    fn eval_is_homogeneous() {
        let p = HomPoly::from_terms(
            3,
            4,
            &[
                (vec![4, 0, 0], c64(0.3, 1.0)),
                (vec![2, 1, 1], c64(-2.0, 0.1)),
                (vec![0, 0, 4], cr(1.0)),
            ],
        )
        .unwrap();
        let x = [c64(0.4, 0.3), c64(-1.0, 0.2), c64(0.7, -0.6)];
        let lam = c64(1.3, -0.4);
        let xs: Vec<C64> = x.iter().map(|&v| v * lam).collect();
        let lhs = p.eval(&xs);
        let rhs = lam.powu(4) * p.eval(&x);
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn derivative_via_finite_differences() {
        let p = HomPoly::from_terms(
            3,
            3,
            &[
                (vec![2, 1, 0], c64(1.0, -0.5)),
                (vec![1, 1, 1], c64(0.2, 0.8)),
                (vec![0, 0, 3], cr(-1.0)),
            ],
        )
        .unwrap();
        let x = [c64(0.5, 0.1), c64(-0.3, 0.4), c64(0.9, -0.2)];
        let h = 1e-6;
        for var in 0..3 {
            let dp = p.derivative(var);
            let mut xp = x;
            let mut xm = x;
            xp[var] += cr(h);
            xm[var] -= cr(h);
            let fd = (p.eval(&xp) - p.eval(&xm)) / cr(2.0 * h);
            assert!((dp.eval(&x) - fd).norm() < 1e-8);
        }
    }

    #[test]
    fn rejects_wrong_degree_terms() {
        let r = HomPoly::from_terms(2, 2, &[(vec![1, 0], cr(1.0))]);
        assert!(r.is_err());
    }

    #[test]
    fn roots_of_quadratic_with_known_roots() {
        // (z - 2)(z + 3i) = z^2 + (3i - 2) z - 6i
        let coeffs = vec![c64(0.0, -6.0), c64(-2.0, 3.0), cr(1.0)];
        let rs = univariate_roots(&coeffs).unwrap();
        assert_eq!(rs.degree_deficiency, 0);
        assert!(rs.max_residual < 1e-12);
        let mut roots = rs.roots.clone();
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((roots[0] - c64(0.0, -3.0)).norm() < 1e-10);
        assert!((roots[1] - cr(2.0)).norm() < 1e-10);
    }

    #[test]
    fn roots_detect_degree_deficiency() {
        // Degree-4 problem whose leading two coefficients vanish.
        let coeffs = vec![cr(-1.0), cr(0.0), cr(1.0), cr(0.0), cr(0.0)];
        let rs = univariate_roots(&coeffs).unwrap();
        assert_eq!(rs.degree_deficiency, 2);
        assert_eq!(rs.roots.len(), 2);
        for r in rs.roots {
            assert!((r.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn roots_handle_zero_roots() {
        // z^3 (z - 1)
        let coeffs = vec![cr(0.0), cr(0.0), cr(0.0), cr(-1.0), cr(1.0)];
        let rs = univariate_roots(&coeffs).unwrap();
        let zeros = rs.roots.iter().filter(|r| r.norm() < 1e-12).count();
        assert_eq!(zeros, 3);
        assert!(rs.roots.iter().any(|r| (r - cr(1.0)).norm() < 1e-10));
    }

    #[test]
    fn roots_of_unity_degree_8() {
        // z^8 - 1
        let mut coeffs = vec![ZERO; 9];
        coeffs[0] = cr(-1.0);
        coeffs[8] = cr(1.0);
        let rs = univariate_roots(&coeffs).unwrap();
        assert!(rs.max_residual < 1e-12);
        for r in rs.roots {
            assert!((r.norm() - 1.0).abs() < 1e-10);
            assert!((r.powu(8) - cr(1.0)).norm() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn random_cubics_factor(re0 in -2.0f64..2.0, im0 in -2.0f64..2.0,
                                re1 in -2.0f64..2.0, im1 in -2.0f64..2.0,
                                re2 in -2.0f64..2.0, im2 in -2.0f64..2.0) {
            // Build (z - a)(z - b)(z - c) from random roots; recover them.
            let a = c64(re0, im0);
            let b = c64(re1, im1);
            let c_ = c64(re2, im2);
            let coeffs = vec![
                -a * b * c_,
                a * b + a * c_ + b * c_,
                -(a + b + c_),
                cr(1.0),
            ];
            let rs = univariate_roots(&coeffs).unwrap();
            prop_assert_eq!(rs.roots.len(), 3);
            for want in [a, b, c_] {
                let best = rs.roots.iter().map(|r| (r - want).norm()).fold(f64::MAX, f64::min);
                // Multiple / clustered roots lose accuracy; allow a loose gate
                // tied to root separation.
                let sep = [(a-b).norm(), (a-c_).norm(), (b-c_).norm()]
                    .into_iter().fold(f64::MAX, f64::min);
                let tol = if sep > 1e-3 { 1e-6 } else { 0.05 };
                prop_assert!(best < tol, "root {} missed by {}", want, best);
            }
        }
    }
}
