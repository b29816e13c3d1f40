//! Deterministic low-discrepancy point sets.
//!
//! All grids and synthetic clouds in the lab are quasi-random and fully
//! determined by their parameters; nothing here consumes an RNG.

use crate::linalg::{c64, C64, CVec};

/// Van der Corput radical inverse in the given base.
pub fn radical_inverse(mut n: usize, base: usize) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut x = 0.0;
    while n > 0 {
        x += ((n % base) as f64) * inv;
        n /= base;
        inv /= b;
    }
    x
}

/// Halton point in [0,1)^dim (bases 2, 3, 5, 7), index starting at 0.
pub fn halton(index: usize, dim: usize) -> Vec<f64> {
    const BASES: [usize; 4] = [2, 3, 5, 7];
    assert!(dim <= 4);
    (0..dim).map(|d| radical_inverse(index + 1, BASES[d])).collect()
}

/// `count` quasi-random points of the complex disk of the given radius
/// (area-uniform: sqrt in the radius).
pub fn disk_points(count: usize, radius: f64) -> Vec<CVec> {
    (0..count)
        .map(|i| {
            let h = halton(i, 2);
            let r = radius * h[0].sqrt();
            let th = 2.0 * std::f64::consts::PI * h[1];
            CVec::from_vec(vec![c64(r * th.cos(), r * th.sin())])
        })
        .collect()
}

/// `count` quasi-random points of the ball of the given radius in C^2
/// (volume-uniform: fourth root in the radius, direction from a Halton-fed
/// Box-Muller pair on the unit 3-sphere).
pub fn ball_points_c2(count: usize, radius: f64) -> Vec<CVec> {
    (0..count)
        .map(|i| {
            let h = halton(i, 4);
            let dir = sphere_direction_c2(&h[..3]);
            let r = radius * h[3].powf(0.25);
            CVec::from_vec(vec![dir[0] * c64(r, 0.0), dir[1] * c64(r, 0.0)])
        })
        .collect()
}

/// Quasi-random ball points in C^k.
pub fn ball_points(k: usize, count: usize, radius: f64) -> Vec<CVec> {
    match k {
        1 => disk_points(count, radius),
        2 => ball_points_c2(count, radius),
        _ => panic!("ball_points: k must be 1 or 2"),
    }
}

/// Unit vector in C^2 from three uniforms (deterministic Hopf-style
/// parametrization of the 3-sphere).
fn sphere_direction_c2(h: &[f64]) -> [C64; 2] {
    let eta = (h[0].clamp(1e-12, 1.0 - 1e-12)).sqrt().asin(); // in [0, pi/2]
    let (s, c) = eta.sin_cos();
    let phi1 = 2.0 * std::f64::consts::PI * h[1];
    let phi2 = 2.0 * std::f64::consts::PI * h[2];
    [
        c64(c * phi1.cos(), c * phi1.sin()),
        c64(s * phi2.cos(), s * phi2.sin()),
    ]
}

/// Quasi-random unit lifts in C^(k+1), Fubini-Study-uniform on P^k.
pub fn projective_uniform(k: usize, count: usize) -> Vec<CVec> {
    assert!(k == 1 || k == 2);
    (0..count)
        .map(|i| match k {
            1 => {
                let h = halton(i, 3);
                let d = sphere_direction_c2(&h);
                CVec::from_vec(vec![d[0], d[1]])
            }
            _ => {
                // Unit vector in C^3: split the squared norm uniformly over a
                // 2-simplex (Dirichlet(1,1,1)) and attach quasi-random phases.
                let h = halton(i, 4);
                let (a, b) = if h[0] <= h[1] { (h[0], h[1]) } else { (h[1], h[0]) };
                let w = [a, b - a, 1.0 - b];
                let phi1 = 2.0 * std::f64::consts::PI * h[2];
                let phi2 = 2.0 * std::f64::consts::PI * h[3];
                let phi3 = 2.0 * std::f64::consts::PI * radical_inverse(i + 1, 11);
                let comp = |wi: f64, phi: f64| {
                    let r = wi.max(0.0).sqrt();
                    c64(r * phi.cos(), r * phi.sin())
                };
                CVec::from_vec(vec![comp(w[0], phi1), comp(w[1], phi2), comp(w[2], phi3)])
            }
        })
        .collect()
}

/// The nested evaluation grid used by linearization memberships.
///
/// Points live on geometric shells `r_m = R_MASTER * 2^(-m/6)` down to about
/// `R_MASTER / 256`, 8 points per shell. The subset of points with norm <= rho
/// serves as the evaluation grid for radius rho; because these subsets are
/// nested across rho, set memberships are monotone in rho by construction.
pub const MASTER_RADIUS: f64 = 0.25;
pub const MASTER_SHELLS: usize = 48;
pub const POINTS_PER_SHELL: usize = 8;

pub fn master_grid(k: usize) -> Vec<CVec> {
    assert!(k == 1 || k == 2);
    let golden = 2.0 * std::f64::consts::PI * 0.381_966_011_250_105;
    let mut out = Vec::with_capacity(MASTER_SHELLS * POINTS_PER_SHELL);
    for m in 0..MASTER_SHELLS {
        let r = MASTER_RADIUS * (2.0f64).powf(-(m as f64) / 6.0);
        for j in 0..POINTS_PER_SHELL {
            match k {
                1 => {
                    let th = 2.0 * std::f64::consts::PI * (j as f64) / (POINTS_PER_SHELL as f64)
                        + golden * (m as f64);
                    out.push(CVec::from_vec(vec![c64(r * th.cos(), r * th.sin())]));
                }
                _ => {
                    let idx = m * POINTS_PER_SHELL + j;
                    let h = halton(idx, 3);
                    let d = sphere_direction_c2(&h);
                    out.push(CVec::from_vec(vec![d[0] * c64(r, 0.0), d[1] * c64(r, 0.0)]));
                }
            }
        }
    }
    out
}

/// Smallest radius resolved by the master grid.
pub fn master_min_radius() -> f64 {
    MASTER_RADIUS * (2.0f64).powf(-((MASTER_SHELLS - 1) as f64) / 6.0)
}
