//! The escape-rate Green function of a homogeneous lift and sampling of the
//! equilibrium measure by backward iteration.
//!
//! For a lift `F` of algebraic degree `d`, the Green function is
//!
//! ```text
//!   G(v) = log ||v|| + sum_{j>=1} d^-j log ||F(u_{j-1})||
//! ```
//!
//! where `u_j` is the unit renormalization of the j-th iterate. The series
//! converges geometrically (ratio 1/d up to bounded fluctuations) and
//! satisfies `G(F(v)) = d G(v)` and `G(c v) = log|c| + G(v)`.
//!
//! The equilibrium measure is sampled by running several independent
//! backward-iteration chains: repeatedly pick one preimage of the current
//! point uniformly at random. Preimages are computed exactly on P^1 by
//! univariate root extraction, and on P^2 for symmetric squares through the
//! underlying P^1 map. Chains emit one point per backward step after a
//! burn-in; near-critical preimages are rejected and the choice rotated, so
//! emitted points keep a quantitative distance from the critical set.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::endomorphism::{
    critical_proximity, sym2_project, sym2_split, HomogeneousMap, PreimageSolver,
};
use crate::error::{Error, Result};
use crate::linalg::{c64, norm, CVec, C64, ONE};
use crate::poly::univariate_roots;
use crate::projective::ProjPoint;
use crate::util;

/// Multiplier decorrelating per-chain random streams from one base seed.
const CHAIN_SEED_STRIDE: u64 = 0x9E3779B97F4A7C15;

/// Root-residual threshold above which a preimage solve is distrusted and
/// the target is resampled with a tiny perturbation.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-8;

/// Emitted points must keep at least this distance from criticality.
pub const CRITICAL_PROXIMITY_MIN: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GreenOptions {
    /// Stop once the increment falls below this (after `min_iter` terms).
    pub tol: f64,
    pub min_iter: usize,
    pub max_iter: usize,
}

impl Default for GreenOptions {
    fn default() -> Self {
        GreenOptions {
            tol: 1e-12,
            min_iter: 5,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenEvaluation {
    pub value: f64,
    pub iterations: usize,
    /// Magnitude of the last series increment.
    pub residual: f64,
}

/// Escape-rate Green function of the lift at a raw (non-normalized) vector.
pub fn green_function(
    f: &HomogeneousMap,
    v: &CVec,
    opts: &GreenOptions,
) -> Result<GreenEvaluation> {
    if v.len() != f.k + 1 {
        return Err(Error::invalid_input("green_function: wrong ambient dimension"));
    }
    let n0 = norm(v);
    if !(n0.is_finite()) || n0 == 0.0 {
        return Err(Error::invalid_input("green_function: zero or non-finite vector"));
    }
    let mut value = n0.ln();
    let mut unit = v / c64(n0, 0.0);
    let mut weight = 1.0f64;
    let d = f.d as f64;
    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;
    for j in 1..=opts.max_iter {
        let w = f.eval_lift(&unit);
        let wn = norm(&w);
        if !(wn.is_finite()) || wn < 1e-280 {
            return Err(Error::Degenerate(format!(
                "green_function: lift norm {wn:.3e} after {j} steps"
            )));
        }
        weight /= d;
        let increment = weight * wn.ln();
        value += increment;
        unit = w / c64(wn, 0.0);
        iterations = j;
        residual = increment.abs();
        if j >= opts.min_iter && residual < opts.tol {
            break;
        }
    }
    Ok(GreenEvaluation {
        value,
        iterations,
        residual,
    })
}

// ---------------------------------------------------------------------------
// Preimages.
// ---------------------------------------------------------------------------

/// All preimages of `y` counted with multiplicity (d on P^1, d^2 for
/// symmetric squares on P^2), together with the worst relative root residual
/// of the underlying univariate solves.
pub fn preimages_with_residual(
    f: &HomogeneousMap,
    y: &ProjPoint,
) -> Result<(Vec<ProjPoint>, f64)> {
    if y.dim() != f.k {
        return Err(Error::invalid_input("preimages: dimension mismatch"));
    }
    match &f.solver {
        PreimageSolver::RationalP1 => preimages_p1(f, y),
        PreimageSolver::Sym2 { base } => {
            let (p, q) = sym2_split(y)?;
            let (pre_p, r1) = preimages_p1(base, &p)?;
            let (pre_q, r2) = preimages_p1(base, &q)?;
            let mut out = Vec::with_capacity(pre_p.len() * pre_q.len());
            for a in &pre_p {
                for b in &pre_q {
                    out.push(sym2_project(a, b)?);
                }
            }
            Ok((out, r1.max(r2)))
        }
        PreimageSolver::None => Err(Error::unsupported(format!(
            "map {} has no preimage solver; backward sampling is unavailable",
            f.label
        ))),
    }
}

pub fn preimages(f: &HomogeneousMap, y: &ProjPoint) -> Result<Vec<ProjPoint>> {
    preimages_with_residual(f, y).map(|(p, _)| p)
}

/// Roots of b P(z, 1) - a Q(z, 1) for y = (a : b); degree deficiency means
/// preimages at infinity.
fn preimages_p1(f: &HomogeneousMap, y: &ProjPoint) -> Result<(Vec<ProjPoint>, f64)> {
    let a = y.coords()[0];
    let b = y.coords()[1];
    let p = f.components[0].dehomogenize();
    let q = f.components[1].dehomogenize();
    let coeffs: Vec<C64> = (0..=f.d).map(|i| b * p[i] - a * q[i]).collect();
    let scale = coeffs.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(Error::Degenerate(
            "preimages: fiber polynomial is identically zero".into(),
        ));
    }
    let rs = univariate_roots(&coeffs)?;
    let mut out = Vec::with_capacity(f.d);
    for z in &rs.roots {
        out.push(ProjPoint::from_affine(&[*z])?);
    }
    let infinity = ProjPoint::from_slice(&[ONE, c64(0.0, 0.0)])?;
    for _ in 0..rs.degree_deficiency {
        out.push(infinity.clone());
    }
    Ok((out, rs.max_residual))
}

// ---------------------------------------------------------------------------
// Equilibrium-measure sampling.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub seed: u64,
    pub burn_in: usize,
    pub chains: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            seed: 1,
            burn_in: 30,
            chains: 16,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SampleDiagnostics {
    pub requested: usize,
    pub emitted: usize,
    pub chains: usize,
    pub burn_in: usize,
    /// Preimage solves whose residual forced a perturbed-target retry.
    pub resample_warnings: usize,
    /// Near-critical preimage candidates that were rotated past.
    pub critical_rejections: usize,
    pub max_root_residual: f64,
}

/// Deterministic start point for backward chains.
fn chain_start(f: &HomogeneousMap) -> Result<ProjPoint> {
    let p = ProjPoint::from_slice(&[ONE, c64(0.37, 0.21)])?;
    if f.k == 1 {
        return Ok(p);
    }
    let q = ProjPoint::from_slice(&[ONE, c64(-0.11, 0.43)])?;
    sym2_project(&p, &q)
}

fn perturb(y: &ProjPoint, rng: &mut ChaCha8Rng) -> Result<ProjPoint> {
    let n = y.coords().len();
    let noise = CVec::from_fn(n, |_, _| {
        c64(
            2e-9 * (rng.gen::<f64>() - 0.5),
            2e-9 * (rng.gen::<f64>() - 0.5),
        )
    });
    ProjPoint::new(y.coords() + noise)
}

/// One backward step: choose a preimage of `y` uniformly, rotating past
/// near-critical candidates, retrying from a perturbed target when the root
/// solve is distrusted or every candidate is critical.
fn backward_step(
    f: &HomogeneousMap,
    y: &ProjPoint,
    rng: &mut ChaCha8Rng,
    diag: &mut SampleDiagnostics,
) -> Result<ProjPoint> {
    let mut target = y.clone();
    for _attempt in 0..4 {
        let (pre, residual) = preimages_with_residual(f, &target)?;
        diag.max_root_residual = diag.max_root_residual.max(residual);
        if residual > ROOT_RESIDUAL_TOL || pre.is_empty() {
            diag.resample_warnings += 1;
            target = perturb(&target, rng)?;
            continue;
        }
        let start = rng.gen_range(0..pre.len());
        for off in 0..pre.len() {
            let cand = &pre[(start + off) % pre.len()];
            if critical_proximity(f, cand)? >= CRITICAL_PROXIMITY_MIN {
                return Ok(cand.clone());
            }
            diag.critical_rejections += 1;
        }
        diag.resample_warnings += 1;
        target = perturb(&target, rng)?;
    }
    Err(Error::numeric(
        "backward_step: no acceptable preimage after perturbed retries",
    ))
}

/// Draw `count` points distributed as the equilibrium measure, by
/// backward-iteration chains. Deterministic in `opts.seed`; chain layouts do
/// not depend on thread availability.
pub fn sample_measure(
    f: &HomogeneousMap,
    count: usize,
    opts: &SampleOptions,
) -> Result<(Vec<ProjPoint>, SampleDiagnostics)> {
    if opts.chains == 0 {
        return Err(Error::invalid_input("sample_measure: zero chains"));
    }
    if count == 0 {
        return Err(Error::invalid_input("sample_measure: zero points requested"));
    }
    let start = chain_start(f)?;
    let chains = opts.chains;
    let shares: Vec<usize> = (0..chains)
        .map(|c| count / chains + usize::from(c < count % chains))
        .collect();
    let results: Vec<Result<(Vec<ProjPoint>, SampleDiagnostics)>> =
        util::parallel_map(chains, |c| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(opts.seed ^ (c as u64).wrapping_mul(CHAIN_SEED_STRIDE));
            let mut diag = SampleDiagnostics::default();
            let mut here = start.clone();
            for _ in 0..opts.burn_in {
                here = backward_step(f, &here, &mut rng, &mut diag)?;
            }
            let mut pts = Vec::with_capacity(shares[c]);
            for _ in 0..shares[c] {
                here = backward_step(f, &here, &mut rng, &mut diag)?;
                pts.push(here.clone());
            }
            Ok((pts, diag))
        });
    let mut points = Vec::with_capacity(count);
    let mut diag = SampleDiagnostics {
        requested: count,
        chains,
        burn_in: opts.burn_in,
        ..SampleDiagnostics::default()
    };
    for r in results {
        let (pts, d) = r?;
        points.extend(pts);
        diag.resample_warnings += d.resample_warnings;
        diag.critical_rejections += d.critical_rejections;
        diag.max_root_residual = diag.max_root_residual.max(d.max_root_residual);
    }
    diag.emitted = points.len();
    Ok((points, diag))
}

/// Fraction of points satisfying a predicate.
pub fn empirical_mass(points: &[ProjPoint], pred: impl Fn(&ProjPoint) -> bool) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let hits = points.iter().filter(|p| pred(p)).count();
    hits as f64 / points.len() as f64
}

/// Time average of an observable along the forward orbit of `x` (n points,
/// starting at `x`). An independent route to integrals against the
/// equilibrium measure when the orbit is generic and the dynamics has no
/// attracting behavior to fall into.
pub fn forward_birkhoff(
    f: &HomogeneousMap,
    x: &ProjPoint,
    n: usize,
    phi: impl Fn(&ProjPoint) -> f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid_input("forward_birkhoff: empty orbit"));
    }
    let mut p = x.clone();
    let mut acc = 0.0;
    for _ in 0..n {
        acc += phi(&p);
        p = f.eval(&p)?;
    }
    Ok(acc / n as f64)
}

/// Per-test-function margins of the empirical pushforward invariance
/// E[phi o f] = E[phi] over one equilibrium sample.
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceCheck {
    /// |mean(phi o f) - mean(phi)| / combined SE, one per test function.
    pub margins: Vec<f64>,
    pub max_margin: f64,
    pub n_functions: usize,
    pub n_points: usize,
}

/// Empirical invariance of the sampled measure under the map: for quasi-random
/// unit linear forms `a`, the test functions phi_a(p) = |<a, p>|^2 must have
/// equal means against the sample and its image. The margin divides by the
/// combined standard error sqrt(se(phi o f)^2 + se(phi)^2) of the two means.
pub fn measure_invariance_check(
    f: &HomogeneousMap,
    points: &[ProjPoint],
    n_functions: usize,
) -> Result<InvarianceCheck> {
    if points.len() < 100 {
        return Err(Error::invalid_input(
            "measure_invariance_check: need at least 100 points",
        ));
    }
    if n_functions == 0 {
        return Err(Error::invalid_input(
            "measure_invariance_check: need at least one test function",
        ));
    }
    let images: Vec<ProjPoint> = points
        .iter()
        .map(|p| f.eval(p))
        .collect::<Result<Vec<_>>>()?;
    let dirs = crate::quasi::projective_uniform(f.k, n_functions);
    let margins: Vec<f64> = dirs
        .iter()
        .map(|a| {
            let phi = |p: &ProjPoint| crate::linalg::hdot(a, p.coords()).norm_sqr();
            let vals: Vec<f64> = points.iter().map(&phi).collect();
            let pushed: Vec<f64> = images.iter().map(&phi).collect();
            let diff = crate::stats::mean(&pushed) - crate::stats::mean(&vals);
            let se = crate::stats::standard_error(&pushed).hypot(crate::stats::standard_error(&vals));
            if se > 0.0 {
                diff.abs() / se
            } else if diff == 0.0 {
                0.0
            } else {
                1e9
            }
        })
        .collect();
    let max_margin = margins.iter().copied().fold(0.0, f64::max);
    Ok(InvarianceCheck {
        margins,
        max_margin,
        n_functions,
        n_points: points.len(),
    })
}

/// Write sampled points as CSV: a `# map_label=...` comment, a header, then
/// one row of unit-lift coordinates per point.
pub fn write_sample_csv(
    path: &std::path::Path,
    label: &str,
    points: &[ProjPoint],
) -> Result<()> {
    use std::io::Write;
    let mut out = String::new();
    out.push_str(&format!("# map_label={label}\n"));
    let k = points.first().map(|p| p.dim()).unwrap_or(1);
    let mut header: Vec<String> = Vec::new();
    for i in 0..=k {
        header.push(format!("x{i}_re"));
        header.push(format!("x{i}_im"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for p in points {
        let row: Vec<String> = p
            .coords()
            .iter()
            .flat_map(|z| [format!("{:.17e}", z.re), format!("{:.17e}", z.im)])
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
