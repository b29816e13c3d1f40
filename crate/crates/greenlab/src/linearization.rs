//! Memberships for the three measurable sets of the renormalized dynamics,
//! their mass curves, distortion profiles, and the sqrt(d)-linearization
//! verdict.
//!
//! For a point `x` and depth `n`, write `A = d_0 f^n_x` for the chart
//! cocycle. The three sets are, operationally:
//!
//! - `B_n(rho)`: the composition `f^n ∘ tau_x ∘ A^{-1}` is injective on the
//!   ball B(0, rho) with all images inside B(0, R_ZERO), checked on a fixed
//!   quasi-random grid (a one-sided test: false negatives possible near the
//!   boundary, never certified false positives on the grid itself).
//! - `LB_n(rho, tau)`: membership in `B_n(rho)` plus the norm bound
//!   ||A^{-1}|| <= tau * d^{-n/2}.
//! - `V_n(nu)`: Jacobian concentration |log |J|^2 - k n log d| <= 2 log(1/nu),
//!   exact given the cocycle.
//!
//! Forward evaluation of `f^n` is projective (globally defined), so no chart
//! re-centering is ever needed mid-orbit; only the final readout uses a
//! chart, and a readout that fails or escapes counts against membership.
//!
//! The sqrt(d) test renormalizes by the homothety `d^{-n/2} Id` instead of
//! `A^{-1}`, along recurrence times of the orbit. Inputs scaled by d^{-n/2}
//! start far below representable offsets for large n, so each evaluation
//! propagates a log-scaled vector through the per-step chart differentials
//! while it is tiny (relative error of that linearization is O(norm) <= 1e-8
//! per step, geometrically dominated) and switches to direct nonlinear
//! iteration for the remaining steps once the offset is representable. All
//! recurrence-time images are read in the single chart at the base point
//! (which recurrence keeps valid) and re-centered by subtracting the image
//! of 0, so the comparison sees the shape of the renormalized map rather
//! than the raw recurrence offset.
//!
//! "Converging" is a subsequential certificate: the test succeeds when it
//! can exhibit at least three recurrence times whose re-centered maps agree
//! pairwise within CONVERGENCE_TOL on the grid, with non-degenerate,
//! non-escaping images. Consecutive returns sit at independent offsets from
//! the base point, so their maps differ at the offset scale no matter how
//! deep the orbit runs; only an extracted sub-collection can become Cauchy,
//! and exhibiting one is exactly what "some subsequence converges" asks.
//! "Diverging" means grid images escaped B(0, R_ZERO) with the grid diameter
//! at least doubling across the observed times — the renormalized family
//! leaving every compact. A diverging verdict speaks only for this
//! recurrence-filtered family; it does not refute convergence along
//! extractions the test never saw.

use std::io::Write as _;

use serde::Serialize;

use crate::endomorphism::{chart_differential_between, cocycle, Cocycle, HomogeneousMap};
use crate::error::{Error, Result};
use crate::linalg::{norm, CMat, CVec, ScaledVec};
use crate::projective::{chart_apply, chart_at, chart_inverse, fs_distance, Chart, ProjPoint};
use crate::quasi;
use crate::stats;
use crate::util;

/// Lab-wide outer radius (chart units) for every containment test.
pub const R_ZERO: f64 = 0.3;

/// Minimum pairwise stretch ratio certifying injectivity on the grid:
/// above roundoff, below any genuine fold.
pub const INJECTIVITY_MARGIN: f64 = 1e-3;

/// Grid size for the B-membership oracle.
pub const B_GRID_POINTS: usize = 200;

/// Grid size for renormalization traces.
pub const TRACE_GRID_POINTS: usize = 100;

/// A converging trace must end with consecutive renormalized maps this close.
pub const CONVERGENCE_TOL: f64 = 1e-3;

/// Default parameter grids for experiment sweeps.
pub const DEFAULT_RHO_GRID: [f64; 4] = [0.2, 0.1, 0.05, 0.02];
pub const DEFAULT_TAU_GRID: [f64; 3] = [2.0, 10.0, 50.0];
pub const DEFAULT_NU_GRID: [f64; 3] = [0.5, 0.3, 0.1];

/// Recurrence times kept per trace. When the orbit returns more often, the
/// closest returns are kept: they carry the smallest offsets and hence the
/// best chance of exhibiting a convergent extraction.
const MAX_RECURRENCE_TIMES: usize = 96;

/// A certified extraction must keep grid diameters above this fraction of
/// the ball radius (a collapsing family is not converging to anything
/// injective).
const NONDEGENERATE_FRACTION: f64 = 0.05;

/// Offset norm above which the renormalized input switches from the
/// log-scaled linear propagation to direct nonlinear iteration.
const REPRESENTABLE_NORM: f64 = 1e-8;

/// Sentinel for an image that could not be read in the chart (polar
/// hyperplane or non-finite); large enough to fail every containment test.
const UNREADABLE_NORM: f64 = 1e9;

#[derive(Debug, Clone, Serialize)]
pub struct MembershipRecord {
    pub point: ProjPoint,
    pub n: usize,
    pub rho: f64,
    pub tau: f64,
    pub nu: f64,
    pub in_b: bool,
    pub in_lb: bool,
    pub in_v: bool,
    /// ||A^{-1}|| = exp(-smallest log singular value); may underflow to 0
    /// for deep expanding cocycles (the log form decides the LB bound).
    pub sigma_max_inv: f64,
    /// log |J|^2 - k n log d.
    pub log_jac_ratio: f64,
    /// Cocycle hit a near-critical step; memberships are reported false.
    pub near_critical: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BDiagnostics {
    pub near_critical: bool,
    pub all_inside: bool,
    /// Minimum pairwise stretch of the renormalized map on the grid
    /// (0 when any image was unreadable).
    pub injectivity_ratio: f64,
    pub max_image_norm: f64,
}

fn lb_bound_holds(c: &Cocycle, d: usize, n: usize, tau: f64) -> bool {
    // ||A^{-1}|| <= tau d^{-n/2}, compared in logs so deep cocycles never
    // underflow: -s_min <= log tau - (n/2) log d.
    c.sigma_max_inv_log() <= tau.ln() - 0.5 * (n as f64) * (d as f64).ln()
}

fn jac_ratio(c: &Cocycle, k: usize, d: usize, n: usize) -> f64 {
    c.log_jacobian_sq() - (k as f64) * (n as f64) * (d as f64).ln()
}

fn v_holds(ratio: f64, nu: f64) -> bool {
    ratio.abs() <= 2.0 * (1.0 / nu).ln()
}

/// Evaluate the renormalized composition `f^n ∘ tau_x ∘ A^{-1}` on the
/// rho-ball grid and read images in the chart at f^n(x). Unreadable images
/// come back as None.
fn b_grid_images(
    f: &HomogeneousMap,
    x: &ProjPoint,
    c: &Cocycle,
    n: usize,
    rho: f64,
) -> Result<Vec<Option<CVec>>> {
    let chart_x = chart_at(x, None)?;
    let end = f.iterate(x, n)?;
    let chart_end = chart_at(&end, None)?;
    let grid = quasi::ball_points(f.k, B_GRID_POINTS, rho);
    let mut out = Vec::with_capacity(grid.len());
    for u in &grid {
        let pre = c.apply_inverse(&ScaledVec::from_vec(u));
        let coords = match pre.to_vec() {
            Some(v) => v,
            None => {
                // Either absurdly large (readout would fail anyway) or far
                // below resolution (indistinguishable from the center).
                if pre.log_norm() < -600.0 {
                    CVec::zeros(f.k)
                } else {
                    out.push(None);
                    continue;
                }
            }
        };
        let image = match chart_apply(&chart_x, &coords).and_then(|y| f.iterate(&y, n)) {
            Ok(y) => y,
            Err(_) => {
                out.push(None);
                continue;
            }
        };
        out.push(chart_inverse(&chart_end, &image).ok());
    }
    Ok(out)
}

fn injectivity_ratio(grid: &[CVec], images: &[Option<CVec>]) -> f64 {
    let mut min_ratio = f64::INFINITY;
    for i in 0..grid.len() {
        let a = match &images[i] {
            Some(a) => a,
            None => return 0.0,
        };
        for j in (i + 1)..grid.len() {
            let b = match &images[j] {
                Some(b) => b,
                None => return 0.0,
            };
            let du = norm(&(&grid[i] - &grid[j]));
            if du > 0.0 {
                let ratio = norm(&(a - b)) / du;
                if ratio < min_ratio {
                    min_ratio = ratio;
                }
            }
        }
    }
    min_ratio
}

/// One-sided injectivity oracle for membership in B_n(rho).
pub fn b_membership(
    f: &HomogeneousMap,
    x: &ProjPoint,
    n: usize,
    rho: f64,
) -> Result<(bool, BDiagnostics)> {
    let c = cocycle(f, x, n)?;
    b_from_cocycle(f, x, &c, n, rho)
}

fn b_from_cocycle(
    f: &HomogeneousMap,
    x: &ProjPoint,
    c: &Cocycle,
    n: usize,
    rho: f64,
) -> Result<(bool, BDiagnostics)> {
    if !(rho > 0.0 && rho <= R_ZERO) {
        return Err(Error::invalid_input("b_membership: need 0 < rho <= R_ZERO"));
    }
    if c.near_critical {
        return Ok((
            false,
            BDiagnostics {
                near_critical: true,
                all_inside: false,
                injectivity_ratio: 0.0,
                max_image_norm: UNREADABLE_NORM,
            },
        ));
    }
    let grid = quasi::ball_points(f.k, B_GRID_POINTS, rho);
    let images = b_grid_images(f, x, c, n, rho)?;
    let max_image_norm = images
        .iter()
        .map(|r| r.as_ref().map_or(UNREADABLE_NORM, norm))
        .fold(0.0f64, f64::max);
    let all_inside = max_image_norm <= R_ZERO;
    let ratio = injectivity_ratio(&grid, &images);
    let ok = all_inside && ratio > INJECTIVITY_MARGIN;
    Ok((
        ok,
        BDiagnostics {
            near_critical: false,
            all_inside,
            injectivity_ratio: ratio,
            max_image_norm,
        },
    ))
}

/// Membership in LB_n(rho, tau): B-membership plus the inverse-norm bound.
pub fn lb_membership(
    f: &HomogeneousMap,
    x: &ProjPoint,
    n: usize,
    rho: f64,
    tau: f64,
) -> Result<bool> {
    let c = cocycle(f, x, n)?;
    if !lb_bound_holds(&c, f.d, n, tau) {
        return Ok(false);
    }
    Ok(b_from_cocycle(f, x, &c, n, rho)?.0)
}

/// Membership in V_n(nu); exact given the cocycle.
pub fn v_membership(f: &HomogeneousMap, x: &ProjPoint, n: usize, nu: f64) -> Result<bool> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::invalid_input("v_membership: need 0 < nu <= 1"));
    }
    let c = cocycle(f, x, n)?;
    Ok(!c.near_critical && v_holds(jac_ratio(&c, f.k, f.d, n), nu))
}

/// All three memberships from a single cocycle walk.
pub fn membership_record(
    f: &HomogeneousMap,
    x: &ProjPoint,
    n: usize,
    rho: f64,
    tau: f64,
    nu: f64,
) -> Result<MembershipRecord> {
    if !(nu > 0.0 && nu <= 1.0) || tau <= 0.0 {
        return Err(Error::invalid_input(
            "membership_record: need tau > 0 and 0 < nu <= 1",
        ));
    }
    let c = cocycle(f, x, n)?;
    let (in_b, _) = b_from_cocycle(f, x, &c, n, rho)?;
    let ratio = jac_ratio(&c, f.k, f.d, n);
    Ok(MembershipRecord {
        point: x.clone(),
        n,
        rho,
        tau,
        nu,
        in_b,
        in_lb: in_b && lb_bound_holds(&c, f.d, n, tau),
        in_v: !c.near_critical && v_holds(ratio, nu),
        sigma_max_inv: c.sigma_max_inv_log().exp(),
        log_jac_ratio: ratio,
        near_critical: c.near_critical,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MassRow {
    pub n: usize,
    pub mass_b: f64,
    pub se_b: f64,
    pub mass_lb: f64,
    pub se_lb: f64,
    pub mass_v: f64,
    pub se_v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassTable {
    pub rho: f64,
    pub tau: f64,
    pub nu: f64,
    pub sample_count: usize,
    pub rows: Vec<MassRow>,
}

/// Empirical masses of the three sets over an equilibrium sample, per depth.
pub fn mass_curves(
    f: &HomogeneousMap,
    sample: &[ProjPoint],
    n_values: &[usize],
    rho: f64,
    tau: f64,
    nu: f64,
) -> Result<MassTable> {
    if sample.len() < 500 {
        return Err(Error::invalid_input(
            "mass_curves: at least 500 sample points required",
        ));
    }
    let m = sample.len();
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let flags: Vec<(bool, bool, bool)> = util::parallel_map(m, |i| {
            match membership_record(f, &sample[i], n, rho, tau, nu) {
                Ok(r) => (r.in_b, r.in_lb, r.in_v),
                Err(_) => (false, false, false),
            }
        });
        let count = |sel: fn(&(bool, bool, bool)) -> bool| {
            flags.iter().filter(|t| sel(t)).count() as f64 / m as f64
        };
        let (mass_b, mass_lb, mass_v) = (count(|t| t.0), count(|t| t.1), count(|t| t.2));
        rows.push(MassRow {
            n,
            mass_b,
            se_b: stats::binomial_se(mass_b, m),
            mass_lb,
            se_lb: stats::binomial_se(mass_lb, m),
            mass_v,
            se_v: stats::binomial_se(mass_v, m),
        });
    }
    Ok(MassTable {
        rho,
        tau,
        nu,
        sample_count: sample.len(),
        rows,
    })
}

/// CSV emission: `n,mass_B,se_B,mass_LB,se_LB,mass_V,se_V`.
pub fn write_mass_csv(path: &std::path::Path, table: &MassTable) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "n,mass_B,se_B,mass_LB,se_LB,mass_V,se_V")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.n, r.mass_b, r.se_b, r.mass_lb, r.se_lb, r.mass_v, r.se_v
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionRecord {
    /// Ratio of extreme singular values of A^{-1} (equals that of A).
    pub condition: f64,
    pub in_lb: bool,
    pub in_v: bool,
    pub near_critical: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionProfile {
    pub n: usize,
    pub rho: f64,
    pub tau: f64,
    pub nu: f64,
    pub records: Vec<DistortionRecord>,
    /// Largest condition number among LB ∩ V points, when any exist.
    pub max_condition_lb_v: Option<f64>,
    /// tau^k / nu: LB ∩ V points must satisfy condition <= this bound
    /// (up to measurement slack) by the membership inequalities themselves.
    pub sandwich_bound: f64,
}

/// Per-point condition numbers of the inverse differential over a sample,
/// with the LB ∩ V sandwich bound. For k = 1 every condition equals 1.
pub fn distortion_profile(
    f: &HomogeneousMap,
    sample: &[ProjPoint],
    n: usize,
    rho: f64,
    tau: f64,
    nu: f64,
) -> Result<DistortionProfile> {
    let records: Vec<DistortionRecord> = util::parallel_map(sample.len(), |i| {
        match membership_record(f, &sample[i], n, rho, tau, nu) {
            Ok(r) => {
                let c = cocycle(f, &sample[i], n).expect("cocycle repeats");
                let s = &c.log_singular_values;
                DistortionRecord {
                    condition: (s[s.len() - 1] - s[0]).exp(),
                    in_lb: r.in_lb,
                    in_v: r.in_v,
                    near_critical: r.near_critical,
                }
            }
            Err(_) => DistortionRecord {
                condition: f64::INFINITY,
                in_lb: false,
                in_v: false,
                near_critical: true,
            },
        }
    });
    let max_condition_lb_v = records
        .iter()
        .filter(|r| r.in_lb && r.in_v)
        .map(|r| r.condition)
        .fold(None, |acc: Option<f64>, c| {
            Some(acc.map_or(c, |a| a.max(c)))
        });
    Ok(DistortionProfile {
        n,
        rho,
        tau,
        nu,
        records,
        max_condition_lb_v,
        sandwich_bound: tau.powi(f.k as i32) / nu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct RenormalizationTrace {
    pub point: ProjPoint,
    /// Recurrence times examined, ascending (the closest returns when the
    /// orbit came back more often than the examination budget).
    pub subsequence: Vec<usize>,
    /// Max grid distance between consecutive re-centered maps; one entry
    /// fewer than the subsequence.
    pub sup_deviation: Vec<f64>,
    /// Certified convergent extraction (empty unless converging).
    pub extraction: Vec<usize>,
    /// Max pairwise grid distance within the extraction.
    pub extraction_deviation: f64,
    pub recurrence_radius: f64,
    pub ball_radius: f64,
    /// Max pairwise grid-image distance at each examined time.
    pub grid_diameters: Vec<f64>,
    /// Some re-centered grid image left B(0, R_ZERO) in the base chart (or
    /// was unreadable there).
    pub escaped: bool,
    pub verdict: Verdict,
    pub reason: String,
}

struct OrbitTrack {
    points: Vec<ProjPoint>,
    charts: Vec<Chart>,
    steps: Vec<CMat>,
}

fn track_orbit(f: &HomogeneousMap, x: &ProjPoint, n: usize) -> Result<OrbitTrack> {
    let mut points = Vec::with_capacity(n + 1);
    let mut charts = Vec::with_capacity(n + 1);
    let mut steps = Vec::with_capacity(n);
    points.push(x.clone());
    charts.push(chart_at(x, None)?);
    for m in 0..n {
        let y = f.eval(&points[m])?;
        let cy = chart_at(&y, None)?;
        steps.push(chart_differential_between(f, &charts[m], &cy)?);
        points.push(y);
        charts.push(cy);
    }
    Ok(OrbitTrack {
        points,
        charts,
        steps,
    })
}

/// One grid image of the renormalized map at depth `n_j`, read in the chart
/// at the base point.
fn renormalized_image(
    f: &HomogeneousMap,
    track: &OrbitTrack,
    base_chart: &Chart,
    n_j: usize,
    u: &CVec,
    log_scale: f64,
) -> Option<CVec> {
    let mut sv = ScaledVec::from_vec(u).scale_log(log_scale);
    let mut m = 0usize;
    while m < n_j && sv.log_norm() < REPRESENTABLE_NORM.ln() {
        sv = sv.apply_matrix(&track.steps[m]);
        m += 1;
    }
    let coords = match sv.to_vec() {
        Some(v) => v,
        None => {
            if sv.log_norm() < -600.0 {
                CVec::zeros(f.k)
            } else {
                return None;
            }
        }
    };
    let mut y = chart_apply(&track.charts[m], &coords).ok()?;
    for _ in m..n_j {
        y = f.eval(&y).ok()?;
    }
    chart_inverse(base_chart, &y).ok()
}

/// Max grid distance between two re-centered readout rows; infinite when no
/// grid point is readable in both.
fn row_deviation(a: &[Option<CVec>], b: &[Option<CVec>]) -> f64 {
    let mut dev = f64::NEG_INFINITY;
    for (p, q) in a.iter().zip(b.iter()) {
        if let (Some(p), Some(q)) = (p, q) {
            dev = dev.max(norm(&(p - q)));
        }
    }
    if dev.is_finite() {
        dev
    } else {
        f64::INFINITY
    }
}

/// Renormalization trace along recurrence times: rescale a ball at `x` by
/// `d^{-n/2}`, push it forward `n` steps, and compare the resulting
/// re-centered maps across returns of the orbit to `x`. Converging means a
/// sub-extraction of at least three returns was exhibited whose maps agree
/// within CONVERGENCE_TOL; diverging means images escaped with growing
/// diameters. A diverging verdict concerns this recurrence-filtered family
/// only; other extractions could still converge.
pub fn sqrt_d_linearization_test(
    f: &HomogeneousMap,
    x: &ProjPoint,
    max_n: usize,
    ball_radius: f64,
    recurrence_radius: f64,
) -> Result<RenormalizationTrace> {
    if !(ball_radius > 0.0 && ball_radius <= 0.1) {
        return Err(Error::invalid_input(
            "sqrt_d_linearization_test: need 0 < ball_radius <= 0.1",
        ));
    }
    if recurrence_radius <= 0.0 {
        return Err(Error::invalid_input(
            "sqrt_d_linearization_test: recurrence_radius must be positive",
        ));
    }
    let track = track_orbit(f, x, max_n)?;
    let mut returns: Vec<(usize, f64)> = (1..=max_n)
        .filter_map(|n| {
            let dist = fs_distance(&track.points[n], x);
            (dist < recurrence_radius).then_some((n, dist))
        })
        .collect();
    if returns.len() > MAX_RECURRENCE_TIMES {
        returns.sort_by(|a, b| a.1.total_cmp(&b.1));
        returns.truncate(MAX_RECURRENCE_TIMES);
        returns.sort_by_key(|r| r.0);
    }
    let subsequence: Vec<usize> = returns.iter().map(|r| r.0).collect();
    let mut trace = RenormalizationTrace {
        point: x.clone(),
        subsequence: subsequence.clone(),
        sup_deviation: Vec::new(),
        extraction: Vec::new(),
        extraction_deviation: 0.0,
        recurrence_radius,
        ball_radius,
        grid_diameters: Vec::new(),
        escaped: false,
        verdict: Verdict::Inconclusive,
        reason: String::new(),
    };
    if subsequence.len() < 3 {
        trace.reason = format!(
            "only {} recurrence times within max_n = {max_n}; need 3",
            subsequence.len()
        );
        return Ok(trace);
    }
    let base_chart = chart_at(x, None)?;
    let grid = quasi::ball_points(f.k, TRACE_GRID_POINTS, ball_radius);
    let log_d = (f.d as f64).ln();
    // Re-centered readout rows: subtract the image of 0 (the orbit point
    // itself) so rows are comparable across different return offsets.
    let readouts: Vec<Vec<Option<CVec>>> = subsequence
        .iter()
        .map(|&n_j| {
            let center = match chart_inverse(&base_chart, &track.points[n_j]) {
                Ok(c) => c,
                Err(_) => return vec![None; grid.len()],
            };
            let log_scale = -0.5 * (n_j as f64) * log_d;
            grid.iter()
                .map(|u| {
                    renormalized_image(f, &track, &base_chart, n_j, u, log_scale)
                        .map(|r| r - &center)
                })
                .collect()
        })
        .collect();
    let mut row_unreadable = vec![0usize; readouts.len()];
    let mut row_escaped = vec![false; readouts.len()];
    for (j, row) in readouts.iter().enumerate() {
        let mut diam = 0.0f64;
        for (i, a) in row.iter().enumerate() {
            match a {
                None => {
                    row_unreadable[j] += 1;
                    diam = diam.max(UNREADABLE_NORM);
                }
                Some(a) => {
                    if norm(a) > R_ZERO {
                        row_escaped[j] = true;
                    }
                    for b in row.iter().skip(i + 1).flatten() {
                        diam = diam.max(norm(&(a - b)));
                    }
                }
            }
        }
        trace.grid_diameters.push(diam);
    }
    trace.escaped = row_escaped.iter().any(|&e| e) || row_unreadable.iter().any(|&u| u > 0);
    for j in 0..readouts.len() - 1 {
        let dev = row_deviation(&readouts[j], &readouts[j + 1]);
        trace.sup_deviation.push(if dev.is_finite() {
            dev
        } else {
            2.0 * R_ZERO
        });
    }
    // A row can certify convergence only if fully readable, non-escaping,
    // and non-collapsed.
    let diam_floor = NONDEGENERATE_FRACTION * ball_radius;
    let row_ok: Vec<bool> = (0..readouts.len())
        .map(|j| {
            row_unreadable[j] == 0 && !row_escaped[j] && trace.grid_diameters[j] >= diam_floor
        })
        .collect();
    // Exhibit an extraction: an anchor row plus every row within half the
    // tolerance of it is pairwise within the tolerance.
    let m = readouts.len();
    let mut best: Vec<usize> = Vec::new();
    for anchor in 0..m {
        if !row_ok[anchor] {
            continue;
        }
        let members: Vec<usize> = (0..m)
            .filter(|&j| {
                j == anchor
                    || (row_ok[j]
                        && row_deviation(&readouts[anchor], &readouts[j])
                            <= 0.5 * CONVERGENCE_TOL)
            })
            .collect();
        if members.len() > best.len() {
            best = members;
        }
    }
    if best.len() >= 3 {
        let mut worst = 0.0f64;
        for (a, &i) in best.iter().enumerate() {
            for &j in best.iter().skip(a + 1) {
                worst = worst.max(row_deviation(&readouts[i], &readouts[j]));
            }
        }
        trace.extraction = best.iter().map(|&i| subsequence[i]).collect();
        trace.extraction_deviation = worst;
        trace.verdict = Verdict::Converging;
        trace.reason = format!(
            "{} of {} returns agree within {worst:.3e} on the grid",
            best.len(),
            m
        );
        return Ok(trace);
    }
    let diams = &trace.grid_diameters;
    let all_blown = row_unreadable.iter().all(|&u| 2 * u > grid.len());
    let growth = (0..m).any(|i| {
        diams[i] > 0.0 && (i + 1..m).any(|j| diams[j] >= 2.0 * diams[i])
    });
    if trace.escaped && (growth || all_blown) {
        trace.verdict = Verdict::Diverging;
        trace.reason = if all_blown {
            "every renormalized image left the readable chart range".to_string()
        } else {
            format!(
                "grid escaped B(0, {R_ZERO}) with diameter growth {:.3e} -> {:.3e}",
                diams[0],
                diams[m - 1]
            )
        };
        return Ok(trace);
    }
    trace.reason = if trace.escaped {
        "grid escaped without sustained diameter growth".to_string()
    } else {
        format!("no extraction agreed within {CONVERGENCE_TOL}")
    };
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endomorphism::PreimageSolver;
    use crate::green::{sample_measure, SampleOptions};
    use crate::linalg::{c64, C64};
    use crate::poly::HomPoly;

    fn cr(x: f64) -> C64 {
        c64(x, 0.0)
    }

    fn power2() -> HomogeneousMap {
        let p0 = HomPoly::from_terms(2, 2, &[(vec![2, 0], cr(1.0))]).unwrap();
        let p1 = HomPoly::from_terms(2, 2, &[(vec![0, 2], cr(1.0))]).unwrap();
        HomogeneousMap::new(1, 2, "power_2", vec![p0, p1]).unwrap()
    }

    fn chebyshev2() -> HomogeneousMap {
        let p0 =
            HomPoly::from_terms(2, 2, &[(vec![2, 0], cr(1.0)), (vec![0, 2], cr(-2.0))]).unwrap();
        let p1 = HomPoly::from_terms(2, 2, &[(vec![0, 2], cr(1.0))]).unwrap();
        HomogeneousMap::new(1, 2, "chebyshev_2", vec![p0, p1]).unwrap()
    }

    fn sym2_power2() -> HomogeneousMap {
        let p0 = HomPoly::from_terms(3, 2, &[(vec![2, 0, 0], cr(1.0))]).unwrap();
        let p1 =
            HomPoly::from_terms(3, 2, &[(vec![0, 2, 0], cr(1.0)), (vec![1, 0, 1], cr(-2.0))])
                .unwrap();
        let p2 = HomPoly::from_terms(3, 2, &[(vec![0, 0, 2], cr(1.0))]).unwrap();
        let mut f = HomogeneousMap::new(2, 2, "sym2_power_2", vec![p0, p1, p2]).unwrap();
        f.solver = PreimageSolver::Sym2 {
            base: Box::new(power2()),
        };
        f
    }

    /// Degree-4 elliptic duplication instance (lemniscatic curve); the
    /// construction is independently oracle-validated by the map zoo. Its
    /// equilibrium measure is smooth on all of P^1, which makes it the
    /// converging reference for renormalization traces.
    fn lattes4() -> HomogeneousMap {
        // x -> (x^2 + 1)^2 / (4 x (x^2 - 1)), homogenized.
        let p0 = HomPoly::from_terms(
            2,
            4,
            &[
                (vec![4, 0], cr(1.0)),
                (vec![2, 2], cr(2.0)),
                (vec![0, 4], cr(1.0)),
            ],
        )
        .unwrap();
        let p1 = HomPoly::from_terms(
            2,
            4,
            &[(vec![3, 1], cr(4.0)), (vec![1, 3], cr(-4.0))],
        )
        .unwrap();
        HomogeneousMap::new(1, 4, "lattes_4", vec![p0, p1]).unwrap()
    }

    fn circle_point(theta: f64) -> ProjPoint {
        ProjPoint::from_affine(&[c64(theta.cos(), theta.sin())]).unwrap()
    }

    #[test]
    fn identity_memberships_at_depth_zero() {
        let f = power2();
        let x = circle_point(0.7);
        let r = membership_record(&f, &x, 0, 0.2, 1.0, 0.8).unwrap();
        assert!(r.in_b && r.in_lb && r.in_v);
        assert!((r.sigma_max_inv - 1.0).abs() < 1e-12);
        assert_eq!(r.log_jac_ratio, 0.0);
    }

    #[test]
    fn power_map_memberships_are_exact_on_the_circle() {
        // Cocycle modulus is exactly 2^n: sigma_max_inv = 2^{-n} passes the
        // LB bound for every tau >= 1, and the Jacobian ratio drifts as
        // n log 2, leaving V_n(0.3) between n = 3 and n = 4.
        let f = power2();
        let x = circle_point(1.1);
        let r3 = membership_record(&f, &x, 3, 0.05, 1.0, 0.3).unwrap();
        assert!(r3.in_b && r3.in_lb && r3.in_v);
        assert!((r3.sigma_max_inv - 0.125).abs() < 1e-9);
        assert!((r3.log_jac_ratio - 3.0 * 2.0f64.ln()).abs() < 1e-9);
        let r4 = membership_record(&f, &x, 4, 0.05, 1.0, 0.3).unwrap();
        assert!(r4.in_b && r4.in_lb);
        assert!(!r4.in_v, "ratio {} exceeds the nu = 0.3 window", r4.log_jac_ratio);
    }

    #[test]
    fn near_critical_orbit_fails_b() {
        // sqrt(2) maps to 0, the finite critical point of z^2 - 2, so the
        // depth-2 cocycle is near-critical and membership is refused.
        let f = chebyshev2();
        let x = ProjPoint::from_affine(&[c64(2.0f64.sqrt(), 0.0)]).unwrap();
        let (ok, diag) = b_membership(&f, &x, 2, 0.05).unwrap();
        assert!(!ok);
        assert!(diag.near_critical);
    }

    #[test]
    fn lb_requires_b_and_tau_monotonicity_holds() {
        let f = chebyshev2();
        let opts = SampleOptions::default();
        let (pts, _) = sample_measure(&f, 40, &opts).unwrap();
        for x in &pts {
            let r_small = membership_record(&f, x, 4, 0.05, 2.0, 0.3).unwrap();
            let r_large = membership_record(&f, x, 4, 0.05, 50.0, 0.3).unwrap();
            assert!(!r_small.in_lb || r_small.in_b, "LB outside B");
            assert!(!r_small.in_lb || r_large.in_lb, "tau monotonicity");
            // nu monotonicity: shrinking nu widens the V window.
            let v_tight = membership_record(&f, x, 4, 0.05, 2.0, 0.5).unwrap().in_v;
            let v_loose = membership_record(&f, x, 4, 0.05, 2.0, 0.1).unwrap().in_v;
            assert!(!v_tight || v_loose, "nu monotonicity");
        }
    }

    #[test]
    fn mass_curves_emit_csv_and_enforce_sample_floor() {
        let f = power2();
        let opts = SampleOptions::default();
        let (pts, _) = sample_measure(&f, 500, &opts).unwrap();
        assert!(mass_curves(&f, &pts[..100], &[0, 2], 0.05, 10.0, 0.3).is_err());
        let table = mass_curves(&f, &pts, &[0, 2, 4, 8], 0.05, 10.0, 0.3).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert!(table.rows[0].mass_v > 0.99, "depth 0 is full mass");
        // Exact Jacobian drift: V-mass collapses by depth 8.
        assert!(table.rows[3].mass_v < 0.05);
        // B stays essentially full for the power map at small rho.
        assert!(table.rows[3].mass_b > 0.9);
        let path = std::env::temp_dir().join("greenlab_mass_test.csv");
        write_mass_csv(&path, &table).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("n,mass_B,se_B,mass_LB,se_LB,mass_V,se_V\n"));
        assert_eq!(text.lines().count(), 5);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn rho_shrink_does_not_lose_mass() {
        let f = chebyshev2();
        let opts = SampleOptions::default();
        let (pts, _) = sample_measure(&f, 500, &opts).unwrap();
        let wide = mass_curves(&f, &pts, &[6], 0.2, 10.0, 0.3).unwrap();
        let narrow = mass_curves(&f, &pts, &[6], 0.1, 10.0, 0.3).unwrap();
        let slack = 2.0 * (wide.rows[0].se_b + narrow.rows[0].se_b);
        assert!(
            narrow.rows[0].mass_b >= wide.rows[0].mass_b - slack,
            "mass(rho/2) = {} < mass(rho) = {} - slack",
            narrow.rows[0].mass_b,
            wide.rows[0].mass_b
        );
    }

    #[test]
    fn distortion_is_unity_for_p1_and_sandwiched_for_sym2() {
        let f1 = chebyshev2();
        let opts = SampleOptions::default();
        let (pts, _) = sample_measure(&f1, 60, &opts).unwrap();
        let prof = distortion_profile(&f1, &pts, 5, 0.05, 10.0, 0.3).unwrap();
        for r in prof.records.iter().filter(|r| !r.near_critical) {
            assert!((r.condition - 1.0).abs() < 1e-12);
        }
        let f2 = sym2_power2();
        let (pts2, _) = sample_measure(&f2, 60, &opts).unwrap();
        let prof2 = distortion_profile(&f2, &pts2, 4, 0.05, 10.0, 0.3).unwrap();
        let bound = prof2.sandwich_bound * 1.1;
        assert!((prof2.sandwich_bound - 100.0 / 0.3).abs() < 1e-9);
        if let Some(mx) = prof2.max_condition_lb_v {
            assert!(mx <= bound, "max condition {mx} exceeds sandwich {bound}");
        } else {
            panic!("no LB ∩ V points in a symmetric-square sample");
        }
    }

    #[test]
    fn power_map_trace_diverges() {
        // The renormalized derivative grows like d^{n/2}; grid images blow
        // past R_ZERO and the diameter at least doubles between returns.
        let f = power2();
        let x = circle_point(1.234);
        let t = sqrt_d_linearization_test(&f, &x, 2000, 0.01, 0.3).unwrap();
        assert_eq!(t.verdict, Verdict::Diverging, "reason: {}", t.reason);
        assert!(t.escaped);
        assert!(t.extraction.is_empty());
        assert!(t.subsequence.len() >= 3);
        assert!(t.subsequence.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t.sup_deviation.len(), t.subsequence.len() - 1);
    }

    #[test]
    fn smooth_measure_trace_converges() {
        let f = lattes4();
        let opts = SampleOptions::default();
        let (pts, _) = sample_measure(&f, 6, &opts).unwrap();
        let mut converged = 0;
        for x in &pts {
            let t = sqrt_d_linearization_test(&f, x, 2000, 0.01, 0.3).unwrap();
            if t.verdict == Verdict::Converging {
                converged += 1;
                assert!(t.extraction.len() >= 3);
                assert!(t.extraction_deviation < CONVERGENCE_TOL);
                assert!(!t.escaped);
            }
        }
        assert!(converged >= 4, "only {converged}/6 traces converged");
    }

    #[test]
    fn trace_requires_recurrences_and_valid_radii() {
        let f = power2();
        let x = circle_point(0.3);
        let t = sqrt_d_linearization_test(&f, &x, 0, 0.05, 0.3).unwrap();
        assert_eq!(t.verdict, Verdict::Inconclusive);
        assert!(t.reason.contains("recurrence"));
        assert!(sqrt_d_linearization_test(&f, &x, 10, 0.2, 0.3).is_err());
        assert!(sqrt_d_linearization_test(&f, &x, 10, 0.05, 0.0).is_err());
    }

    #[test]
    fn trace_serializes_with_point_coordinates() {
        let f = power2();
        let x = circle_point(0.3);
        let t = sqrt_d_linearization_test(&f, &x, 0, 0.05, 0.3).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"verdict\":\"inconclusive\""));
        assert!(json.contains("\"point\":[["));
    }
}
