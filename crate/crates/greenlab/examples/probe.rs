use std::time::Instant;

use greenlab::dimension;
use greenlab::green::{self, SampleOptions};
use greenlab::linearization::{self, Verdict};
use greenlab::lyapunov::{self, SpectrumOptions};
use greenlab::projective::{fs_distance, ProjPoint};
use greenlab::zoo;

fn knn_median_dim(pts: &[ProjPoint], k: usize, cap: f64) -> (f64, usize) {
    let n = pts.len();
    let rows: Vec<Vec<f64>> = greenlab::util::parallel_map(n, |i| {
            let mut best: Vec<f64> = Vec::with_capacity(k + 1);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = fs_distance(&pts[i], &pts[j]);
                if d < 1e-12 {
                    continue;
                }
                if best.len() < k || d < best[best.len() - 1] {
                    let pos = best.partition_point(|&b| b < d);
                    best.insert(pos, d);
                    if best.len() > k {
                        best.pop();
                    }
                }
            }
            best
    });
    let mut dims: Vec<f64> = rows
        .iter()
        .filter_map(|d| {
            if d.len() < k || d[k - 1] > cap {
                return None;
            }
            let top = d[k - 1].sin().ln();
            let sum: f64 = d[..k - 1].iter().map(|&t| top - t.sin().ln()).sum();
            if sum > 0.0 {
                Some((k as f64 - 4.0 / 3.0) / sum)
            } else {
                None
            }
        })
        .collect();
    dims.sort_by(f64::total_cmp);
    let m = dims.len();
    (dims[m / 2], m)
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();

    if which == "knnscale" {
        let e = zoo::by_label("sym2_lattes_doubling").unwrap();
        for n in [2600usize, 6000, 12000, 24000, 40000] {
            let t = Instant::now();
            let (pts, _) = green::sample_measure(&e.map, n, &SampleOptions::default()).unwrap();
            let ts = t.elapsed();
            for k in [8usize, 16] {
                let t2 = Instant::now();
                let (med, used) = knn_median_dim(&pts, k, 0.35);
                println!(
                    "n={n:6} k={k:2} median={med:.3} used={used} sample_t={ts:.2?} knn_t={:.2?}",
                    t2.elapsed()
                );
            }
        }
    }

    if which == "crit3" {
        let t0 = Instant::now();
        for label in zoo::ZOO_LABELS {
            let e = zoo::by_label(label).unwrap();
            let t = Instant::now();
            let opts = SpectrumOptions {
                n_steps: 200,
                n_orbits: 500,
                ..Default::default()
            };
            let est = lyapunov::lyapunov_spectrum(&e.map, &opts).unwrap();
            println!(
                "{label:24} lambda={:?} ses={:?} lower_ok={} t={:.2?}",
                est.lambdas,
                est.ses,
                lyapunov::lower_bound_check(&est),
                t.elapsed()
            );
        }
        println!("total {:.2?}", t0.elapsed());
    }

    if which == "vmass" {
        let e = zoo::by_label("lattes_doubling").unwrap();
        let t = Instant::now();
        let (pts, _) = green::sample_measure(&e.map, 600, &SampleOptions::default()).unwrap();
        let depths: Vec<usize> = (1..=12).collect();
        let table = linearization::mass_curves(&e.map, &pts, &depths, 0.1, 10.0, 0.3).unwrap();
        for r in &table.rows {
            println!(
                "n={:2} mass_B={:.3} mass_LB={:.3} mass_V={:.3} se_V={:.3}",
                r.n, r.mass_b, r.mass_lb, r.mass_v, r.se_v
            );
        }
        println!("t={:.2?}", t.elapsed());
    }

    if which == "sqrtd" {
        for label in ["power_2", "lattes_doubling"] {
            let e = zoo::by_label(label).unwrap();
            let t = Instant::now();
            let (pts, _) = green::sample_measure(&e.map, 25, &SampleOptions::default()).unwrap();
            let mut conv = 0;
            let mut div = 0;
            let mut inc = 0;
            for p in &pts {
                let tr =
                    linearization::sqrt_d_linearization_test(&e.map, p, 2000, 0.01, 0.3).unwrap();
                match tr.verdict {
                    Verdict::Converging => conv += 1,
                    Verdict::Diverging => div += 1,
                    Verdict::Inconclusive => inc += 1,
                }
            }
            println!(
                "{label}: conv={conv} div={div} inc={inc} t={:.2?}",
                t.elapsed()
            );
        }
    }

    if which == "dims" {
        for (label, n) in [
            ("power_2", 2600usize),
            ("lattes_doubling", 2600),
            ("sym2_power_2", 2600),
            ("sym2_lattes_doubling", 2600),
            ("perturbed_power_2", 2600),
        ] {
            let e = zoo::by_label(label).unwrap();
            let t = Instant::now();
            let (pts, _) = green::sample_measure(&e.map, n, &SampleOptions::default()).unwrap();
            match dimension::auto_radius_range(&pts) {
                Ok((rmin, rmax)) => match dimension::local_dimension(&pts, rmin, rmax) {
                    Ok(rep) => println!(
                        "{label:22} local={:.3} ci=({:.3},{:.3}) nloc={} corr={:.3} cci=({:.3},{:.3}) range=({:.2e},{:.2e}) widened={} t={:.2?}",
                        rep.measured_local_dim,
                        rep.ci95.0,
                        rep.ci95.1,
                        rep.n_localized,
                        rep.correlation_dim,
                        rep.correlation_ci95.0,
                        rep.correlation_ci95.1,
                        rep.r_range.0,
                        rep.r_range.1,
                        rep.widened,
                        t.elapsed()
                    ),
                    Err(err) => println!("{label}: local_dimension error: {err}"),
                },
                Err(err) => println!("{label}: auto_radius_range error: {err}"),
            }
        }
    }

    if which == "ueda" {
        let e = zoo::by_label("sym2_lattes_doubling").unwrap();
        let t = Instant::now();
        let opts = SpectrumOptions {
            n_steps: 200,
            n_orbits: 500,
            ..Default::default()
        };
        let est = lyapunov::lyapunov_spectrum(&e.map, &opts).unwrap();
        println!(
            "lambdas={:?} ses={:?} sum_check={:.3e} t={:.2?}",
            est.lambdas, est.ses, est.sum_check_residual, t.elapsed()
        );
        let l2 = 2f64.ln();
        println!(
            "rel errs: {:.4} {:.4}",
            (est.lambdas[0] - l2).abs() / l2,
            (est.lambdas[1] - l2).abs() / l2
        );
    }

    if which == "crit9" {
        let e = zoo::by_label("perturbed_power_2").unwrap();
        let opts = SpectrumOptions {
            n_steps: 200,
            n_orbits: 500,
            ..Default::default()
        };
        let est = lyapunov::lyapunov_spectrum(&e.map, &opts).unwrap();
        let half = 0.5 * 2f64.ln();
        println!(
            "lambda={:.6} se={:.2e} margin_ses={:.1} minimal={} bound={:.4}",
            est.lambdas[0],
            est.ses[0],
            (est.lambdas[0] - half) / est.ses[0],
            lyapunov::minimality_test(&est),
            dimension::dim_upper_bound(1, 2, est.lambdas[0]).unwrap()
        );
    }
}

// Appended probes: percentile diagnostics for auto ranges.
#[allow(dead_code)]
fn percentile_probe() {}
