//! Acceptance criteria. Each prints one PASS/FAIL line; the process fails if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use gridfluct::closed_form::*;
use gridfluct::lyapunov;
use gridfluct::montecarlo::{simulate_covariance, SimConfig, ABSOLUTE_FLOOR};
use gridfluct::swing::smib_covariance_numeric;
use gridfluct::variance::first_order_variance;
use gridfluct::*;
use nalgebra::DVector;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// 1. Complete graph n=20, γ=10, η=0.5, d=0.3, b₂=0.04: closed form, uniform-ratio
/// and numeric q_ω,22 pairwise within 1e-8 relative, in under 1 s.
fn route_equivalence_complete() -> Verdict {
    let start = Instant::now();
    let p = HomogeneousParams::single_source(20, 10.0, 0.5, 0.3, 1, 0.04).unwrap();
    let lin = p.linearized(GraphKind::Complete).unwrap();
    let closed = complete_report(&p).unwrap();
    let uniform = asymptotic_variance_uniform_ratio(&lin).unwrap();
    let numeric = asymptotic_variance_numeric(&lin).unwrap();
    let elapsed = start.elapsed();
    let q = [closed.q_omega()[(1, 1)], uniform.q_omega()[(1, 1)], numeric.q_omega()[(1, 1)]];
    let pairwise = rel(q[0], q[1]).max(rel(q[0], q[2])).max(rel(q[1], q[2]));
    let reports = closed.max_relative_discrepancy(&numeric).max(uniform.max_relative_discrepancy(&numeric));
    verdict(
        pairwise <= 1e-8 && reports <= 1e-8 && elapsed < Duration::from_secs(1),
        format!(
            "q_ω,22 = {:.12e}, pairwise {pairwise:.1e}, whole reports {reports:.1e} (tol 1e-8), {:.3} s (limit 1 s)",
            q[2],
            secs(elapsed)
        ),
    )
}

/// 2. Star n=20, γ=10, η=0.5, d=0.2, b₂=0.5: every displayed star formula matches
/// the numeric route within 1e-8, in under 1 s.
fn route_equivalence_star() -> Verdict {
    let start = Instant::now();
    let p = HomogeneousParams::single_source(20, 10.0, 0.5, 0.2, 1, 0.5).unwrap();
    let numeric = asymptotic_variance_numeric(&p.linearized(GraphKind::Star).unwrap()).unwrap();
    let report = star_report(&p).unwrap();
    let leaf = star_single_source_leaf(&p, 1).unwrap();
    let elapsed = start.elapsed();
    let scalars = [
        rel(leaf.root, numeric.q_omega()[(0, 0)]),
        rel(leaf.source, numeric.q_omega()[(1, 1)]),
        rel(leaf.other_leaf, numeric.q_omega()[(7, 7)]),
        rel(leaf.source_line, numeric.q_delta()[(0, 0)]),
        rel(leaf.other_line, numeric.q_delta()[(5, 5)]),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let full = report.max_relative_discrepancy(&numeric);
    verdict(
        scalars <= 1e-8 && full <= 1e-8 && elapsed < Duration::from_secs(1),
        format!(
            "full Q_δ and diag Q_ω {full:.1e}, single-source scalars {scalars:.1e} (tol 1e-8), {:.3} s (limit 1 s)",
            secs(elapsed)
        ),
    )
}

/// 3. tr Q_ω = tr(B̃²)/(2dη) on 50 random connected graphs with identical machines.
fn trace_law() -> Verdict {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = r.random_range(2..=15);
        let density = r.random_range(0.0..0.6);
        let g = random_graph(&mut r, n, density, 0.1, 10.0);
        let (eta, d) = (r.random_range(0.05..5.0), r.random_range(0.05..5.0));
        let lin = identical_machines(&mut r, g, eta, d);
        let numeric = asymptotic_variance_numeric(&lin).unwrap().q_omega().trace();
        worst = worst.max(rel(numeric, lin.noise.norm_squared() / (2.0 * d * eta)));
    }
    verdict(worst <= 1e-9, format!("50 graphs, worst relative {worst:.1e} (tol 1e-9)"))
}

/// 4. Sum of single-source reports equals the multi-source report on 20 random uniform-ratio graphs.
fn superposition() -> Verdict {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = r.random_range(3..=12);
        let g = random_graph(&mut r, n, 0.3, 0.2, 5.0);
        let alpha = r.random_range(0.1..10.0);
        let lin = uniform_ratio_system(&mut r, g, alpha);
        for route in [asymptotic_variance_numeric, asymptotic_variance_uniform_ratio] {
            let full = route(&lin).unwrap();
            let mut sum = CovarianceBlocks::zeros(n, lin.line_count());
            for i in 0..n {
                let mut b = DVector::zeros(n);
                b[i] = lin.noise[i];
                let part = route(&lin.with_noise(b)).unwrap().blocks;
                sum.q_omega += part.q_omega;
                sum.q_delta += part.q_delta;
                sum.q_delta_omega += part.q_delta_omega;
            }
            for q in [Quantity::Omega, Quantity::Delta, Quantity::Cross] {
                let scale = full.blocks.block(q).amax().max(1.0);
                worst = worst.max(max_abs_diff(sum.block(q), full.blocks.block(q)) / scale);
            }
        }
    }
    verdict(
        worst <= 1e-10,
        format!("20 graphs × numeric and uniform-ratio routes, worst entry gap {worst:.1e} × max(1, block max) (tol 1e-10)"),
    )
}

/// 5. Complete graph: first-order angle covariance equals the second-order one.
/// Star: gap at η = 1e-6 within 1e-6 of the first-order scale at the unit-scaled point
/// γ = d = 1, and shrinking monotonically as η goes from 1e-1 to 1e-6.
/// The gap is first order in ηγ/d², so the bound is not parameter-free; the
/// criterion-2 star is reported alongside for reference. Uniform noise makes the
/// gap vanish identically, so a single leaf source is used.
fn first_order_consistency() -> Verdict {
    let b: Vec<f64> = (0..9).map(|i| 0.05 + 0.1 * i as f64).collect();
    let p = HomogeneousParams::new(9, 4.0, 0.8, 0.6, b).unwrap();
    let closed = (complete_report(&p).unwrap().q_delta() - complete_first_order(&p)).amax() / complete_first_order(&p).amax();
    let lin = p.linearized(GraphKind::Complete).unwrap();
    let fo = first_order_variance(&lin).unwrap().q_delta;
    let numeric = (asymptotic_variance_numeric(&lin).unwrap().q_delta() - &fo).amax() / fo.amax();

    let star_gaps = |n: usize, gamma: f64, d: f64, b: f64| -> (f64, bool) {
        let gaps: Vec<f64> = (1..=6)
            .map(|k| {
                let p = HomogeneousParams::single_source(n, gamma, 10f64.powi(-k), d, 1, b).unwrap();
                let bar = star_first_order(&p);
                (star_report(&p).unwrap().q_delta() - &bar).amax() / bar.amax()
            })
            .collect();
        (gaps[5], gaps.windows(2).all(|w| w[1] < w[0]))
    };
    let (unit, unit_monotone) = star_gaps(10, 1.0, 1.0, 0.5);
    let (reference, reference_monotone) = star_gaps(20, 10.0, 0.2, 0.5);
    verdict(
        closed <= 1e-12 && numeric <= 1e-12 && unit <= 1e-6 && unit_monotone && reference_monotone,
        format!(
            "complete: closed {closed:.1e}, numeric routes {numeric:.1e} (tol 1e-12); star η=1e-6, γ=d=1: {unit:.1e} (tol 1e-6), \
             γ=10 d=0.2: {reference:.1e} (reported only); monotone in η: {}",
            unit_monotone && reference_monotone
        ),
    )
}

/// 6. Every trend derivative matches an exact central difference (step 1e-5 relative)
/// to 1e-6 relative and has its stated sign over the domain; n_c marks the sign change.
fn trend_signs() -> Verdict {
    let grid = |lo: f64, hi: f64| (0..5).map(move |i| lo * (hi / lo).powf(i as f64 / 4.0));
    let (mut worst, mut checked, mut wrong_sign) = (0.0f64, 0, 0);
    for n in [3, 4, 5, 7, 10, 20, 50, 100] {
        for gamma in grid(0.1, 100.0) {
            for d in grid(0.05, 5.0) {
                for eta in grid(0.05, 5.0) {
                    let p = HomogeneousParams::single_source(n, gamma, eta, d, 1, 0.7).unwrap();
                    for kind in [GraphKind::Complete, GraphKind::Star] {
                        let t = trend_report(kind, &p, 1).unwrap();
                        for dv in &t.derivatives {
                            let fd = exact::central_difference(&p.continuous(), p.b2(1), kind, dv.scalar, dv.parameter, 1e-5);
                            worst = worst.max(rel(fd, dv.value));
                            wrong_sign += usize::from(!dv.expected.holds(fd) || !dv.sign_holds);
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    let mut r = rng(6);
    let mut nc_fail = 0;
    for _ in 0..100 {
        let (d, gamma, eta) = (r.random_range(0.05..5.0), r.random_range(0.1..100.0), r.random_range(0.05..5.0));
        let nc = critical_size_continuous(d, gamma, eta);
        let q = |n: f64| Scalars { n, gamma, eta, d }.complete_source_frequency(1.0);
        let (below, _) = central_difference(q, nc * (1.0 - 1e-3), 1e-5);
        let (above, _) = central_difference(q, nc * (1.0 + 1e-3), 1e-5);
        nc_fail += usize::from(!(below < 0.0 && above > 0.0) || critical_size(d, gamma, eta) != nc.floor() as usize);
    }
    verdict(
        worst <= 1e-6 && wrong_sign == 0 && nc_fail == 0,
        format!(
            "{checked} derivatives, worst FD gap {worst:.1e} (tol 1e-6), {wrong_sign} sign mismatches; n_c sign change failed on {nc_fail}/100 triples"
        ),
    )
}

/// 7. Monte Carlo on the n=5 complete case with 2000 trajectories: every entry within
/// 4 standard errors of the numeric route, in under 60 s.
fn monte_carlo_agreement() -> Verdict {
    let lin = HomogeneousParams::single_source(5, 10.0, 0.5, 0.3, 1, 0.04)
        .unwrap()
        .linearized(GraphKind::Complete)
        .unwrap();
    let start = Instant::now();
    let cfg = SimConfig::for_system(&lin, 2000, 20240611).unwrap();
    let mc = simulate_covariance(&lin, &cfg).unwrap();
    let elapsed = start.elapsed();
    let numeric = asymptotic_variance_numeric(&lin).unwrap();
    let se = mc.diagnostics.std_errors.as_deref().unwrap();
    let (mut worst, mut entries) = (0.0f64, 0);
    for q in [Quantity::Omega, Quantity::Delta, Quantity::Cross] {
        let (a, b, s) = (mc.blocks.block(q), numeric.blocks.block(q), se.block(q));
        let floor = ABSOLUTE_FLOOR * b.amax();
        for (k, (x, y)) in a.iter().zip(b.iter()).enumerate() {
            entries += 1;
            let err = (x - y).abs();
            if err > floor {
                worst = worst.max(err / s[k]);
            }
        }
    }
    verdict(
        worst <= 4.0 && elapsed < Duration::from_secs(60),
        format!(
            "{entries} entries, worst |MC − numeric| = {worst:.2} standard errors (tol 4), {} samples, {:.1} s (limit 60 s)",
            mc.diagnostics.samples.unwrap_or(0),
            secs(elapsed)
        ),
    )
}

/// 8. Bartels–Stewart and Kronecker solvers agree on 100 random Hurwitz systems of size ≤ 40.
fn oracle_independence() -> Verdict {
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(1..=40);
        let a = random_hurwitz(&mut r, n);
        let w = random_intensity(&mut r, n);
        let bs = lyapunov::solve(&a, &w).unwrap().q;
        let kr = lyapunov::solve_kronecker(&a, &w).unwrap().q;
        worst = worst.max(max_abs_diff(&bs, &kr) / kr.amax());
    }
    verdict(worst <= 1e-10, format!("100 systems, worst gap {worst:.1e} relative to max|Q| (tol 1e-10)"))
}

/// 9. SMIB closed form equals the 2×2 Lyapunov solve over a 10×10 (d, η) grid.
fn smib() -> Verdict {
    let (k, p, beta) = (2.0, 0.5, 1.0);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let d = 0.05 * 100f64.powf(i as f64 / 9.0);
            let eta = 0.05 * 100f64.powf(j as f64 / 9.0);
            let v = smib_variance(eta, d, k, p, beta).unwrap();
            let q = smib_covariance_numeric(eta, d, k, p, beta).unwrap();
            worst = worst.max(rel(q[(0, 0)], v.angle)).max(rel(q[(1, 1)], v.frequency));
        }
    }
    verdict(worst <= 1e-12, format!("100 grid points, worst relative {worst:.1e} (tol 1e-12)"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("route equivalence, complete graph n=20", route_equivalence_complete),
        ("route equivalence, star n=20", route_equivalence_star),
        ("frequency trace law", trace_law),
        ("superposition", superposition),
        ("first-order consistency", first_order_consistency),
        ("trend derivatives and signs", trend_signs),
        ("Monte Carlo agreement", monte_carlo_agreement),
        ("Lyapunov oracle independence", oracle_independence),
        ("single machine infinite bus", smib),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!outcome.pass);
        println!(
            "criterion {} [{name}]: {} - {}",
            k + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
