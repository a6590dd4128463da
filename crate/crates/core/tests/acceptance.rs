//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{circulant, dense_scan_roots, eigen_oracle, sorted_triple, spectrum_distance, tan_fixed_point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thomas::equilibria::{
    cube_sample, default_x_max, find_fixed_points, hopf_points, lyapunov_function_check, saddle_node_points,
};
use thomas::integrate::{integrate, propagate, IntegratorConfig};
use thomas::metrics::{default_spectrum_config, lyapunov_spectrum, spectrum_scan, SeedPolicy, DEFAULT_RENORM_EVERY};
use thomas::model::{circulant_eigenvalues, cyclic_permute, field, reflect};
use thomas::sections::{
    bifurcation_sweep, detect_limit_cycle, ensemble_section, poincare_section, surface, DirectionFilter,
    EnsembleConfig, SweepConfig, SURFACE_TOL,
};
use thomas::walk::{lattice_eigenvalues, speed_stats, LatticePoint};
use thomas::{Damping, State3};

type Verdict = (bool, String);

fn damp(b: f64) -> Damping {
    Damping::new(b).unwrap()
}

fn seed_point() -> State3 {
    State3::new(1.0, 1.0, -1.0)
}

fn fixed_point_census() -> Verdict {
    let cases = [(1.1, 1), (0.9, 3), (0.35, 3), (0.128, 7), (0.07, 11)];
    let mut ok = true;
    let mut counts = Vec::new();
    for (b, expected) in cases {
        let d = damp(b);
        let x_max = default_x_max(d);
        let found: Vec<f64> = find_fixed_points(d, x_max).unwrap().iter().map(|e| e.x_star).collect();
        let oracle = dense_scan_roots(b, x_max, 1e-3);
        let agree = found.len() == oracle.len() && found.iter().zip(&oracle).all(|(a, o)| (a - o).abs() <= 1e-9);
        ok &= agree && found.len() == expected;
        counts.push(found.len());
    }
    (ok, format!("counts {counts:?}, expected [1, 3, 3, 7, 11]"))
}

fn closed_form_eigenvalues() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = rng.random_range(-1.0..=1.0);
        let b = rng.random_range(0.0..2.0);
        let e = circulant_eigenvalues(c, damp(b)).unwrap();
        let closed = sorted_triple(e.lambda0, e.lambda12_re, e.lambda12_im);
        worst = worst.max(spectrum_distance(&closed, &eigen_oracle(circulant(c, b))));
    }
    (worst <= 1e-10, format!("max deviation {worst:.2e} over 1000 draws"))
}

fn hopf_locations() -> Verdict {
    let ev = hopf_points(2);
    let targets = [(2.28, 0.329), (8.09, 0.1198)];
    let ok = ev
        .iter()
        .zip(targets)
        .all(|(e, (x, b))| (e.x_star - x).abs() <= 0.01 && (e.b_critical - b).abs() <= 0.001);
    let found: Vec<(f64, f64)> = ev.iter().map(|e| (e.x_star, e.b_critical)).collect();
    (ok && ev.len() == 2, format!("(x*, b) = {found:.4?}"))
}

fn saddle_node_location() -> Verdict {
    let e = saddle_node_points(1)[0];
    let oracle = tan_fixed_point(1);
    let ok = (0.125..=0.132).contains(&e.b_critical) && (e.x_star - oracle).abs() < 1e-9 && (oracle - 7.7253).abs() < 1e-4;
    (ok, format!("b_critical {:.6}, x* {:.6}, tan x = x root {:.6}", e.b_critical, e.x_star, oracle))
}

fn global_stability() -> Verdict {
    let d = damp(1.2);
    let check = lyapunov_function_check(d, 100_000, 10.0, 2024).unwrap();
    let cfg = IntegratorConfig::rk4(0.01, 300.0, 0.0);
    let worst = (0..50)
        .map(|i| propagate(&cube_sample(77, i, 10.0), d, &cfg).unwrap().norm())
        .fold(0.0, f64::max);
    (
        check.violations == 0 && worst <= 1e-6,
        format!("{} violations in {} samples; max |s(300)| = {worst:.2e}", check.violations, check.n_samples),
    )
}

fn trace_identity() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for b in [0.30, 0.25, 0.19, 0.10, 0.05] {
        let r = lyapunov_spectrum(&seed_point(), damp(b), &default_spectrum_config(), DEFAULT_RENORM_EVERY).unwrap();
        let gap = (r.sum() + 3.0 * b).abs();
        ok &= gap <= 0.02 && r.converged;
        parts.push(format!("b={b}: gap {gap:.1e} converged={}", r.converged));
    }
    (ok, parts.join("; "))
}

fn limit_cycle_window() -> Verdict {
    let d = damp(0.1198);
    let r = lyapunov_spectrum(&seed_point(), d, &default_spectrum_config(), DEFAULT_RENORM_EVERY).unwrap();
    let traj = integrate(&r.final_state, d, &IntegratorConfig::rk4(0.01, 3000.0, 0.0)).unwrap();
    let cycle = detect_limit_cycle(&traj, d).unwrap();
    let ok = r.exponents[0].abs() <= 0.01 && (r.d_ky - 1.0).abs() <= 0.1 && cycle.is_periodic();
    (ok, format!("lambda1 {:.2e}, D_KY {:.4}, periodic={} (period {:?})", r.exponents[0], r.d_ky, cycle.is_periodic(), cycle.period))
}

fn dimension_trend() -> Verdict {
    let grid: Vec<f64> = (0..44).map(|i| (45 - i) as f64 / 100.0).collect();
    let rows = spectrum_scan(&grid, &default_spectrum_config(), DEFAULT_RENORM_EVERY, SeedPolicy::Continue(seed_point()));
    let mut bad = Vec::new();
    for r in &rows {
        let Ok(rep) = &r.outcome else {
            bad.push(format!("b={:.2} failed", r.b));
            continue;
        };
        if (r.b >= 0.35 - 1e-12 && rep.d_ky > 1.1) || (r.b <= 0.03 + 1e-12 && rep.d_ky < 2.5) {
            bad.push(format!("b={:.2} D_KY={:.3}", r.b, rep.d_ky));
        }
    }
    let ends: Vec<String> = rows
        .iter()
        .filter(|r| r.b >= 0.35 - 1e-12 || r.b <= 0.03 + 1e-12)
        .filter_map(|r| r.outcome.as_ref().ok().map(|o| format!("{:.2}:{:.3}", r.b, o.d_ky)))
        .collect();
    let detail = if bad.is_empty() { format!("endpoints {}", ends.join(" ")) } else { format!("violations: {}", bad.join(", ")) };
    (bad.is_empty(), detail)
}

fn zero_damping_speed() -> Verdict {
    let cfg = IntegratorConfig { record_every: 10, ..IntegratorConfig::rk4(0.01, 50_000.0, 0.0) };
    let traj = integrate(&State3::new(0.1, 0.2, 0.3), damp(0.0), &cfg).unwrap();
    let s = speed_stats(&traj).unwrap();
    let target = 1.5f64.sqrt();
    let ok = (s.mean_speed / target - 1.0).abs() <= 0.02 && s.sin2_means.iter().all(|m| (m / 0.5 - 1.0).abs() <= 0.02);
    (
        ok,
        format!("mean speed {:.4} (target {target:.4}), sin^2 means {:.4?}, mean |v| {:.4}", s.mean_speed, s.sin2_means, s.mean_norm),
    )
}

fn lattice_spectrum() -> Verdict {
    let h = 3f64.sqrt() / 2.0;
    let e0 = lattice_eigenvalues(LatticePoint::new(0, 0, 0));
    let e1 = lattice_eigenvalues(LatticePoint::new(1, 0, 0));
    let mut ok = (e0.lambda0, e0.lambda12_re, e0.lambda12_im) == (1.0, -0.5, h)
        && (e1.lambda0, e1.lambda12_re, e1.lambda12_im) == (-1.0, 0.5, h);
    let mut worst: f64 = 0.0;
    for n in 0..2 {
        for m in 0..2 {
            for k in 0..2 {
                let p = LatticePoint::new(n, m, k);
                let e = lattice_eigenvalues(p);
                worst = worst.max(spectrum_distance(&sorted_triple(e.lambda0, e.lambda12_re, e.lambda12_im), &eigen_oracle(p.jacobian())));
            }
        }
    }
    ok &= worst <= 1e-12;
    (ok, format!("origin {e0:?}; max oracle deviation {worst:.1e}"))
}

fn symmetry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = IntegratorConfig::rk4(0.01, 100.0, 0.0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let s0 = State3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let d = damp(rng.random_range(0.05..1.0));
        let base = integrate(&s0, d, &cfg).unwrap();
        let perm = integrate(&cyclic_permute(&s0), d, &cfg).unwrap();
        let refl = integrate(&reflect(&s0), d, &cfg).unwrap();
        for ((a, p), r) in base.states().iter().zip(perm.states()).zip(refl.states()) {
            worst = worst.max(cyclic_permute(a).max_abs_diff(p)).max(reflect(a).max_abs_diff(r));
            let f = field(a, d).unwrap();
            worst = worst
                .max(field(&cyclic_permute(a), d).unwrap().max_abs_diff(&cyclic_permute(&f)))
                .max(field(&reflect(a), d).unwrap().max_abs_diff(&-f));
        }
    }
    (worst <= 1e-12, format!("max deviation {worst:.1e} over 20 starts, t <= 100"))
}

fn section_and_sweep() -> Verdict {
    let mut residual: f64 = 0.0;
    let mut n_hits = 0;
    let ens = EnsembleConfig { n_init: 100, seed: 0, ..Default::default() };
    let out = ensemble_section(&ens, damp(0.19), &IntegratorConfig::rk4(0.01, 600.0, 100.0), DirectionFilter::Both).unwrap();
    for h in &out.hits {
        residual = residual.max(surface(&h.hit.state, 0.19).abs());
    }
    n_hits += out.hits.len();
    for b in [0.05, 0.1198, 0.3] {
        let hits = poincare_section(&seed_point(), damp(b), &IntegratorConfig::rk4(0.01, 2000.0, 100.0), DirectionFilter::Both).unwrap();
        n_hits += hits.len();
        residual = hits.iter().map(|h| surface(&h.state, b).abs()).fold(residual, f64::max);
    }

    let rows = bifurcation_sweep(&SweepConfig::default(), &IntegratorConfig::rk4(0.01, 5000.0, 500.0)).unwrap();
    let centre = 0.1198;
    let near: Vec<_> = rows.iter().filter(|r| (r.b - centre).abs() <= 0.02).collect();
    let at = near.iter().min_by(|a, b| (a.b - centre).abs().total_cmp(&(b.b - centre).abs())).unwrap();
    let at_card = at.distinct_values(1e-3);
    let (max_b, max_card) = near.iter().map(|r| (r.b, r.distinct_values(1e-3))).max_by_key(|p| p.1).unwrap();
    let window = at_card > 0 && max_card >= 10 * at_card;
    (
        residual <= SURFACE_TOL && window,
        format!(
            "max |g| {residual:.1e} over {n_hits} hits; distinct section values {at_card} at b={:.4} vs {max_card} at b={max_b:.4}",
            at.b
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Verdict); 12] = [
        ("fixed-point census", 1, fixed_point_census),
        ("closed-form eigenvalues", 1, closed_form_eigenvalues),
        ("Hopf locations", 1, hopf_locations),
        ("saddle-node location", 1, saddle_node_location),
        ("global stability audit", 30, global_stability),
        ("Lyapunov trace identity", 300, trace_identity),
        ("limit-cycle window", 120, limit_cycle_window),
        ("dimension trend", 1200, dimension_trend),
        ("zero-damping speed", 120, zero_damping_speed),
        ("b=0 lattice spectrum", 1, lattice_spectrum),
        ("symmetry properties", 10, symmetry),
        ("Poincare residual and sweep structure", 900, section_and_sweep),
    ];
    let mut failures = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(*limit);
        let pass = ok && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.2} s, limit {limit} s{}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over time" }
        );
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
