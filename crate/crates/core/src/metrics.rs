//! Lyapunov spectrum from QR reorthonormalization of the tangent flow, and
//! the Kaplan–Yorke dimension derived from it.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{tangent_flow, IntegratorConfig};
use crate::io::fmt_f64;
use crate::model::{Damping, State3};

/// Per-exponent agreement required between the running estimate over the
/// last quarter of the run and the final estimate.
pub const CONVERGENCE_TOL: f64 = 0.005;

/// Partial sums down to `-ZERO_EXPONENT_TOL` count as non-negative when the
/// dimension is computed from a finite-time spectrum, whose neutral
/// (flow-direction) exponent is only zero up to `O(1/T)`.
pub const ZERO_EXPONENT_TOL: f64 = 1e-3;

pub const DEFAULT_RENORM_EVERY: usize = 10;

/// Integration defaults for spectra: `h = 0.01`, 1000 time units of
/// transient, 20000 in total.
pub fn default_spectrum_config() -> IntegratorConfig {
    IntegratorConfig::rk4(0.01, 20_000.0, 1_000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub b: f64,
    pub s0: State3,
    /// Sorted descending.
    pub exponents: [f64; 3],
    pub d_ky: f64,
    /// Averaging time (run length minus transient).
    pub t_total: f64,
    pub converged: bool,
    pub final_state: State3,
}

impl LyapunovReport {
    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

fn check_sorted(exponents: &[f64; 3]) -> Result<()> {
    if exponents.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("exponents must be finite, got {exponents:?}")));
    }
    if exponents[0] < exponents[1] || exponents[1] < exponents[2] {
        return Err(Error::domain(format!("exponents must be sorted descending, got {exponents:?}")));
    }
    Ok(())
}

/// Kaplan–Yorke dimension with the usual partial-sum rule: `k` is the largest
/// index whose partial sum `λ₁ + … + λ_k` is non-negative, and the result is
/// `k + (λ₁ + … + λ_k) / |λ_{k+1}|`.
pub fn kaplan_yorke(exponents: &[f64; 3]) -> Result<f64> {
    kaplan_yorke_with_tolerance(exponents, 0.0)
}

/// As [`kaplan_yorke`], but partial sums `≥ −zero_tol` count as non-negative.
pub fn kaplan_yorke_with_tolerance(exponents: &[f64; 3], zero_tol: f64) -> Result<f64> {
    check_sorted(exponents)?;
    let mut partial = 0.0;
    let mut k = 0;
    for &l in exponents {
        if partial + l >= -zero_tol {
            partial += l;
            k += 1;
        } else {
            break;
        }
    }
    let d = match k {
        0 => 0.0,
        3 => 3.0,
        _ => k as f64 + partial / exponents[k].abs(),
    };
    Ok(d.clamp(0.0, 3.0))
}

/// Lyapunov spectrum of the orbit through `s0`.
pub fn lyapunov_spectrum(
    s0: &State3,
    d: Damping,
    cfg: &IntegratorConfig,
    renorm_every: usize,
) -> Result<LyapunovReport> {
    cfg.validate()?;
    let t0 = cfg.skip_steps() as f64 * cfg.step_h;
    let t_end = cfg.n_steps() as f64 * cfg.step_h;
    let t_total = t_end - t0;
    if t_total <= 0.0 {
        return Err(Error::domain("no averaging time left after the transient"));
    }
    let window_start = t0 + 0.75 * t_total;
    // Running estimates seen over the last quarter, per QR channel.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut last_sum = [0.0; 3];
    let final_state = tangent_flow(s0, d, cfg, renorm_every, |sample| {
        if sample.t >= window_start {
            for k in 0..3 {
                let est = sample.log_sum[k] / (sample.t - t0);
                lo[k] = lo[k].min(est);
                hi[k] = hi[k].max(est);
            }
        }
        last_sum = sample.log_sum;
    })?;
    let channel: [f64; 3] = std::array::from_fn(|k| last_sum[k] / t_total);
    let converged = (0..3).all(|k| {
        (hi[k] - channel[k]).abs() < CONVERGENCE_TOL && (channel[k] - lo[k]).abs() < CONVERGENCE_TOL
    });
    let mut exponents = channel;
    exponents.sort_by(|a, b| b.total_cmp(a));
    let d_ky = kaplan_yorke_with_tolerance(&exponents, ZERO_EXPONENT_TOL)?;
    Ok(LyapunovReport { b: d.value(), s0: *s0, exponents, d_ky, t_total, converged, final_state })
}

/// How each row of a scan chooses its initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SeedPolicy {
    /// Every row starts from the same point; rows are independent.
    Fixed(State3),
    /// The first row starts here; each later row starts where the previous
    /// one ended, so the scan follows one attractor branch.
    Continue(State3),
}

/// A state this close to the invariant diagonal is moved off it before being
/// reused, otherwise the orbit could never leave an unstable equilibrium.
const DIAGONAL_EPS: f64 = 1e-6;
const DIAGONAL_NUDGE: State3 = State3::new(1e-3, -5e-4, 2.5e-4);

pub(crate) fn next_seed(s: State3) -> State3 {
    if (s.x - s.y).abs() < DIAGONAL_EPS && (s.y - s.z).abs() < DIAGONAL_EPS {
        s + DIAGONAL_NUDGE
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub b: f64,
    pub s0: State3,
    pub outcome: Result<LyapunovReport>,
}

/// One spectrum per value of `b`, in the order given.
pub fn spectrum_scan(
    b_values: &[f64],
    cfg: &IntegratorConfig,
    renorm_every: usize,
    policy: SeedPolicy,
) -> Vec<ScanRow> {
    let row = |b: f64, s0: State3| {
        let outcome = Damping::new(b).and_then(|d| lyapunov_spectrum(&s0, d, cfg, renorm_every));
        ScanRow { b, s0, outcome }
    };
    match policy {
        SeedPolicy::Fixed(s0) => b_values.par_iter().map(|&b| row(b, s0)).collect(),
        SeedPolicy::Continue(mut s0) => b_values
            .iter()
            .map(|&b| {
                let r = row(b, s0);
                if let Ok(report) = &r.outcome {
                    s0 = next_seed(report.final_state);
                }
                r
            })
            .collect(),
    }
}

/// `b,lambda1,lambda2,lambda3,d_ky,converged`; failed rows carry `nan` and
/// are explained in a trailing comment, as are the initial conditions.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], w: &mut W) -> io::Result<()> {
    writeln!(w, "b,lambda1,lambda2,lambda3,d_ky,converged")?;
    for r in rows {
        match &r.outcome {
            Ok(rep) => writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(r.b),
                fmt_f64(rep.exponents[0]),
                fmt_f64(rep.exponents[1]),
                fmt_f64(rep.exponents[2]),
                fmt_f64(rep.d_ky),
                rep.converged
            )?,
            Err(_) => writeln!(w, "{},nan,nan,nan,nan,false", fmt_f64(r.b))?,
        }
    }
    for r in rows {
        write!(w, "# s0 b={} x0={} y0={} z0={}", fmt_f64(r.b), fmt_f64(r.s0.x), fmt_f64(r.s0.y), fmt_f64(r.s0.z))?;
        match &r.outcome {
            Ok(_) => writeln!(w)?,
            Err(e) => writeln!(w, " error={e}")?,
        }
    }
    Ok(())
}
