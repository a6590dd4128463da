//! Equilibria of the damped system and the bifurcations they undergo.
//!
//! Cyclic symmetry puts every equilibrium on the diagonal `(x*, x*, x*)`,
//! where `x*` solves the scalar equation `b·x = sin x`. Roots are found on
//! the positive half-line and mirrored, so the returned set is exactly
//! symmetric under `x → −x`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::{circulant_eigenvalues, Damping, EigenTriple, State3};
use crate::numeric::{bisect, newton_polish};

/// Real parts closer than this to zero are reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-9;

/// Spacing of the coarse sign-change scan.
pub const SCAN_STEP: f64 = 1e-3;

const ROOT_X_TOL: f64 = 1e-13;
const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StabilityClass {
    StableNode,
    StableSpiral,
    UnstableSpiral,
    SaddleFocus,
    Marginal,
}

impl StabilityClass {
    pub fn is_stable(self) -> bool {
        matches!(self, StabilityClass::StableNode | StabilityClass::StableSpiral)
    }
}

/// A diagonal equilibrium `(x*, x*, x*)` with its spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub x_star: f64,
    /// `cos x*`, the off-diagonal entry of the circulant Jacobian.
    pub c: f64,
    pub eigen: EigenTriple,
    pub klass: StabilityClass,
}

impl Equilibrium {
    pub fn state(&self) -> State3 {
        State3::diagonal(self.x_star)
    }
}

/// Flat export record: `{x_star, c, lambda0, lambda_re, lambda_im, class}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumRecord {
    pub x_star: f64,
    pub c: f64,
    pub lambda0: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub class: StabilityClass,
}

impl From<&Equilibrium> for EquilibriumRecord {
    fn from(e: &Equilibrium) -> Self {
        EquilibriumRecord {
            x_star: e.x_star,
            c: e.c,
            lambda0: e.eigen.lambda0,
            lambda_re: e.eigen.lambda12_re,
            lambda_im: e.eigen.lambda12_im,
            class: e.klass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BifurcationKind {
    Pitchfork,
    DoubleSaddleNode,
    Hopf,
}

impl BifurcationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BifurcationKind::Pitchfork => "PITCHFORK",
            BifurcationKind::DoubleSaddleNode => "DOUBLE_SADDLE_NODE",
            BifurcationKind::Hopf => "HOPF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    pub kind: BifurcationKind,
    pub b_critical: f64,
    /// Positive representative; the mirror event at `−x_star` is implied.
    pub x_star: f64,
}

/// `x_max` large enough to contain every root: none exist beyond `1/b`.
pub fn default_x_max(d: Damping) -> f64 {
    PI.max(1.2 / d.value())
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

fn residual(x: f64, b: f64) -> f64 {
    x.sin() - b * x
}

/// Positive extrema of `sin(x)/x` with positive value: the roots of
/// `tan x = x` in `(2jπ, 2jπ + π/2)`, up to `upto`.
fn sinc_maxima(upto: f64) -> impl Iterator<Item = f64> {
    (1..)
        .map(|j| sinc_maximum(j))
        .take_while(move |&x| x <= upto)
}

/// The j-th positive maximum of `sin(x)/x`, `j ≥ 1`.
fn sinc_maximum(j: u32) -> f64 {
    let lo = 2.0 * PI * j as f64;
    let hi = lo + FRAC_PI_2;
    let chi = |x: f64| x * x.cos() - x.sin();
    let dchi = |x: f64| -x * x.sin();
    let x = bisect(chi, lo, hi, 1e-15);
    newton_polish(chi, dchi, x, lo, hi)
}

/// All roots of `sin x = b·x` on `[−x_max, x_max]`, classified.
pub fn find_fixed_points(d: Damping, x_max: f64) -> Result<Vec<Equilibrium>> {
    if d.value() <= 0.0 {
        return Err(Error::domain(
            "fixed points need b > 0; for b = 0 use the lattice of the walk module",
        ));
    }
    if !(x_max >= PI) || !x_max.is_finite() {
        return Err(Error::domain(format!("x_max must be finite and at least pi, got {x_max}")));
    }
    let positive = positive_roots(d.value(), x_max);
    let mut roots: Vec<f64> = positive.iter().rev().map(|&x| -x).collect();
    roots.push(0.0);
    roots.extend_from_slice(&positive);
    Ok(roots.into_iter().map(|x| classify(x, d)).collect())
}

fn positive_roots(b: f64, x_max: f64) -> Vec<f64> {
    // Scan grid with the maxima of sin(x)/x merged in, so that a pair of
    // roots straddling a maximum is always bracketed separately.
    let n = (x_max / SCAN_STEP).ceil() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| (i as f64 * SCAN_STEP).min(x_max)).collect();
    let maxima: Vec<f64> = sinc_maxima(x_max).collect();
    grid.extend_from_slice(&maxima);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let g = |x: f64| sinc(x) - b;
    let values: Vec<f64> = grid
        .iter()
        .map(|&x| {
            // A maximum touching b within the residual tolerance is a tangency:
            // pin it to zero so the double root is reported exactly once.
            if maxima.contains(&x) && residual(x, b).abs() <= RESIDUAL_TOL * x.max(1.0) {
                0.0
            } else {
                g(x)
            }
        })
        .collect();

    let mut roots = Vec::new();
    for i in 0..grid.len() - 1 {
        let (x0, x1) = (grid[i], grid[i + 1]);
        let (g0, g1) = (values[i], values[i + 1]);
        if g0 == 0.0 {
            if x0 > 0.0 {
                roots.push(x0);
            }
            continue;
        }
        if g0 * g1 < 0.0 {
            let x = bisect(g, x0, x1, ROOT_X_TOL);
            let x = newton_polish(|x| residual(x, b), |x| x.cos() - b, x, x0, x1);
            roots.push(x);
        }
    }
    if let (Some(&x), Some(&v)) = (grid.last(), values.last()) {
        if v == 0.0 && x > 0.0 {
            roots.push(x);
        }
    }
    roots
}

/// Spectrum and stability class of the equilibrium at `x_star`.
pub fn classify(x_star: f64, d: Damping) -> Equilibrium {
    let c = x_star.cos().clamp(-1.0, 1.0);
    let eigen = circulant_eigenvalues(c, d).expect("cos lies in [-1, 1]");
    Equilibrium { x_star, c, eigen, klass: stability_class(&eigen) }
}

fn stability_class(e: &EigenTriple) -> StabilityClass {
    if e.lambda0.abs() < MARGINAL_BAND || e.lambda12_re.abs() < MARGINAL_BAND {
        StabilityClass::Marginal
    } else if e.lambda0 < 0.0 && e.lambda12_re < 0.0 {
        if e.lambda12_im > 0.0 {
            StabilityClass::StableSpiral
        } else {
            StabilityClass::StableNode
        }
    } else if e.lambda0 > 0.0 && e.lambda12_re > 0.0 {
        StabilityClass::UnstableSpiral
    } else {
        StabilityClass::SaddleFocus
    }
}

/// The first `n_max` Hopf points: solutions of `sin x = −½ x cos x` with
/// `cos x < 0`, ascending in `x` (so descending in `b = −cos(x)/2`).
pub fn hopf_points(n_max: usize) -> Vec<BifurcationEvent> {
    let psi = |x: f64| x.sin() + 0.5 * x * x.cos();
    let dpsi = |x: f64| 1.5 * x.cos() - 0.5 * x * x.sin();
    (0..n_max)
        .map(|j| {
            // One root per branch of tan; odd branches carry cos x < 0.
            let k = (2 * j + 1) as f64;
            let lo = (k - 0.5) * PI;
            let hi = (k + 0.5) * PI;
            let x = bisect(psi, lo, hi, 1e-15);
            let x = newton_polish(psi, dpsi, x, lo, hi);
            BifurcationEvent { kind: BifurcationKind::Hopf, b_critical: -0.5 * x.cos(), x_star: x }
        })
        .collect()
}

/// The first `n_max` double saddle-node points: maxima of `sin(x)/x`
/// beyond the origin, with `b_critical` the value at the maximum.
pub fn saddle_node_points(n_max: usize) -> Vec<BifurcationEvent> {
    (1..=n_max as u32)
        .map(|j| {
            let x = sinc_maximum(j);
            BifurcationEvent { kind: BifurcationKind::DoubleSaddleNode, b_critical: sinc(x), x_star: x }
        })
        .collect()
}

pub fn pitchfork_event() -> BifurcationEvent {
    BifurcationEvent { kind: BifurcationKind::Pitchfork, b_critical: 1.0, x_star: 0.0 }
}

/// Pitchfork, the first `n_max` Hopf and saddle-node events, by descending `b`.
pub fn bifurcation_events(n_max: usize) -> Vec<BifurcationEvent> {
    let mut events = vec![pitchfork_event()];
    events.extend(hopf_points(n_max));
    events.extend(saddle_node_points(n_max));
    events.sort_by(|a, b| b.b_critical.total_cmp(&a.b_critical));
    events
}

pub fn write_events_csv<W: Write>(events: &[BifurcationEvent], w: &mut W) -> io::Result<()> {
    writeln!(w, "kind,b_critical,x_star")?;
    for e in events {
        writeln!(w, "{},{},{}", e.kind.as_str(), fmt_f64(e.b_critical), fmt_f64(e.x_star))?;
    }
    Ok(())
}

/// Cubic-Taylor estimate `√(6(1−b))` of the root born at the pitchfork.
pub fn pitchfork_estimate(d: Damping) -> Result<f64> {
    let b = d.value();
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::domain(format!("pitchfork estimate needs 0 < b <= 1, got {b}")));
    }
    Ok((6.0 * (1.0 - b)).sqrt())
}

/// `dV/dt` along the flow for `V = ½|s|²`.
pub fn lyapunov_derivative(s: &State3, d: Damping) -> f64 {
    -d.value() * s.norm_sq() + s.x * s.y.sin() + s.y * s.z.sin() + s.z * s.x.sin()
}

/// `−(dV/dt) / |s|²`; positive where `V` strictly decreases.
pub fn lyapunov_margin(s: &State3, d: Damping) -> f64 {
    -lyapunov_derivative(s, d) / s.norm_sq()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCheck {
    pub n_samples: usize,
    pub violations: usize,
    pub min_margin: f64,
}

/// Radius of the excluded ball around the origin.
const EXCLUDED_RADIUS: f64 = 1e-6;

/// Uniform sample `index` of the cube `[−w, w]³` with the small ball around
/// the origin rejected. Each index owns its own ChaCha stream, so the
/// sequence does not depend on how work is split across threads.
pub fn cube_sample(seed: u64, index: u64, half_width: f64) -> State3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    loop {
        let s = State3::new(
            rng.random_range(-half_width..half_width),
            rng.random_range(-half_width..half_width),
            rng.random_range(-half_width..half_width),
        );
        if s.norm() > EXCLUDED_RADIUS {
            return s;
        }
    }
}

/// Audits `V = ½|s|²` as a Lyapunov function at random points of the cube:
/// counts points where `dV/dt ≥ 0` and reports the smallest margin.
pub fn lyapunov_function_check(
    d: Damping,
    n_samples: usize,
    box_half_width: f64,
    rng_seed: u64,
) -> Result<LyapunovCheck> {
    if d.value() <= 1.0 {
        return Err(Error::domain(format!("the global Lyapunov audit needs b > 1, got {}", d.value())));
    }
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be at least 1"));
    }
    if !(box_half_width > EXCLUDED_RADIUS) || !box_half_width.is_finite() {
        return Err(Error::domain(format!("box half width must exceed {EXCLUDED_RADIUS}")));
    }
    let (violations, min_margin) = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = cube_sample(rng_seed, i, box_half_width);
            let vdot = lyapunov_derivative(&s, d);
            ((vdot >= 0.0) as usize, -vdot / s.norm_sq())
        })
        .reduce(|| (0, f64::INFINITY), |a, b| (a.0 + b.0, a.1.min(b.1)));
    Ok(LyapunovCheck { n_samples, violations, min_margin })
}
