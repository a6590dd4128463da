//! Poincaré sections on the surface `b·z = sin x` (where `z' = 0`),
//! bifurcation-diagram sweeps over `b`, and an empirical limit-cycle test.
//!
//! Crossings are detected as sign changes of `g(s) = sin x − b z` between
//! consecutive RK4 steps and refined by bisection on the length of a single
//! RK4 step taken from the pre-crossing state.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{rk4_step, IntegratorConfig, Trajectory};
use crate::io::fmt_f64;
use crate::metrics::{next_seed, SeedPolicy};
use crate::model::{Damping, State3};

/// Every emitted hit satisfies `|g| ≤ SURFACE_TOL`.
pub const SURFACE_TOL: f64 = 1e-9;

/// Spatial tolerance for recognising a recurring section pattern.
pub const RECURRENCE_TOL: f64 = 1e-6;

/// Longest return pattern (in same-direction hits) tried by the cycle test.
pub const MAX_PATTERN: usize = 8;

/// Minimum number of same-direction returns for a verdict.
pub const MIN_RETURNS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    /// `g` increases through zero.
    Up,
    Down,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "UP",
            Direction::Down => "DOWN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionFilter {
    Up,
    Down,
    Both,
}

impl DirectionFilter {
    fn accepts(self, d: Direction) -> bool {
        matches!(
            (self, d),
            (DirectionFilter::Both, _) | (DirectionFilter::Up, Direction::Up) | (DirectionFilter::Down, Direction::Down)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionHit {
    pub t: f64,
    pub state: State3,
    pub direction: Direction,
}

/// `g(s) = sin x − b z`, which equals `z'`.
#[inline]
pub fn surface(s: &State3, b: f64) -> f64 {
    s.x.sin() - b * s.z
}

/// Locates the zero of `g` inside one step of length `h` from `prev`,
/// where `g(prev)` and `g(rk4_step(prev, h))` have opposite signs.
fn refine(prev: &State3, b: f64, h: f64) -> (f64, State3) {
    let g_prev = surface(prev, b);
    let (mut lo, mut hi) = (0.0, h);
    let mut best = (h, rk4_step(prev, b, h));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s = rk4_step(prev, b, mid);
        let g = surface(&s, b);
        best = (mid, s);
        if g.abs() <= 1e-13 || mid <= lo || mid >= hi {
            break;
        }
        if (g < 0.0) == (g_prev < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

fn crossing_direction(g_prev: f64, g_next: f64) -> Option<Direction> {
    if g_prev < 0.0 && g_next >= 0.0 {
        Some(Direction::Up)
    } else if g_prev > 0.0 && g_next <= 0.0 {
        Some(Direction::Down)
    } else {
        None
    }
}

/// Hits along an RK4 orbit, stopping early once `max_hits` are recorded.
/// Returns the hits and the final state.
fn section_run(
    s0: &State3,
    b: f64,
    cfg: &IntegratorConfig,
    filter: DirectionFilter,
    max_hits: Option<usize>,
) -> Result<(Vec<SectionHit>, State3)> {
    let h = cfg.step_h;
    let n = cfg.n_steps();
    let skip = cfg.skip_steps();
    let mut hits = Vec::new();
    let mut s = *s0;
    let mut g = surface(&s, b);
    for i in 0..n {
        if max_hits.is_some_and(|m| hits.len() >= m) {
            break;
        }
        let next = rk4_step(&s, b, h);
        let t = i as f64 * h;
        if !next.is_finite() {
            return Err(Error::Integration { t: t + h, reason: format!("non-finite state {next:?}") });
        }
        let g_next = surface(&next, b);
        if i >= skip {
            if let Some(dir) = crossing_direction(g, g_next) {
                if filter.accepts(dir) {
                    let (tau, state) = refine(&s, b, h);
                    if surface(&state, b).abs() <= SURFACE_TOL {
                        hits.push(SectionHit { t: t + tau, state, direction: dir });
                    }
                }
            }
        }
        s = next;
        g = g_next;
    }
    Ok((hits, s))
}

/// Crossings of `b·z = sin x` on `[transient_skip, t_end]`, ordered by time.
pub fn poincare_section(
    s0: &State3,
    d: Damping,
    cfg: &IntegratorConfig,
    direction_filter: DirectionFilter,
) -> Result<Vec<SectionHit>> {
    d.require_positive()?;
    cfg.validate()?;
    cfg.require_rk4()?;
    s0.ensure_finite()?;
    Ok(section_run(s0, d.value(), cfg, direction_filter, None)?.0)
}

/// Isotropic normal cloud of initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_init: usize,
    pub seed: u64,
    pub mean: State3,
    pub scale: f64,
    /// Keep only the first few hits of each orbit (`Some(2)` keeps the first
    /// and second intersections).
    pub max_hits_per_init: Option<usize>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { n_init: 100, seed: 0, mean: State3::diagonal(0.5), scale: 2.0, max_hits_per_init: None }
    }
}

/// Initial condition `index` of the ensemble; each index owns a ChaCha stream.
pub fn ensemble_initial_condition(ens: &EnsembleConfig, index: u64) -> State3 {
    let mut rng = ChaCha8Rng::seed_from_u64(ens.seed);
    rng.set_stream(index);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    State3::new(
        ens.mean.x + ens.scale * draw(),
        ens.mean.y + ens.scale * draw(),
        ens.mean.z + ens.scale * draw(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaggedHit {
    pub init_id: usize,
    pub hit: SectionHit,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnsembleSection {
    /// Ordered by `(init_id, t)`.
    pub hits: Vec<TaggedHit>,
    pub failures: usize,
}

impl EnsembleSection {
    /// `init_id,t,x,y,z,direction`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "init_id,t,x,y,z,direction")?;
        for TaggedHit { init_id, hit } in &self.hits {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                init_id,
                fmt_f64(hit.t),
                fmt_f64(hit.state.x),
                fmt_f64(hit.state.y),
                fmt_f64(hit.state.z),
                hit.direction.as_str()
            )?;
        }
        Ok(())
    }
}

/// Union of the sections of an ensemble of orbits.
pub fn ensemble_section(
    ens: &EnsembleConfig,
    d: Damping,
    cfg: &IntegratorConfig,
    direction_filter: DirectionFilter,
) -> Result<EnsembleSection> {
    d.require_positive()?;
    cfg.validate()?;
    cfg.require_rk4()?;
    if ens.n_init == 0 {
        return Err(Error::domain("n_init must be at least 1"));
    }
    if !(ens.scale >= 0.0) || !ens.mean.is_finite() {
        return Err(Error::domain("ensemble mean must be finite and scale non-negative"));
    }
    let per_init: Vec<Result<Vec<SectionHit>>> = (0..ens.n_init)
        .into_par_iter()
        .map(|i| {
            let s0 = ensemble_initial_condition(ens, i as u64);
            section_run(&s0, d.value(), cfg, direction_filter, ens.max_hits_per_init).map(|r| r.0)
        })
        .collect();
    let mut out = EnsembleSection::default();
    for (init_id, r) in per_init.into_iter().enumerate() {
        match r {
            Ok(hits) => out.hits.extend(hits.into_iter().map(|hit| TaggedHit { init_id, hit })),
            Err(_) => out.failures += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinate {
    X,
    Y,
    Z,
}

impl Coordinate {
    pub fn of(self, s: &State3) -> f64 {
        match self {
            Coordinate::X => s.x,
            Coordinate::Y => s.y,
            Coordinate::Z => s.z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub b_lo: f64,
    pub b_hi: f64,
    pub n_b: usize,
    pub coordinate: Coordinate,
    /// Hits recorded per `b` after the transient.
    pub hits_per_b: usize,
    pub direction: DirectionFilter,
    pub policy: SeedPolicy,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            b_lo: 0.01,
            b_hi: 0.45,
            n_b: 600,
            coordinate: Coordinate::X,
            hits_per_b: 200,
            direction: DirectionFilter::Up,
            policy: SeedPolicy::Continue(State3::new(1.0, 1.0, -1.0)),
        }
    }
}

impl SweepConfig {
    /// Uniform grid from `b_lo` to `b_hi`, ascending.
    pub fn grid(&self) -> Vec<f64> {
        let step = (self.b_hi - self.b_lo) / (self.n_b - 1) as f64;
        (0..self.n_b)
            .map(|i| if i + 1 == self.n_b { self.b_hi } else { self.b_lo + i as f64 * step })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub b: f64,
    pub section_values: Vec<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    /// Number of clusters in `section_values` when values closer than `tol`
    /// are merged.
    pub fn distinct_values(&self, tol: f64) -> usize {
        let mut v = self.section_values.clone();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            return 0;
        }
        1 + v.windows(2).filter(|w| w[1] - w[0] > tol).count()
    }
}

/// Bifurcation diagram: for each `b` on the grid, the chosen coordinate at
/// each post-transient section hit. Rows are returned in ascending `b`.
pub fn bifurcation_sweep(sweep: &SweepConfig, cfg: &IntegratorConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    cfg.require_rk4()?;
    if !(sweep.b_lo > 0.0 && sweep.b_lo < sweep.b_hi && sweep.b_hi.is_finite()) {
        return Err(Error::domain(format!(
            "sweep range must satisfy 0 < b_lo < b_hi, got [{}, {}]",
            sweep.b_lo, sweep.b_hi
        )));
    }
    if sweep.n_b < 2 {
        return Err(Error::domain("n_b must be at least 2"));
    }
    let run = |b: f64, s0: State3| -> (SweepRow, Option<State3>) {
        match section_run(&s0, b, cfg, sweep.direction, Some(sweep.hits_per_b)) {
            Ok((hits, end)) => (
                SweepRow {
                    b,
                    section_values: hits.iter().map(|h| sweep.coordinate.of(&h.state)).collect(),
                    error: None,
                },
                Some(end),
            ),
            Err(e) => (SweepRow { b, section_values: Vec::new(), error: Some(e.to_string()) }, None),
        }
    };
    let grid = sweep.grid();
    let rows = match sweep.policy {
        SeedPolicy::Fixed(s0) => grid.par_iter().map(|&b| run(b, s0).0).collect(),
        SeedPolicy::Continue(mut s0) => {
            let mut rows: Vec<SweepRow> = grid
                .iter()
                .rev()
                .map(|&b| {
                    let (row, end) = run(b, s0);
                    if let Some(end) = end {
                        s0 = next_seed(end);
                    }
                    row
                })
                .collect();
            rows.reverse();
            rows
        }
    };
    Ok(rows)
}

/// `b,hit_index,value`; empty and failed rows are noted in comments.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: &mut W) -> io::Result<()> {
    writeln!(w, "b,hit_index,value")?;
    for r in rows {
        if let Some(e) = &r.error {
            writeln!(w, "# b={} error={e}", fmt_f64(r.b))?;
        } else if r.section_values.is_empty() {
            writeln!(w, "# b={} no crossings", fmt_f64(r.b))?;
        }
        for (i, v) in r.section_values.iter().enumerate() {
            writeln!(w, "{},{},{}", fmt_f64(r.b), i, fmt_f64(*v))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CycleVerdict {
    Periodic,
    Aperiodic,
    /// Too few returns, or the orbit has settled on an equilibrium.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitCycleReport {
    pub verdict: CycleVerdict,
    /// Mean return time of the recurring pattern.
    pub period: Option<f64>,
    /// Largest distance of the analysed samples from their centroid.
    pub amplitude: Option<f64>,
    /// Same-direction (UP) returns found.
    pub returns: usize,
    /// Number of UP returns per period.
    pub pattern_len: Option<usize>,
}

impl LimitCycleReport {
    pub fn is_periodic(&self) -> bool {
        self.verdict == CycleVerdict::Periodic
    }
}

/// Section hits of an already computed trajectory. Each crossing is
/// refined with an RK4 step from the preceding sample; when that step does
/// not reproduce the sign change (coarse sampling) the crossing falls back
/// to linear interpolation between samples.
pub fn trajectory_hits(traj: &Trajectory, d: Damping) -> Vec<SectionHit> {
    let b = d.value();
    let mut hits = Vec::new();
    let samples: Vec<(f64, State3)> = traj.iter().collect();
    for w in samples.windows(2) {
        let ((t0, s0), (t1, s1)) = (w[0], w[1]);
        let (g0, g1) = (surface(&s0, b), surface(&s1, b));
        let Some(dir) = crossing_direction(g0, g1) else { continue };
        let h = t1 - t0;
        let stepped = surface(&rk4_step(&s0, b, h), b);
        let (tau, state) = if crossing_direction(g0, stepped) == Some(dir) {
            refine(&s0, b, h)
        } else {
            let f = g0 / (g0 - g1);
            (f * h, s0 + (s1 - s0) * f)
        };
        hits.push(SectionHit { t: t0 + tau, state, direction: dir });
    }
    hits
}

/// Decides whether a post-transient trajectory sits on a periodic orbit,
/// by looking for a pattern of UP returns that repeats within
/// [`RECURRENCE_TOL`] over the second half of the returns.
pub fn detect_limit_cycle(traj: &Trajectory, d: Damping) -> Result<LimitCycleReport> {
    d.require_positive()?;
    let ups: Vec<SectionHit> =
        trajectory_hits(traj, d).into_iter().filter(|h| h.direction == Direction::Up).collect();
    let inconclusive = |returns: usize, amplitude: Option<f64>| LimitCycleReport {
        verdict: CycleVerdict::Inconclusive,
        period: None,
        amplitude,
        returns,
        pattern_len: None,
    };
    if ups.len() < MIN_RETURNS {
        return Ok(inconclusive(ups.len(), None));
    }
    let tail = &ups[ups.len() / 2..];
    let t_first = tail[0].t;
    let window: Vec<State3> = traj.iter().filter(|(t, _)| *t >= t_first).map(|(_, s)| s).collect();
    let n = window.len() as f64;
    let centroid = window.iter().fold(State3::ORIGIN, |acc, s| acc + *s) * (1.0 / n);
    let amplitude = window.iter().map(|s| (*s - centroid).norm()).fold(0.0, f64::max);
    if amplitude < RECURRENCE_TOL {
        return Ok(inconclusive(ups.len(), Some(amplitude)));
    }
    for p in 1..=MAX_PATTERN.min(tail.len() / 2) {
        let recurs = (0..tail.len() - p).all(|i| tail[i].state.max_abs_diff(&tail[i + p].state) <= RECURRENCE_TOL);
        if recurs {
            let gaps = tail.len() - p;
            let period = (0..gaps).map(|i| tail[i + p].t - tail[i].t).sum::<f64>() / gaps as f64;
            return Ok(LimitCycleReport {
                verdict: CycleVerdict::Periodic,
                period: Some(period),
                amplitude: Some(amplitude),
                returns: ups.len(),
                pattern_len: Some(p),
            });
        }
    }
    Ok(LimitCycleReport {
        verdict: CycleVerdict::Aperiodic,
        period: None,
        amplitude: Some(amplitude),
        returns: ups.len(),
        pattern_len: None,
    })
}

/// Convenience wrapper: integrate from `s0` and run [`detect_limit_cycle`].
pub fn limit_cycle_from(s0: &State3, d: Damping, cfg: &IntegratorConfig) -> Result<LimitCycleReport> {
    d.require_positive()?;
    let traj = crate::integrate::integrate(s0, d, cfg)?;
    detect_limit_cycle(&traj, d)
}
