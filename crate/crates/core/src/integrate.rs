//! Time integration of the flow and of its tangent (variational) equation.
//!
//! The reference method is classical fixed-step RK4, which is deterministic,
//! commutes with the symmetries of the field, and couples cleanly to the
//! tangent flow. A Dormand–Prince 5(4) adaptive scheme is available for
//! plain trajectories.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::{jacobian_raw, rhs, Damping, Mat3, State3};
use crate::numeric::qr3;

/// Largest admissible fixed step.
pub const MAX_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Fixed step (RK4) or initial step (RK45).
    pub step_h: f64,
    pub t_end: f64,
    /// Time integrated but not recorded.
    pub transient_skip: f64,
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Record every n-th step; 1 keeps every step.
    pub record_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step_h: 0.01,
            t_end: 5000.0,
            transient_skip: 500.0,
            method: Method::Rk4Fixed,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            record_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step_h: f64, t_end: f64, transient_skip: f64) -> Self {
        IntegratorConfig { step_h, t_end, transient_skip, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let IntegratorConfig { step_h, t_end, transient_skip, .. } = *self;
        if !(step_h > 0.0 && step_h <= MAX_STEP) {
            return Err(Error::domain(format!("step_h must lie in (0, {MAX_STEP}], got {step_h}")));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::domain(format!("t_end must be positive, got {t_end}")));
        }
        if !(transient_skip >= 0.0 && transient_skip < t_end) {
            return Err(Error::domain(format!(
                "transient_skip must lie in [0, t_end), got {transient_skip}"
            )));
        }
        if self.method == Method::Rk45Adaptive && !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::domain("abs_tol and rel_tol must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::domain("record_every must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn require_rk4(&self) -> Result<()> {
        if self.method != Method::Rk4Fixed {
            return Err(Error::domain("this analysis requires the fixed-step RK4 method"));
        }
        Ok(())
    }

    /// Total number of fixed steps.
    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.step_h).round() as u64
    }

    /// Number of fixed steps inside the transient.
    pub fn skip_steps(&self) -> u64 {
        (self.transient_skip / self.step_h).round() as u64
    }
}

/// Time-stamped states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<State3>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<State3>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::domain("times and states differ in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("times must be strictly increasing"));
        }
        if let Some(s) = states.iter().find(|s| !s.is_finite()) {
            return Err(Error::domain(format!("non-finite state {s:?}")));
        }
        Ok(Trajectory { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[State3] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, State3)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, State3)> + '_ {
        self.times.iter().copied().zip(self.states.iter().copied())
    }

    /// Writes the `t,x,y,z` table, one row per sample.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "t,x,y,z")?;
        for (t, s) in self.iter() {
            writeln!(w, "{},{},{},{}", fmt_f64(t), fmt_f64(s.x), fmt_f64(s.y), fmt_f64(s.z))?;
        }
        Ok(())
    }
}

/// One classical RK4 step of size `h`.
#[inline]
pub fn rk4_step(s: &State3, b: f64, h: f64) -> State3 {
    let k1 = rhs(s, b);
    let k2 = rhs(&(*s + k1 * (0.5 * h)), b);
    let k3 = rhs(&(*s + k2 * (0.5 * h)), b);
    let k4 = rhs(&(*s + k3 * h), b);
    *s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn check_finite(s: &State3, t: f64) -> Result<()> {
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::Integration { t, reason: format!("state became non-finite: {s:?}") })
    }
}

/// Advances `s0` by `n` fixed RK4 steps.
pub fn advance(s0: &State3, d: Damping, h: f64, n: u64) -> Result<State3> {
    s0.ensure_finite()?;
    let b = d.value();
    let mut s = *s0;
    for i in 0..n {
        s = rk4_step(&s, b, h);
        check_finite(&s, (i + 1) as f64 * h)?;
    }
    Ok(s)
}

/// Final state at `cfg.t_end` without recording anything.
pub fn propagate(s0: &State3, d: Damping, cfg: &IntegratorConfig) -> Result<State3> {
    cfg.validate()?;
    cfg.require_rk4()?;
    advance(s0, d, cfg.step_h, cfg.n_steps())
}

/// Integrates the flow and records the trajectory on `[transient_skip, t_end]`.
pub fn integrate(s0: &State3, d: Damping, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    s0.ensure_finite()?;
    match cfg.method {
        Method::Rk4Fixed => Ok(integrate_rk4(s0, d.value(), cfg)?),
        Method::Rk45Adaptive => Ok(integrate_dopri(s0, d.value(), cfg)?),
    }
}

fn integrate_rk4(s0: &State3, b: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let h = cfg.step_h;
    let n = cfg.n_steps();
    let skip = cfg.skip_steps();
    let every = cfg.record_every as u64;
    let cap = ((n - skip.min(n)) / every + 1) as usize;
    let mut times = Vec::with_capacity(cap);
    let mut states = Vec::with_capacity(cap);
    let mut s = *s0;
    for i in 0..=n {
        if i >= skip && (i - skip) % every == 0 {
            times.push(i as f64 * h);
            states.push(s);
        }
        if i < n {
            s = rk4_step(&s, b, h);
            check_finite(&s, (i + 1) as f64 * h)?;
        }
    }
    Ok(Trajectory { times, states })
}

// Dormand–Prince 5(4) tableau; the field is autonomous so the c_i nodes are unused.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (fifth minus fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn integrate_dopri(s0: &State3, b: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut t = 0.0;
    let mut s = *s0;
    let mut h = cfg.step_h;
    let mut k1 = rhs(&s, b);
    let mut accepted = 0usize;
    let mut record = |t: f64, s: State3, accepted: usize, force: bool| {
        if t >= cfg.transient_skip && (force || accepted % cfg.record_every == 0) {
            if times.last().is_none_or(|&last| t > last) {
                times.push(t);
                states.push(s);
            }
        }
    };
    record(t, s, 0, false);
    while t < cfg.t_end {
        let last_step = t + h >= cfg.t_end;
        if last_step {
            h = cfg.t_end - t;
        }
        let k2 = rhs(&(s + k1 * (h * A21)), b);
        let k3 = rhs(&(s + (k1 * A31 + k2 * A32) * h), b);
        let k4 = rhs(&(s + (k1 * A41 + k2 * A42 + k3 * A43) * h), b);
        let k5 = rhs(&(s + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h), b);
        let k6 = rhs(&(s + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h), b);
        let next = s + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
        let k7 = rhs(&next, b);
        let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let scale = |e: f64, a: f64, c: f64| e / (cfg.abs_tol + cfg.rel_tol * a.abs().max(c.abs()));
        let err_norm = scale(err.x, s.x, next.x)
            .abs()
            .max(scale(err.y, s.y, next.y).abs())
            .max(scale(err.z, s.z, next.z).abs());
        if !err_norm.is_finite() {
            return Err(Error::Integration { t, reason: "non-finite error estimate".into() });
        }
        if err_norm <= 1.0 {
            t = if last_step { cfg.t_end } else { t + h };
            s = next;
            check_finite(&s, t)?;
            k1 = k7;
            accepted += 1;
            record(t, s, accepted, last_step);
        }
        let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(MAX_STEP);
        if h < 1e-14 {
            return Err(Error::Integration { t, reason: "step size underflow".into() });
        }
    }
    Ok(Trajectory { times, states })
}

/// Product `J(s)·Y` exploiting the sparsity of the Jacobian.
#[inline(always)]
fn jac_times(s: &State3, b: f64, y: &Mat3) -> Mat3 {
    let j = jacobian_raw(s, b);
    let mut out = [[0.0; 3]; 3];
    for c in 0..3 {
        out[0][c] = j[0][0] * y[0][c] + j[0][1] * y[1][c];
        out[1][c] = j[1][1] * y[1][c] + j[1][2] * y[2][c];
        out[2][c] = j[2][0] * y[0][c] + j[2][2] * y[2][c];
    }
    out
}

#[inline(always)]
fn axpy(y: &Mat3, k: &Mat3, a: f64) -> Mat3 {
    let mut out = *y;
    for i in 0..3 {
        for c in 0..3 {
            out[i][c] += a * k[i][c];
        }
    }
    out
}

/// One RK4 step of the coupled system `s' = f(s)`, `Y' = J(s)·Y`, with the
/// Jacobian evaluated at every internal stage.
#[inline]
pub fn rk4_tangent_step(s: &State3, y: &Mat3, b: f64, h: f64) -> (State3, Mat3) {
    let k1 = rhs(s, b);
    let l1 = jac_times(s, b, y);
    let s2 = *s + k1 * (0.5 * h);
    let y2 = axpy(y, &l1, 0.5 * h);
    let k2 = rhs(&s2, b);
    let l2 = jac_times(&s2, b, &y2);
    let s3 = *s + k2 * (0.5 * h);
    let y3 = axpy(y, &l2, 0.5 * h);
    let k3 = rhs(&s3, b);
    let l3 = jac_times(&s3, b, &y3);
    let s4 = *s + k3 * h;
    let y4 = axpy(y, &l3, h);
    let k4 = rhs(&s4, b);
    let l4 = jac_times(&s4, b, &y4);
    let s_next = *s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    let mut y_next = *y;
    for i in 0..3 {
        for c in 0..3 {
            y_next[i][c] += h / 6.0 * (l1[i][c] + 2.0 * l2[i][c] + 2.0 * l3[i][c] + l4[i][c]);
        }
    }
    (s_next, y_next)
}

/// Emitted at every QR reorthonormalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentSample {
    pub t: f64,
    pub state: State3,
    /// `log |R_ii|` of this factorization, in QR channel order.
    pub log_r: [f64; 3],
    /// Running sum of `log_r` since the end of the transient.
    pub log_sum: [f64; 3],
}

const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Co-integrates the state and a tangent frame started at the identity
/// once the transient is over, reorthonormalizing every `renorm_every`
/// steps and handing each sample to `sink`. The last sample always lands
/// on `t_end`. Returns the final state.
pub fn tangent_flow<F>(
    s0: &State3,
    d: Damping,
    cfg: &IntegratorConfig,
    renorm_every: usize,
    mut sink: F,
) -> Result<State3>
where
    F: FnMut(&TangentSample),
{
    cfg.validate()?;
    cfg.require_rk4()?;
    s0.ensure_finite()?;
    if renorm_every == 0 {
        return Err(Error::domain("renorm_every must be at least 1"));
    }
    let b = d.value();
    let h = cfg.step_h;
    let n = cfg.n_steps();
    let skip = cfg.skip_steps();
    let mut s = advance(s0, d, h, skip)?;
    let mut y = IDENTITY;
    let mut log_sum = [0.0; 3];
    let mut since = 0usize;
    for i in skip..n {
        let (s_next, y_next) = rk4_tangent_step(&s, &y, b, h);
        let t = (i + 1) as f64 * h;
        check_finite(&s_next, t)?;
        s = s_next;
        y = y_next;
        since += 1;
        if since == renorm_every || i + 1 == n {
            let (q, diag) = qr3(&y).map_err(|(index, value)| Error::DegenerateR { t, index, value })?;
            let log_r = [diag[0].ln(), diag[1].ln(), diag[2].ln()];
            for k in 0..3 {
                log_sum[k] += log_r[k];
            }
            sink(&TangentSample { t, state: s, log_r, log_sum });
            y = q;
            since = 0;
        }
    }
    Ok(s)
}

/// Collecting form of [`tangent_flow`].
pub fn integrate_with_tangent(
    s0: &State3,
    d: Damping,
    cfg: &IntegratorConfig,
    renorm_every: usize,
) -> Result<Vec<TangentSample>> {
    let mut out = Vec::new();
    tangent_flow(s0, d, cfg, renorm_every, |sample| out.push(*sample))?;
    Ok(out)
}
