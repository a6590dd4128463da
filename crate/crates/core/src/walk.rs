//! The undamped system (`b = 0`): the lattice of equilibria at integer
//! multiples of π, their exact spectra, and statistics of the chaotic walk
//! that wanders between them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::integrate::{advance, Trajectory};
use crate::model::{Damping, EigenTriple, Mat3, State3};
use crate::numeric::CompensatedSum;

/// Shortest trajectory accepted by the speed statistics.
pub const MIN_DURATION: f64 = 1e4;

/// Fewest MSD windows per lag before the estimate is deemed unreliable.
pub const MIN_WINDOWS: usize = 5;

/// Equilibrium `(πn, πm, πk)` of the undamped flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint {
    pub n: i64,
    pub m: i64,
    pub k: i64,
}

fn parity(i: i64) -> i8 {
    if i.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

impl LatticePoint {
    pub fn new(n: i64, m: i64, k: i64) -> Self {
        LatticePoint { n, m, k }
    }

    pub fn state(&self) -> State3 {
        use std::f64::consts::PI;
        State3::new(PI * self.n as f64, PI * self.m as f64, PI * self.k as f64)
    }

    /// `cos` of each coordinate, exactly.
    pub fn parity_signs(&self) -> [i8; 3] {
        [parity(self.n), parity(self.m), parity(self.k)]
    }

    /// Jacobian of the undamped field, built from the exact cosines.
    pub fn jacobian(&self) -> Mat3 {
        let [cx, cy, cz] = self.parity_signs().map(f64::from);
        [[0.0, cy, 0.0], [0.0, 0.0, cz], [cx, 0.0, 0.0]]
    }
}

/// Eigenvalues at a lattice point: the cube roots of `±1`, the sign being the
/// product of the three cosines. Every lattice point is unstable.
pub fn lattice_eigenvalues(p: LatticePoint) -> EigenTriple {
    let sign: f64 = p.parity_signs().iter().map(|&s| f64::from(s)).product();
    EigenTriple { lambda0: sign, lambda12_re: -0.5 * sign, lambda12_im: 3f64.sqrt() / 2.0 }
}

/// Time averages along a `b = 0` orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedStats {
    /// `sqrt(<sin²x> + <sin²y> + <sin²z>)`, the root-mean-square speed.
    pub mean_speed: f64,
    /// `<|v|>`, the plain time average of the speed.
    pub mean_norm: f64,
    /// `<sin²y>, <sin²z>, <sin²x>`, i.e. `<ẋ²>, <ẏ²>, <ż²>`.
    pub sin2_means: [f64; 3],
    pub max_speed: f64,
    pub duration: f64,
}

/// Trapezoid-weighted time averages of several sampled quantities.
fn time_averages<const N: usize>(traj: &Trajectory, f: impl Fn(&State3) -> [f64; N]) -> [f64; N] {
    let times = traj.times();
    let states = traj.states();
    let mut sums = [CompensatedSum::new(); N];
    let mut prev = f(&states[0]);
    for i in 1..states.len() {
        let cur = f(&states[i]);
        let w = 0.5 * (times[i] - times[i - 1]);
        for j in 0..N {
            sums[j].add(w * (prev[j] + cur[j]));
        }
        prev = cur;
    }
    let dur = traj.duration();
    sums.map(|s| s.value() / dur)
}

/// Speed statistics of an undamped trajectory lasting at least
/// [`MIN_DURATION`].
pub fn speed_stats(traj: &Trajectory) -> Result<SpeedStats> {
    let duration = traj.duration();
    if traj.len() < 2 || duration < MIN_DURATION {
        return Err(Error::Inconclusive(format!(
            "trajectory lasts {duration}, speed statistics need at least {MIN_DURATION}"
        )));
    }
    let [sx, sy, sz, norm] = time_averages(traj, |s| {
        let v = [s.y.sin().powi(2), s.z.sin().powi(2), s.x.sin().powi(2)];
        [v[0], v[1], v[2], (v[0] + v[1] + v[2]).sqrt()]
    });
    let max_speed = traj
        .states()
        .iter()
        .map(|s| (s.y.sin().powi(2) + s.z.sin().powi(2) + s.x.sin().powi(2)).sqrt())
        .fold(0.0, f64::max);
    Ok(SpeedStats {
        mean_speed: (sx + sy + sz).sqrt(),
        mean_norm: norm,
        sin2_means: [sx, sy, sz],
        max_speed,
        duration,
    })
}

/// Root-mean-square speed of an undamped trajectory.
pub fn mean_speed(traj: &Trajectory) -> Result<f64> {
    speed_stats(traj).map(|s| s.mean_speed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkStats {
    pub mean_speed: f64,
    pub mean_norm: f64,
    pub diffusion_estimate: f64,
    /// `(lag, msd)` pairs in the order requested.
    pub msd: Vec<(f64, f64)>,
}

fn uniform_step(traj: &Trajectory) -> Result<f64> {
    let t = traj.times();
    if t.len() < 2 {
        return Err(Error::Inconclusive("trajectory has fewer than two samples".into()));
    }
    let dt = t[1] - t[0];
    let uneven = t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0));
    if uneven {
        return Err(Error::domain("mean-squared displacement needs uniformly spaced samples"));
    }
    Ok(dt)
}

/// `n` lags spaced logarithmically from `lo` to `hi`.
pub fn log_lags(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

/// Mean-squared displacement at each lag, averaged over windows whose
/// starts are spaced half a lag apart.
pub fn msd_curve(traj: &Trajectory, lags: &[f64]) -> Result<Vec<(f64, f64)>> {
    let dt = uniform_step(traj)?;
    let limit = traj.duration() / 4.0;
    let states = traj.states();
    lags.iter()
        .map(|&lag| {
            if !(lag >= 0.0) || lag > limit * (1.0 + 1e-12) {
                return Err(Error::domain(format!("lag {lag} must lie in [0, {limit}] (a quarter of the run)")));
            }
            let steps = (lag / dt).round() as usize;
            if steps == 0 {
                return Ok((lag, 0.0));
            }
            let stride = (steps / 2).max(1);
            let starts: Vec<usize> = (0..states.len() - steps).step_by(stride).collect();
            if starts.len() < MIN_WINDOWS {
                return Err(Error::Inconclusive(format!("only {} windows for lag {lag}", starts.len())));
            }
            let sum: CompensatedSum = starts.iter().map(|&i| (states[i + steps] - states[i]).norm_sq()).collect();
            Ok((lag, sum.value() / starts.len() as f64))
        })
        .collect()
}

/// Least-squares slope of MSD against lag over the top decade of lags,
/// divided by 6.
fn diffusion_from(curve: &[(f64, f64)]) -> Result<f64> {
    let top = curve.iter().map(|p| p.0).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = curve.iter().copied().filter(|p| p.0 >= top / 10.0 && p.0 > 0.0).collect();
    if pts.len() < 2 {
        return Err(Error::Inconclusive("fewer than two lags in the fitted decade".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Inconclusive("fitted lags are all equal".into()));
    }
    Ok((sxy / sxx / 6.0).max(0.0))
}

/// Speed and displacement statistics of an undamped walk.
pub fn msd(traj: &Trajectory, lags: &[f64]) -> Result<WalkStats> {
    let speed = speed_stats(traj)?;
    let curve = msd_curve(traj, lags)?;
    let diffusion_estimate = diffusion_from(&curve)?;
    Ok(WalkStats { mean_speed: speed.mean_speed, mean_norm: speed.mean_norm, diffusion_estimate, msd: curve })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityConfig {
    pub n: usize,
    pub cells_per_axis: usize,
    pub t_end: f64,
    pub step_h: f64,
    pub seed: u64,
    pub b: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig { n: 10_000, cells_per_axis: 8, t_end: 1_000.0, step_h: 0.02, seed: 0, b: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub config: DensityConfig,
    /// Largest `|count_T − count_0| / (n / cells)` over all cells.
    pub max_cell_drift: f64,
    /// Level the drift stays under with probability 0.999 when both
    /// snapshots are independent uniform samples.
    pub noise_floor: f64,
    pub low_statistics: bool,
    pub exceeds_noise: bool,
    pub counts_initial: Vec<u32>,
    pub counts_final: Vec<u32>,
}

fn cell_index(s: &State3, k: usize) -> usize {
    use std::f64::consts::TAU;
    let bin = |v: f64| ((v.rem_euclid(TAU) / TAU * k as f64) as usize).min(k - 1);
    (bin(s.x) * k + bin(s.y)) * k + bin(s.z)
}

/// Initial condition `index`, uniform in the periodic cell `[0, 2π)³`.
pub fn uniform_cell_sample(seed: u64, index: u64) -> State3 {
    use std::f64::consts::TAU;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    State3::new(rng.random::<f64>() * TAU, rng.random::<f64>() * TAU, rng.random::<f64>() * TAU)
}

/// Compares cell occupancy of a uniform cloud before and after evolving it
/// for `t_end`. At `b = 0` the flow preserves volume and the uniform density
/// on the folded cell, so the drift should stay within sampling noise.
pub fn density_check(cfg: &DensityConfig) -> Result<DensityReport> {
    let d = Damping::new(cfg.b)?;
    if cfg.n == 0 || cfg.cells_per_axis == 0 {
        return Err(Error::domain("n and cells_per_axis must be positive"));
    }
    if !(cfg.t_end >= 0.0 && cfg.t_end.is_finite()) || !(cfg.step_h > 0.0) {
        return Err(Error::domain("t_end must be non-negative and step_h positive"));
    }
    let k = cfg.cells_per_axis;
    let cells = k * k * k;
    let steps = (cfg.t_end / cfg.step_h).round() as u64;
    let pairs: Vec<(usize, usize)> = (0..cfg.n as u64)
        .into_par_iter()
        .map(|i| {
            let s0 = uniform_cell_sample(cfg.seed, i);
            let s1 = advance(&s0, d, cfg.step_h, steps)?;
            Ok((cell_index(&s0, k), cell_index(&s1, k)))
        })
        .collect::<Result<_>>()?;
    let mut counts_initial = vec![0u32; cells];
    let mut counts_final = vec![0u32; cells];
    for (a, b) in pairs {
        counts_initial[a] += 1;
        counts_final[b] += 1;
    }
    let expected = cfg.n as f64 / cells as f64;
    let max_cell_drift = counts_initial
        .iter()
        .zip(&counts_final)
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).abs() / expected)
        .fold(0.0, f64::max);
    let noise_floor = noise_floor(cfg.n, cells);
    Ok(DensityReport {
        config: *cfg,
        max_cell_drift,
        noise_floor,
        low_statistics: cfg.n < 1000 || expected < 10.0,
        exceeds_noise: max_cell_drift > noise_floor,
        counts_initial,
        counts_final,
    })
}

/// Two-snapshot binomial noise level for the maximum relative cell drift,
/// with a Bonferroni correction over all cells at family-wise level 1e-3.
pub fn noise_floor(n: usize, cells: usize) -> f64 {
    let alpha = 1e-3 / (2.0 * cells as f64);
    let z = Normal::standard().inverse_cdf(1.0 - alpha);
    z * (2.0 * cells as f64 / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate, IntegratorConfig};
    use crate::model::jacobian;

    #[test]
    fn lattice_spectrum_examples() {
        let e = lattice_eigenvalues(LatticePoint::new(0, 0, 0));
        assert_eq!((e.lambda0, e.lambda12_re), (1.0, -0.5));
        assert_eq!(e.lambda12_im, 3f64.sqrt() / 2.0);
        let e = lattice_eigenvalues(LatticePoint::new(1, 0, 0));
        assert_eq!((e.lambda0, e.lambda12_re), (-1.0, 0.5));
        for n in -3..3 {
            for m in -3..3 {
                for k in -3..3 {
                    assert!(lattice_eigenvalues(LatticePoint::new(n, m, k)).max_real_part() > 0.0);
                }
            }
        }
    }

    #[test]
    fn lattice_jacobian_matches_float_jacobian() {
        let p = LatticePoint::new(3, -2, 1);
        let exact = p.jacobian();
        let float = jacobian(&p.state(), Damping::new(0.0).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((exact[i][j] - float[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn speed_needs_long_runs() {
        let cfg = IntegratorConfig::rk4(0.1, 100.0, 0.0);
        let t = integrate(&State3::new(0.1, 0.2, 0.3), Damping::new(0.0).unwrap(), &cfg).unwrap();
        assert!(matches!(mean_speed(&t), Err(Error::Inconclusive(_))));
    }

    #[test]
    fn pinned_walker_has_zero_speed() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 200.0).collect();
        let states = vec![LatticePoint::new(0, 0, 0).state(); times.len()];
        let t = Trajectory::new(times, states).unwrap();
        assert_eq!(mean_speed(&t).unwrap(), 0.0);
        let c = msd_curve(&t, &[0.0, 400.0, 2000.0]).unwrap();
        assert!(c.iter().all(|p| p.1 == 0.0));
    }

    #[test]
    fn msd_rejects_long_lags() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        let t = Trajectory::new(times, vec![State3::ORIGIN; 101]).unwrap();
        assert!(matches!(msd_curve(&t, &[30.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn linear_drift_has_known_msd() {
        // s(t) = (t, 0, 0) gives msd = lag²
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.5).collect();
        let states = times.iter().map(|&t| State3::new(t, 0.0, 0.0)).collect();
        let t = Trajectory::new(times, states).unwrap();
        for (lag, v) in msd_curve(&t, &[1.0, 10.0, 100.0]).unwrap() {
            assert!((v - lag * lag).abs() < 1e-9);
        }
    }

    #[test]
    fn log_lags_endpoints() {
        let l = log_lags(1.0, 1000.0, 4);
        assert_eq!(l.len(), 4);
        assert!((l[1] - 10.0).abs() < 1e-9 && (l[3] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn cells_cover_the_torus() {
        assert_eq!(cell_index(&State3::ORIGIN, 8), 0);
        assert_eq!(cell_index(&State3::diagonal(-1e-9), 8), 511);
        assert_eq!(cell_index(&State3::diagonal(std::f64::consts::TAU), 8), 0);
    }

    #[test]
    fn density_small_ensemble_flags_low_statistics() {
        let cfg = DensityConfig { n: 100, t_end: 10.0, step_h: 0.05, ..Default::default() };
        let r = density_check(&cfg).unwrap();
        assert!(r.low_statistics);
        assert_eq!(r.counts_initial.iter().sum::<u32>(), 100);
        assert_eq!(r.counts_final.iter().sum::<u32>(), 100);
    }

    #[test]
    fn noise_floor_shrinks_with_samples() {
        assert!(noise_floor(100_000, 512) < noise_floor(10_000, 512));
        let f = noise_floor(10_000, 512);
        assert!(f > 1.0 && f < 2.0, "{f}");
    }
}
