//! Small numerical helpers: compensated summation, a 3×3 QR factorization
//! and scalar bracketing.

use crate::model::Mat3;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(mut self, other: CompensatedSum) -> CompensatedSum {
        self.add(other.sum);
        self.add(other.comp);
        self
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Modified Gram-Schmidt QR of the *columns* of `a`.
///
/// Returns `Q` and the diagonal of `R`, which is positive by construction.
/// A column whose orthogonalized norm falls below `1e-300` is reported as
/// `Err((column, norm))`.
pub fn qr3(a: &Mat3) -> Result<(Mat3, [f64; 3]), (usize, f64)> {
    let mut q = [[0.0; 3]; 3];
    let mut diag = [0.0; 3];
    let mut cols: [[f64; 3]; 3] = [[0.0; 3]; 3];
    for (j, col) in cols.iter_mut().enumerate() {
        for i in 0..3 {
            col[i] = a[i][j];
        }
    }
    for j in 0..3 {
        let mut v = cols[j];
        for k in 0..j {
            let qk = [q[0][k], q[1][k], q[2][k]];
            let r = qk[0] * v[0] + qk[1] * v[1] + qk[2] * v[2];
            for i in 0..3 {
                v[i] -= r * qk[i];
            }
        }
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm >= 1e-300) {
            return Err((j, norm));
        }
        diag[j] = norm;
        for i in 0..3 {
            q[i][j] = v[i] / norm;
        }
    }
    Ok((q, diag))
}

/// Bisection for a sign change of `f` on `[lo, hi]`, run until the bracket
/// is narrower than `x_tol` (or cannot be split further in floating point).
///
/// The caller guarantees `f(lo)` and `f(hi)` differ in sign (or one is zero).
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    while hi - lo > x_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One guarded Newton step: accepted only if it stays inside `[lo, hi]`
/// and does not increase `|f|`.
pub fn newton_polish<F, D>(f: F, df: D, x: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let fx = f(x);
    let d = df(x);
    if fx == 0.0 || d == 0.0 || !d.is_finite() {
        return x;
    }
    let cand = x - fx / d;
    if cand >= lo && cand <= hi && f(cand).abs() <= fx.abs() {
        cand
    } else {
        x
    }
}
