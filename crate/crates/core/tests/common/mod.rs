#![allow(dead_code)]

use nalgebra::{Complex, Matrix3};

/// Roots of `sin x − b x` on `[−x_max, x_max]` from sign changes on a
/// uniform grid of spacing `dx` (which contains 0), refined by bisection.
pub fn dense_scan_roots(b: f64, x_max: f64, dx: f64) -> Vec<f64> {
    let h = |x: f64| x.sin() - b * x;
    let n = (x_max / dx).floor() as i64;
    let mut roots = Vec::new();
    let mut prev_x = -(n as f64) * dx;
    let mut prev_h = h(prev_x);
    if prev_h == 0.0 {
        roots.push(prev_x);
    }
    for i in (-n + 1)..=n {
        let x = i as f64 * dx;
        let hx = h(x);
        if hx == 0.0 {
            roots.push(x);
        } else if prev_h != 0.0 && (prev_h < 0.0) != (hx < 0.0) {
            let (mut lo, mut hi) = (prev_x, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (h(mid) < 0.0) == (prev_h < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_h = hx;
    }
    roots
}

/// Eigenvalues of a real 3×3 matrix from nalgebra's Schur decomposition,
/// sorted by (real, imaginary) part.
pub fn eigen_oracle(m: [[f64; 3]; 3]) -> Vec<Complex<f64>> {
    let mat = Matrix3::from_fn(|i, j| m[i][j]);
    let mut ev: Vec<Complex<f64>> = mat.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// The closed-form triple expanded to three complex numbers with the same
/// ordering as [`eigen_oracle`].
pub fn sorted_triple(lambda0: f64, re: f64, im: f64) -> Vec<Complex<f64>> {
    let mut ev = vec![Complex::new(lambda0, 0.0), Complex::new(re, -im), Complex::new(re, im)];
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// Largest distance between matched eigenvalues (greedy nearest matching).
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    let mut used = [false; 3];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// The matrix with diagonal `−b` and cyclic off-diagonal `c`.
pub fn circulant(c: f64, b: f64) -> [[f64; 3]; 3] {
    [[-b, c, 0.0], [0.0, -b, c], [c, 0.0, -b]]
}

/// Root of `tan x = x` in `(2jπ, 2jπ + π/2)` by plain bisection on
/// `x cos x − sin x`.
pub fn tan_fixed_point(j: u32) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let f = |x: f64| x * x.cos() - x.sin();
    let (mut lo, mut hi) = (2.0 * PI * j as f64 + 1e-9, 2.0 * PI * j as f64 + FRAC_PI_2);
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
