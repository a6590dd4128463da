//! The Thomas vector field
//!
//! ```text
//! x' = sin(y) - b x
//! y' = sin(z) - b y
//! z' = sin(x) - b z
//! ```
//!
//! together with its Jacobian, divergence, the closed-form spectrum at the
//! diagonal equilibria and the two symmetries of the flow.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 3×3 matrix.
pub type Mat3 = [[f64; 3]; 3];

/// A point in phase space. Coordinates are radians and are never range-reduced.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State3 {
    pub const ORIGIN: State3 = State3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        State3 { x, y, z }
    }

    /// Like [`State3::new`] but rejects NaN and infinities.
    pub fn checked(x: f64, y: f64, z: f64) -> Result<Self> {
        let s = State3 { x, y, z };
        s.ensure_finite()?;
        Ok(s)
    }

    pub const fn diagonal(v: f64) -> Self {
        State3 { x: v, y: v, z: v }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        State3 { x: a[0], y: a[1], z: a[2] }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!("state {self:?} is not finite")))
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &State3) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

impl Add for State3 {
    type Output = State3;
    fn add(self, o: State3) -> State3 {
        State3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for State3 {
    type Output = State3;
    fn sub(self, o: State3) -> State3 {
        State3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for State3 {
    type Output = State3;
    fn mul(self, k: f64) -> State3 {
        State3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for State3 {
    type Output = State3;
    fn neg(self) -> State3 {
        State3::new(-self.x, -self.y, -self.z)
    }
}

/// The damping (control) parameter `b`.
///
/// Construction only checks `b ≥ 0`; operations that need strictly positive
/// damping check for that themselves.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Damping(f64);

impl Damping {
    pub fn new(b: f64) -> Result<Self> {
        if !b.is_finite() || b < 0.0 {
            return Err(Error::domain(format!(
                "damping b must be finite and non-negative, got {b}"
            )));
        }
        Ok(Damping(b))
    }

    /// Damping that must be strictly positive.
    pub fn positive(b: f64) -> Result<Self> {
        let d = Damping::new(b)?;
        d.require_positive()?;
        Ok(d)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub(crate) fn require_positive(self) -> Result<()> {
        if self.0 > 0.0 {
            Ok(())
        } else {
            Err(Error::domain(
                "this operation needs b > 0; the undamped case b = 0 is handled by the walk module",
            ))
        }
    }
}

/// Spectrum of the circulant Jacobian at a diagonal equilibrium: one real
/// eigenvalue and a conjugate pair `lambda12_re ± lambda12_im·i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenTriple {
    pub lambda0: f64,
    pub lambda12_re: f64,
    /// Always `≥ 0`.
    pub lambda12_im: f64,
}

impl EigenTriple {
    /// λ₀ + 2·Re λ₁,₂, i.e. the trace of the Jacobian.
    pub fn real_part_sum(&self) -> f64 {
        self.lambda0 + 2.0 * self.lambda12_re
    }

    pub fn max_real_part(&self) -> f64 {
        self.lambda0.max(self.lambda12_re)
    }

    /// The three eigenvalues as `(re, im)` pairs: λ₀, then `+i`, then `−i`.
    pub fn as_complex(&self) -> [(f64, f64); 3] {
        [
            (self.lambda0, 0.0),
            (self.lambda12_re, self.lambda12_im),
            (self.lambda12_re, -self.lambda12_im),
        ]
    }
}

/// Right-hand side without input validation. Used in every integrator loop.
#[inline(always)]
pub(crate) fn rhs(s: &State3, b: f64) -> State3 {
    State3::new(s.y.sin() - b * s.x, s.z.sin() - b * s.y, s.x.sin() - b * s.z)
}

#[inline(always)]
pub(crate) fn jacobian_raw(s: &State3, b: f64) -> Mat3 {
    [
        [-b, s.y.cos(), 0.0],
        [0.0, -b, s.z.cos()],
        [s.x.cos(), 0.0, -b],
    ]
}

/// Velocity `(sin y − b x, sin z − b y, sin x − b z)`.
pub fn field(s: &State3, d: Damping) -> Result<State3> {
    s.ensure_finite()?;
    Ok(rhs(s, d.value()))
}

pub fn jacobian(s: &State3, d: Damping) -> Result<Mat3> {
    s.ensure_finite()?;
    Ok(jacobian_raw(s, d.value()))
}

/// Closed-form eigenvalues of the circulant matrix
/// `[[-b, c, 0], [0, -b, c], [c, 0, -b]]`, where `c = cos x*`.
pub fn circulant_eigenvalues(c: f64, d: Damping) -> Result<EigenTriple> {
    if !c.is_finite() || c.abs() > 1.0 {
        return Err(Error::domain(format!("cosine value must lie in [-1, 1], got {c}")));
    }
    let b = d.value();
    Ok(EigenTriple {
        lambda0: c - b,
        lambda12_re: -(b + 0.5 * c),
        lambda12_im: 0.5 * 3f64.sqrt() * c.abs(),
    })
}

/// Phase-space divergence; the same at every point.
pub fn divergence(d: Damping) -> f64 {
    -3.0 * d.value()
}

/// `(x, y, z) → (y, z, x)`.
pub fn cyclic_permute(s: &State3) -> State3 {
    State3::new(s.y, s.z, s.x)
}

/// `(x, y, z) → (−x, −y, −z)`.
pub fn reflect(s: &State3) -> State3 {
    -*s
}
