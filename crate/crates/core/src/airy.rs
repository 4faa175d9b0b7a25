//! The Airy function of the first kind `v(ξ) = Ai(ξ)` for complex argument,
//! in plain and log-scaled form, and its zeros on the negative axis.
//!
//! Three regimes:
//!
//! * `|ξ| ≤ 3.5`: Maclaurin series.
//! * `|ξ| ≥ 9`: asymptotic expansion with optimal truncation; for
//!   `|arg ξ| > 2π/3` the value is routed through the connection formula
//!   `v(ξ) = e^{-πi/3} v(ωξ) + e^{πi/3} v(ω̄ξ)`, `ω = e^{2πi/3}`.
//! * in between: Taylor steps of `y'' = ξ y` along the ray, started
//!   from whichever end is stable for that direction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_3, PI};
use thiserror::Error;

const AI_0: f64 = 0.355_028_053_887_817_24;
const AI_PRIME_0: f64 = -0.258_819_403_792_806_8;
const SERIES_RADIUS: f64 = 3.5;
const ASYMPTOTIC_RADIUS: f64 = 9.0;
const MAX_STEP: f64 = 0.5;
/// Rays within this angle of the positive axis are integrated inward.
const INWARD_SECTOR: f64 = FRAC_PI_3 + 0.1;
const MAX_EXP: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AiryError {
    #[error("Overflow: exponent {exponent:.3} out of range at ξ = {xi}; use the log-scaled evaluation")]
    Overflow { xi: Complex64, exponent: f64 },
    #[error("ConvergenceFailure: Newton did not converge for zero index {k}")]
    ConvergenceFailure { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    /// Taylor continuation of the differential equation across the annulus.
    Continuation,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AirySample {
    pub xi: Complex64,
    pub value: Complex64,
    pub method: Method,
}

/// `ln |v|` and `arg v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogValue {
    pub log_modulus: f64,
    pub phase: f64,
}

/// `v = value·e^{scale}`, `v' = deriv·e^{scale}`.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    value: Complex64,
    deriv: Complex64,
    scale: Complex64,
}

impl Scaled {
    fn plain(value: Complex64, deriv: Complex64) -> Self {
        Scaled { value, deriv, scale: Complex64::new(0.0, 0.0) }
    }

    fn unscaled(&self) -> (Complex64, Complex64) {
        let e = self.scale.exp();
        (self.value * e, self.deriv * e)
    }
}

fn omega() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * FRAC_PI_3)
}

/// Sum the Taylor series of `y'' = z y` about `center` at `center + h`.
///
/// Coefficients obey `a_{k+2} = (center·a_k + a_{k-1}) / ((k+2)(k+1))`.
fn taylor_step(center: Complex64, y: Complex64, dy: Complex64, h: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    // Rolling window a_{k-1}, a_k, a_{k+1}.
    let (mut am1, mut a0, mut a1) = (y, dy, center * y * 0.5);
    let mut sum = y + dy * h;
    let mut dsum = dy;
    let mut hk = h; // h^k for a0 = a_k, k = 1
    let mut quiet = 0;
    for k in 1..500usize {
        // a1 = a_{k+1}
        let term = a1 * hk * h;
        let dterm = a1 * hk * (k + 1) as f64;
        sum += term;
        dsum += dterm;
        let scale = sum.norm().max(dsum.norm()).max(f64::MIN_POSITIVE);
        if term.norm().max(dterm.norm() * h.norm()) <= 1e-18 * scale {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        let a2 = (center * a0 + am1) / ((k + 2) as f64 * (k + 1) as f64);
        am1 = a0;
        a0 = a1;
        a1 = a2;
        hk *= h;
        if hk == zero {
            break;
        }
    }
    (sum, dsum)
}

fn series(z: Complex64) -> Scaled {
    let (v, dv) = taylor_step(
        Complex64::new(0.0, 0.0),
        Complex64::new(AI_0, 0.0),
        Complex64::new(AI_PRIME_0, 0.0),
        z,
    );
    Scaled::plain(v, dv)
}

/// Asymptotic expansion, valid for `|arg z| ≤ 2π/3` and large `|z|`.
fn asymptotic_direct(z: Complex64) -> Scaled {
    let sqrt_z = z.sqrt();
    let quarter = sqrt_z.sqrt();
    let zeta = z * sqrt_z * (2.0 / 3.0);
    let inv = 1.0 / zeta;
    let mut su = Complex64::new(1.0, 0.0);
    let mut sv = Complex64::new(1.0, 0.0);
    let mut u = 1.0;
    let mut pow = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        pow *= -inv;
        let tu = pow * u;
        let tv = pow * v;
        let size = tu.norm().max(tv.norm());
        // Optimal truncation: stop before the terms start to grow.
        if size > last {
            break;
        }
        su += tu;
        sv += tv;
        last = size;
        if size < 1e-17 {
            break;
        }
    }
    let norm = 0.5 / PI.sqrt();
    Scaled {
        value: su * norm / quarter,
        deriv: -sv * norm * quarter,
        scale: -zeta,
    }
}

/// Combine `c1·f1 + c2·f2` of scaled values under a common real scale.
fn combine(c1: Complex64, f1: Scaled, d1: Complex64, c2: Complex64, f2: Scaled, d2: Complex64) -> Scaled {
    let m = f1.scale.re.max(f2.scale.re);
    let e1 = (f1.scale - m).exp();
    let e2 = (f2.scale - m).exp();
    Scaled {
        value: c1 * f1.value * e1 + c2 * f2.value * e2,
        deriv: d1 * f1.deriv * e1 + d2 * f2.deriv * e2,
        scale: Complex64::new(m, 0.0),
    }
}

fn asymptotic(z: Complex64) -> Scaled {
    if z.arg().abs() <= 2.0 * FRAC_PI_3 {
        return asymptotic_direct(z);
    }
    let w = omega();
    let e_minus = Complex64::from_polar(1.0, -FRAC_PI_3);
    let e_plus = Complex64::from_polar(1.0, FRAC_PI_3);
    let a = asymptotic_direct(z * w);
    let b = asymptotic_direct(z * w.conj());
    combine(e_minus, a, e_plus, e_plus, b, e_minus)
}

fn continuation(z: Complex64) -> Scaled {
    let r = z.norm();
    let (anchor, start) = if z.arg().abs() <= INWARD_SECTOR {
        let zs = z * (ASYMPTOTIC_RADIUS / r);
        (zs, asymptotic_direct(zs).unscaled())
    } else {
        let zs = z * (SERIES_RADIUS / r);
        (zs, series(zs).unscaled())
    };
    let span = z - anchor;
    let steps = (span.norm() / MAX_STEP).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let (mut y, mut dy) = start;
    let mut c = anchor;
    for _ in 0..steps {
        let (ny, ndy) = taylor_step(c, y, dy, h);
        y = ny;
        dy = ndy;
        c += h;
    }
    Scaled::plain(y, dy)
}

fn evaluate(z: Complex64) -> (Scaled, Method) {
    let r = z.norm();
    if r <= SERIES_RADIUS {
        (series(z), Method::Series)
    } else if r >= ASYMPTOTIC_RADIUS {
        (asymptotic(z), Method::Asymptotic)
    } else {
        (continuation(z), Method::Continuation)
    }
}

fn checked(z: Complex64, s: Scaled) -> Result<(Complex64, Complex64), AiryError> {
    if s.scale.re > MAX_EXP {
        return Err(AiryError::Overflow { xi: z, exponent: s.scale.re });
    }
    Ok(s.unscaled())
}

/// `v(ξ)`.
pub fn airy_v(xi: Complex64) -> Result<Complex64, AiryError> {
    checked(xi, evaluate(xi).0).map(|(v, _)| v)
}

/// `v(ξ)` and `v'(ξ)`.
pub fn airy_v_with_derivative(xi: Complex64) -> Result<(Complex64, Complex64), AiryError> {
    checked(xi, evaluate(xi).0)
}

pub fn airy_sample(xi: Complex64) -> Result<AirySample, AiryError> {
    let (s, method) = evaluate(xi);
    let (value, _) = checked(xi, s)?;
    Ok(AirySample { xi, value, method })
}

/// Complex logarithm of `v(ξ)`; the imaginary part is a phase, not reduced
/// to `(-π, π]`. Returns `-∞` real part at an exact zero.
pub fn airy_v_ln(xi: Complex64) -> Complex64 {
    let s = evaluate(xi).0;
    s.value.ln() + s.scale
}

pub fn airy_v_log(xi: Complex64) -> LogValue {
    let l = airy_v_ln(xi);
    LogValue {
        log_modulus: l.re,
        phase: Complex64::from_polar(1.0, l.im).arg(),
    }
}

/// `|v(ξ) - e^{-πi/3} v(ωξ) - e^{πi/3} v(ω̄ξ)| / (1 + |v(ξ)|)`.
pub fn airy_connection_residual(xi: Complex64) -> f64 {
    let w = omega();
    let v = |z: Complex64| airy_v(z).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    let lhs = v(xi);
    let rhs = Complex64::from_polar(1.0, -FRAC_PI_3) * v(w * xi) + Complex64::from_polar(1.0, FRAC_PI_3) * v(w.conj() * xi);
    (lhs - rhs).norm() / (1.0 + lhs.norm())
}

/// Zeros `0 < r_1 < r_2 < …` of `v(-r)`, one-indexed by position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AiryZeros {
    pub r: Vec<f64>,
}

impl AiryZeros {
    /// `r_k` for `k ≥ 1`.
    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.r.get(i).copied())
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Leading-order location `(3π/2·(k - 1/4))^{2/3}` of the `k`-th zero.
pub fn zero_seed(k: usize) -> f64 {
    (1.5 * PI * (k as f64 - 0.25)).powf(2.0 / 3.0)
}

pub fn airy_zeros(k_max: usize) -> Result<AiryZeros, AiryError> {
    let mut r = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut x = zero_seed(k);
        let mut done = false;
        for _ in 0..50 {
            let (v, dv) = airy_v_with_derivative(Complex64::new(-x, 0.0))?;
            // d/dr v(-r) = -v'(-r)
            let step = v.re / dv.re;
            x += step;
            if step.abs() <= 1e-15 * x {
                done = true;
                break;
            }
        }
        if !done {
            return Err(AiryError::ConvergenceFailure { k });
        }
        r.push(x);
    }
    Ok(AiryZeros { r })
}
