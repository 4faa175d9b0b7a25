//! Phase integrals `S(z, λ) = ∫_{ξ_λ}^{z} √(i(q(ξ) - λ)) dξ`, the functionals
//! `Q`, `Q⁺`, `Q⁻`, the Couette closed form `f(λ)` and Stokes lines.
//!
//! Branch convention: on the real axis, for `Im λ ≤ 0`,
//! `√(i(q(x) - λ)) = e^{iπ/4} √(q(x) - λ)` with `arg(q(x) - λ) ∈ [0, π]`.
//! This is continuous in `x` and in `λ`, and gives `Q(a) = e^{iπ/4}α`
//! with `α > 0`. Off the axis the root is carried by continuity.

use crate::profiles::{lower_side, Profile, ProfileError};
use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};
use std::num::NonZeroUsize;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("BranchJump: root continuation lost near z = {at}")]
    BranchJump { at: Complex64 },
    #[error("StallError: Stokes-line step collapsed at z = {at}")]
    Stall { at: Complex64 },
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

const I: Complex64 = Complex64::new(0.0, 1.0);
const ORDER: usize = 24;
const MAX_DEPTH: u32 = 40;
/// Nodes closer than this to a turning point are treated as sitting on it.
const TURNING_POINT_SNAP: f64 = 1e-8;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let gl = GaussLegendre::new(NonZeroUsize::new(ORDER).unwrap());
        let mut pairs: Vec<(f64, f64)> = gl.iter().map(|(x, w)| (*x, *w)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    })
}

/// `√(i(q(x) - λ))` on the real axis.
pub fn real_axis_root(profile: &Profile, x: f64, lambda: Complex64) -> Complex64 {
    let d = profile.eval(Complex64::new(x, 0.0)) - lambda;
    Complex64::new(d.re, d.im.abs()).sqrt() * Complex64::from_polar(1.0, FRAC_PI_4)
}

fn principal_root(profile: &Profile, z: Complex64, lambda: Complex64) -> Complex64 {
    (I * (profile.eval(z) - lambda)).sqrt()
}

/// Adaptive Gauss–Legendre on `[0, 1]` for an integrand `factor(u)·s(u)` where
/// `s` is a square root known only up to sign, continued from `seed` at `u = 0`.
/// `root(u)` returns `(±s(u), factor(u))`. Returns the integral and the
/// continued root at `u = 1`.
fn tracked<F>(root: F, seed: Complex64, tol: f64, at: impl Fn(f64) -> Complex64) -> Result<(Complex64, Complex64), PhaseError>
where
    F: Fn(f64) -> (Complex64, Complex64),
{
    struct Panel {
        value: Complex64,
        end: Complex64,
        smooth: bool,
    }
    let panel = |u0: f64, u1: f64, prev: Complex64| -> Panel {
        let half = 0.5 * (u1 - u0);
        let mid = 0.5 * (u1 + u0);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut last = prev;
        let mut smooth = true;
        for &(x, w) in rule() {
            let (mut s, f) = root(mid + half * x);
            if (s * last.conj()).re < 0.0 {
                s = -s;
            }
            // Consecutive samples should turn by well under a right angle.
            if last.norm() > 0.0 && s.norm() > 0.0 && (s * last.conj()).arg().abs() > FRAC_PI_4 {
                smooth = false;
            }
            acc += f * s * (w * half);
            last = s;
        }
        let (mut s1, _) = root(u1);
        if (s1 * last.conj()).re < 0.0 {
            s1 = -s1;
        }
        Panel { value: acc, end: s1, smooth }
    };

    fn recurse<P: Fn(f64, f64, Complex64) -> Panel, A: Fn(f64) -> Complex64>(
        panel: &P,
        at: &A,
        u0: f64,
        u1: f64,
        prev: Complex64,
        whole: Panel,
        tol: f64,
        depth: u32,
    ) -> Result<(Complex64, Complex64), PhaseError> {
        let m = 0.5 * (u0 + u1);
        let left = panel(u0, m, prev);
        let right = panel(m, u1, left.end);
        let sum = left.value + right.value;
        if whole.smooth && left.smooth && right.smooth && (sum - whole.value).norm() <= tol * (u1 - u0) {
            return Ok((sum, right.end));
        }
        if depth >= MAX_DEPTH {
            return Err(PhaseError::BranchJump { at: at(m) });
        }
        let (l, end) = recurse(panel, at, u0, m, prev, left, tol, depth + 1)?;
        let right = panel(m, u1, end);
        let (r, end) = recurse(panel, at, m, u1, end, right, tol, depth + 1)?;
        Ok((l + r, end))
    }

    let whole = panel(0.0, 1.0, seed);
    recurse(&panel, &at, 0.0, 1.0, seed, whole, tol, 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Leg {
    Regular,
    /// The first endpoint is a turning point.
    FromTurningPoint,
    /// The second endpoint is a turning point.
    ToTurningPoint,
}

/// `∫_{z0}^{z1} √(i(q - λ)) dz` with the root continued from `seed` at the
/// regular end. Returns the integral and the root value at `z1`.
fn integrate_leg(
    profile: &Profile,
    lambda: Complex64,
    z0: Complex64,
    z1: Complex64,
    kind: Leg,
    seed: Complex64,
) -> Result<(Complex64, Complex64), PhaseError> {
    let d = z1 - z0;
    if d.norm() == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), seed));
    }
    let tol = 1e-13 * (1.0 + d.norm());
    match kind {
        Leg::Regular => tracked(
            |u| (principal_root(profile, z0 + d * u, lambda), d),
            seed,
            tol,
            |u| z0 + d * u,
        ),
        // z = z0 + d u², root = u·s(u); integrand 2u²d·s(u).
        Leg::FromTurningPoint => tracked(
            |u| {
                let z = z0 + d * (u * u);
                let s = (I * (profile.eval(z) - lambda) / (u * u)).sqrt();
                (s, d * (2.0 * u * u))
            },
            seed,
            tol,
            |u| z0 + d * (u * u),
        ),
        // z = z1 - d(1-u)², root = (1-u)·s(u); integrand 2(1-u)²d·s(u).
        Leg::ToTurningPoint => tracked(
            |u| {
                let v = 1.0 - u;
                let z = z1 - d * (v * v);
                let s = if v == 0.0 {
                    (I * profile.eval_d1(z1) * -d).sqrt()
                } else {
                    (I * (profile.eval(z) - lambda) / (v * v)).sqrt()
                };
                (s, d * (2.0 * v * v))
            },
            seed,
            tol,
            |u| z1 - d * ((1.0 - u) * (1.0 - u)),
        )
        .map(|(v, _)| (v, Complex64::new(0.0, 0.0))),
    }
}

/// Polyline in the `z`-plane with the sheet of `√(i(q - λ))` fixed by
/// `branch_seed`: the root at the first node (or, when the first node is a
/// turning point, the direction of the root just after it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchedPath {
    pub nodes: Vec<Complex64>,
    pub branch_seed: Complex64,
}

impl BranchedPath {
    pub fn new(nodes: Vec<Complex64>, branch_seed: Complex64) -> Self {
        BranchedPath { nodes, branch_seed }
    }

    pub fn length(&self) -> f64 {
        self.nodes.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn reversed(&self, branch_seed: Complex64) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        BranchedPath { nodes, branch_seed }
    }
}

/// `∫ √(i(q - λ)) dz` along `path`. The first and last node may sit on a
/// turning point; interior nodes may not.
pub fn phase_integral(profile: &Profile, path: &BranchedPath, lambda: Complex64) -> Result<Complex64, PhaseError> {
    let n = path.nodes.len();
    if n < 2 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let tps = profile.turning_points(lambda)?;
    let near_tp = |z: Complex64| tps.iter().any(|t| (z - t).norm() < TURNING_POINT_SNAP);
    for z in &path.nodes[1..n - 1] {
        if near_tp(*z) {
            return Err(PhaseError::InvalidPath(format!("interior node {z} is a turning point")));
        }
    }
    let mut seed = path.branch_seed;
    let mut total = Complex64::new(0.0, 0.0);
    for (j, w) in path.nodes.windows(2).enumerate() {
        let kind = if j == 0 && near_tp(w[0]) {
            Leg::FromTurningPoint
        } else if j == n - 2 && near_tp(w[1]) {
            Leg::ToTurningPoint
        } else {
            Leg::Regular
        };
        if kind == Leg::Regular && j == 0 {
            // Pin the seed to the actual root value at the first node.
            let r = principal_root(profile, w[0], lambda);
            seed = if (r * seed.conj()).re < 0.0 { -r } else { r };
        }
        let (v, end) = integrate_leg(profile, lambda, w[0], w[1], kind, seed)?;
        total += v;
        seed = end;
    }
    Ok(total)
}

/// Real points in `[-1, 1]` where `q(x) = Re λ` (at most two for shipped kinds).
fn real_breakpoints(profile: &Profile, c: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=64).map(|j| -1.0 + 2.0 * j as f64 / 64.0).collect();
    grid.dedup();
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (f0, f1) = (profile.q(w[0]) - c, profile.q(w[1]) - c);
        if f0 == 0.0 {
            out.push(w[0]);
        } else if f0.signum() != f1.signum() {
            if let Some(x) = crate::roots::illinois(|x| profile.q(x) - c, w[0], w[1], 1e-15) {
                out.push(x);
            }
        }
    }
    out
}

/// `∫_{x0}^{x1} √(i(q(x) - λ)) dx` along the real axis, split where the root
/// nearly vanishes.
pub fn real_axis_integral(profile: &Profile, lambda: Complex64, x0: f64, x1: f64) -> Result<Complex64, PhaseError> {
    if x0 == x1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let lambda = lower_side(lambda);
    let (lo, hi) = (x0.min(x1), x0.max(x1));
    let mut cuts = vec![lo];
    cuts.extend(real_breakpoints(profile, lambda.re).into_iter().filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    let mut total = Complex64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        total += adaptive_real(|x| real_axis_root(profile, x, lambda), w[0], w[1], 0)?;
    }
    Ok(if x1 < x0 { -total } else { total })
}

fn gauss(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> Complex64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule().iter().map(|&(x, w)| f(mid + half * x) * w).sum::<Complex64>() * half
}

fn adaptive_real(f: impl Fn(f64) -> Complex64 + Copy, a: f64, b: f64, depth: u32) -> Result<Complex64, PhaseError> {
    fn go(f: &impl Fn(f64) -> Complex64, a: f64, b: f64, whole: Complex64, depth: u32) -> Result<Complex64, PhaseError> {
        let m = 0.5 * (a + b);
        let (l, r) = (gauss(f, a, m), gauss(f, m, b));
        if (l + r - whole).norm() <= 1e-14 * (b - a).max(1e-3) || depth >= MAX_DEPTH {
            return Ok(l + r);
        }
        Ok(go(f, a, m, l, depth + 1)? + go(f, m, b, r, depth + 1)?)
    }
    let whole = gauss(&f, a, b);
    go(&f, a, b, whole, depth)
}

/// `∫_{ξ}^{end} √(i(q - λ)) dz` from a turning point `ξ` to a real endpoint,
/// along `ξ → Re ξ → end`.
pub fn integral_from_turning_point(
    profile: &Profile,
    lambda: Complex64,
    tp: Complex64,
    end: f64,
) -> Result<Complex64, PhaseError> {
    let lambda = lower_side(lambda);
    let foot = Complex64::new(tp.re, 0.0);
    let vertical = if tp.im.abs() < TURNING_POINT_SNAP {
        Complex64::new(0.0, 0.0)
    } else {
        let seed = real_axis_root(profile, tp.re, lambda);
        integrate_leg(profile, lambda, foot, tp, Leg::ToTurningPoint, seed)?.0
    };
    Ok(real_axis_integral(profile, lambda, tp.re, end)? - vertical)
}

/// `Q(λ)`, `Q⁺(λ)` and `Q⁻(λ)` for a monotone profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QValues {
    pub q: Complex64,
    pub q_plus: Complex64,
    pub q_minus: Complex64,
}

/// `Q(λ) = ∫_{-1}^{1}`; any profile.
pub fn q_total(profile: &Profile, lambda: Complex64) -> Result<Complex64, PhaseError> {
    real_axis_integral(profile, lambda, -1.0, 1.0)
}

/// `Q⁺(λ) = ∫_{ξ_λ}^{1}`.
pub fn q_plus(profile: &Profile, lambda: Complex64) -> Result<Complex64, PhaseError> {
    let tp = profile.turning_points(lambda)?[0];
    integral_from_turning_point(profile, lambda, tp, 1.0)
}

/// `Q⁻(λ) = -∫_{ξ_λ}^{-1}`.
pub fn q_minus(profile: &Profile, lambda: Complex64) -> Result<Complex64, PhaseError> {
    let tp = profile.turning_points(lambda)?[0];
    Ok(-integral_from_turning_point(profile, lambda, tp, -1.0)?)
}

pub fn q_functionals(profile: &Profile, lambda: Complex64) -> Result<QValues, PhaseError> {
    Ok(QValues {
        q: q_total(profile, lambda)?,
        q_plus: q_plus(profile, lambda)?,
        q_minus: q_minus(profile, lambda)?,
    })
}

/// `f(λ) = (2/3)e^{-iπ/4}[(1-λ)^{3/2} - (-1-λ)^{3/2}]`, positive at `-i/√3`.
pub fn f_couette(lambda: Complex64) -> Complex64 {
    let lambda = lower_side(lambda);
    let pow = |w: Complex64| {
        // Im w ≥ 0 here, so the principal power has no cut in the way.
        let w = Complex64::new(w.re, w.im.abs());
        w * w.sqrt()
    };
    (pow(1.0 - lambda) - pow(-1.0 - lambda)) * Complex64::from_polar(2.0 / 3.0, -FRAC_PI_4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineTag {
    Left,
    Right,
    Lower,
}

impl LineTag {
    pub fn as_str(self) -> &'static str {
        match self {
            LineTag::Left => "left",
            LineTag::Right => "right",
            LineTag::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    HitBoundary,
    HitTurningPoint,
    MaxLength,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StokesLine {
    pub tag: LineTag,
    pub initial_direction: f64,
    pub points: Vec<Complex64>,
    /// `Re S` at each point, for diagnostics.
    pub drift: Vec<f64>,
    pub truncation: Truncation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StokesComplex {
    pub turning_point: Complex64,
    pub lines: Vec<StokesLine>,
}

impl StokesComplex {
    pub fn line(&self, tag: LineTag) -> Option<&StokesLine> {
        self.lines.iter().find(|l| l.tag == tag)
    }
}

/// Stokes lines `Re S(z, λ) = 0` from every turning point of `λ`.
pub fn trace_stokes(profile: &Profile, lambda: Complex64, max_len: f64) -> Result<Vec<StokesComplex>, PhaseError> {
    let tps = profile.turning_points(lambda)?;
    tps.iter()
        .map(|&tp| {
            let others: Vec<Complex64> = tps.iter().copied().filter(|t| (t - tp).norm() > 1e-12).collect();
            trace_from(profile, lambda, tp, &others, max_len)
        })
        .collect()
}

fn trace_from(
    profile: &Profile,
    lambda: Complex64,
    tp: Complex64,
    others: &[Complex64],
    max_len: f64,
) -> Result<StokesComplex, PhaseError> {
    let kappa = (I * profile.eval_d1(tp)).arg();
    let mut dirs: Vec<f64> = (0..3)
        .map(|m| {
            let th = (PI - kappa) / 3.0 + 2.0 * PI * m as f64 / 3.0;
            Complex64::from_polar(1.0, th).arg()
        })
        .collect();
    // Lower: most downward. Left/right: by horizontal component.
    dirs.sort_by(|a, b| a.sin().total_cmp(&b.sin()));
    let lower = dirs[0];
    let (left, right) = if dirs[1].cos() < dirs[2].cos() { (dirs[1], dirs[2]) } else { (dirs[2], dirs[1]) };
    let lines = [(LineTag::Left, left), (LineTag::Right, right), (LineTag::Lower, lower)]
        .into_iter()
        .map(|(tag, th)| trace_line(profile, lambda, tp, others, th, max_len).map(|(points, drift, truncation)| StokesLine {
            tag,
            initial_direction: th,
            points,
            drift,
            truncation,
        }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StokesComplex { turning_point: tp, lines })
}

type Traced = (Vec<Complex64>, Vec<f64>, Truncation);

fn trace_line(
    profile: &Profile,
    lambda: Complex64,
    tp: Complex64,
    others: &[Complex64],
    theta: f64,
    max_len: f64,
) -> Result<Traced, PhaseError> {
    let root = |z: Complex64, near: Complex64| {
        let r = principal_root(profile, z, lambda);
        if (r * near.conj()).re < 0.0 {
            -r
        } else {
            r
        }
    };
    let dir_at = |z: Complex64, prev_dir: Complex64| {
        let w = principal_root(profile, z, lambda);
        let d = I * w.conj() / w.norm();
        if (d * prev_dir.conj()).re < 0.0 {
            -d
        } else {
            d
        }
    };

    let h0 = 1e-3;
    let mut dir = Complex64::from_polar(1.0, theta);
    let mut z = tp + dir * h0;
    let mut w = principal_root(profile, z, lambda);
    // Local model: S ≈ (2/3)(z - ξ)·w.
    let mut s = (z - tp) * w * (2.0 / 3.0);
    let mut points = vec![tp, z];
    let mut drift = vec![0.0, s.re];
    let mut length = h0;
    loop {
        let h = 1e-3 * (1.0 + (z - tp).norm());
        if h < 1e-9 {
            return Err(PhaseError::Stall { at: z });
        }
        let k1 = dir_at(z, dir);
        let k2 = dir_at(z + k1 * (0.5 * h), k1);
        let k3 = dir_at(z + k2 * (0.5 * h), k2);
        let k4 = dir_at(z + k3 * h, k3);
        let step = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let z_new = z + step;
        let w_mid = root(z + step * 0.5, w);
        let w_new = root(z_new, w_mid);
        s += (w + w_mid * 4.0 + w_new) * (step / 6.0);
        z = z_new;
        w = w_new;
        // Project out the drift of Re S.
        if w.norm() > 0.0 {
            let delta = -w.conj() * (s.re / w.norm_sqr());
            z += delta;
            s += w * delta;
            w = root(z, w);
        }
        dir = step / step.norm();
        length += h;
        points.push(z);
        drift.push(s.re);
        if z.im.abs() > 2.0 || z.re.abs() > 3.0 {
            return Ok((points, drift, Truncation::HitBoundary));
        }
        if others.iter().any(|t| (z - t).norm() < 1e-4) {
            return Ok((points, drift, Truncation::HitTurningPoint));
        }
        if length >= max_len {
            return Ok((points, drift, Truncation::MaxLength));
        }
    }
}
