//! Limit spectral curves and graphs.
//!
//! Every curve is stored as a graph over one real coordinate: the arcs that
//! leave the real axis are functions of `Re λ`, the vertical chain is a
//! function of `Im λ`. Each sample is found by a bracketed scalar solve on
//! the real part of the curve's defining functional; the imaginary part is
//! the quantization phase.

use crate::phase::{self, PhaseError};
use crate::profiles::{lower_side, Profile, ProfileError, ProfileKind};
use crate::roots::illinois;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("BisectionBracketFailure: Re of the {tag} functional keeps one sign near {at}")]
    BisectionBracketFailure { tag: &'static str, at: f64 },
    #[error("MultipleIntersections: {count} sign changes between {first} and {second}")]
    MultipleIntersections { first: &'static str, second: &'static str, count: usize },
    #[error("NoIntersection between {first} and {second}")]
    NoIntersection { first: &'static str, second: &'static str },
    #[error("DomainError: {0}")]
    Domain(String),
    #[error("curve {tag} is not defined for the {profile} profile")]
    UnsupportedTag { tag: &'static str, profile: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveTag {
    GammaPlus,
    GammaMinus,
    GammaInfty,
    #[serde(rename = "gamma_0")]
    Gamma0,
    GammaA,
    GammaB,
}

impl CurveTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveTag::GammaPlus => "gamma_plus",
            CurveTag::GammaMinus => "gamma_minus",
            CurveTag::GammaInfty => "gamma_infty",
            CurveTag::Gamma0 => "gamma_0",
            CurveTag::GammaA => "gamma_a",
            CurveTag::GammaB => "gamma_b",
        }
    }

    /// Quantization offset: the phase at the `k`-th eigenvalue is
    /// `π√h·(k + offset)`.
    pub fn phase_offset(self) -> f64 {
        match self {
            CurveTag::GammaInfty => 0.0,
            CurveTag::Gamma0 => 0.5,
            _ => -0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    A,
    B,
    Origin,
    Knot,
    Depth,
    Window,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Couette,
    Monotone,
    Quadratic,
}

impl Family {
    pub fn of(profile: &Profile) -> Family {
        match profile.kind {
            ProfileKind::Linear => Family::Couette,
            ProfileKind::Quadratic { .. } => Family::Quadratic,
            _ => Family::Monotone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralCurve {
    pub tag: CurveTag,
    pub samples: Vec<Complex64>,
    /// Quantization phase at each sample, increasing along the curve.
    pub phase: Vec<f64>,
    pub clipped_at: (Endpoint, Endpoint),
    /// Part of the full curve beyond a knot; drawn, never verified.
    pub excluded: bool,
    /// Reflection `λ ↦ -conj(λ)` of another curve.
    pub mirrored: bool,
}

impl SpectralCurve {
    pub fn start(&self) -> Complex64 {
        self.samples[0]
    }

    pub fn end(&self) -> Complex64 {
        *self.samples.last().unwrap()
    }

    /// Distance from `z` to the polyline.
    pub fn distance(&self, z: Complex64) -> f64 {
        if self.samples.len() == 1 {
            return (z - self.samples[0]).norm();
        }
        self.samples.windows(2).map(|w| segment_distance(z, w[0], w[1])).fold(f64::INFINITY, f64::min)
    }

    /// Phase at the point of the polyline nearest to `z`, linearly
    /// interpolated, with that distance.
    pub fn phase_near(&self, z: Complex64) -> (f64, f64) {
        if self.samples.len() == 1 {
            return (self.phase[0], (z - self.samples[0]).norm());
        }
        let mut best = (self.phase[0], f64::INFINITY);
        for (j, w) in self.samples.windows(2).enumerate() {
            let d = w[1] - w[0];
            let len2 = d.norm_sqr();
            let s = if len2 == 0.0 { 0.0 } else { (((z - w[0]) * d.conj()).re / len2).clamp(0.0, 1.0) };
            let dist = (z - (w[0] + d * s)).norm();
            if dist < best.1 {
                best = (self.phase[j] + s * (self.phase[j + 1] - self.phase[j]), dist);
            }
        }
        best
    }

    /// Point on the polyline where the phase equals `target`, if inside.
    pub fn point_at_phase(&self, target: f64) -> Option<Complex64> {
        for (j, w) in self.phase.windows(2).enumerate() {
            let (p0, p1) = (w[0], w[1]);
            if (p0 - target) * (p1 - target) <= 0.0 && p0 != p1 {
                let s = (target - p0) / (p1 - p0);
                return Some(self.samples[j] + (self.samples[j + 1] - self.samples[j]) * s);
            }
        }
        None
    }

    pub fn mirror(&self) -> SpectralCurve {
        SpectralCurve {
            samples: self.samples.iter().map(|z| Complex64::new(-z.re, z.im)).collect(),
            mirrored: !self.mirrored,
            ..self.clone()
        }
    }
}

pub(crate) fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let s = (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (z - (a + d * s)).norm()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Knot {
    pub name: &'static str,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitGraph {
    pub profile: Profile,
    pub family: Family,
    pub curves: Vec<SpectralCurve>,
    pub knots: Vec<Knot>,
    /// `(q(-1), q(1))`.
    pub endpoints: (f64, f64),
    pub depth: f64,
}

impl LimitGraph {
    pub fn retained(&self) -> impl Iterator<Item = &SpectralCurve> {
        self.curves.iter().filter(|c| !c.excluded)
    }

    pub fn curve(&self, tag: CurveTag) -> Option<&SpectralCurve> {
        self.retained().find(|c| c.tag == tag && !c.mirrored)
    }

    pub fn knot(&self, name: &str) -> Option<Complex64> {
        self.knots.iter().find(|k| k.name == name).map(|k| k.value)
    }

    /// Distance from `z` to the retained curves.
    pub fn distance(&self, z: Complex64) -> f64 {
        self.retained().map(|c| c.distance(z)).fold(f64::INFINITY, f64::min)
    }
}

/// Samples per curve used by [`build_limit_graph`].
pub const DEFAULT_SAMPLES: usize = 400;

const T_SCAN_MAX: f64 = 4.0;

/// Defining functional of a curve on the normalized profile.
fn functional(p: &Profile, tag: CurveTag, lambda: Complex64) -> Result<Complex64, GraphError> {
    let lambda = lower_side(lambda);
    let unsupported = || GraphError::UnsupportedTag { tag: tag.as_str(), profile: p.name() };
    if p.is_monotone() {
        return Ok(match tag {
            CurveTag::GammaPlus => phase::q_plus(p, lambda)?,
            CurveTag::GammaMinus => phase::q_minus(p, lambda)?,
            CurveTag::GammaInfty => phase::q_total(p, lambda)?,
            _ => return Err(unsupported()),
        });
    }
    let tps = p.turning_points(lambda)?;
    let (right, left) = (tps[0], tps[1]);
    Ok(match tag {
        CurveTag::GammaB => phase::integral_from_turning_point(p, lambda, right, 1.0)?,
        CurveTag::GammaA => -phase::integral_from_turning_point(p, lambda, left, -1.0)?,
        CurveTag::GammaMinus => phase::integral_from_turning_point(p, lambda, left, 1.0)?,
        CurveTag::Gamma0 => {
            phase::integral_from_turning_point(p, lambda, left, 1.0)?
                - phase::integral_from_turning_point(p, lambda, right, 1.0)?
        }
        CurveTag::GammaInfty => phase::q_total(p, lambda)?,
        CurveTag::GammaPlus => return Err(unsupported()),
    })
}

/// Defining functional of a curve in the profile's own coordinates: the curve
/// is `Re F = 0` and the phase is `Im F`.
pub fn defining_functional(profile: &Profile, tag: CurveTag, lambda: Complex64) -> Result<Complex64, GraphError> {
    match profile.kind {
        ProfileKind::Quadratic { beta } => {
            let red = profile.reduction_or_identity();
            let tag = if beta < 0.0 {
                match tag {
                    CurveTag::GammaA => CurveTag::GammaB,
                    CurveTag::GammaB => CurveTag::GammaA,
                    t => t,
                }
            } else {
                tag
            };
            let norm = Profile::quadratic(beta.abs())?;
            Ok(functional(&norm, tag, red.to_normalized(lambda))? * red.scale.sqrt())
        }
        _ => functional(profile, tag, lambda),
    }
}

/// Root of `f` near `guess` in `[lo, hi]`, found by an expanding bracket and
/// falling back to the first sign change of a uniform scan.
fn bracketed_root(
    f: &mut dyn FnMut(f64) -> Result<f64, GraphError>,
    guess: Option<f64>,
    lo: f64,
    hi: f64,
    tag: CurveTag,
    at: f64,
) -> Result<f64, GraphError> {
    let mut err = None;
    let mut g = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    };
    let mut bracket = None;
    if let Some(x0) = guess {
        let mut h = 1e-3 * (hi - lo);
        let f0 = g(x0);
        if f0 == 0.0 {
            return Ok(x0);
        }
        for _ in 0..14 {
            let (a, b) = ((x0 - h).max(lo), (x0 + h).min(hi));
            let (fa, fb) = (g(a), g(b));
            if fa.is_finite() && f0.is_finite() && fa.signum() != f0.signum() {
                bracket = Some((a, x0));
                break;
            }
            if fb.is_finite() && f0.is_finite() && fb.signum() != f0.signum() {
                bracket = Some((x0, b));
                break;
            }
            h *= 2.0;
        }
    }
    if bracket.is_none() {
        let steps = 48;
        let mut x0 = lo;
        let mut f0 = g(x0);
        for j in 1..=steps {
            let x1 = lo + (hi - lo) * j as f64 / steps as f64;
            let f1 = g(x1);
            if f0.is_finite() && f1.is_finite() && (f0 == 0.0 || f0.signum() != f1.signum()) {
                bracket = Some((x0, x1));
                break;
            }
            x0 = x1;
            f0 = f1;
        }
    }
    let Some((a, b)) = bracket else {
        return Err(err.unwrap_or(GraphError::BisectionBracketFailure { tag: tag.as_str(), at }));
    };
    let root = illinois(&mut g, a, b, 1e-15);
    match (root, err) {
        (Some(r), None) => Ok(r),
        (_, Some(e)) => Err(e),
        (None, None) => Err(GraphError::BisectionBracketFailure { tag: tag.as_str(), at }),
    }
}

/// `t > 0` with `Re F(c - it) = 0`.
fn depth_at(p: &Profile, tag: CurveTag, c: f64, guess: Option<f64>, t_max: f64) -> Result<f64, GraphError> {
    let mut f = |t: f64| Ok(functional(p, tag, Complex64::new(c, -t))?.re);
    bracketed_root(&mut f, guess, 0.0, t_max, tag, c)
}

/// `c` with `Re F(c - it) = 0`.
fn abscissa_at(p: &Profile, tag: CurveTag, t: f64, guess: Option<f64>, span: (f64, f64)) -> Result<f64, GraphError> {
    let mut f = |c: f64| Ok(functional(p, tag, Complex64::new(c, -t))?.re);
    bracketed_root(&mut f, guess, span.0, span.1, tag, t)
}

fn sample(p: &Profile, tag: CurveTag, z: Complex64) -> Result<f64, GraphError> {
    Ok(functional(p, tag, z)?.im)
}

/// Curve over `Re λ` from `c_start` to `c_end`, both ends included. The
/// first point is `start` if given (a real endpoint with `t = 0`).
fn trace_over_c(
    p: &Profile,
    tag: CurveTag,
    c_start: f64,
    c_end: (f64, f64),
    n: usize,
    clipped_at: (Endpoint, Endpoint),
) -> Result<SpectralCurve, GraphError> {
    let n = n.max(2);
    let mut samples = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    let mut guess = None;
    for j in 0..n {
        let s = j as f64 / (n - 1) as f64;
        let c = c_start + (c_end.0 - c_start) * s;
        let t = if j == 0 {
            0.0
        } else if j == n - 1 {
            c_end.1
        } else {
            depth_at(p, tag, c, guess, T_SCAN_MAX)?
        };
        guess = Some(t);
        let z = Complex64::new(c, -t);
        samples.push(z);
        phases.push(sample(p, tag, z)?);
    }
    Ok(SpectralCurve { tag, samples, phase: phases, clipped_at, excluded: false, mirrored: false })
}

/// Vertical chain from `top` down to `Im λ = -depth`.
fn trace_infinite(p: &Profile, top: Complex64, depth: f64, n: usize) -> Result<SpectralCurve, GraphError> {
    let n = n.max(2);
    let range = p.range();
    let (lo, hi) = range.strip();
    let span = (lo - 1.0, hi + 1.0);
    let t0 = -top.im;
    let mut samples = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    let mut guess = Some(top.re);
    for j in 0..n {
        let t = t0 + (depth - t0) * j as f64 / (n - 1) as f64;
        let c = if j == 0 { top.re } else { abscissa_at(p, CurveTag::GammaInfty, t, guess, span)? };
        guess = Some(c);
        let z = Complex64::new(c, -t);
        samples.push(z);
        phases.push(sample(p, CurveTag::GammaInfty, z)?);
    }
    Ok(SpectralCurve {
        tag: CurveTag::GammaInfty,
        samples,
        phase: phases,
        clipped_at: (Endpoint::Knot, Endpoint::Depth),
        excluded: false,
        mirrored: false,
    })
}

/// Single sign change of `g` on the interior grid, bracketed.
fn unique_crossing(
    g: &mut dyn FnMut(f64) -> Result<f64, GraphError>,
    lo: f64,
    hi: f64,
    steps: usize,
    names: (&'static str, &'static str),
) -> Result<(f64, f64), GraphError> {
    let xs: Vec<f64> = (1..steps).map(|j| lo + (hi - lo) * j as f64 / steps as f64).collect();
    let mut vals = Vec::with_capacity(xs.len());
    for &x in &xs {
        vals.push(g(x)?);
    }
    let changes: Vec<usize> = (0..vals.len() - 1).filter(|&j| vals[j].signum() != vals[j + 1].signum()).collect();
    match changes.len() {
        0 => Err(GraphError::NoIntersection { first: names.0, second: names.1 }),
        1 => Ok((xs[changes[0]], xs[changes[0] + 1])),
        count => Err(GraphError::MultipleIntersections { first: names.0, second: names.1, count }),
    }
}

fn solve_crossing(
    g: &mut dyn FnMut(f64) -> Result<f64, GraphError>,
    bracket: (f64, f64),
    names: (&'static str, &'static str),
) -> Result<f64, GraphError> {
    let mut err = None;
    let r = illinois(
        |x| match g(x) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        bracket.0,
        bracket.1,
        1e-14,
    );
    if let Some(e) = err {
        return Err(e);
    }
    r.ok_or(GraphError::NoIntersection { first: names.0, second: names.1 })
}

/// Knot of a monotone profile: the crossing of the two arcs from the ends.
pub fn monotone_knot(p: &Profile) -> Result<Complex64, GraphError> {
    let r = p.range();
    let (a, b) = (r.a, r.b);
    let names = (CurveTag::GammaPlus.as_str(), CurveTag::GammaMinus.as_str());
    let mut guesses = (None, None);
    let mut g = |c: f64| -> Result<f64, GraphError> {
        let tp = depth_at(p, CurveTag::GammaPlus, c, guesses.0, T_SCAN_MAX)?;
        let tm = depth_at(p, CurveTag::GammaMinus, c, guesses.1, T_SCAN_MAX)?;
        guesses = (Some(tp), Some(tm));
        Ok(tp - tm)
    };
    let bracket = unique_crossing(&mut g, a, b, 16, names)?;
    let c0 = solve_crossing(&mut g, bracket, names)?;
    let t0 = depth_at(p, CurveTag::GammaPlus, c0, None, T_SCAN_MAX)?;
    Ok(Complex64::new(c0, -t0))
}

/// Numerically traced three-curve graph of a monotone profile (including
/// the linear one, whose closed form [`build_limit_graph`] uses instead).
pub fn trace_monotone(p: &Profile, depth: f64, n: usize) -> Result<LimitGraph, GraphError> {
    if !p.is_monotone() {
        return Err(GraphError::Domain(format!("{} is not monotone", p.name())));
    }
    let r = p.range();
    let knot = monotone_knot(p)?;
    if depth <= -knot.im {
        return Err(GraphError::Domain(format!("depth {depth} does not reach the knot at {knot}")));
    }
    let kt = (knot.re, -knot.im);
    let plus = trace_over_c(p, CurveTag::GammaPlus, r.b, kt, n, (Endpoint::B, Endpoint::Knot))?;
    let minus = trace_over_c(p, CurveTag::GammaMinus, r.a, kt, n, (Endpoint::A, Endpoint::Knot))?;
    let infty = trace_infinite(p, knot, depth, n)?;
    let mut curves = vec![plus, minus, infty];
    curves.extend(excluded_arcs(p, knot, n / 4));
    Ok(LimitGraph {
        profile: *p,
        family: Family::of(p),
        curves,
        knots: vec![Knot { name: "lambda_0", value: knot }],
        endpoints: (r.a, r.b),
        depth,
    })
}

/// Continuations of the monotone arcs past the knot, as far as they trace.
fn excluded_arcs(p: &Profile, knot: Complex64, n: usize) -> Vec<SpectralCurve> {
    let r = p.range();
    let n = n.max(8);
    let mut out = Vec::new();
    for (tag, end) in [(CurveTag::GammaPlus, r.a), (CurveTag::GammaMinus, r.b)] {
        let mut samples = vec![knot];
        let mut phases = vec![sample(p, tag, knot).unwrap_or(f64::NAN)];
        let mut guess = Some(-knot.im);
        for j in 1..n {
            let c = knot.re + (end - knot.re) * 0.95 * j as f64 / (n - 1) as f64;
            let Ok(t) = depth_at(p, tag, c, guess, T_SCAN_MAX) else { break };
            guess = Some(t);
            let z = Complex64::new(c, -t);
            samples.push(z);
            phases.push(sample(p, tag, z).unwrap_or(f64::NAN));
        }
        if samples.len() > 1 {
            out.push(SpectralCurve {
                tag,
                samples,
                phase: phases,
                clipped_at: (Endpoint::Knot, Endpoint::Open),
                excluded: true,
                mirrored: false,
            });
        }
    }
    let (lo, hi) = r.strip();
    let mut samples = vec![knot];
    let mut phases = vec![sample(p, CurveTag::GammaInfty, knot).unwrap_or(f64::NAN)];
    let mut guess = Some(knot.re);
    for j in 1..n {
        let t = -knot.im * (1.0 - 0.95 * j as f64 / (n - 1) as f64);
        let Ok(c) = abscissa_at(p, CurveTag::GammaInfty, t, guess, (lo - 1.0, hi + 1.0)) else { break };
        guess = Some(c);
        let z = Complex64::new(c, -t);
        samples.push(z);
        phases.push(sample(p, CurveTag::GammaInfty, z).unwrap_or(f64::NAN));
    }
    if samples.len() > 1 {
        out.push(SpectralCurve {
            tag: CurveTag::GammaInfty,
            samples,
            phase: phases,
            clipped_at: (Endpoint::Knot, Endpoint::Open),
            excluded: true,
            mirrored: false,
        });
    }
    out
}

/// Point of the diagonal ray `arg λ = -π/4` at modulus `r`.
fn diagonal(r: f64) -> Complex64 {
    Complex64::from_polar(r, -FRAC_PI_4)
}

/// Knots `(λ₁, λ₂)` of the normalized quadratic `(x - β)²` with `β ≥ 0`.
pub fn quadratic_knots(p: &Profile) -> Result<(Complex64, Complex64), GraphError> {
    let ProfileKind::Quadratic { beta } = p.kind else {
        return Err(GraphError::Domain(format!("{} is not quadratic", p.name())));
    };
    let p = p.normalized();
    let r = p.range();
    // λ₁: where the right-end arc meets the diagonal.
    let mut fb = |rho: f64| Ok(functional(&p, CurveTag::GammaB, diagonal(rho))?.re);
    let rho = bracketed_root(&mut fb, None, 1e-9, 2.0 * r.a.max(r.b), CurveTag::GammaB, 0.0)?;
    let l1 = diagonal(rho);
    if beta.abs() < 1e-12 {
        return Ok((l1, l1));
    }
    // λ₂: crossing of the middle arc and the left-end arc.
    let names = (CurveTag::GammaMinus.as_str(), CurveTag::GammaA.as_str());
    let mut guesses = (Some(-l1.im), None);
    let mut g = |c: f64| -> Result<f64, GraphError> {
        let tm = depth_at(&p, CurveTag::GammaMinus, c, guesses.0, T_SCAN_MAX)?;
        let ta = depth_at(&p, CurveTag::GammaA, c, guesses.1, T_SCAN_MAX)?;
        guesses = (Some(tm), Some(ta));
        Ok(tm - ta)
    };
    let bracket = unique_crossing(&mut g, l1.re, r.a.max(r.b), 24, names)?;
    let c2 = solve_crossing(&mut g, bracket, names)?;
    let t2 = depth_at(&p, CurveTag::GammaA, c2, None, T_SCAN_MAX)?;
    Ok((l1, Complex64::new(c2, -t2)))
}

fn quadratic_graph(p: &Profile, depth: f64, n: usize) -> Result<LimitGraph, GraphError> {
    let ProfileKind::Quadratic { beta } = p.kind else { unreachable!() };
    let red = p.reduction_or_identity();
    // Mirror x ↦ -x so that β ≥ 0; the a- and b-arcs trade places.
    let flipped = beta < 0.0;
    let norm = Profile::quadratic(beta.abs())?;
    let r = norm.range();
    let (l1, l2) = quadratic_knots(&norm)?;
    let depth_n = depth / red.scale;
    if depth_n <= -l2.im {
        return Err(GraphError::Domain(format!("depth {depth} does not reach the knot")));
    }
    let n = n.max(2);
    let ray_samples: Vec<Complex64> = (0..n).map(|j| diagonal(l1.norm() * j as f64 / (n - 1) as f64)).collect();
    // On the diagonal the functional is exactly i·π|λ|/2.
    let ray_phase: Vec<f64> = ray_samples.iter().map(|z| PI * z.norm() / 2.0).collect();
    let zero = SpectralCurve {
        tag: CurveTag::Gamma0,
        samples: ray_samples,
        phase: ray_phase,
        clipped_at: (Endpoint::Origin, Endpoint::Knot),
        excluded: false,
        mirrored: false,
    };
    let b_arc = trace_over_c(&norm, CurveTag::GammaB, r.b, (l1.re, -l1.im), n, (Endpoint::B, Endpoint::Knot))?;
    let a_arc = trace_over_c(&norm, CurveTag::GammaA, r.a, (l2.re, -l2.im), n, (Endpoint::A, Endpoint::Knot))?;
    let mid = if (l2 - l1).norm() < 1e-12 {
        SpectralCurve {
            tag: CurveTag::GammaMinus,
            samples: vec![l1],
            phase: vec![sample(&norm, CurveTag::GammaMinus, l1)?],
            clipped_at: (Endpoint::Knot, Endpoint::Knot),
            excluded: false,
            mirrored: false,
        }
    } else {
        let mut arc = trace_over_c(&norm, CurveTag::GammaMinus, l1.re, (l2.re, -l2.im), n, (Endpoint::Knot, Endpoint::Knot))?;
        // The first sample sits on λ₁, not on the real axis.
        arc.samples[0] = l1;
        arc.phase[0] = sample(&norm, CurveTag::GammaMinus, l1)?;
        arc
    };
    let infty = trace_infinite(&norm, l2, depth_n, n)?;
    let root_scale = red.scale.sqrt();
    let curves: Vec<SpectralCurve> = [zero, b_arc, mid, a_arc, infty]
        .into_iter()
        .map(|mut c| {
            c.samples.iter_mut().for_each(|z| *z = red.to_original(*z));
            c.phase.iter_mut().for_each(|v| *v *= root_scale);
            if flipped {
                c.tag = match c.tag {
                    CurveTag::GammaA => CurveTag::GammaB,
                    CurveTag::GammaB => CurveTag::GammaA,
                    t => t,
                };
                c.clipped_at = (swap_end(c.clipped_at.0), swap_end(c.clipped_at.1));
            }
            c
        })
        .collect();
    let range = p.range();
    Ok(LimitGraph {
        profile: *p,
        family: Family::Quadratic,
        curves,
        knots: vec![
            Knot { name: "lambda_1", value: red.to_original(l1) },
            Knot { name: "lambda_2", value: red.to_original(l2) },
        ],
        endpoints: (range.a, range.b),
        depth,
    })
}

fn swap_end(e: Endpoint) -> Endpoint {
    match e {
        Endpoint::A => Endpoint::B,
        Endpoint::B => Endpoint::A,
        e => e,
    }
}

/// Knot of the linear profile.
pub fn couette_knot() -> Complex64 {
    Complex64::new(0.0, -1.0 / 3f64.sqrt())
}

/// Closed-form phase of the linear profile on each curve.
pub fn couette_phase(tag: CurveTag, lambda: Complex64) -> f64 {
    let lambda = lower_side(lambda);
    let k = Complex64::from_polar(2.0 / 3.0, FRAC_PI_4);
    let pow = |w: Complex64| w * w.sqrt();
    match tag {
        CurveTag::GammaPlus => (k * pow(1.0 - lambda)).im,
        CurveTag::GammaMinus => (-k * pow(-1.0 - lambda)).im,
        _ => phase::f_couette(lambda).re,
    }
}

fn couette_graph(depth: f64, n: usize) -> Result<LimitGraph, GraphError> {
    let knot = couette_knot();
    if depth <= -knot.im {
        return Err(GraphError::Domain(format!("depth {depth} does not reach the knot")));
    }
    let n = n.max(2);
    let segment = |tag: CurveTag, from: Complex64, to: Complex64, ends: (Endpoint, Endpoint)| {
        let samples: Vec<Complex64> = (0..n).map(|j| from + (to - from) * (j as f64 / (n - 1) as f64)).collect();
        let phase = samples.iter().map(|z| couette_phase(tag, *z)).collect();
        SpectralCurve { tag, samples, phase, clipped_at: ends, excluded: false, mirrored: false }
    };
    let one = Complex64::new(1.0, 0.0);
    let curves = vec![
        segment(CurveTag::GammaPlus, one, knot, (Endpoint::B, Endpoint::Knot)),
        segment(CurveTag::GammaMinus, -one, knot, (Endpoint::A, Endpoint::Knot)),
        segment(CurveTag::GammaInfty, knot, Complex64::new(0.0, -depth), (Endpoint::Knot, Endpoint::Depth)),
    ];
    Ok(LimitGraph {
        profile: Profile::linear(),
        family: Family::Couette,
        curves,
        knots: vec![Knot { name: "couette", value: knot }],
        endpoints: (-1.0, 1.0),
        depth,
    })
}

/// Limit spectral graph of a profile down to `Im λ = -depth`.
pub fn build_limit_graph(profile: &Profile, depth: f64, n: usize) -> Result<LimitGraph, GraphError> {
    if !(depth > 0.0) {
        return Err(GraphError::Domain(format!("depth {depth} must be positive")));
    }
    match Family::of(profile) {
        Family::Couette => couette_graph(depth, n),
        Family::Monotone => trace_monotone(profile, depth, n),
        Family::Quadratic => quadratic_graph(profile, depth, n),
    }
}

/// One retained curve of the graph of `profile`.
pub fn trace_curve(profile: &Profile, tag: CurveTag, depth: f64, n: usize) -> Result<SpectralCurve, GraphError> {
    let g = match Family::of(profile) {
        Family::Couette => trace_monotone(profile, depth, n)?,
        _ => build_limit_graph(profile, depth, n)?,
    };
    g.curve(tag).cloned().ok_or(GraphError::UnsupportedTag { tag: tag.as_str(), profile: profile.name() })
}

/// Unit vector of the Orr–Sommerfeld `t` axis, from `-1` toward `-i/√3`.
pub fn os_axis() -> Complex64 {
    Complex64::from_polar(1.0, -FRAC_PI_6)
}

/// `(t, γ)` frame point in the `λ`-plane.
pub fn os_point(t: f64, offset: f64) -> Complex64 {
    -1.0 + os_axis() * Complex64::new(t, offset)
}

fn os_sinh(alpha: f64, t: f64) -> Complex64 {
    ((2.0 - os_axis() * t) * alpha).sinh()
}

/// Amplitude `c(t)` of the Couette Orr–Sommerfeld branches.
pub fn os_amplitude(alpha: f64, t: f64) -> f64 {
    2.0 * PI.sqrt() * os_sinh(alpha, t).norm() / (2.0 * alpha).sinh()
}

/// Phase shift `φ(t)` of the Couette Orr–Sommerfeld branches.
pub fn os_phase_shift(alpha: f64, t: f64) -> f64 {
    os_sinh(alpha, t).arg() / (2.0 * PI)
}

/// Signed offset `γ±(t)` from the `t` axis.
pub fn os_offset(eps: f64, alpha: f64, t: f64, sign: f64) -> f64 {
    sign * (eps / t).sqrt() * (os_amplitude(alpha, t) * t.powf(0.75) / eps.powf(0.25)).ln()
}

/// Admissible `t` range for the Orr–Sommerfeld branches.
pub fn os_window(eps: f64) -> Result<(f64, f64), GraphError> {
    let l = eps.ln().abs();
    let lo = eps.cbrt() * l;
    let hi = 2.0 / 3f64.sqrt() - (2.0 / 3.0) * 0.75f64.powf(0.75) * eps.sqrt() * l;
    if !(eps > 0.0) || lo >= hi {
        return Err(GraphError::Domain(format!("empty t-window [{lo}, {hi}] for eps = {eps}")));
    }
    Ok((lo, hi))
}

/// Branch curves of the Couette Orr–Sommerfeld problem, their mirror images
/// and the imaginary ray, in `λ` coordinates.
pub fn couette_os_curves(eps: f64, alpha: f64, depth: f64, n: usize) -> Result<Vec<SpectralCurve>, GraphError> {
    couette_os_curves_over(eps, alpha, os_window(eps)?, depth, n)
}

/// [`couette_os_curves`] with the branches traced over an explicit `t` range.
pub fn couette_os_curves_over(
    eps: f64,
    alpha: f64,
    (lo, hi): (f64, f64),
    depth: f64,
    n: usize,
) -> Result<Vec<SpectralCurve>, GraphError> {
    if !(alpha > 0.0) {
        return Err(GraphError::Domain(format!("alpha = {alpha} must be positive")));
    }
    if !(lo > 0.0 && lo < hi) {
        return Err(GraphError::Domain(format!("bad t range [{lo}, {hi}]")));
    }
    let n = n.max(2);
    let mut out = Vec::new();
    for (tag, sign) in [(CurveTag::GammaPlus, 1.0), (CurveTag::GammaMinus, -1.0)] {
        let ts: Vec<f64> = (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect();
        let curve = SpectralCurve {
            tag,
            samples: ts.iter().map(|&t| os_point(t, os_offset(eps, alpha, t, sign))).collect(),
            phase: ts.iter().map(|&t| 2.0 / 3.0 * t.powf(1.5)).collect(),
            clipped_at: (Endpoint::Window, Endpoint::Window),
            excluded: false,
            mirrored: false,
        };
        out.push(curve.mirror());
        out.push(curve);
    }
    let knot = couette_knot();
    let ray: Vec<Complex64> = (0..n).map(|j| knot + (Complex64::new(0.0, -depth) - knot) * (j as f64 / (n - 1) as f64)).collect();
    out.push(SpectralCurve {
        tag: CurveTag::GammaInfty,
        phase: ray.iter().map(|z| phase::f_couette(*z).re).collect(),
        samples: ray,
        clipped_at: (Endpoint::Knot, Endpoint::Depth),
        excluded: false,
        mirrored: false,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strictly_increasing(v: &[f64]) -> bool {
        v.windows(2).all(|w| w[1] > w[0])
    }

    #[test]
    fn linear_traced_matches_segments() {
        let g = trace_monotone(&Profile::linear(), 2.0, 60).unwrap();
        let knot = g.knot("lambda_0").unwrap();
        assert!((knot - couette_knot()).norm() < 1e-9, "{knot}");
        let closed = couette_graph(2.0, 400).unwrap();
        for tag in [CurveTag::GammaPlus, CurveTag::GammaMinus, CurveTag::GammaInfty] {
            let c = g.curve(tag).unwrap();
            assert!(strictly_increasing(&c.phase), "{tag:?}");
            let reference = closed.curve(tag).unwrap();
            for (z, ph) in c.samples.iter().zip(&c.phase) {
                assert!(reference.distance(*z) < 1e-6, "{tag:?} {z}");
                assert!((couette_phase(tag, *z) - ph).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn shifted_square_topology() {
        let g = build_limit_graph(&Profile::shifted_square(), 2.0, 80).unwrap();
        assert_eq!(g.retained().count(), 3);
        let knot = g.knot("lambda_0").unwrap();
        let p = Profile::shifted_square();
        let q = phase::q_functionals(&p, knot).unwrap();
        assert!(q.q_plus.re.abs() <= 1e-8 && q.q_minus.re.abs() <= 1e-8 && q.q.re.abs() <= 2e-8, "{q:?}");
        let minus = g.curve(CurveTag::GammaMinus).unwrap();
        assert!(minus.start().norm() < 1e-15);
        assert_eq!(g.curve(CurveTag::GammaPlus).unwrap().start(), Complex64::new(1.0, 0.0));
        for c in g.retained() {
            assert!(strictly_increasing(&c.phase), "{:?}", c.tag);
            for z in &c.samples {
                let f = functional(&p, c.tag, *z).unwrap();
                assert!(f.re.abs() <= 1e-8, "{:?} {z} {f}", c.tag);
            }
        }
        // Graph-function property.
        for tag in [CurveTag::GammaPlus, CurveTag::GammaMinus] {
            let c = g.curve(tag).unwrap();
            assert!(c.samples.windows(2).all(|w| (w[1].re - w[0].re).abs() > 1e-9));
        }
        let inf = g.curve(CurveTag::GammaInfty).unwrap();
        assert!(inf.samples.windows(2).all(|w| w[1].im < w[0].im));
    }

    #[test]
    fn quadratic_diagonal_identity() {
        let p = Profile::quadratic(0.25).unwrap();
        for r in [0.05, 0.2, 0.6] {
            let lam = diagonal(r);
            let f = functional(&p, CurveTag::Gamma0, lam).unwrap();
            let exact = Complex64::from_polar(PI * r / 2.0, 3.0 * FRAC_PI_4) * Complex64::from_polar(1.0, -FRAC_PI_4);
            assert!((f - exact).norm() < 1e-10, "{f} {exact}");
        }
    }

    #[test]
    fn quadratic_graph_knots_and_curves() {
        let p = Profile::quadratic(1.0 / 7.0).unwrap();
        let g = build_limit_graph(&p, 2.0, 60).unwrap();
        assert_eq!(g.retained().count(), 5);
        let l1 = g.knot("lambda_1").unwrap();
        let l2 = g.knot("lambda_2").unwrap();
        assert!((l1.arg() + FRAC_PI_4).abs() < 1e-9);
        assert!((l2 - Complex64::new(0.341987, -0.448890)).norm() < 1e-5, "{l2}");
        for c in g.retained() {
            assert!(strictly_increasing(&c.phase), "{:?} {:?}", c.tag, c.phase);
        }
        let zero = g.curve(CurveTag::Gamma0).unwrap();
        assert!(zero.samples.iter().skip(1).all(|z| (z.arg() + FRAC_PI_4).abs() < 1e-12));
        // Knot continuity of the phases: γ₋ starts where γ₀ and γ_b end.
        let b = g.curve(CurveTag::GammaB).unwrap();
        let mid = g.curve(CurveTag::GammaMinus).unwrap();
        assert!((mid.phase[0] - zero.phase.last().unwrap() - b.phase.last().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn quadratic_mirror_swaps_arcs() {
        let g = build_limit_graph(&Profile::quadratic(0.2).unwrap(), 1.5, 30).unwrap();
        let h = build_limit_graph(&Profile::quadratic(-0.2).unwrap(), 1.5, 30).unwrap();
        assert_eq!(g.curve(CurveTag::GammaA).unwrap().samples, h.curve(CurveTag::GammaB).unwrap().samples);
        assert_eq!(h.curve(CurveTag::GammaB).unwrap().clipped_at.0, Endpoint::B);
    }

    #[test]
    fn symmetric_quadratic_has_one_knot_point() {
        let g = build_limit_graph(&Profile::quadratic(0.0).unwrap(), 1.5, 30).unwrap();
        assert_eq!(g.knot("lambda_1"), g.knot("lambda_2"));
        let inf = g.curve(CurveTag::GammaInfty).unwrap();
        assert!(inf.samples.iter().all(|z| z.re > 0.0));
    }

    #[test]
    fn os_curve_constants() {
        assert!((os_amplitude(1.0, 0.0) - 3.544908).abs() < 1e-6);
        assert_eq!(os_phase_shift(1.0, 0.0), 0.0);
        let eps = 1.0 / 4000.0;
        let curves = couette_os_curves(eps, 1.0, 3.0, 50).unwrap();
        assert_eq!(curves.len(), 5);
        let (lo, hi) = os_window(eps).unwrap();
        for j in 0..=20 {
            let t = lo + (hi - lo) * j as f64 / 20.0;
            assert!(os_offset(eps, 1.0, t, 1.0) * os_offset(eps, 1.0, t, -1.0) < 0.0);
        }
        assert!(os_window(0.05).is_err());
        let wide = couette_os_curves_over(eps, 1.0, (eps.cbrt(), hi), 3.0, 50).unwrap();
        assert_eq!(wide[1].end(), curves[1].end());
        assert!(wide[1].start().re < curves[1].start().re);
        assert!(couette_os_curves_over(eps, 1.0, (hi, lo), 3.0, 50).is_err());
    }
}
