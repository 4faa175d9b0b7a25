//! Asymptotic eigenvalue locations, their trust radii, counting functions,
//! and the exact Airy characteristic determinant of the Couette model.

use crate::airy::{self, airy_v_ln, AiryError};
use crate::graph::{self, CurveTag, Family, GraphError, LimitGraph};
use crate::phase::f_couette;
use crate::profiles::Profile;
use crate::roots::illinois;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantizeError {
    #[error("DomainError: {0}")]
    Domain(String),
    #[error("EmptyWindow: no index k gives a point on the retained arcs")]
    EmptyWindow,
    #[error(transparent)]
    Airy(#[from] AiryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("Newton refinement did not converge from {seed}")]
    NoConvergence { seed: Complex64 },
}

/// Default constant in front of every trust radius.
pub const DEFAULT_C: f64 = 10.0;
/// Smallest reported trust radius.
pub const RADIUS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub tag: CurveTag,
    pub k: i64,
    pub mu: Complex64,
    pub radius: f64,
    pub phase_value: f64,
    /// Reflection of a prediction across the imaginary axis.
    pub mirrored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouetteConstants {
    pub eps: f64,
    pub sigma: f64,
    pub delta_sigma: f64,
    pub d_sigma: Complex64,
    pub k0: i64,
    pub k1: i64,
    /// Centre `-i/√3` and radius `δ_σ` of the knot disk.
    pub knot_center: Complex64,
    pub knot_radius: f64,
    /// Main term `(√2·3^{3/4}σ/π)|ln ε|` of the knot-disk population.
    pub knot_count: f64,
}

impl CouetteConstants {
    pub fn in_knot_disk(&self, z: Complex64) -> bool {
        (z - self.knot_center).norm() <= self.knot_radius
    }
}

/// `φ(t) = (4/3) Re (2e^{iπ/6} - t)^{3/2}`.
pub fn couette_decay(t: f64) -> f64 {
    let w = Complex64::from_polar(2.0, FRAC_PI_6) - t;
    4.0 / 3.0 * (w * w.sqrt()).re
}

/// `ρ > 0` with `f(-iρ) = value`; `f` is increasing along the ray.
pub fn ray_abscissa(value: f64) -> Option<f64> {
    let g = |rho: f64| f_couette(Complex64::new(0.0, -rho)).re - value;
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return None;
        }
    }
    illinois(g, 0.0, hi, 1e-15)
}

/// Constants of the Couette model problem `iεy'' + xy = λy`.
pub fn couette_constants(eps: f64, sigma: f64) -> Result<CouetteConstants, QuantizeError> {
    if !(eps > 0.0 && eps < 0.1) {
        return Err(QuantizeError::Domain(format!("eps = {eps} outside (0, 0.1)")));
    }
    if !(sigma >= 0.5) {
        return Err(QuantizeError::Domain(format!("sigma = {sigma} below 0.5")));
    }
    let l = eps.ln().abs();
    let delta_sigma = sigma * eps.sqrt() * l;
    let knot = graph::couette_knot();
    let d_sigma = Complex64::new(0.0, -(1.0 / 3f64.sqrt() + delta_sigma));
    let quantum = PI * eps.sqrt();
    let k0 = (f_couette(d_sigma).re / quantum).floor() as i64 + 1;
    let limit = 2.0 / 3f64.sqrt() - delta_sigma;
    let cube = eps.cbrt();
    let mut k1 = 0i64;
    let zeros = airy::airy_zeros(((limit / cube).powf(1.5) * 0.5 + 8.0) as usize)?;
    for (i, r) in zeros.r.iter().enumerate() {
        if cube * r < limit {
            k1 = i as i64 + 1;
        }
    }
    Ok(CouetteConstants {
        eps,
        sigma,
        delta_sigma,
        d_sigma,
        k0,
        k1,
        knot_center: knot,
        knot_radius: delta_sigma,
        knot_count: 2f64.sqrt() * 3f64.powf(0.75) * sigma / PI * l,
    })
}

/// Predictions for the Couette model down to `Im λ = -depth`.
pub fn predict_model_couette(
    eps: f64,
    sigma: f64,
    depth: f64,
    c: f64,
) -> Result<(Vec<Prediction>, CouetteConstants), QuantizeError> {
    let k = couette_constants(eps, sigma)?;
    if k.k1 < 1 {
        return Err(QuantizeError::Domain(format!("no segment index fits for eps = {eps}")));
    }
    let zeros = airy::airy_zeros(k.k1 as usize + 1)?;
    let cube = eps.cbrt();
    let mut out = Vec::new();
    let left = Complex64::from_polar(1.0, -FRAC_PI_6);
    let quantum = PI * eps.sqrt();
    for idx in 1..=(k.k1 + 1) {
        let r = zeros.get(idx as usize).unwrap();
        let s = cube * r;
        let radius = (-couette_decay(s) / eps.sqrt()).exp().max(RADIUS_FLOOR);
        let phase_value = quantum * (idx as f64 - 0.25);
        let minus = -1.0 + left * s;
        out.push(Prediction { tag: CurveTag::GammaMinus, k: idx, mu: minus, radius, phase_value, mirrored: false });
        out.push(Prediction {
            tag: CurveTag::GammaPlus,
            k: idx,
            mu: Complex64::new(-minus.re, minus.im),
            radius,
            phase_value,
            mirrored: false,
        });
    }
    for idx in (k.k0 - 1).max(1).. {
        let value = quantum * idx as f64;
        let Some(rho) = ray_abscissa(value) else { break };
        if rho > depth {
            break;
        }
        out.push(Prediction {
            tag: CurveTag::GammaInfty,
            k: idx,
            mu: Complex64::new(0.0, -rho),
            radius: c * eps / rho,
            phase_value: value,
            mirrored: false,
        });
    }
    Ok((out, k))
}

/// Characteristic determinant of the Couette model divided by
/// `|v(ω̄ξ₁)v(ω̄ξ₂)|`: `v(ξ₁)v(ω̄ξ₂) - v(ω̄ξ₁)v(ξ₂)`,
/// `ξ₁,₂ = e^{iπ/6}ε^{-1/3}(∓1 - λ)`.
pub fn couette_determinant(lambda: Complex64, eps: f64) -> Result<Complex64, QuantizeError> {
    let (l1, l2, m) = determinant_logs(lambda, eps);
    let d = (l1 - m).exp() - (l2 - m).exp();
    if d.is_finite() {
        Ok(d)
    } else {
        Err(QuantizeError::Airy(AiryError::Overflow { xi: lambda, exponent: l1.re.max(l2.re) - m }))
    }
}

fn determinant_logs(lambda: Complex64, eps: f64) -> (Complex64, Complex64, f64) {
    let scale = Complex64::from_polar(eps.powf(-1.0 / 3.0), FRAC_PI_6);
    let x1 = scale * (-1.0 - lambda);
    let x2 = scale * (1.0 - lambda);
    let w = Complex64::from_polar(1.0, -2.0 * PI / 3.0);
    let (a1, b1, a2, b2) = (airy_v_ln(x1), airy_v_ln(w * x1), airy_v_ln(x2), airy_v_ln(w * x2));
    (a1 + b2, b1 + a2, (b1 + b2).re)
}

/// Newton iteration from `seed` to a zero of the Couette determinant, to
/// `1e-12` in `λ`.
pub fn refine_root(seed: Complex64, eps: f64) -> Result<Complex64, QuantizeError> {
    let g = |z: Complex64| couette_determinant(z, eps);
    let mut z = seed;
    for _ in 0..60 {
        let h = 1e-7 * (1.0 + z.norm());
        let d = (g(z + h)? - g(z - h)?) / (2.0 * h);
        let step = g(z)? / d;
        if !step.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 1e-12 * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    Err(QuantizeError::NoConvergence { seed })
}

/// Newton on `F(λ) = i·target` for the defining functional of `tag`.
fn on_curve(profile: &Profile, tag: CurveTag, target: f64, seed: Complex64) -> Option<Complex64> {
    let f = |z: Complex64| graph::defining_functional(profile, tag, z).ok().map(|v| v - Complex64::new(0.0, target));
    let mut z = seed;
    for _ in 0..30 {
        let h = 1e-6 * (1.0 + z.norm());
        let d = (f(z + h)? - f(z - h)?) / (2.0 * h);
        let step = f(z)? / d;
        if !step.is_finite() {
            return None;
        }
        z -= step;
        if step.norm() <= 1e-13 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// Quantized points on every retained curve of `graph`, away from the
/// `delta`-neighbourhoods of the endpoints and knots. `eps` is the small
/// parameter of `iε²y'' + q y = λ y`.
pub fn predict_wkb(
    profile: &Profile,
    eps: f64,
    graph: &LimitGraph,
    delta: f64,
    c: f64,
) -> Result<Vec<Prediction>, QuantizeError> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(QuantizeError::Domain(format!("eps = {eps} and delta = {delta} must be positive")));
    }
    let quantum = PI * eps;
    let mut avoid: Vec<Complex64> = graph.knots.iter().map(|k| k.value).collect();
    avoid.push(Complex64::new(graph.endpoints.0, 0.0));
    avoid.push(Complex64::new(graph.endpoints.1, 0.0));
    if graph.family == Family::Quadratic {
        avoid.push(Complex64::new(profile.range().floor, 0.0));
    }
    let far = |z: Complex64| avoid.iter().all(|a| (z - a).norm() > delta);
    let red = profile.reduction_or_identity();
    let mut out = Vec::new();
    for curve in graph.retained().filter(|c| !c.mirrored && c.samples.len() > 1) {
        let offset = curve.tag.phase_offset();
        let (p0, p1) = (curve.phase[0], *curve.phase.last().unwrap());
        let k_lo = (p0 / quantum - offset).ceil() as i64;
        let k_hi = (p1 / quantum - offset).floor() as i64;
        for k in k_lo.max(0)..=k_hi {
            let target = quantum * (k as f64 + offset);
            let mu = if curve.tag == CurveTag::Gamma0 {
                red.to_original(Complex64::from_polar((2 * k + 1) as f64 * eps / red.scale.sqrt(), -FRAC_PI_4))
            } else {
                let Some(seed) = curve.point_at_phase(target) else { continue };
                match graph.family {
                    Family::Couette => seed,
                    _ => on_curve(profile, curve.tag, target, seed).unwrap_or(seed),
                }
            };
            if !far(mu) {
                continue;
            }
            out.push(Prediction { tag: curve.tag, k, mu, radius: c * eps * eps, phase_value: target, mirrored: false });
        }
    }
    if out.is_empty() {
        return Err(QuantizeError::EmptyWindow);
    }
    Ok(out)
}

/// `t_k^±` of the Couette Orr–Sommerfeld branches.
pub fn os_abscissa(eps: f64, alpha: f64, k: i64, sign: f64) -> f64 {
    let shift = graph::os_phase_shift(alpha, (3.0 * PI * eps.sqrt() * k as f64).powf(2.0 / 3.0));
    eps.cbrt() * (3.0 * PI * (k as f64 - 0.25 - sign * shift)).max(0.0).powf(2.0 / 3.0)
}

/// Predictions for the Couette Orr–Sommerfeld problem with `ε = 1/(αR)`:
/// branch points `μ_k^±`, their mirror images, and the imaginary ray.
pub fn predict_os_couette(
    alpha: f64,
    reynolds: f64,
    sigma: f64,
    depth: f64,
    c: f64,
) -> Result<Vec<Prediction>, QuantizeError> {
    if !(alpha > 0.0 && reynolds > 0.0) {
        return Err(QuantizeError::Domain(format!("alpha = {alpha}, R = {reynolds} must be positive")));
    }
    let eps = 1.0 / (alpha * reynolds);
    let (lo, hi) = graph::os_window(eps)?;
    let mut out = Vec::new();
    for (tag, sign) in [(CurveTag::GammaPlus, 1.0), (CurveTag::GammaMinus, -1.0)] {
        for k in 1.. {
            let t = os_abscissa(eps, alpha, k, sign);
            if t > hi {
                break;
            }
            if t < lo {
                continue;
            }
            let mu = graph::os_point(t, graph::os_offset(eps, alpha, t, sign));
            let radius = c * eps.powf(0.75) * t.powf(-1.25);
            let phase_value = 2.0 / 3.0 * t.powf(1.5);
            out.push(Prediction { tag, k, mu, radius, phase_value, mirrored: false });
            out.push(Prediction { tag, k, mu: Complex64::new(-mu.re, mu.im), radius, phase_value, mirrored: true });
        }
    }
    if out.is_empty() {
        return Err(QuantizeError::EmptyWindow);
    }
    let (model, _) = predict_model_couette(eps, sigma, depth, c)?;
    out.extend(model.into_iter().filter(|p| p.tag == CurveTag::GammaInfty));
    Ok(out)
}

/// Main term of the eigenvalue counting function at a point of a curve:
/// its phase over `π√h`, `h` the coefficient of `i y''`.
pub fn counting_function(profile: &Profile, tag: CurveTag, lambda: Complex64, coupling: f64) -> Result<f64, QuantizeError> {
    let quantum = PI * coupling.sqrt();
    let phase = match Family::of(profile) {
        Family::Couette => graph::couette_phase(tag, lambda),
        _ => {
            let f = graph::defining_functional(profile, tag, lambda)?;
            f.im
        }
    };
    Ok(phase / quantum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_limit_graph;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn decay_closed_forms() {
        assert!(couette_decay(2.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((couette_decay(0.0) - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn model_predictions() {
        let (p, k) = predict_model_couette(1e-3, 0.5, 6.0, DEFAULT_C).unwrap();
        let first = p.iter().find(|p| p.tag == CurveTag::GammaMinus && p.k == 1).unwrap();
        assert!((first.mu - c(-0.797513, -0.116905)).norm() < 1.5e-6, "{}", first.mu);
        let mirror = p.iter().find(|p| p.tag == CurveTag::GammaPlus && p.k == 1).unwrap();
        assert!((mirror.mu - c(0.797513, -0.116905)).norm() < 1.5e-6);
        assert!(p.iter().all(|p| p.radius > 0.0));
        assert!(k.k1 >= 1 && k.k0 > 1);
        let rays: Vec<f64> = p.iter().filter(|p| p.tag == CurveTag::GammaInfty).map(|p| -p.mu.im).collect();
        assert!(rays.windows(2).all(|w| w[1] > w[0]));
        // Spacing against f' ≈ 1/√ρ.
        let j = rays.len() - 2;
        let gap = rays[j + 1] - rays[j];
        let expected = PI * 1e-3f64.sqrt() * rays[j].sqrt();
        assert!((gap / expected - 1.0).abs() < 0.05, "{gap} {expected}");
    }

    #[test]
    fn ray_inverse() {
        let value = f_couette(c(0.0, -4.0)).re;
        assert!((ray_abscissa(value).unwrap() - 4.0).abs() < 1e-12);
        let eps = (value / (40.0 * PI)).powi(2);
        assert!((ray_abscissa(40.0 * PI * eps.sqrt()).unwrap() - 4.0).abs() < 1e-3);
    }

    #[test]
    fn determinant_roots_and_symmetry() {
        let eps = 1e-3;
        let (p, k) = predict_model_couette(eps, 0.5, 6.0, DEFAULT_C).unwrap();
        let seed = p.iter().find(|p| p.tag == CurveTag::GammaMinus && p.k == 1).unwrap().mu;
        let root = refine_root(seed, eps).unwrap();
        assert!((root - seed).norm() < 1e-3);
        let scale = couette_determinant(root + 1e-3, eps).unwrap().norm();
        assert!(couette_determinant(root, eps).unwrap().norm() <= 1e-8 * scale);
        let mirrored = refine_root(c(-seed.re, seed.im), eps).unwrap();
        assert!((mirrored - c(-root.re, root.im)).norm() < 1e-10);
        for j in 1..=5 {
            let s = p.iter().find(|p| p.tag == CurveTag::GammaInfty && p.k == k.k0 + j).unwrap().mu;
            let r = refine_root(s, eps).unwrap();
            assert!(r.re.abs() <= 1e-10, "{r}");
        }
    }

    #[test]
    fn wkb_quadratic_diagonal() {
        let p = Profile::quadratic(0.25).unwrap();
        let g = build_limit_graph(&p, 1.0, 60).unwrap();
        let preds = predict_wkb(&p, 0.02, &g, 0.01, DEFAULT_C).unwrap();
        let z0 = preds.iter().find(|p| p.tag == CurveTag::Gamma0 && p.k == 0).unwrap();
        assert!((z0.mu - c(0.0141421356, -0.0141421356)).norm() < 1e-9);
    }

    #[test]
    fn wkb_shifted_square() {
        let p = Profile::shifted_square();
        let eps = 0.05;
        let g = build_limit_graph(&p, 2.0, 120).unwrap();
        let preds = predict_wkb(&p, eps, &g, 0.05, DEFAULT_C).unwrap();
        let ray: Vec<&Prediction> = preds.iter().filter(|p| p.tag == CurveTag::GammaInfty).collect();
        assert!(ray.len() > 3);
        for w in ray.windows(2) {
            assert!((w[1].phase_value - w[0].phase_value - PI * eps).abs() < 1e-12);
        }
        for pr in &preds {
            let f = graph::defining_functional(&p, pr.tag, pr.mu).unwrap();
            assert!(f.re.abs() < 1e-9 && (f.im - pr.phase_value).abs() < 1e-9, "{pr:?}");
            assert!(g.curve(pr.tag).unwrap().distance(pr.mu) < 1e-4);
        }
    }

    #[test]
    fn os_predictions() {
        assert!((os_abscissa(1e-4, 1.0, 5, 1.0) - 1e-4f64.cbrt() * (3.0 * PI * 4.75).powf(2.0 / 3.0)).abs() > 0.0);
        let eps: f64 = 1.0 / 4000.0;
        let p = predict_os_couette(1.0, 4000.0, 0.5, 3.0, DEFAULT_C).unwrap();
        for pr in p.iter().filter(|p| p.tag != CurveTag::GammaInfty && !p.mirrored) {
            assert!(p.iter().any(|q| q.mirrored && q.k == pr.k && q.tag == pr.tag && q.mu == c(-pr.mu.re, pr.mu.im)));
            let t = ((pr.mu + 1.0) * Complex64::from_polar(1.0, FRAC_PI_6)).re;
            let offset = ((pr.mu + 1.0) * Complex64::from_polar(1.0, FRAC_PI_6)).im;
            let sign = if pr.tag == CurveTag::GammaPlus { 1.0 } else { -1.0 };
            assert!(offset * sign > 0.0);
            assert!((offset - graph::os_offset(eps, 1.0, t, sign)).abs() < 1e-12);
        }
    }

    #[test]
    fn counting_examples() {
        let eps = 1e-3;
        let n = counting_function(&Profile::linear(), CurveTag::GammaInfty, c(0.0, -4.0), eps).unwrap();
        assert!((n - 40.37).abs() < 0.01, "{n}");
        let n = counting_function(&Profile::linear(), CurveTag::GammaInfty, graph::couette_knot(), eps).unwrap();
        assert!((n - 1.654409 / (PI * eps.sqrt())).abs() < 1e-3, "{n}");
        let p = Profile::quadratic(0.25).unwrap();
        let lam = Complex64::from_polar(0.3, -FRAC_PI_4);
        let n = counting_function(&p, CurveTag::Gamma0, lam, 0.02 * 0.02).unwrap();
        assert!((n - 0.3 / 0.04).abs() < 1e-9, "{n}");
    }
}
