//! Velocity profiles `q(x)` on `[-1, 1]`, their analytic continuation and
//! turning points.
//!
//! Quadratic profiles are stored in the normalized form `(x - β)²` with an
//! optional affine [`Reduction`] back to the original coefficients:
//! `q_orig(x) = scale·(x - β)² + shift`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("NoRootInDomain: no turning point for λ = {lambda} (residual {residual:e})")]
    NoRootInDomain { lambda: Complex64, residual: f64 },
    #[error("invalid profile: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `q(x) = x`, plane Couette flow.
    Linear,
    /// `q(x) = (x - β)²`.
    Quadratic { beta: f64 },
    /// `q(x) = (x + 1)² / 4`.
    ShiftedSquare,
    /// `q(x) = sin(πx/2)`.
    HalfSine,
}

/// Affine map between a normalized quadratic and the original one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub scale: f64,
    pub shift: f64,
}

impl Reduction {
    pub const IDENTITY: Reduction = Reduction { scale: 1.0, shift: 0.0 };

    pub fn to_original(&self, lambda: Complex64) -> Complex64 {
        lambda * self.scale + self.shift
    }

    pub fn to_normalized(&self, lambda: Complex64) -> Complex64 {
        (lambda - self.shift) / self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub kind: ProfileKind,
    pub reduction: Option<Reduction>,
}

/// Values of `q` at the interval ends and its minimum on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRange {
    /// `q(-1)`.
    pub a: f64,
    /// `q(1)`.
    pub b: f64,
    /// `min q` over the interval: the left edge of the semistrip.
    pub floor: f64,
}

impl ProfileRange {
    /// Real bounds of the semistrip `floor ≤ Re λ ≤ max(a, b)`.
    pub fn strip(&self) -> (f64, f64) {
        (self.floor, self.a.max(self.b))
    }
}

impl Profile {
    pub fn linear() -> Self {
        Profile { kind: ProfileKind::Linear, reduction: None }
    }

    pub fn shifted_square() -> Self {
        Profile { kind: ProfileKind::ShiftedSquare, reduction: None }
    }

    pub fn half_sine() -> Self {
        Profile { kind: ProfileKind::HalfSine, reduction: None }
    }

    pub fn quadratic(beta: f64) -> Result<Self, ProfileError> {
        if !(beta > -1.0 && beta < 1.0) {
            return Err(ProfileError::Invalid(format!("beta = {beta} must lie in (-1, 1)")));
        }
        Ok(Profile { kind: ProfileKind::Quadratic { beta }, reduction: None })
    }

    /// `q(x) = c2·x² + c1·x + c0` with `c2 > 0`, stored as `scale·(x-β)² + shift`.
    pub fn from_quadratic_coefficients(c2: f64, c1: f64, c0: f64) -> Result<Self, ProfileError> {
        if !(c2 > 0.0) {
            return Err(ProfileError::Invalid(format!("leading coefficient {c2} must be positive")));
        }
        let beta = -c1 / (2.0 * c2);
        let shift = c0 - c1 * c1 / (4.0 * c2);
        let mut p = Profile::quadratic(beta)?;
        p.reduction = Some(Reduction { scale: c2, shift });
        Ok(p)
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Result<Self, ProfileError> {
        if !matches!(self.kind, ProfileKind::Quadratic { .. }) {
            return Err(ProfileError::Invalid("only quadratic profiles carry a reduction".into()));
        }
        if !(reduction.scale > 0.0) {
            return Err(ProfileError::Invalid(format!("scale {} must be positive", reduction.scale)));
        }
        self.reduction = Some(reduction);
        Ok(self)
    }

    /// The same profile without its reduction.
    pub fn normalized(&self) -> Profile {
        Profile { kind: self.kind, reduction: None }
    }

    pub fn reduction_or_identity(&self) -> Reduction {
        self.reduction.unwrap_or(Reduction::IDENTITY)
    }

    pub fn is_monotone(&self) -> bool {
        !matches!(self.kind, ProfileKind::Quadratic { .. })
    }

    /// Short machine name used in reports and file names.
    pub fn name(&self) -> &'static str {
        match self.kind {
            ProfileKind::Linear => "linear",
            ProfileKind::Quadratic { .. } => "quadratic",
            ProfileKind::ShiftedSquare => "shifted_square",
            ProfileKind::HalfSine => "half_sine",
        }
    }

    fn base(&self, z: Complex64) -> Complex64 {
        match self.kind {
            ProfileKind::Linear => z,
            ProfileKind::Quadratic { beta } => (z - beta) * (z - beta),
            ProfileKind::ShiftedSquare => (z + 1.0) * (z + 1.0) * 0.25,
            ProfileKind::HalfSine => (z * FRAC_PI_2).sin(),
        }
    }

    fn base_d1(&self, z: Complex64) -> Complex64 {
        match self.kind {
            ProfileKind::Linear => Complex64::new(1.0, 0.0),
            ProfileKind::Quadratic { beta } => (z - beta) * 2.0,
            ProfileKind::ShiftedSquare => (z + 1.0) * 0.5,
            ProfileKind::HalfSine => (z * FRAC_PI_2).cos() * FRAC_PI_2,
        }
    }

    fn base_d2(&self, z: Complex64) -> Complex64 {
        match self.kind {
            ProfileKind::Linear => Complex64::new(0.0, 0.0),
            ProfileKind::Quadratic { .. } => Complex64::new(2.0, 0.0),
            ProfileKind::ShiftedSquare => Complex64::new(0.5, 0.0),
            ProfileKind::HalfSine => -(z * FRAC_PI_2).sin() * (FRAC_PI_2 * FRAC_PI_2),
        }
    }

    /// `q(z)` including the reduction.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let r = self.reduction_or_identity();
        self.base(z) * r.scale + r.shift
    }

    pub fn eval_d1(&self, z: Complex64) -> Complex64 {
        self.base_d1(z) * self.reduction_or_identity().scale
    }

    pub fn eval_d2(&self, z: Complex64) -> Complex64 {
        self.base_d2(z) * self.reduction_or_identity().scale
    }

    /// Real-argument shortcut for `eval`.
    pub fn q(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).re
    }

    pub fn q_d2(&self, x: f64) -> f64 {
        self.eval_d2(Complex64::new(x, 0.0)).re
    }

    pub fn range(&self) -> ProfileRange {
        let r = self.reduction_or_identity();
        let (a, b, floor) = match self.kind {
            ProfileKind::Linear => (-1.0, 1.0, -1.0),
            ProfileKind::Quadratic { beta } => ((-1.0 - beta).powi(2), (1.0 - beta).powi(2), 0.0),
            ProfileKind::ShiftedSquare => (0.0, 1.0, 0.0),
            ProfileKind::HalfSine => (-1.0, 1.0, -1.0),
        };
        ProfileRange {
            a: a * r.scale + r.shift,
            b: b * r.scale + r.shift,
            floor: floor * r.scale + r.shift,
        }
    }

    /// Roots of `q(ξ) = λ` relevant to the interval.
    ///
    /// Monotone kinds return the single root continuing the real inverse
    /// into the lower half-plane; quadratics return `β ± √λ'` (principal
    /// root, `λ'` the normalized value).
    pub fn turning_points(&self, lambda: Complex64) -> Result<Vec<Complex64>, ProfileError> {
        let lam = self.reduction_or_identity().to_normalized(lower_side(lambda));
        let norm = self.normalized();
        let roots = match self.kind {
            ProfileKind::Linear => vec![lam],
            ProfileKind::Quadratic { beta } => {
                let s = lam.sqrt();
                vec![beta + s, beta - s]
            }
            ProfileKind::ShiftedSquare => vec![lam.sqrt() * 2.0 - 1.0],
            ProfileKind::HalfSine => vec![lam.asin() * (2.0 / PI)],
        };
        roots
            .into_iter()
            .map(|z| norm.polish_root(z, lam))
            .collect()
    }

    /// Continue the real inverse of a monotone profile from a real point to
    /// `lambda` by Newton steps along a straight `λ`-path.
    pub fn continue_real_inverse(&self, lambda: Complex64) -> Result<Complex64, ProfileError> {
        let lam = self.reduction_or_identity().to_normalized(lambda);
        let norm = self.normalized();
        let (a, b) = (norm.q(-1.0), norm.q(1.0));
        let (lo, hi) = (a.min(b), a.max(b));
        // Stay clear of endpoints where the derivative may vanish.
        let pad = 1e-3 * (hi - lo);
        let c = lam.re.clamp(lo + pad, hi - pad);
        let x0 = crate::roots::illinois(|x| norm.q(x) - c, -1.0, 1.0, 1e-15).ok_or(
            ProfileError::NoRootInDomain { lambda, residual: f64::INFINITY },
        )?;
        let mut z = Complex64::new(x0, 0.0);
        let steps = 16 + (8.0 * (lam - c).norm()) as usize;
        for j in 1..=steps {
            let target = c + (lam - c) * (j as f64 / steps as f64);
            z = norm.newton(z, target, 50).ok_or(ProfileError::NoRootInDomain {
                lambda,
                residual: (norm.eval(z) - target).norm(),
            })?;
        }
        Ok(z)
    }

    fn newton(&self, mut z: Complex64, target: Complex64, iters: usize) -> Option<Complex64> {
        let tol = 1e-14 * (1.0 + target.norm());
        for _ in 0..iters {
            let r = self.eval(z) - target;
            if r.norm() <= tol {
                return Some(z);
            }
            let d = self.eval_d1(z);
            if d.norm() == 0.0 {
                return None;
            }
            z -= r / d;
        }
        ((self.eval(z) - target).norm() <= 1e-12 * (1.0 + target.norm())).then_some(z)
    }

    fn polish_root(&self, z: Complex64, lam: Complex64) -> Result<Complex64, ProfileError> {
        let tol = 1e-12 * (1.0 + lam.norm());
        let residual = (self.eval(z) - lam).norm();
        if residual <= tol {
            return Ok(z);
        }
        // A closed form can lose digits near a degenerate point; Newton fixes it.
        match self.newton(z, lam, 50) {
            Some(w) => Ok(w),
            None => self
                .continue_real_inverse(lam)
                .ok()
                .filter(|_| self.is_monotone())
                .ok_or(ProfileError::NoRootInDomain { lambda: lam, residual }),
        }
    }
}

/// Put a real `λ` on the lower side of the branch cuts.
pub(crate) fn lower_side(lambda: Complex64) -> Complex64 {
    if lambda.im == 0.0 {
        Complex64::new(lambda.re, -0.0)
    } else {
        lambda
    }
}

/// Profile names accepted in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Linear,
    Quadratic,
    ShiftedSquare,
    HalfSine,
}

impl std::str::FromStr for KindName {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(KindName::Linear),
            "quadratic" => Ok(KindName::Quadratic),
            "shifted_square" => Ok(KindName::ShiftedSquare),
            "half_sine" => Ok(KindName::HalfSine),
            other => Err(ProfileError::Invalid(format!("unknown profile kind '{other}'"))),
        }
    }
}

/// Serialized profile description used by configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: KindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
}

impl TryFrom<ProfileSpec> for Profile {
    type Error = ProfileError;

    fn try_from(spec: ProfileSpec) -> Result<Self, Self::Error> {
        let simple = |p: Profile| {
            if spec.beta.is_some() || spec.scale.is_some() || spec.shift.is_some() {
                Err(ProfileError::Invalid(format!(
                    "beta/scale/shift only apply to quadratic profiles, not {}",
                    p.name()
                )))
            } else {
                Ok(p)
            }
        };
        match spec.kind {
            KindName::Linear => simple(Profile::linear()),
            KindName::ShiftedSquare => simple(Profile::shifted_square()),
            KindName::HalfSine => simple(Profile::half_sine()),
            KindName::Quadratic => {
                let beta = spec
                    .beta
                    .ok_or_else(|| ProfileError::Invalid("quadratic profile needs beta".into()))?;
                let p = Profile::quadratic(beta)?;
                if spec.scale.is_none() && spec.shift.is_none() {
                    return Ok(p);
                }
                p.with_reduction(Reduction {
                    scale: spec.scale.unwrap_or(1.0),
                    shift: spec.shift.unwrap_or(0.0),
                })
            }
        }
    }
}

impl From<Profile> for ProfileSpec {
    fn from(p: Profile) -> Self {
        let (kind, beta) = match p.kind {
            ProfileKind::Linear => (KindName::Linear, None),
            ProfileKind::Quadratic { beta } => (KindName::Quadratic, Some(beta)),
            ProfileKind::ShiftedSquare => (KindName::ShiftedSquare, None),
            ProfileKind::HalfSine => (KindName::HalfSine, None),
        };
        ProfileSpec {
            kind,
            beta,
            scale: p.reduction.map(|r| r.scale),
            shift: p.reduction.map(|r| r.shift),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Profile::linear().eval(c(0.3, 0.0)), c(0.3, 0.0));
        let fig = Profile::from_quadratic_coefficients(49.0 / 64.0, -14.0 / 64.0, 1.0 / 64.0).unwrap();
        assert!((fig.q(1.0) - 9.0 / 16.0).abs() < 1e-15);
        match fig.kind {
            ProfileKind::Quadratic { beta } => assert!((beta - 1.0 / 7.0).abs() < 1e-15),
            _ => unreachable!(),
        }
        assert!(fig.reduction.unwrap().shift.abs() < 1e-16);
        assert_eq!(Profile::shifted_square().q(-1.0), 0.0);
    }

    #[test]
    fn ranges() {
        let r = Profile::linear().range();
        assert_eq!((r.a, r.b), (-1.0, 1.0));
        let r = Profile::quadratic(0.25).unwrap().range();
        assert_eq!((r.a, r.b, r.floor), (1.5625, 0.5625, 0.0));
        let r = Profile::shifted_square().range();
        assert_eq!((r.a, r.b), (0.0, 1.0));
    }

    #[test]
    fn turning_point_examples() {
        let lam = c(-0.2, -0.3);
        assert_eq!(Profile::linear().turning_points(lam).unwrap(), vec![lam]);
        let tp = Profile::shifted_square().turning_points(c(0.25, 0.0)).unwrap();
        assert!(tp[0].norm() < 1e-15);
        let q = Profile::quadratic(0.0).unwrap();
        let tp = q.turning_points(c(0.0, -1.0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((tp[0] - c(s, -s)).norm() < 1e-12);
        assert!((tp[1] - c(-s, s)).norm() < 1e-12);
        for z in tp {
            assert!((q.eval(z) - c(0.0, -1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_forms_follow_real_inverse() {
        for p in [Profile::shifted_square(), Profile::half_sine(), Profile::linear()] {
            let (lo, hi) = p.range().strip();
            for &(fr, t) in &[(0.3, 0.2), (0.7, 1.5), (0.05, 3.0), (0.95, 0.01)] {
                let lam = c(lo + fr * (hi - lo), -t);
                let a = p.turning_points(lam).unwrap()[0];
                let b = p.continue_real_inverse(lam).unwrap();
                assert!((a - b).norm() < 1e-10, "{} {lam}: {a} vs {b}", p.name());
            }
        }
    }

    #[test]
    fn real_lambda_outside_range_takes_lower_limit() {
        let p = Profile::shifted_square();
        let z = p.turning_points(c(-0.1, 0.0)).unwrap()[0];
        let w = p.turning_points(c(-0.1, -1e-12)).unwrap()[0];
        assert!((z - w).norm() < 1e-6);
        let p = Profile::half_sine();
        let z = p.turning_points(c(1.2, 0.0)).unwrap()[0];
        let w = p.turning_points(c(1.2, -1e-12)).unwrap()[0];
        assert!((z - w).norm() < 1e-5, "{z} {w}");
    }

    #[test]
    fn spec_round_trip() {
        let p = Profile::from_quadratic_coefficients(49.0 / 64.0, -14.0 / 64.0, 1.0 / 64.0).unwrap();
        let spec = ProfileSpec::from(p);
        let json = serde_json_like(&spec);
        assert!(json.contains("quadratic"));
        assert_eq!(Profile::try_from(spec).unwrap(), p);
        let bad = ProfileSpec { kind: KindName::Linear, beta: Some(0.1), scale: None, shift: None };
        assert!(Profile::try_from(bad).is_err());
    }

    fn serde_json_like(spec: &ProfileSpec) -> String {
        format!("{:?}", spec).to_lowercase()
    }
}
