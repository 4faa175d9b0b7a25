//! Chebyshev collocation for the second-order model operators and the
//! fourth-order Orr–Sommerfeld pencil.

use crate::linalg::{self, CMat, LinalgError, RMat, Spectrum};
use crate::profiles::Profile;
use crate::SignConvention;
use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("polynomial degree {0} outside 2..=2048")]
    InvalidDegree(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("boundary condition {0:?} is not available for this operator")]
    UnsupportedBoundary(Boundary),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Chebyshev–Gauss–Lobatto nodes `x_j = cos(πj/n)` with dense
/// differentiation matrices up to fourth order.
#[derive(Debug, Clone)]
pub struct CollocationGrid {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub d1: RMat,
    pub d2: RMat,
    pub d3: RMat,
    pub d4: RMat,
}

fn build_grid(n: usize) -> CollocationGrid {
    let m = n + 1;
    // sin form keeps the nodes exactly antisymmetric.
    let nodes: Vec<f64> = (0..m).map(|j| (PI * (n as f64 - 2.0 * j as f64) / (2.0 * n as f64)).sin()).collect();
    let theta: Vec<f64> = (0..m).map(|j| PI * j as f64 / n as f64).collect();
    let mut z = RMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let dx = 2.0 * ((theta[i] + theta[j]) / 2.0).sin() * ((theta[j] - theta[i]) / 2.0).sin();
                z[(i, j)] = 1.0 / dx;
            }
        }
    }
    let weight = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
    let c = RMat::from_fn(m, m, |i, j| {
        let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        s * weight(i) / weight(j)
    });
    let mut d = RMat::identity(m);
    let mut out = Vec::with_capacity(4);
    for ell in 1..=4 {
        let mut next = RMat::zeros(m, m);
        for i in 0..m {
            let dii = d[(i, i)];
            let mut sum = 0.0;
            for j in 0..m {
                if i != j {
                    let v = ell as f64 * z[(i, j)] * (c[(i, j)] * dii - d[(i, j)]);
                    next[(i, j)] = v;
                    sum += v;
                }
            }
            next[(i, i)] = -sum;
        }
        out.push(next.clone());
        d = next;
    }
    let mut it = out.into_iter();
    CollocationGrid {
        n,
        nodes,
        d1: it.next().unwrap(),
        d2: it.next().unwrap(),
        d3: it.next().unwrap(),
        d4: it.next().unwrap(),
    }
}

/// Grid of degree `n`, built once per process and shared.
pub fn collocation_grid(n: usize) -> Result<Arc<CollocationGrid>, DiscretizeError> {
    if !(2..=2048).contains(&n) {
        return Err(DiscretizeError::InvalidDegree(n));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<CollocationGrid>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(g) = cache.lock().unwrap().get(&n) {
        return Ok(g.clone());
    }
    let grid = Arc::new(build_grid(n));
    cache.lock().unwrap().entry(n).or_insert_with(|| grid.clone());
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `y(±1) = 0`.
    Dirichlet,
    /// `y'(-1) = 0`, `y(1) = 0`.
    MixedLeftNeumann,
    /// `y(±1) = y'(±1) = 0`.
    Clamped,
}

/// How the small parameter enters the model operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `iε y''`: the Couette model.
    Linear,
    /// `iε² y''`: monotone and quadratic profiles.
    Squared,
}

impl Normalization {
    pub fn for_profile(profile: &Profile) -> Normalization {
        if matches!(profile.kind, crate::profiles::ProfileKind::Linear) {
            Normalization::Linear
        } else {
            Normalization::Squared
        }
    }

    /// Coefficient of `i y''` for a given `ε`.
    pub fn coupling(self, eps: f64) -> f64 {
        match self {
            Normalization::Linear => eps,
            Normalization::Squared => eps * eps,
        }
    }

    /// Inverse of [`coupling`](Self::coupling).
    pub fn eps(self, coupling: f64) -> f64 {
        match self {
            Normalization::Linear => coupling,
            Normalization::Squared => coupling.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "operator", rename_all = "snake_case")]
pub enum PencilParams {
    Model { coupling: f64 },
    OrrSommerfeld { alpha: f64, reynolds: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PencilMeta {
    pub profile: Profile,
    pub params: PencilParams,
    pub n: usize,
    pub bc: Boundary,
    pub sign_convention: SignConvention,
}

/// `A x = λ B x`; `b = None` stands for the identity.
#[derive(Debug, Clone)]
pub struct OperatorPencil {
    pub a: CMat,
    pub b: Option<CMat>,
    pub meta: PencilMeta,
}

impl OperatorPencil {
    pub fn dimension(&self) -> usize {
        self.a.rows()
    }

    pub fn b_matrix(&self) -> CMat {
        self.b.clone().unwrap_or_else(|| CMat::identity(self.a.rows()))
    }

    pub fn solve(&self) -> Result<Spectrum, DiscretizeError> {
        let mut s = match &self.b {
            None => linalg::eigenvalues(&self.a)?,
            Some(b) => linalg::generalized_eigenvalues(&self.a, b)?,
        };
        s.meta.pencil = Some(self.meta.clone());
        Ok(s)
    }
}

/// `sign·i·coupling·D² + diag(potential)` on the grid of degree `n`.
pub fn assemble_second_order(
    n: usize,
    coupling: f64,
    potential: impl Fn(f64) -> f64,
    bc: Boundary,
    sign: SignConvention,
) -> Result<CMat, DiscretizeError> {
    if !(coupling > 0.0) {
        return Err(DiscretizeError::InvalidParameter(format!("coupling {coupling} must be positive")));
    }
    let g = collocation_grid(n)?;
    let k = Complex64::new(0.0, sign.factor() * coupling);
    let dim = n - 1;
    let mut m = CMat::zeros(dim, dim);
    match bc {
        Boundary::Dirichlet => {
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] = k * g.d2[(i + 1, j + 1)];
                }
            }
        }
        Boundary::MixedLeftNeumann => {
            // Eliminate y(-1) through the derivative row at x = -1.
            let dn = g.d1[(n, n)];
            for i in 0..dim {
                let coupling_to_end = g.d2[(i + 1, n)];
                for j in 0..dim {
                    let elim = -g.d1[(n, j + 1)] / dn;
                    m[(i, j)] = k * (g.d2[(i + 1, j + 1)] + coupling_to_end * elim);
                }
            }
        }
        Boundary::Clamped => return Err(DiscretizeError::UnsupportedBoundary(bc)),
    }
    for i in 0..dim {
        m[(i, i)] += potential(g.nodes[i + 1]);
    }
    Ok(m)
}

/// Model operator `i·coupling·y'' + q(x) y` for a profile.
pub fn assemble_model(
    profile: &Profile,
    coupling: f64,
    n: usize,
    bc: Boundary,
    sign: SignConvention,
) -> Result<OperatorPencil, DiscretizeError> {
    let a = assemble_second_order(n, coupling, |x| profile.q(x), bc, sign)?;
    Ok(OperatorPencil {
        a,
        b: None,
        meta: PencilMeta { profile: *profile, params: PencilParams::Model { coupling }, n, bc, sign_convention: sign },
    })
}

/// Orr–Sommerfeld pencil with clamped ends, imposed through `y = (1 - x²) p`
/// with `p(±1) = 0` on the interior nodes.
pub fn assemble_os(
    profile: &Profile,
    alpha: f64,
    reynolds: f64,
    n: usize,
    sign: SignConvention,
) -> Result<OperatorPencil, DiscretizeError> {
    if !(alpha > 0.0 && reynolds > 0.0) {
        return Err(DiscretizeError::InvalidParameter(format!("alpha = {alpha} and R = {reynolds} must be positive")));
    }
    let g = collocation_grid(n)?;
    let dim = n - 1;
    let x: Vec<f64> = g.nodes[1..n].to_vec();
    let s: Vec<f64> = x.iter().map(|x| 1.0 - x * x).collect();
    // y'' and y'''' of the lifted interpolant, as maps on interior y values.
    let mut dc2 = RMat::zeros(dim, dim);
    let mut dc4 = RMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let (gi, gj) = (i + 1, j + 1);
            let id = if i == j { 1.0 } else { 0.0 };
            dc2[(i, j)] = (s[i] * g.d2[(gi, gj)] - 4.0 * x[i] * g.d1[(gi, gj)] - 2.0 * id) / s[j];
            dc4[(i, j)] = (s[i] * g.d4[(gi, gj)] - 8.0 * x[i] * g.d3[(gi, gj)] - 12.0 * g.d2[(gi, gj)]) / s[j];
        }
    }
    let a2 = alpha * alpha;
    let iar = Complex64::new(0.0, sign.factor() * alpha * reynolds);
    let q: Vec<f64> = x.iter().map(|&x| profile.q(x)).collect();
    let q2: Vec<f64> = x.iter().map(|&x| profile.q_d2(x)).collect();
    let mut a = CMat::zeros(dim, dim);
    let mut b = CMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let id = if i == j { 1.0 } else { 0.0 };
            let lap = dc2[(i, j)] - a2 * id;
            let bih = dc4[(i, j)] - 2.0 * a2 * dc2[(i, j)] + a2 * a2 * id;
            a[(i, j)] = Complex64::new(bih, 0.0) - iar * (q[i] * lap - q2[i] * id);
            b[(i, j)] = -iar * lap;
        }
    }
    Ok(OperatorPencil {
        a,
        b: Some(b),
        meta: PencilMeta {
            profile: *profile,
            params: PencilParams::OrrSommerfeld { alpha, reynolds },
            n,
            bc: Boundary::Clamped,
            sign_convention: sign,
        },
    })
}

/// Coarse degree paired with `n` for spurious-mode filtering.
pub fn coarse_degree(n: usize) -> usize {
    ((n as f64 * 0.8).round() as usize).max(2)
}

/// Solve at `n` and at [`coarse_degree`]`(n)` concurrently and flag fine
/// eigenvalues without a coarse partner.
pub fn filtered_spectrum<F>(build: F, n: usize, tol: f64) -> Result<Spectrum, DiscretizeError>
where
    F: Fn(usize) -> Result<OperatorPencil, DiscretizeError> + Sync,
{
    let (fine, coarse) = std::thread::scope(|scope| {
        let coarse = scope.spawn(|| build(coarse_degree(n)).and_then(|p| p.solve()));
        let fine = build(n).and_then(|p| p.solve());
        (fine, coarse.join().expect("coarse solve panicked"))
    });
    Ok(linalg::filter_spurious(&coarse?, &fine?, tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_basics() {
        let g = collocation_grid(2).unwrap();
        assert_eq!(g.nodes, vec![1.0, 0.0, -1.0]);
        let g = collocation_grid(16).unwrap();
        let ones = vec![1.0; 17];
        assert!(g.d1.apply(&ones).iter().all(|v| v.abs() <= 1e-10));
        assert!(g.d1.apply(&g.nodes).iter().all(|v| (v - 1.0).abs() <= 1e-9));
        let sq: Vec<f64> = g.nodes.iter().map(|x| x * x).collect();
        assert!(g.d2.apply(&sq).iter().all(|v| (v - 2.0).abs() <= 1e-9));
        let prod = g.d1.matmul(&g.d1);
        let scale = g.d2.row(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..17 {
            for j in 0..17 {
                assert!((prod[(i, j)] - g.d2[(i, j)]).abs() <= 1e-8 * scale);
            }
        }
        let g = collocation_grid(64).unwrap();
        let q4: Vec<f64> = g.nodes.iter().map(|x| x.powi(4)).collect();
        let d4 = g.d4.apply(&q4);
        // Rounding in the O(n⁸) entries dominates next to the ends.
        assert!(d4[5..60].iter().all(|v| (v - 24.0).abs() <= 1e-6));
        assert!(d4.iter().all(|v| (v - 24.0).abs() <= 1e-3));
        assert!(collocation_grid(1).is_err());
    }

    #[test]
    fn free_operator_closed_form() {
        let m = assemble_second_order(64, 0.1, |_| 0.0, Boundary::Dirichlet, SignConvention::PlusI).unwrap();
        let s = linalg::eigenvalues(&m).unwrap();
        let first = s.eigenvalues[0];
        assert!((first - c(0.0, -0.1 * (PI / 2.0).powi(2))).norm() < 1e-10, "{first}");
        for k in 1..=8 {
            let expected = c(0.0, -0.1 * (k as f64 * PI / 2.0).powi(2));
            assert!((s.eigenvalues[k - 1] - expected).norm() < 1e-8 * (1.0 + expected.norm()));
        }
        let m = assemble_second_order(64, 0.1, |_| 0.0, Boundary::Dirichlet, SignConvention::MinusI).unwrap();
        let s = linalg::eigenvalues(&m).unwrap();
        assert!(s.eigenvalues.iter().all(|z| z.im > 0.0));
    }

    #[test]
    fn mixed_boundary_closed_form() {
        // y'(-1) = 0, y(1) = 0: cos((k - 1/2)π(x + 1)/2).
        let m = assemble_second_order(64, 0.1, |_| 0.0, Boundary::MixedLeftNeumann, SignConvention::PlusI).unwrap();
        let s = linalg::eigenvalues(&m).unwrap();
        for k in 1..=6 {
            let expected = c(0.0, -0.1 * ((k as f64 - 0.5) * PI / 2.0).powi(2));
            assert!((s.eigenvalues[k - 1] - expected).norm() < 1e-8, "{k}: {}", s.eigenvalues[k - 1]);
        }
    }

    #[test]
    fn linear_spectrum_is_mirror_symmetric() {
        let p = assemble_model(&Profile::linear(), 0.01, 80, Boundary::Dirichlet, SignConvention::PlusI).unwrap();
        let s = p.solve().unwrap();
        for z in &s.eigenvalues {
            let m = c(-z.re, z.im);
            let d = s.eigenvalues.iter().map(|w| (w - m).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8 * (1.0 + z.norm()), "{z}");
        }
    }

    #[test]
    fn shifted_square_in_semistrip() {
        let p = assemble_model(&Profile::shifted_square(), 0.002, 120, Boundary::Dirichlet, SignConvention::PlusI).unwrap();
        let s = filtered_spectrum(
            |n| assemble_model(&Profile::shifted_square(), 0.002, n, Boundary::Dirichlet, SignConvention::PlusI),
            120,
            1e-6,
        )
        .unwrap();
        assert_eq!(s.len(), p.dimension());
        for z in s.kept() {
            assert!(z.im <= 1e-6 && z.re >= -1e-6 && z.re <= 1.0 + 1e-6, "{z}");
        }
    }

    #[test]
    fn os_couette_is_stable_and_consistent() {
        let p = assemble_os(&Profile::linear(), 1.0, 100.0, 64, SignConvention::PlusI).unwrap();
        let s = p.solve().unwrap();
        assert_eq!(s.meta.method, linalg::Method::LuQr);
        let b = p.b_matrix();
        let kept = s.kept();
        assert!(!kept.is_empty());
        for z in kept.iter().take(5) {
            assert!(z.im < 0.0);
            assert!(linalg::backward_residual(&p.a, Some(&b), *z) <= 1e-8, "{z}");
        }
    }

    #[test]
    fn os_poiseuille_benchmark() {
        // U = 1 - x² is q = x² under λ ↦ 1 - c with the opposite sign of i;
        // the classical unstable mode at α = 1, R = 10⁴ is c = 0.23752649 + 0.00373967i.
        let p = assemble_os(&Profile::quadratic(0.0).unwrap(), 1.0, 1e4, 100, SignConvention::MinusI).unwrap();
        let s = p.solve().unwrap();
        let target = c(1.0 - 0.23752649, -0.00373967);
        let best = s.eigenvalues.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-7, "{best}");
    }
}
