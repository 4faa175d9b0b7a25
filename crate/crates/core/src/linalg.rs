//! Dense complex eigenvalue solvers.
//!
//! Standard problems go through balancing, Householder reduction to upper
//! Hessenberg form and single-shift implicit QR with deflation. Pencils with
//! a well-conditioned `B` are reduced to `B⁻¹A`; otherwise a QZ iteration on
//! the Hessenberg–triangular pair is used.

use crate::discretize::PencilMeta;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("SingularPencil: neither the B⁻¹A nor the QZ path produced eigenvalues")]
    SingularPencil,
    #[error("singular matrix in LU factorization")]
    Singular,
}

/// Eigenvalues at least this large are boundary-row or infinite artefacts.
pub const SENTINEL_MODULUS: f64 = 1e7;
/// Largest `‖B‖·‖B⁻¹‖` accepted by the `B⁻¹A` route.
pub const MAX_B_CONDITION: f64 = 1e10;

const ULP: f64 = f64::EPSILON;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type CMat = Mat<Complex64>;
pub type RMat = Mat<f64>;

impl<T: Copy + Default> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::default(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Sub-block `rows × cols` starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Mat::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl RMat {
    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn matmul(&self, other: &RMat) -> RMat {
        assert_eq!(self.cols, other.rows);
        let mut out = RMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn to_complex(&self) -> CMat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }
}

impl CMat {
    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    pub fn diag(d: &[Complex64]) -> Self {
        Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { Complex64::new(0.0, 0.0) })
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows);
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

/// Plane rotation `G = [[c, s], [-s̄, c]]` with `G·[x; y] = [r; 0]`.
#[derive(Debug, Clone, Copy)]
struct Givens {
    c: f64,
    s: Complex64,
}

impl Givens {
    fn zeroing(x: Complex64, y: Complex64) -> (Givens, Complex64) {
        let (ax, ay) = (x.norm(), y.norm());
        if ay == 0.0 {
            return (Givens { c: 1.0, s: Complex64::new(0.0, 0.0) }, x);
        }
        if ax == 0.0 {
            return (Givens { c: 0.0, s: y.conj() / ay }, Complex64::new(ay, 0.0));
        }
        let norm = ax.hypot(ay);
        let alpha = x / ax;
        (Givens { c: ax / norm, s: alpha * y.conj() / norm }, alpha * norm)
    }

    /// Rows `p, q` ← `G·[row_p; row_q]` over columns `cols`.
    fn rows(&self, m: &mut CMat, p: usize, q: usize, cols: std::ops::RangeInclusive<usize>) {
        for j in cols {
            let (a, b) = (m[(p, j)], m[(q, j)]);
            m[(p, j)] = a * self.c + self.s * b;
            m[(q, j)] = -self.s.conj() * a + b * self.c;
        }
    }

    /// Columns `p, q` ← `[col_p, col_q]·G^H` over rows `rows`.
    fn cols_h(&self, m: &mut CMat, p: usize, q: usize, rows: std::ops::RangeInclusive<usize>) {
        for i in rows {
            let (a, b) = (m[(i, p)], m[(i, q)]);
            m[(i, p)] = a * self.c + b * self.s.conj();
            m[(i, q)] = -self.s * a + b * self.c;
        }
    }
}

fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Diagonal similarity scaling by powers of two (no permutations).
fn balance(m: &mut CMat) {
    let n = m.rows;
    let radix = 2.0f64;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].norm();
                    r += m[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / radix {
                cc *= radix;
                rr /= radix;
                f *= radix;
            }
            while cc >= rr * radix {
                cc /= radix;
                rr *= radix;
                f /= radix;
            }
            if (cc + rr) < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(m: &mut CMat) {
    let n = m.rows;
    if n < 3 {
        return;
    }
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n - 2 {
        let norm: f64 = (k + 1..n).map(|i| m[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = m[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        for i in k + 1..n {
            v[i] = m[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for vi in v.iter_mut().take(n).skip(k + 1) {
            *vi /= vnorm;
        }
        // M ← (I - 2vv^H) M
        for j in k..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in k + 1..n {
                dot += v[i].conj() * m[(i, j)];
            }
            dot *= 2.0;
            for i in k + 1..n {
                let upd = v[i] * dot;
                m[(i, j)] -= upd;
            }
        }
        // M ← M (I - 2vv^H)
        for i in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for j in k + 1..n {
                dot += m[(i, j)] * v[j];
            }
            dot *= 2.0;
            for j in k + 1..n {
                let upd = dot * v[j].conj();
                m[(i, j)] -= upd;
            }
        }
        m[(k + 1, k)] = alpha;
        for i in k + 2..n {
            m[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Eigenvalue of the 2×2 block `[[a, b], [c, d]]` closer to `d`.
fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let t = (a + d) * 0.5;
    let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
    let (m1, m2) = (t + disc, t - disc);
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// Eigenvalues of an upper Hessenberg matrix by single-shift implicit QR.
/// Returns the values and a per-value convergence flag.
fn hessenberg_qr(h: &mut CMat) -> (Vec<Complex64>, Vec<bool>) {
    let n = h.rows;
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    let mut conv = vec![true; n];
    if n == 0 {
        return (eig, conv);
    }
    let budget = 40 * n.max(10);
    let mut total = 0usize;
    let mut hi = n - 1;
    let mut its = 0usize;
    loop {
        // Find the start of the active unreduced block.
        let mut l = hi;
        while l > 0 {
            let sub = cabs1(h[(l, l - 1)]);
            let mut tst = cabs1(h[(l - 1, l - 1)]) + cabs1(h[(l, l)]);
            if tst == 0.0 {
                if l >= 2 {
                    tst += h[(l - 1, l - 2)].re.abs();
                }
                if l + 1 < n {
                    tst += h[(l + 1, l)].re.abs();
                }
            }
            if sub <= ULP * tst || sub < f64::MIN_POSITIVE {
                h[(l, l - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h[(hi, hi)];
            if hi == 0 {
                break;
            }
            hi -= 1;
            its = 0;
            continue;
        }
        if total >= budget {
            for i in 0..=hi {
                eig[i] = h[(i, i)];
                conv[i] = false;
            }
            break;
        }
        total += 1;
        its += 1;
        let shift = if its % 10 == 0 {
            // Exceptional shift to break cycles.
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else if its % 10 == 5 {
            h[(l, l)] + Complex64::new(0.75 * h[(l + 1, l)].norm(), 0.0)
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        // Bulge chase.
        let mut x = h[(l, l)] - shift;
        let mut y = h[(l + 1, l)];
        for k in l..hi {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (g, r) = Givens::zeroing(x, y);
            let c0 = if k > l { k - 1 } else { l };
            g.rows(h, k, k + 1, c0..=hi);
            if k > l {
                h[(k, k - 1)] = r;
                h[(k + 1, k - 1)] = Complex64::new(0.0, 0.0);
            }
            g.cols_h(h, k, k + 1, l..=(k + 2).min(hi));
        }
    }
    (eig, conv)
}

/// Partial-pivoted LU factorization.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(m: &CMat) -> Result<Lu, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::Dimension("LU of a non-square matrix".into()));
        }
        let n = m.rows;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&a, &b| lu[(a, k)].norm().total_cmp(&lu[(b, k)].norm())).unwrap();
            if lu[(p, k)].norm() == 0.0 {
                return Err(LinalgError::Singular);
            }
            lu.swap_rows(k, p);
            perm.swap(k, p);
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.rows;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// `M⁻¹ R` column by column.
    pub fn solve_matrix(&self, r: &CMat) -> CMat {
        let n = self.lu.rows;
        let mut out = CMat::zeros(n, r.cols);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..r.cols {
            for i in 0..n {
                col[i] = r[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> CMat {
        self.solve_matrix(&CMat::identity(self.lu.rows))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Qr,
    LuQr,
    Qz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EigenFlags {
    pub converged: bool,
    pub spurious: bool,
    pub sentinel: bool,
}

impl EigenFlags {
    pub fn kept(&self) -> bool {
        !self.spurious && !self.sentinel
    }

    pub fn label(&self) -> &'static str {
        if self.sentinel {
            "sentinel"
        } else if self.spurious {
            "spurious"
        } else if !self.converged {
            "unconverged"
        } else {
            "kept"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveMeta {
    pub dimension: usize,
    pub method: Method,
    /// `‖B‖₁‖B⁻¹‖₁` when a pencil was solved.
    pub b_condition: Option<f64>,
    pub pencil: Option<PencilMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub flags: Vec<EigenFlags>,
    pub meta: SolveMeta,
}

impl Spectrum {
    fn build(values: Vec<Complex64>, converged: Vec<bool>, meta: SolveMeta) -> Spectrum {
        let mut rows: Vec<(Complex64, EigenFlags)> = values
            .into_iter()
            .zip(converged)
            .map(|(z, c)| {
                let sentinel = !z.is_finite() || z.norm() >= SENTINEL_MODULUS;
                (z, EigenFlags { converged: c, spurious: false, sentinel })
            })
            .collect();
        rows.sort_by(|a, b| order(a.0, b.0));
        let (eigenvalues, flags) = rows.into_iter().unzip();
        Spectrum { eigenvalues, flags, meta }
    }

    /// Eigenvalues that are neither spurious nor sentinels.
    pub fn kept(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().zip(&self.flags).filter(|(_, f)| f.kept()).map(|(z, _)| *z).collect()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.flags.iter().all(|f| f.converged)
    }

    /// A spectrum built from given values, for tests and tooling.
    pub fn from_values(values: Vec<Complex64>) -> Spectrum {
        let n = values.len();
        Spectrum::build(values, vec![true; n], SolveMeta { dimension: n, method: Method::Qr, b_condition: None, pencil: None })
    }
}

/// Im descending, then Re ascending.
fn order(a: Complex64, b: Complex64) -> std::cmp::Ordering {
    b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re))
}

pub fn eigenvalues(m: &CMat) -> Result<Spectrum, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::Dimension(format!("{}×{} is not square", m.rows, m.cols)));
    }
    let mut h = m.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let (values, conv) = hessenberg_qr(&mut h);
    Ok(Spectrum::build(values, conv, SolveMeta { dimension: m.rows, method: Method::Qr, b_condition: None, pencil: None }))
}

/// Eigenvalues of `A x = λ B x`.
pub fn generalized_eigenvalues(a: &CMat, b: &CMat) -> Result<Spectrum, LinalgError> {
    if !a.is_square() || (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(LinalgError::Dimension("pencil matrices must be square and equal in size".into()));
    }
    let cond = Lu::new(b).ok().map(|lu| (b.norm1() * lu.inverse().norm1(), lu));
    if let Some((c, lu)) = cond {
        if c.is_finite() && c <= MAX_B_CONDITION {
            let mut s = eigenvalues(&lu.solve_matrix(a))?;
            s.meta.method = Method::LuQr;
            s.meta.b_condition = Some(c);
            return Ok(s);
        }
        let mut s = qz(a, b)?;
        s.meta.b_condition = Some(c);
        return Ok(s);
    }
    qz(a, b)
}

/// Complex QZ: Hessenberg–triangular reduction followed by single-shift
/// implicit iterations. Infinite eigenvalues come out as sentinels.
pub fn qz(a: &CMat, b: &CMat) -> Result<Spectrum, LinalgError> {
    let n = a.rows;
    let mut h = a.clone();
    let mut t = b.clone();
    let zero = Complex64::new(0.0, 0.0);
    // Triangularize B by Givens from the left.
    for j in 0..n {
        for i in (j + 1..n).rev() {
            if t[(i, j)] == zero {
                continue;
            }
            let (g, _) = Givens::zeroing(t[(i - 1, j)], t[(i, j)]);
            g.rows(&mut t, i - 1, i, j..=n - 1);
            g.rows(&mut h, i - 1, i, 0..=n - 1);
            t[(i, j)] = zero;
        }
    }
    // Reduce A to Hessenberg while keeping B triangular.
    for j in 0..n.saturating_sub(2) {
        for i in (j + 2..n).rev() {
            let (g, _) = Givens::zeroing(h[(i - 1, j)], h[(i, j)]);
            g.rows(&mut h, i - 1, i, j..=n - 1);
            g.rows(&mut t, i - 1, i, i - 1..=n - 1);
            h[(i, j)] = zero;
            // Restore T[i][i-1] = 0 from the right.
            let (z, _) = Givens::zeroing(t[(i, i)], t[(i, i - 1)]);
            right_rotation(&mut t, z, i - 1, i, 0..=i);
            right_rotation(&mut h, z, i - 1, i, 0..=n - 1);
            t[(i, i - 1)] = zero;
        }
    }
    let tnorm = t.norm1().max(f64::MIN_POSITIVE);
    let hnorm = h.norm1().max(f64::MIN_POSITIVE);
    let mut alpha = vec![zero; n];
    let mut beta = vec![zero; n];
    let mut conv = vec![true; n];
    if n == 0 {
        return Ok(Spectrum::build(vec![], vec![], SolveMeta { dimension: 0, method: Method::Qz, b_condition: None, pencil: None }));
    }
    let budget = 40 * n.max(10);
    let mut total = 0usize;
    let mut hi = n - 1;
    let mut its = 0usize;
    loop {
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            if sub <= ULP * (h[(l, l)].norm() + h[(l - 1, l - 1)].norm()).max(ULP * hnorm) {
                h[(l, l - 1)] = zero;
                break;
            }
            l -= 1;
        }
        // A zero on the diagonal of T is an infinite eigenvalue: move it to
        // the bottom of the active block and split it off.
        if let Some(j) = (l..=hi).find(|&j| t[(j, j)].norm() <= ULP * tnorm) {
            t[(j, j)] = zero;
            for k in j..hi {
                let (g, _) = Givens::zeroing(t[(k, k + 1)], t[(k + 1, k + 1)]);
                g.rows(&mut t, k, k + 1, k + 1..=hi);
                t[(k + 1, k + 1)] = zero;
                g.rows(&mut h, k, k + 1, (if k > l { k - 1 } else { l })..=hi);
                if k > l {
                    let (z, _) = Givens::zeroing(h[(k + 1, k)], h[(k + 1, k - 1)]);
                    right_rotation(&mut h, z, k - 1, k, l..=k + 1);
                    right_rotation(&mut t, z, k - 1, k, l..=k - 1);
                    h[(k + 1, k - 1)] = zero;
                }
            }
            if hi > l {
                let (z, _) = Givens::zeroing(h[(hi, hi)], h[(hi, hi - 1)]);
                right_rotation(&mut h, z, hi - 1, hi, l..=hi);
                right_rotation(&mut t, z, hi - 1, hi, l..=hi - 1);
                h[(hi, hi - 1)] = zero;
            }
            alpha[hi] = h[(hi, hi)];
            beta[hi] = zero;
            if hi == 0 {
                break;
            }
            hi -= 1;
            its = 0;
            continue;
        }
        if l == hi {
            alpha[hi] = h[(hi, hi)];
            beta[hi] = t[(hi, hi)];
            if hi == 0 {
                break;
            }
            hi -= 1;
            its = 0;
            continue;
        }
        if total >= budget {
            for i in 0..=hi {
                alpha[i] = h[(i, i)];
                beta[i] = t[(i, i)];
                conv[i] = false;
            }
            break;
        }
        total += 1;
        its += 1;
        let shift = if its % 10 == 0 {
            h[(hi, hi)] / t[(hi, hi)] + Complex64::new(0.75 * (h[(hi, hi - 1)] / t[(hi - 1, hi - 1)]).norm(), 0.0)
        } else {
            pencil_shift(&h, &t, hi)
        };
        let mut x = h[(l, l)] - shift * t[(l, l)];
        let mut y = h[(l + 1, l)];
        for k in l..hi {
            if k > l {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (g, r) = Givens::zeroing(x, y);
            let c0 = if k > l { k - 1 } else { l };
            g.rows(&mut h, k, k + 1, c0..=hi);
            g.rows(&mut t, k, k + 1, k..=hi);
            if k > l {
                h[(k, k - 1)] = r;
                h[(k + 1, k - 1)] = zero;
            }
            let (z, _) = Givens::zeroing(t[(k + 1, k + 1)], t[(k + 1, k)]);
            right_rotation(&mut h, z, k, k + 1, l..=(k + 2).min(hi));
            right_rotation(&mut t, z, k, k + 1, l..=k + 1);
            t[(k + 1, k)] = zero;
        }
    }
    let values: Vec<Complex64> = alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| if b.norm() <= ULP * tnorm { Complex64::new(f64::INFINITY, 0.0) } else { a / b })
        .collect();
    Ok(Spectrum::build(values, conv, SolveMeta { dimension: n, method: Method::Qz, b_condition: None, pencil: None }))
}

/// Columns `p, q` ← `[col_p, col_q]·Z` with the rotation that maps the row
/// vector `(m_qp, m_qq)` to `(0, r)`; `g` comes from `zeroing(m_qq, m_qp)`.
fn right_rotation(m: &mut CMat, g: Givens, p: usize, q: usize, rows: std::ops::RangeInclusive<usize>) {
    for i in rows {
        let (a, b) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = a * g.c - g.s.conj() * b;
        m[(i, q)] = g.s * a + b * g.c;
    }
}

/// Eigenvalue of the trailing 2×2 pencil closer to `h_nn / t_nn`.
fn pencil_shift(h: &CMat, t: &CMat, hi: usize) -> Complex64 {
    let (h11, h12, h21, h22) = (h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)]);
    let (t11, t12, t22) = (t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi)]);
    // det(H - μT) = a μ² + b μ + c
    let a = t11 * t22;
    let b = -(h11 * t22 + h22 * t11 - h21 * t12);
    let c = h11 * h22 - h12 * h21;
    let target = h22 / t22;
    if a.norm() == 0.0 {
        return if b.norm() == 0.0 { target } else { -c / b };
    }
    let disc = (b * b - a * c * 4.0).sqrt();
    let (m1, m2) = ((-b + disc) / (a * 2.0), (-b - disc) / (a * 2.0));
    if (m1 - target).norm() <= (m2 - target).norm() {
        m1
    } else {
        m2
    }
}

/// Keep eigenvalues of `fine` that have a partner in `coarse` within
/// `tol·(1 + |λ|)`; flag the rest spurious.
pub fn filter_spurious(coarse: &Spectrum, fine: &Spectrum, tol: f64) -> Spectrum {
    let reference: Vec<Complex64> = coarse
        .eigenvalues
        .iter()
        .zip(&coarse.flags)
        .filter(|(_, f)| !f.sentinel)
        .map(|(z, _)| *z)
        .collect();
    let mut out = fine.clone();
    for (z, flag) in out.eigenvalues.iter().zip(out.flags.iter_mut()) {
        if flag.sentinel {
            continue;
        }
        let radius = tol * (1.0 + z.norm());
        flag.spurious = !reference.iter().any(|w| (w - z).norm() <= radius);
    }
    out
}

/// Backward residual `‖Av - λBv‖ / ((‖A‖ + |λ|‖B‖)‖v‖)` of an approximate
/// eigenvalue, with `v` from a few steps of inverse iteration.
pub fn backward_residual(a: &CMat, b: Option<&CMat>, lambda: Complex64) -> f64 {
    let n = a.rows;
    let ident = CMat::identity(n);
    let b = b.unwrap_or(&ident);
    let nb = b.norm1();
    let scale = a.norm1() + lambda.norm() * nb;
    // Nudge off the eigenvalue so the shifted matrix is invertible.
    let shifted = lambda + Complex64::new(1e-13, 1e-13) * (1.0 + lambda.norm());
    let m = a.add(&b.scale(-shifted));
    let lu = match Lu::new(&m) {
        Ok(lu) => lu,
        Err(_) => return 0.0,
    };
    let mut v: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + (i as f64 * 0.618).sin(), (i as f64 * 0.37).cos())).collect();
    for _ in 0..3 {
        let bv = b.apply(&v);
        v = lu.solve(&bv);
        let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    let av = a.apply(&v);
    let bv = b.apply(&v);
    let r: f64 = av.iter().zip(&bv).map(|(x, y)| (x - y * lambda).norm_sqr()).sum::<f64>().sqrt();
    r / scale
}
