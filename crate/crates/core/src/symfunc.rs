//! Elementary symmetric functions of eigenvalue vectors and symmetric
//! matrices, their first and second derivatives, and Gårding cone tests.
//!
//! Matrix derivatives treat the `n²` entries as independent variables, so
//! `sigma_k_gradient(A, k)[(i, j)]` is `∂σ_k/∂A_ij` and the contraction
//! `Σ_ij σ_k^{ij} B_ij` is the directional derivative along any `B`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Relative margin used by runtime Γ_k monitors.
pub const CONE_MARGIN: f64 = 1e-10;

/// Relative gap below which two sides of an inequality count as equal.
pub const EQUALITY_GAP: f64 = 1e-9;

/// Largest dimension evaluated by principal-minor expansion.
const MINOR_EXPANSION_MAX_DIM: usize = 4;

/// Binomial coefficient `C(n, k)` as a float (zero for `k > n`).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// An ordered list of eigenvalues or principal radii.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid_argument("spectrum must have at least one entry"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_argument("spectrum entries must be finite"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Copy of the spectrum with entry `i` replaced by zero, i.e. `λ|i`.
    pub fn without(&self, i: usize) -> Spectrum {
        let mut v = self.0.clone();
        v[i] = 0.0;
        Spectrum(v)
    }

    /// Sorted descending.
    pub fn sorted_desc(&self) -> Spectrum {
        let mut v = self.0.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        Spectrum(v)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// All elementary symmetric polynomials `σ_0..=σ_max` of `values`.
pub fn elementary_all(values: &[f64], max: usize) -> Vec<f64> {
    let mut e = vec![0.0; max + 1];
    e[0] = 1.0;
    for (count, &x) in values.iter().enumerate() {
        let top = (count + 1).min(max);
        for j in (1..=top).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

fn sigma_slice(values: &[f64], k: usize) -> f64 {
    if k > values.len() {
        return 0.0;
    }
    elementary_all(values, k)[k]
}

/// `σ_k(λ)`, with `σ_0 = 1` and `σ_k = 0` for `k > n`.
pub fn sigma_k(lambda: &Spectrum, k: i64) -> Result<f64> {
    if k < 0 {
        return Err(Error::invalid_argument(format!("sigma_k order must be non-negative, got {k}")));
    }
    Ok(sigma_slice(&lambda.0, k as usize))
}

/// A real symmetric `n×n` matrix stored as its packed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        Self { n, upper: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds from a row-major square array, requiring exact symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid_argument("matrix must be square and non-empty"));
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::invalid_argument(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
                m.set(i, j, rows[i][j]);
            }
        }
        Ok(m)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * self.n - a * (a + 1) / 2 + b
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.slot(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.upper[s] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { n: self.n, upper: self.upper.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == 0.0))
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Conjugation `Qᵀ A Q`.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> SymMatrix {
        let r = q.transpose() * self.to_dmatrix() * q;
        let mut m = SymMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in i..self.n {
                m.set(i, j, 0.5 * (r[(i, j)] + r[(j, i)]));
            }
        }
        m
    }

    /// Eigenvalues sorted ascending.
    pub fn eigenvalues(&self) -> Spectrum {
        let mut ev = match self.n {
            1 => vec![self.get(0, 0)],
            2 => {
                let (a, b, c) = (self.get(0, 0), self.get(0, 1), self.get(1, 1));
                let mean = 0.5 * (a + c);
                let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                vec![mean - rad, mean + rad]
            }
            _ if self.is_diagonal() => (0..self.n).map(|i| self.get(i, i)).collect(),
            _ => SymmetricEigen::new(self.to_dmatrix()).eigenvalues.iter().copied().collect(),
        };
        ev.sort_by(|a, b| a.total_cmp(b));
        Spectrum(ev)
    }
}

fn small_det(m: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..k {
        let mut piv = col;
        for r in col + 1..k {
            if m[r * k + col].abs() > m[piv * k + col].abs() {
                piv = r;
            }
        }
        if m[piv * k + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..k {
                m.swap(piv * k + c, col * k + c);
            }
            det = -det;
        }
        let p = m[col * k + col];
        det *= p;
        for r in col + 1..k {
            let factor = m[r * k + col] / p;
            if factor != 0.0 {
                for c in col..k {
                    m[r * k + c] -= factor * m[col * k + c];
                }
            }
        }
    }
    det
}

fn principal_minor_sum(a: &SymMatrix, k: usize) -> f64 {
    let n = a.n;
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf = vec![0.0; k * k];
    let mut total = 0.0;
    loop {
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                buf[r * k + c] = a.get(i, j);
            }
        }
        total += small_det(&mut buf, k);
        // next k-subset in lexicographic order
        let mut p = k;
        loop {
            if p == 0 {
                return total;
            }
            p -= 1;
            if idx[p] < n - k + p {
                idx[p] += 1;
                for q in p + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `σ_k(A)`: sum of `k×k` principal minors for `n ≤ 4`, eigenvalues beyond.
pub fn sigma_k_matrix(a: &SymMatrix, k: i64) -> Result<f64> {
    if k < 0 {
        return Err(Error::invalid_argument(format!("sigma_k order must be non-negative, got {k}")));
    }
    let k = k as usize;
    Ok(sigma_matrix_unchecked(a, k))
}

pub(crate) fn sigma_matrix_unchecked(a: &SymMatrix, k: usize) -> f64 {
    let n = a.n;
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if k == 1 {
        return a.trace();
    }
    if n <= MINOR_EXPANSION_MAX_DIM {
        principal_minor_sum(a, k)
    } else {
        sigma_slice(a.eigenvalues().values(), k)
    }
}

/// `σ_0(A), …, σ_max(A)`.
pub(crate) fn sigma_matrix_all(a: &SymMatrix, max: usize) -> Vec<f64> {
    if a.n > MINOR_EXPANSION_MAX_DIM {
        let mut e = elementary_all(a.eigenvalues().values(), max.min(a.n));
        e.resize(max + 1, 0.0);
        return e;
    }
    (0..=max).map(|j| sigma_matrix_unchecked(a, j)).collect()
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for l in 0..n {
            let x = a[i * n + l];
            if x == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += x * b[l * n + j];
            }
        }
    }
    out
}

fn dense(a: &SymMatrix) -> Vec<f64> {
    let n = a.n;
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = a.get(i, j);
        }
    }
    d
}

/// Powers `A^0, …, A^max` as dense row-major arrays.
fn powers(a: &SymMatrix, max: usize) -> Vec<Vec<f64>> {
    let n = a.n;
    let mut eye = vec![0.0; n * n];
    for i in 0..n {
        eye[i * n + i] = 1.0;
    }
    let ad = dense(a);
    let mut out = vec![eye];
    for m in 1..=max {
        let next = matmul(&out[m - 1], &ad, n);
        out.push(next);
    }
    out
}

/// Newton transformation `T_j(A) = Σ_{m=0}^{j} (−1)^m σ_{j−m}(A) A^m`,
/// dense row-major. `T_{k−1}` is the gradient of `σ_k`.
fn newton_transform(sig: &[f64], pow: &[Vec<f64>], j: usize, n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for m in 0..=j {
        let c = if m % 2 == 0 { sig[j - m] } else { -sig[j - m] };
        if c == 0.0 {
            continue;
        }
        for (dst, src) in t.iter_mut().zip(&pow[m]) {
            *dst += c * src;
        }
    }
    t
}

/// `σ_k^{ij} = ∂σ_k/∂A_ij`.
pub fn sigma_k_gradient(a: &SymMatrix, k: i64) -> Result<SymMatrix> {
    let n = a.n;
    if k < 1 || k as usize > n {
        return Err(Error::invalid_argument(format!("gradient order k={k} outside 1..={n}")));
    }
    Ok(gradient_unchecked(a, k as usize))
}

pub(crate) fn gradient_unchecked(a: &SymMatrix, k: usize) -> SymMatrix {
    let n = a.n;
    if k == 1 {
        return SymMatrix::identity(n);
    }
    let sig = sigma_matrix_all(a, k - 1);
    let pow = powers(a, k - 1);
    let t = newton_transform(&sig, &pow, k - 1, n);
    let mut g = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            g.set(i, j, 0.5 * (t[i * n + j] + t[j * n + i]));
        }
    }
    g
}

/// Fourth-order array of second derivatives `∂²σ_k/∂A_ij∂A_pq`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank4 {
    n: usize,
    data: Vec<f64>,
}

impl Rank4 {
    fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, p: usize, q: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + j) * n + p) * n + q]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// Second derivatives of `σ_k` in the matrix entries. Zero for `k < 2`.
pub fn sigma_k_hessian(a: &SymMatrix, k: i64) -> Result<Rank4> {
    let n = a.n;
    if k < 0 || k as usize > n {
        return Err(Error::invalid_argument(format!("hessian order k={k} outside 0..={n}")));
    }
    let k = k as usize;
    let mut out = Rank4::zeros(n);
    if k < 2 {
        return Ok(out);
    }
    let sig = sigma_matrix_all(a, k);
    let pow = powers(a, k - 1);
    let tr: Vec<Vec<f64>> = (0..k - 1).map(|j| newton_transform(&sig, &pow, j, n)).collect();
    // ∂/∂A_pq of T_{k-1}(A)_{ji} = Σ_m (−1)^m [ T_{k−2−m}(A)_{qp} (A^m)_{ji}
    //                                  + σ_{k−1−m} Σ_r (A^r)_{jp} (A^{m−1−r})_{qi} ]
    for m in 0..k {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let outer = if k >= m + 2 { Some(&tr[k - 2 - m]) } else { None };
        let c = sig[k - 1 - m];
        for i in 0..n {
            for j in 0..n {
                for p in 0..n {
                    for q in 0..n {
                        let mut v = 0.0;
                        if let Some(t) = outer {
                            v += t[q * n + p] * pow[m][j * n + i];
                        }
                        if m >= 1 && c != 0.0 {
                            let mut s = 0.0;
                            for r in 0..m {
                                s += pow[r][j * n + p] * pow[m - 1 - r][q * n + i];
                            }
                            v += c * s;
                        }
                        out.data[((i * n + j) * n + p) * n + q] += sign * v;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `λ ∈ Γ_k`, i.e. `σ_i(λ) > 0` for `1 ≤ i ≤ k`.
pub fn gamma_cone_member(lambda: &Spectrum, k: usize) -> bool {
    let e = elementary_all(&lambda.0, k);
    (1..=k).all(|i| e[i] > 0.0)
}

/// Cone membership with the runtime margin `σ_i > ε·scale^i`,
/// `scale = max |λ_j|`.
pub fn gamma_cone_member_with_margin(lambda: &Spectrum, k: usize, eps: f64) -> bool {
    let scale = lambda.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return false;
    }
    let e = elementary_all(&lambda.0, k);
    (1..=k).all(|i| e[i] > eps * scale.powi(i as i32))
}

/// Outcome of a generalized Newton–MacLaurin comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaclaurinCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub equality: bool,
}

/// Compares `((σ_k/C(n,k)) / (σ_l/C(n,l)))^{1/(k−l)}` against
/// `((σ_r/C(n,r)) / (σ_s/C(n,s)))^{1/(r−s)}` for `λ ∈ Γ_k`.
pub fn newton_maclaurin_check(
    lambda: &Spectrum,
    k: usize,
    l: usize,
    r: usize,
    s: usize,
) -> Result<MaclaurinCheck> {
    let n = lambda.dim();
    if !(k > l && r > s && k >= r && l >= s) {
        return Err(Error::invalid_argument(format!(
            "index constraints k>l≥0, r>s≥0, k≥r, l≥s violated by ({k},{l},{r},{s})"
        )));
    }
    if k > n {
        return Err(Error::invalid_argument(format!("k={k} exceeds dimension {n}")));
    }
    if !gamma_cone_member(lambda, k) {
        return Err(Error::PreconditionViolation(format!("spectrum {:?} is not in Γ_{k}", lambda.0)));
    }
    let e = elementary_all(&lambda.0, k);
    let normalized = |j: usize| e[j] / binomial(n, j);
    let lhs = (normalized(k) / normalized(l)).powf(1.0 / (k - l) as f64);
    let rhs = (normalized(r) / normalized(s)).powf(1.0 / (r - s) as f64);
    let gap = (rhs - lhs) / rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE);
    Ok(MaclaurinCheck { lhs, rhs, holds: gap >= -EQUALITY_GAP, equality: gap.abs() < EQUALITY_GAP })
}
