//! Eigendecomposition of the (real) tridiagonal compartment-coupling matrix.
//!
//! Matrices of the form `a*I + S`, with `S` skew-symmetric tridiagonal, are
//! reduced to the real symmetric tridiagonal problem for `-i*S` and solved by
//! implicit-shift QL. Anything else goes through a shifted complex QR on the
//! (already Hessenberg) matrix followed by triangular back-substitution.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, numeric, Result};

const QL_MAX_ITER: usize = 60;
const QR_MAX_ITER_PER_EIG: usize = 60;
const RECON_TOL: f64 = 1e-9;

fn cz() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Real tridiagonal matrix of dimension `m = diag.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagMatrix {
    pub diag: Vec<f64>,
    /// `upper[i] = A[i][i+1]`
    pub upper: Vec<f64>,
    /// `lower[i] = A[i+1][i]`
    pub lower: Vec<f64>,
}

impl TridiagMatrix {
    pub fn new(diag: Vec<f64>, upper: Vec<f64>, lower: Vec<f64>) -> Result<Self> {
        let m = diag.len();
        if m == 0 {
            return Err(invalid("tridiagonal matrix must have dimension >= 1"));
        }
        if upper.len() != m - 1 || lower.len() != m - 1 {
            return Err(invalid(format!(
                "off-diagonals must have length {} (got {} / {})",
                m - 1,
                upper.len(),
                lower.len()
            )));
        }
        Ok(TridiagMatrix { diag, upper, lower })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> CMatrix {
        let m = self.dim();
        let mut out = CMatrix::zeros(m);
        for i in 0..m {
            out.set(i, i, Complex64::new(self.diag[i], 0.0));
            if i + 1 < m {
                out.set(i, i + 1, Complex64::new(self.upper[i], 0.0));
                out.set(i + 1, i, Complex64::new(self.lower[i], 0.0));
            }
        }
        out
    }

    /// Constant diagonal and `upper == -lower`.
    pub fn is_diag_plus_skew(&self) -> bool {
        let a = self.diag[0];
        let scale = self
            .diag
            .iter()
            .chain(&self.upper)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let tol = 1e-14 * scale;
        self.diag.iter().all(|d| (d - a).abs() <= tol)
            && self.upper.iter().zip(&self.lower).all(|(u, l)| (u + l).abs() <= tol)
    }
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![cz(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_diag(d: &[Complex64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.n + c]
    }
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.n + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.n).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[Complex64]) {
        for (r, &x) in v.iter().enumerate() {
            self.set(r, c, x);
        }
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == cz() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn conj_transpose(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.norm()))
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<CMatrix> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = CMatrix::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a.get(i, col).norm().total_cmp(&a.get(j, col).norm()))
                .unwrap_or(col);
            if a.get(pivot, col).norm() <= 1e-14 * scale {
                return Err(numeric("matrix is singular to working precision"));
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                    inv.data.swap(pivot * n + j, col * n + j);
                }
            }
            let p = a.get(col, col);
            for j in 0..n {
                a.data[col * n + j] /= p;
                inv.data[col * n + j] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == cz() {
                    continue;
                }
                for j in 0..n {
                    let av = a.get(col, j);
                    let iv = inv.get(col, j);
                    a.data[r * n + j] -= f * av;
                    inv.data[r * n + j] -= f * iv;
                }
            }
        }
        Ok(inv)
    }
}

/// `A = P * diag(values) * P^-1`.
///
/// Eigenvalues are in conjugate-paired order: each complex eigenvalue is
/// immediately followed by its conjugate, and real eigenvalues come last.
/// `pairing[j]` is the index of the partner of mode `j` (itself for real
/// modes). For real input the eigenvectors of partners are exact conjugates.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: CMatrix,
    pub inverse: CMatrix,
    pub pairing: Vec<usize>,
}

impl Eigen {
    pub fn reconstruct(&self) -> CMatrix {
        self.vectors
            .matmul(&CMatrix::from_diag(&self.values))
            .matmul(&self.inverse)
    }

    pub fn reconstruction_error(&self, m: &TridiagMatrix) -> f64 {
        self.reconstruct().max_abs_diff(&m.to_dense())
    }
}

/// Eigendecomposition of a real tridiagonal matrix, exploiting the
/// `a*I + skew` structure when present.
pub fn tridiag_skew_eigen(m: &TridiagMatrix) -> Result<Eigen> {
    if m.dim() == 0 {
        return Err(invalid("empty matrix"));
    }
    if m.is_diag_plus_skew() {
        let eig = skew_eigen(m)?;
        if eig.reconstruction_error(m) <= RECON_TOL * m.to_dense().max_abs().max(1.0) {
            return Ok(eig);
        }
    }
    general_eigen(m)
}

fn skew_eigen(m: &TridiagMatrix) -> Result<Eigen> {
    let n = m.dim();
    let a = m.diag[0];
    let b = &m.upper;

    // Diagonal unitary D with D^H (-iS) D = J, J real symmetric with
    // off-diagonals |b_k|.
    let mut dphase = vec![Complex64::new(1.0, 0.0); n];
    for k in 0..n - 1 {
        dphase[k + 1] = if b[k] > 0.0 {
            dphase[k] * Complex64::new(0.0, 1.0)
        } else if b[k] < 0.0 {
            dphase[k] * Complex64::new(0.0, -1.0)
        } else {
            dphase[k]
        };
    }
    let mut mu = vec![0.0; n];
    let off: Vec<f64> = b.iter().map(|v| v.abs()).collect();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    symmetric_tridiag_ql(&mut mu, &off, &mut q)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| mu[i].total_cmp(&mu[j]));
    let pvec = |idx: usize| -> Vec<Complex64> { (0..n).map(|r| dphase[r] * q[r * n + idx]).collect() };
    let scale = off.iter().fold(0.0f64, |s, v| s.max(*v)).max(1.0);
    let zero_tol = 1e-12 * scale;

    let mut values = Vec::with_capacity(n);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut pairing = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0usize, n);
    while lo + 1 < hi {
        let top = order[hi - 1];
        if mu[top] <= zero_tol {
            break;
        }
        let v = pvec(top);
        let j = values.len();
        values.push(Complex64::new(a, mu[top]));
        values.push(Complex64::new(a, -mu[top]));
        let vc: Vec<Complex64> = v.iter().map(|c| c.conj()).collect();
        cols.push(v);
        cols.push(vc);
        pairing.push(j + 1);
        pairing.push(j);
        lo += 1;
        hi -= 1;
    }
    for &idx in &order[lo..hi] {
        let j = values.len();
        values.push(Complex64::new(a, 0.0));
        cols.push(realify(pvec(idx)));
        pairing.push(j);
    }

    let mut vectors = CMatrix::zeros(n);
    for (c, v) in cols.iter().enumerate() {
        vectors.set_column(c, v);
    }
    let inverse = vectors.conj_transpose();
    Ok(Eigen {
        values,
        vectors,
        inverse,
        pairing,
    })
}

/// Rotates a vector that is real up to a global phase onto the real axis.
fn realify(v: Vec<Complex64>) -> Vec<Complex64> {
    let big = v
        .iter()
        .copied()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if big.norm() == 0.0 {
        return v;
    }
    let phase = big.conj() / big.norm();
    v.into_iter().map(|c| Complex64::new((c * phase).re, 0.0)).collect()
}

/// Implicit-shift QL for a real symmetric tridiagonal matrix.
///
/// On entry `d` is ignored and overwritten with the diagonal (zero here is
/// not assumed: callers fill it), `off` holds the `n-1` off-diagonals and `z`
/// is an `n x n` row-major matrix (usually the identity). On exit `d` holds
/// the eigenvalues and column `j` of `z` the eigenvector for `d[j]`.
pub fn symmetric_tridiag_ql(d: &mut [f64], off: &[f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() + dd == dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(numeric(format!(
                    "QL iteration did not converge for eigenvalue {l} after {QL_MAX_ITER} sweeps \
                     (residual off-diagonal {:e})",
                    e[l]
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zf = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * zf;
                    z[k * n + i] = c * z[k * n + i] - s * zf;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn general_eigen(m: &TridiagMatrix) -> Result<Eigen> {
    let n = m.dim();
    let (schur, q) = complex_schur(m.to_dense())?;

    // eigenvectors of the triangular factor
    let norm = schur.max_abs().max(f64::MIN_POSITIVE);
    let mut vecs = CMatrix::zeros(n);
    for k in 0..n {
        let lam = schur.get(k, k);
        let mut y = vec![cz(); n];
        y[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = cz();
            for i in j + 1..=k {
                acc += schur.get(j, i) * y[i];
            }
            let mut den = schur.get(j, j) - lam;
            if den.norm() < 1e-14 * norm {
                den = Complex64::new(1e-14 * norm, 0.0);
            }
            y[j] = -acc / den;
        }
        let mut v = vec![cz(); n];
        for (r, vr) in v.iter_mut().enumerate() {
            for (i, yi) in y.iter().enumerate() {
                *vr += q.get(r, i) * yi;
            }
        }
        let nv = libm::sqrt(v.iter().map(|c| c.norm_sqr()).sum::<f64>());
        for c in v.iter_mut() {
            *c /= nv;
        }
        vecs.set_column(k, &v);
    }

    // conjugate pairing (input is real)
    let raw: Vec<Complex64> = (0..n).map(|k| schur.get(k, k)).collect();
    let scale = raw.iter().fold(0.0f64, |s, v| s.max(v.norm())).max(1.0);
    let tol = 1e-8 * scale;
    let mut used = vec![false; n];
    let mut values = Vec::with_capacity(n);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut pairing = Vec::with_capacity(n);
    let mut real_idx = Vec::new();
    for k in 0..n {
        if used[k] {
            continue;
        }
        if raw[k].im.abs() <= tol {
            used[k] = true;
            real_idx.push(k);
            continue;
        }
        let partner = (0..n)
            .filter(|&j| !used[j] && j != k)
            .min_by(|&i, &j| {
                (raw[i] - raw[k].conj())
                    .norm()
                    .total_cmp(&(raw[j] - raw[k].conj()).norm())
            })
            .ok_or_else(|| numeric("complex eigenvalue without conjugate partner"))?;
        used[k] = true;
        used[partner] = true;
        let (keep, v) = if raw[k].im > 0.0 {
            (raw[k], vecs.column(k))
        } else {
            (raw[partner], vecs.column(partner))
        };
        let j = values.len();
        values.push(keep);
        values.push(keep.conj());
        cols.push(v.clone());
        cols.push(v.iter().map(|c| c.conj()).collect());
        pairing.push(j + 1);
        pairing.push(j);
    }
    for k in real_idx {
        let j = values.len();
        values.push(Complex64::new(raw[k].re, 0.0));
        cols.push(realify(vecs.column(k)));
        pairing.push(j);
    }
    let mut vectors = CMatrix::zeros(n);
    for (c, v) in cols.iter().enumerate() {
        vectors.set_column(c, v);
    }
    let inverse = vectors.inverse()?;
    Ok(Eigen {
        values,
        vectors,
        inverse,
        pairing,
    })
}

/// Complex Schur form `A = Q T Q^H` of an upper-Hessenberg matrix by
/// single-shift QR with Wilkinson shifts.
fn complex_schur(mut h: CMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = h.dim();
    let mut q = CMatrix::identity(n);
    if n == 1 {
        return Ok((h, q));
    }
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let s = h.get(l - 1, l - 1).norm() + h.get(l, l).norm();
            let s = if s == 0.0 { h.max_abs() } else { s };
            if h.get(l, l - 1).norm() <= f64::EPSILON * s {
                h.set(l, l - 1, cz());
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > QR_MAX_ITER_PER_EIG * n {
            return Err(numeric(format!(
                "complex QR did not converge: {total} iterations, active block {l}..={hi}, \
                 subdiagonal {:e}",
                h.get(hi, hi - 1).norm()
            )));
        }
        let shift = if iter % 11 == 10 {
            // exceptional shift
            h.get(hi, hi) + Complex64::new(h.get(hi, hi - 1).norm(), 0.0)
        } else {
            wilkinson_shift(
                h.get(hi - 1, hi - 1),
                h.get(hi - 1, hi),
                h.get(hi, hi - 1),
                h.get(hi, hi),
            )
        };
        for k in l..=hi {
            let v = h.get(k, k) - shift;
            h.set(k, k, v);
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let x = h.get(k, k);
            let y = h.get(k + 1, k);
            let r = libm::sqrt(x.norm_sqr() + y.norm_sqr());
            let (c, s) = if r == 0.0 {
                (Complex64::new(1.0, 0.0), cz())
            } else {
                (x / r, y / r)
            };
            for j in k..n {
                let a = h.get(k, j);
                let b = h.get(k + 1, j);
                h.set(k, j, c.conj() * a + s.conj() * b);
                h.set(k + 1, j, -s * a + c * b);
            }
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = l + idx;
            // right-multiply by G^H on columns k, k+1
            for r in 0..=(k + 1).min(n - 1) {
                let a = h.get(r, k);
                let b = h.get(r, k + 1);
                h.set(r, k, a * c + b * s);
                h.set(r, k + 1, -a * s.conj() + b * c.conj());
            }
            for r in 0..n {
                let a = q.get(r, k);
                let b = q.get(r, k + 1);
                q.set(r, k, a * c + b * s);
                q.set(r, k + 1, -a * s.conj() + b * c.conj());
            }
        }
        for k in l..=hi {
            let v = h.get(k, k) + shift;
            h.set(k, k, v);
        }
    }
    Ok((h, q))
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m1 = (a + d) * 0.5 + disc;
    let m2 = (a + d) * 0.5 - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// Tridiagonal transition matrix `a*I + S` with `S[i][i+1] = b[i]`,
/// `S[i+1][i] = -b[i]`.
pub fn diag_plus_skew(dim: usize, a: f64, b: &[f64]) -> Result<TridiagMatrix> {
    TridiagMatrix::new(vec![a; dim], b.to_vec(), b.iter().map(|v| -v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_matrix(dim: usize) -> TridiagMatrix {
        let b: Vec<f64> = (1..dim).map(|i| 5.0 * i as f64).collect();
        diag_plus_skew(dim, -0.5, &b).unwrap()
    }

    #[test]
    fn one_by_one() {
        let m = TridiagMatrix::new(vec![-0.5], vec![], vec![]).unwrap();
        let e = tridiag_skew_eigen(&m).unwrap();
        assert_eq!(e.values[0], Complex64::new(-0.5, 0.0));
        assert!((e.vectors.get(0, 0).norm() - 1.0).abs() < 1e-15);
        assert_eq!(e.pairing, vec![0]);
    }

    #[test]
    fn two_by_two_analytic() {
        let m = TridiagMatrix::new(vec![-0.5, -0.5], vec![-5.0], vec![5.0]).unwrap();
        let e = tridiag_skew_eigen(&m).unwrap();
        assert!((e.values[0] - Complex64::new(-0.5, 5.0)).norm() < 1e-12);
        assert!((e.values[1] - Complex64::new(-0.5, -5.0)).norm() < 1e-12);
        assert_eq!(e.pairing, vec![1, 0]);
        assert!(e.reconstruction_error(&m) < 1e-12);
    }

    #[test]
    fn paper_init_four_modes() {
        let m = paper_matrix(4);
        let e = tridiag_skew_eigen(&m).unwrap();
        for v in &e.values {
            assert!((v.re + 0.5).abs() <= 1e-10);
        }
        assert!(e.reconstruction_error(&m) <= 1e-8);
        for j in 0..4 {
            let p = e.pairing[j];
            assert_eq!(e.values[p], e.values[j].conj());
            for r in 0..4 {
                assert_eq!(e.vectors.get(r, p), e.vectors.get(r, j).conj());
            }
        }
    }

    #[test]
    fn odd_dimension_has_one_real_mode() {
        for dim in [3, 5, 7, 31] {
            let m = paper_matrix(dim);
            let e = tridiag_skew_eigen(&m).unwrap();
            let reals = e.values.iter().filter(|v| v.im == 0.0).count();
            assert_eq!(reals, 1, "dim {dim}");
            assert!(e.reconstruction_error(&m) <= 1e-8 * m.to_dense().max_abs());
        }
    }

    #[test]
    fn general_fallback_reconstructs() {
        let m = TridiagMatrix::new(
            vec![-0.3, -1.0, -0.7, -2.0, -0.1],
            vec![2.0, -0.4, 3.0, 0.5],
            vec![-1.5, 0.8, -2.5, 1.0],
        )
        .unwrap();
        assert!(!m.is_diag_plus_skew());
        let e = tridiag_skew_eigen(&m).unwrap();
        assert!(e.reconstruction_error(&m) <= 1e-8, "{}", e.reconstruction_error(&m));
        for j in 0..5 {
            assert_eq!(e.values[e.pairing[j]], e.values[j].conj());
        }
    }

    #[test]
    fn symmetric_like_input_gives_real_spectrum() {
        let m = TridiagMatrix::new(vec![1.0, 2.0, 3.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let e = tridiag_skew_eigen(&m).unwrap();
        assert!(e.values.iter().all(|v| v.im == 0.0));
        assert!(e.reconstruction_error(&m) <= 1e-10);
    }

    #[test]
    fn decoupled_skew_matrix() {
        let m = diag_plus_skew(4, -0.5, &[0.0, 3.0, 0.0]).unwrap();
        let e = tridiag_skew_eigen(&m).unwrap();
        assert!(e.reconstruction_error(&m) <= 1e-10);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(TridiagMatrix::new(vec![], vec![], vec![]).is_err());
        assert!(TridiagMatrix::new(vec![1.0, 2.0], vec![], vec![1.0]).is_err());
    }
}
