//! Dense linear algebra used by the rest of the crate.
//!
//! Matrices are row-major. The eigensolvers reduce to a real symmetric
//! tridiagonal form with Householder reflections and finish with implicit
//! QL iterations. Real input (all spin-chain Hamiltonians here have real
//! matrix elements) takes a purely real path that is roughly four times
//! cheaper than the complex one.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(
            rows,
            cols,
            data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
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

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `max |A - B|` over entries. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Largest deviation from Hermiticity, `max |A - A†|`.
    pub fn hermitian_deviation(&self) -> f64 {
        assert!(self.is_square());
        let mut dev = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// True if every entry has an exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `A† v` without forming the adjoint.
    pub fn adjoint_matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.rows != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: v.len(),
            });
        }
        let mut out = vec![ZERO; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        Ok(out)
    }

    /// Kronecker product `self ⊗ rhs`; `self` is the more significant factor.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (r, c) = (self.rows * rhs.rows, self.cols * rhs.cols);
        let mut out = Self::zeros(r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        out[(i * rhs.rows + k, j * rhs.cols + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        Ok(&self.matmul(rhs)? - &rhs.matmul(self)?)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<f64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, s: f64) -> CMatrix {
        self.scale(Complex64::new(s, 0.0))
    }
}

/// `C = A · B` for real row-major `A` (`n × k`) and `B` (`k × m`).
///
/// Every output entry is accumulated in ascending `k` order with a separate
/// multiply and add, so an entry's value does not depend on `m` or on
/// which other columns are computed alongside it.
pub fn real_gemm(n: usize, k: usize, m: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    assert_eq!(a.len(), n * k);
    assert_eq!(b.len(), k * m);
    assert_eq!(c.len(), n * m);
    const MR: usize = 4;
    const NR: usize = 4;
    let full_rows = n - n % MR;
    let full_cols = m - m % NR;

    for i0 in (0..full_rows).step_by(MR) {
        let arows: [&[f64]; MR] = core::array::from_fn(|r| &a[(i0 + r) * k..(i0 + r + 1) * k]);
        for j0 in (0..full_cols).step_by(NR) {
            let mut acc = [[0.0f64; NR]; MR];
            for l in 0..k {
                let brow = &b[l * m + j0..l * m + j0 + NR];
                for r in 0..MR {
                    let av = arows[r][l];
                    for s in 0..NR {
                        acc[r][s] += av * brow[s];
                    }
                }
            }
            for r in 0..MR {
                c[(i0 + r) * m + j0..(i0 + r) * m + j0 + NR].copy_from_slice(&acc[r]);
            }
        }
        for j in full_cols..m {
            for r in 0..MR {
                c[(i0 + r) * m + j] = dot_column(arows[r], b, m, j);
            }
        }
    }
    for i in full_rows..n {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..m {
            c[i * m + j] = dot_column(arow, b, m, j);
        }
    }
}

#[inline]
fn dot_column(arow: &[f64], b: &[f64], m: usize, j: usize) -> f64 {
    let mut acc = 0.0;
    for (l, &av) in arow.iter().enumerate() {
        acc += av * b[l * m + j];
    }
    acc
}

/// Eigenvalues (ascending) and, optionally, eigenvectors of a Hermitian matrix.
///
/// Eigenvectors are returned as rows of the second element: row `j` is the
/// eigenvector belonging to `values[j]`.
pub(crate) struct RawEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<Complex64>>,
}

pub(crate) fn hermitian_eigen(h: &CMatrix, want_vectors: bool) -> Result<RawEigen> {
    let n = h.rows();
    if n == 0 {
        return Ok(RawEigen {
            values: Vec::new(),
            vectors: want_vectors.then(Vec::new),
        });
    }
    if h.is_real() {
        let mut a = h.real_parts();
        let (d, e, q) = tridiagonalize_real(&mut a, n, want_vectors);
        let mut d = d;
        let mut e = e;
        match q {
            Some(mut zt) => {
                implicit_ql(&mut d, &mut e, Some((&mut zt, n)))?;
                let vectors = zt.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
                Ok(RawEigen {
                    values: d,
                    vectors: Some(vectors),
                })
            }
            None => {
                implicit_ql::<f64>(&mut d, &mut e, None)?;
                Ok(RawEigen {
                    values: d,
                    vectors: None,
                })
            }
        }
    } else {
        let mut a = h.as_slice().to_vec();
        let (mut d, mut e, q) = tridiagonalize_complex(&mut a, n, want_vectors);
        match q {
            Some(mut zt) => {
                implicit_ql(&mut d, &mut e, Some((&mut zt, n)))?;
                Ok(RawEigen {
                    values: d,
                    vectors: Some(zt),
                })
            }
            None => {
                implicit_ql::<Complex64>(&mut d, &mut e, None)?;
                Ok(RawEigen {
                    values: d,
                    vectors: None,
                })
            }
        }
    }
}

/// Householder reduction of a real symmetric matrix (row-major, lower part
/// used) to tridiagonal form. Returns the diagonal, the sub-diagonal
/// (`e[i]` couples `i` and `i + 1`, `e[n-1] = 0`) and, on request, `Qᵀ`
/// stored row-major so that row `j` is column `j` of `Q`.
fn tridiagonalize_real(
    a: &mut [f64],
    n: usize,
    want_q: bool,
) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    // Householder vectors, v_k lives in rows k+1..n.
    let mut reflectors: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut v: Vec<f64> = (0..len).map(|i| a[(k + 1 + i) * n + k]).collect();
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            e[k] = alpha;
            continue;
        }
        let beta = 2.0 / vnorm2;
        e[k] = alpha;

        // p = beta * A22 v, using the full symmetric trailing block.
        let off = k + 1;
        for i in 0..len {
            let row = &a[(off + i) * n + off..(off + i) * n + n];
            let mut s = 0.0;
            for (x, y) in row.iter().zip(&v) {
                s += x * y;
            }
            p[i] = beta * s;
        }
        let kfac = 0.5 * beta * p[..len].iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        for i in 0..len {
            p[i] -= kfac * v[i];
        }
        // A22 -= v wᵀ + w vᵀ
        for i in 0..len {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[(off + i) * n + off..(off + i) * n + n];
            for ((x, &vj), &wj) in row.iter_mut().zip(&v).zip(&p[..len]) {
                *x -= vi * wj + wi * vj;
            }
        }
        if want_q {
            reflectors.push((off, beta, v));
        }
    }
    for i in 0..n {
        d[i] = a[i * n + i];
    }
    if n >= 2 {
        e[n - 2] = a[(n - 1) * n + (n - 2)];
    }
    e[n - 1] = 0.0;

    let q = want_q.then(|| {
        // Build Qᵀ = H_{m} ... H_1 H_0 applied from the right to I, i.e. rows
        // of Qᵀ are columns of Q = H_0 H_1 ... H_m. Each H is symmetric, so
        // Qᵀ = H_m ... H_0 and we apply H_0 first to the rows' right side.
        let mut qt = vec![0.0; n * n];
        for i in 0..n {
            qt[i * n + i] = 1.0;
        }
        // Qᵀ = (H_0 ... H_m)ᵀ; row j of Qᵀ is Qᵀ e_j ... compute Q explicitly
        // by backward accumulation on rows: Q = H_0 (H_1 (... H_m I)).
        for (off, beta, v) in reflectors.iter().rev() {
            let off = *off;
            let len = n - off;
            // Q[off.., off..] -= beta v (vᵀ Q[off.., off..])
            let mut w = vec![0.0; len];
            for (i, &vi) in v.iter().enumerate() {
                let row = &qt[(off + i) * n + off..(off + i) * n + n];
                for (wj, &x) in w.iter_mut().zip(row) {
                    *wj += vi * x;
                }
            }
            for (i, &vi) in v.iter().enumerate() {
                let s = beta * vi;
                let row = &mut qt[(off + i) * n + off..(off + i) * n + n];
                for (x, &wj) in row.iter_mut().zip(&w) {
                    *x -= s * wj;
                }
            }
        }
        // qt now holds Q; transpose in place to get rows = columns of Q.
        for i in 0..n {
            for j in i + 1..n {
                qt.swap(i * n + j, j * n + i);
            }
        }
        qt
    });
    (d, e, q)
}

/// Complex Householder reduction to Hermitian tridiagonal form, followed by
/// a diagonal unitary rescaling that makes the off-diagonal real.
fn tridiagonalize_complex(
    a: &mut [Complex64],
    n: usize,
    want_q: bool,
) -> (Vec<f64>, Vec<f64>, Option<Vec<Complex64>>) {
    let mut sub = vec![ZERO; n];
    let mut reflectors: Vec<(usize, f64, Vec<Complex64>)> = Vec::new();
    let mut p = vec![ZERO; n];

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let off = k + 1;
        let mut v: Vec<Complex64> = (0..len).map(|i| a[(off + i) * n + k]).collect();
        let norm = libm::sqrt(v.iter().map(|x| x.norm_sqr()).sum::<f64>());
        if norm == 0.0 {
            continue;
        }
        let phase = if v[0].norm() == 0.0 {
            ONE
        } else {
            v[0] / v[0].norm()
        };
        let alpha = -phase * norm;
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            sub[k] = alpha;
            continue;
        }
        let beta = 2.0 / vnorm2;
        sub[k] = alpha;

        for i in 0..len {
            let row = &a[(off + i) * n + off..(off + i) * n + n];
            let mut s = ZERO;
            for (x, y) in row.iter().zip(&v) {
                s += x * y;
            }
            p[i] = s * beta;
        }
        let kfac: Complex64 = v
            .iter()
            .zip(&p[..len])
            .map(|(vi, pi)| vi.conj() * pi)
            .sum::<Complex64>()
            * (0.5 * beta);
        for i in 0..len {
            p[i] -= kfac * v[i];
        }
        for i in 0..len {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[(off + i) * n + off..(off + i) * n + n];
            for ((x, &vj), &wj) in row.iter_mut().zip(&v).zip(&p[..len]) {
                *x -= vi * wj.conj() + wi * vj.conj();
            }
        }
        if want_q {
            reflectors.push((off, beta, v));
        }
    }
    if n >= 2 {
        sub[n - 2] = a[(n - 1) * n + (n - 2)];
    }

    let d: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    // Diagonal phases making the sub-diagonal real and non-negative.
    let mut phases = vec![ONE; n];
    let mut e = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let t = sub[k];
        let mag = t.norm();
        e[k] = mag;
        phases[k + 1] = if mag == 0.0 {
            phases[k]
        } else {
            phases[k] * (t / mag)
        };
    }

    let q = want_q.then(|| {
        let mut q = vec![ZERO; n * n];
        for i in 0..n {
            q[i * n + i] = ONE;
        }
        for (off, beta, v) in reflectors.iter().rev() {
            let off = *off;
            let len = n - off;
            let mut w = vec![ZERO; len];
            for (i, vi) in v.iter().enumerate() {
                let vc = vi.conj();
                let row = &q[(off + i) * n + off..(off + i) * n + n];
                for (wj, &x) in w.iter_mut().zip(row) {
                    *wj += vc * x;
                }
            }
            for (i, &vi) in v.iter().enumerate() {
                let s = vi * *beta;
                let row = &mut q[(off + i) * n + off..(off + i) * n + n];
                for (x, &wj) in row.iter_mut().zip(&w) {
                    *x -= s * wj;
                }
            }
        }
        // Rows of the result are columns of Q·D.
        let mut zt = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                zt[j * n + i] = q[i * n + j] * phases[j];
            }
        }
        zt
    });
    (d, e, q)
}

/// Implicit QL iterations with Wilkinson-type shifts on a symmetric
/// tridiagonal matrix. Rotations are applied to the rows of `zt`, so on
/// exit row `j` is the eigenvector for `d[j]`. Values are sorted ascending
/// (stable) with the rows permuted alongside.
fn implicit_ql<T>(d: &mut [f64], e: &mut [f64], mut zt: Option<(&mut Vec<T>, usize)>) -> Result<()>
where
    T: Copy + Mul<f64, Output = T> + Add<Output = T> + Sub<Output = T>,
{
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some((z, n)) = zt.as_mut() {
                    let n = *n;
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = *a * s + f * c;
                        *a = *a * c - f * s;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    d.copy_from_slice(&sorted);
    if let Some((z, n)) = zt {
        let mut out = Vec::with_capacity(z.len());
        for &i in &order {
            out.extend_from_slice(&z[i * n..(i + 1) * n]);
        }
        *z = out;
    }
    Ok(())
}
