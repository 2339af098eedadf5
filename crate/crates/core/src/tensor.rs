//! Dense complex tensors and the linear-algebra primitives the rest of the
//! engine is built from.
//!
//! Storage is row-major. MPS site tensors use the layout
//! `(left bond, physical, right bond)` everywhere in the crate.
//!
//! Dense decompositions (SVD, Hermitian eigensolver, QR) and matrix products
//! are delegated to `faer`; index bookkeeping, truncation and the matrix
//! functions built on top of them live here.

use faer::{Accum, MatMut, MatRef, Par, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance used to decide whether an input is "Hermitian enough" to be
/// symmetrized and diagonalized.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// A dense, row-major, complex tensor of arbitrary rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![ZERO; len] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<C64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in row-major order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape: shape.to_vec(), data }
    }

    pub fn scalar(value: C64) -> Self {
        Self { shape: Vec::new(), data: vec![value] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = ONE;
        }
        t
    }

    pub fn from_diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut t = Self::zeros(&[n, n]);
        for (i, &v) in values.iter().enumerate() {
            t.data[i * n + i] = C64::new(v, 0.0);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| {
            debug_assert!(i < n);
            acc * n + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Reorders axes so that output axis `k` is input axis `axes[k]`.
    pub fn permute(&self, axes: &[usize]) -> Tensor {
        assert_eq!(axes.len(), self.rank(), "permutation rank mismatch");
        if axes.iter().enumerate().all(|(k, &a)| k == a) {
            return self.clone();
        }
        let rank = self.rank();
        let mut in_strides = vec![1usize; rank];
        for ax in (0..rank.saturating_sub(1)).rev() {
            in_strides[ax] = in_strides[ax + 1] * self.shape[ax + 1];
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; rank];
        let mut src = 0usize;
        let inner = rank - 1;
        let (inner_len, inner_stride) = (out_shape[inner], strides[inner]);
        for _ in 0..self.data.len() / inner_len.max(1) {
            let mut s = src;
            for _ in 0..inner_len {
                data.push(self.data[s]);
                s += inner_stride;
            }
            for ax in (0..inner).rev() {
                idx[ax] += 1;
                src += strides[ax];
                if idx[ax] < out_shape[ax] {
                    break;
                }
                src -= strides[ax] * out_shape[ax];
                idx[ax] = 0;
            }
        }
        Tensor { shape: out_shape, data }
    }

    pub fn conj(&self) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, factor: C64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|z| z * factor).collect() }
    }

    pub fn scale_real(&self, factor: f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|z| z * factor).collect() }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Tensor, f: impl Fn(C64, C64) -> C64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "elementwise op on {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise distance; infinite when the shapes differ.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Inner product `<self|other>` over all entries.
    pub fn inner(&self, other: &Tensor) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    // ---- rank-2 helpers -------------------------------------------------

    fn expect_matrix(&self, what: &str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            s => Err(Error::Dimension(format!("{what} needs a rank-2 tensor, got shape {s:?}"))),
        }
    }

    pub fn nrows(&self) -> usize {
        self.shape[0]
    }

    pub fn ncols(&self) -> usize {
        self.shape[1]
    }

    pub(crate) fn as_mat(&self) -> MatRef<'_, C64> {
        let (r, c) = self.expect_matrix("as_mat").expect("rank-2 tensor");
        MatRef::from_row_major_slice(&self.data, r, c)
    }

    pub(crate) fn from_mat(m: MatRef<'_, C64>) -> Tensor {
        let (r, c) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Tensor { shape: vec![r, c], data }
    }

    /// Views any tensor as a matrix by grouping the first `split` axes as rows.
    pub fn matricize(&self, split: usize) -> Tensor {
        let rows: usize = self.shape[..split].iter().product();
        let cols: usize = self.shape[split..].iter().product();
        Tensor { shape: vec![rows, cols], data: self.data.clone() }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.expect_matrix("matmul")?;
        let (k2, n) = other.expect_matrix("matmul")?;
        if k != k2 {
            return Err(Error::Dimension(format!("matmul {m}x{k} by {k2}x{n}")));
        }
        let mut data = vec![ZERO; m * n];
        gemm_row_major(&self.data, &other.data, &mut data, m, k, n);
        Ok(Tensor { shape: vec![m, n], data })
    }

    pub fn adjoint(&self) -> Tensor {
        assert_eq!(self.rank(), 2, "adjoint of non-matrix");
        self.permute(&[1, 0]).conj()
    }

    pub fn transpose(&self) -> Tensor {
        assert_eq!(self.rank(), 2, "transpose of non-matrix");
        self.permute(&[1, 0])
    }

    pub fn trace(&self) -> C64 {
        let n = self.shape[0].min(self.shape[1]);
        (0..n).map(|i| self.data[i * self.shape[1] + i]).sum()
    }

    /// Kronecker product of two matrices; the first factor is the slow index.
    pub fn kron(&self, other: &Tensor) -> Tensor {
        let (r1, c1) = (self.shape[0], self.shape[1]);
        let (r2, c2) = (other.shape[0], other.shape[1]);
        Tensor::from_fn(&[r1 * r2, c1 * c2], |ix| {
            let (i, j) = (ix[0], ix[1]);
            self.data[(i / r2) * c1 + j / c2] * other.data[(i % r2) * c2 + j % c2]
        })
    }

    /// Max-norm distance between the matrix and its conjugate transpose.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.shape[0];
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = self.data[i * n + j] - self.data[j * n + i].conj();
                dev = dev.max(d.norm());
            }
        }
        dev
    }

    /// `(M + M†) / 2`.
    pub fn hermitian_part(&self) -> Tensor {
        let n = self.shape[0];
        Tensor::from_fn(&[n, n], |ix| {
            0.5 * (self.data[ix[0] * n + ix[1]] + self.data[ix[1] * n + ix[0]].conj())
        })
    }

    /// Max-norm distance from the identity matrix.
    pub fn identity_deviation(&self) -> f64 {
        let n = self.shape[0];
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..self.shape[1] {
                let target = if i == j { ONE } else { ZERO };
                dev = dev.max((self.data[i * self.shape[1] + j] - target).norm());
            }
        }
        dev
    }

    /// Multiplies row `i` by `d[i]`.
    pub fn scale_rows(&self, d: &[f64]) -> Tensor {
        let cols: usize = self.shape[1..].iter().product();
        let mut out = self.clone();
        for (row, &f) in out.data.chunks_mut(cols).zip(d) {
            row.iter_mut().for_each(|z| *z *= f);
        }
        out
    }

    /// Multiplies the last axis by `d` (column scaling of the matricized tensor).
    pub fn scale_last_axis(&self, d: &[f64]) -> Tensor {
        let n = *self.shape.last().expect("non-scalar");
        assert_eq!(n, d.len());
        let mut out = self.clone();
        for row in out.data.chunks_mut(n) {
            row.iter_mut().zip(d).for_each(|(z, &f)| *z *= f);
        }
        out
    }
}

/// Row-major `C = A B` for `A: m x k`, `B: k x n`.
pub(crate) fn gemm_row_major(a: &[C64], b: &[C64], c: &mut [C64], m: usize, k: usize, n: usize) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|z| *z = ZERO);
        return;
    }
    let lhs = MatRef::from_row_major_slice(a, m, k);
    let rhs = MatRef::from_row_major_slice(b, k, n);
    let dst = MatMut::from_row_major_slice_mut(c, m, n);
    faer::linalg::matmul::matmul(dst, Accum::Replace, lhs, rhs, ONE, Par::Seq);
}

/// Sums over the paired axes of `a` and `b`.
///
/// The result carries the unpaired axes of `a` followed by the unpaired axes
/// of `b`, each in their original order.
pub fn contract(a: &Tensor, b: &Tensor, axis_pairs: &[(usize, usize)]) -> Result<Tensor> {
    for &(ia, ib) in axis_pairs {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::Dimension(format!(
                "axis pair ({ia}, {ib}) out of range for ranks {} and {}",
                a.rank(),
                b.rank()
            )));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Dimension(format!(
                "contracting axis {ia} (extent {}) with axis {ib} (extent {})",
                a.shape[ia], b.shape[ib]
            )));
        }
    }
    let paired_a: Vec<usize> = axis_pairs.iter().map(|p| p.0).collect();
    let paired_b: Vec<usize> = axis_pairs.iter().map(|p| p.1).collect();
    let free_a: Vec<usize> = (0..a.rank()).filter(|ax| !paired_a.contains(ax)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|ax| !paired_b.contains(ax)).collect();

    let perm_a: Vec<usize> = free_a.iter().chain(&paired_a).copied().collect();
    let perm_b: Vec<usize> = paired_b.iter().chain(&free_b).copied().collect();
    let a_p = a.permute(&perm_a);
    let b_p = b.permute(&perm_b);

    let m: usize = free_a.iter().map(|&ax| a.shape[ax]).product();
    let k: usize = paired_a.iter().map(|&ax| a.shape[ax]).product();
    let n: usize = free_b.iter().map(|&ax| b.shape[ax]).product();

    let mut out_shape: Vec<usize> = free_a.iter().map(|&ax| a.shape[ax]).collect();
    out_shape.extend(free_b.iter().map(|&ax| b.shape[ax]));
    let mut data = vec![ZERO; m * n];
    gemm_row_major(&a_p.data, &b_p.data, &mut data, m, k, n);
    Ok(Tensor { shape: out_shape, data })
}

/// Truncated singular value decomposition `M ≈ U diag(S) V`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Left isometry, `rows x kept`.
    pub u: Tensor,
    /// Kept singular values, descending.
    pub s: Vec<f64>,
    /// Right isometry with orthonormal rows, `kept x cols`.
    pub v: Tensor,
    /// Sum of squared discarded singular values.
    pub truncation_weight: f64,
}

impl SvdResult {
    pub fn kept(&self) -> usize {
        self.s.len()
    }
}

/// Number of singular values to keep under the truncation rule: at most
/// `chi_max`, then drop trailing values while their cumulative squared
/// weight stays within `discard_tol`, never dropping everything.
pub fn truncation_cut(s: &[f64], chi_max: usize, discard_tol: f64) -> usize {
    let mut keep = s.len().min(chi_max.max(1));
    let mut dropped = 0.0;
    while keep > 1 {
        let w = s[keep - 1] * s[keep - 1];
        if dropped + w > discard_tol {
            break;
        }
        dropped += w;
        keep -= 1;
    }
    keep
}

pub fn svd_truncate(m: &Tensor, chi_max: usize, discard_tol: f64) -> Result<SvdResult> {
    let (rows, cols) = m.expect_matrix("svd_truncate")?;
    if chi_max == 0 {
        return Err(Error::Invalid("chi_max must be positive".into()));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("svd of empty {rows}x{cols} matrix")));
    }
    if !m.is_finite() {
        return Err(Error::Numerical { context: format!("svd of non-finite {rows}x{cols} matrix") });
    }
    let svd = m.as_mat().thin_svd().map_err(|e| Error::Numerical {
        context: format!("svd of {rows}x{cols} matrix: {e:?}"),
    })?;
    let s_full: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re.max(0.0)).collect();
    // faer already returns descending values; a stable sort keeps degenerate
    // blocks in decomposition order.
    let mut order: Vec<usize> = (0..s_full.len()).collect();
    order.sort_by(|&i, &j| s_full[j].partial_cmp(&s_full[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted: Vec<f64> = order.iter().map(|&i| s_full[i]).collect();

    let keep = truncation_cut(&sorted, chi_max, discard_tol);
    let truncation_weight = sorted[keep..].iter().map(|x| x * x).sum();

    let u_full = svd.U();
    let v_full = svd.V();
    let mut u = Tensor::zeros(&[rows, keep]);
    let mut v = Tensor::zeros(&[keep, cols]);
    for (kk, &src) in order[..keep].iter().enumerate() {
        for i in 0..rows {
            u.data[i * keep + kk] = u_full[(i, src)];
        }
        for j in 0..cols {
            v.data[kk * cols + j] = v_full[(j, src)].conj();
        }
    }
    Ok(SvdResult { u, s: sorted[..keep].to_vec(), v, truncation_weight })
}

/// Singular values only, descending.
pub fn singular_values(m: &Tensor) -> Result<Vec<f64>> {
    let (rows, cols) = m.expect_matrix("singular_values")?;
    let mut s: Vec<f64> = m
        .as_mat()
        .singular_values()
        .map_err(|e| Error::Numerical { context: format!("singular values of {rows}x{cols}: {e:?}") })?;
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(s)
}

/// Sum of singular values.
pub fn nuclear_norm(m: &Tensor) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending,
/// eigenvectors in the columns of the returned unitary.
pub fn eigh_hermitian(m: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let (r, c) = m.expect_matrix("eigh_hermitian")?;
    if r != c {
        return Err(Error::Dimension(format!("eigh of non-square {r}x{c} matrix")));
    }
    let deviation = m.hermiticity_deviation();
    if !(deviation <= HERMITIAN_TOL) {
        return Err(Error::NotHermitian { deviation });
    }
    let sym = m.hermitian_part();
    let evd = sym
        .as_mat()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical { context: format!("eigh of {r}x{r} matrix: {e:?}") })?;
    let values: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((values, Tensor::from_mat(evd.U())))
}

/// `V f(diag(e)) V†` for a Hermitian matrix with decomposition `(e, V)`.
pub fn hermitian_function(values: &[f64], vectors: &Tensor, f: impl Fn(f64) -> C64) -> Tensor {
    let n = values.len();
    let fv: Vec<C64> = values.iter().map(|&e| f(e)).collect();
    let mut left = vectors.clone();
    for row in left.data.chunks_mut(n) {
        row.iter_mut().zip(&fv).for_each(|(z, f)| *z *= f);
    }
    left.matmul(&vectors.adjoint()).expect("square factors")
}

/// `exp(-i * scale * m)` for Hermitian `m`.
pub fn expm_i_hermitian(m: &Tensor, scale: f64) -> Result<Tensor> {
    let (values, vectors) = eigh_hermitian(m)?;
    Ok(hermitian_function(&values, &vectors, |e| C64::from_polar(1.0, -scale * e)))
}

/// `exp(-scale * m)` for Hermitian `m` (imaginary-time propagator).
pub fn expm_hermitian(m: &Tensor, scale: f64) -> Result<Tensor> {
    let (values, vectors) = eigh_hermitian(m)?;
    Ok(hermitian_function(&values, &vectors, |e| C64::new((-scale * e).exp(), 0.0)))
}

/// Factor `K` with `K K† = m` for a Hermitian positive semi-definite `m`;
/// negative eigenvalues from round-off are clamped to zero.
pub fn psd_factor(m: &Tensor) -> Result<Tensor> {
    let (values, vectors) = eigh_hermitian(m)?;
    let roots: Vec<f64> = values.iter().map(|&e| e.max(0.0).sqrt()).collect();
    Ok(vectors.scale_last_axis(&roots))
}

/// Thin QR decomposition `m = Q R` with `Q†Q = I`.
pub fn qr(m: &Tensor) -> Result<(Tensor, Tensor)> {
    let (rows, cols) = m.expect_matrix("qr")?;
    let q = m.as_mat().qr();
    let k = rows.min(cols);
    let qm = q.compute_thin_Q();
    let r = q.thin_R();
    let q_t = Tensor::from_mat(qm.as_ref());
    let mut r_t = Tensor::zeros(&[k, cols]);
    for i in 0..k {
        for j in i..cols {
            r_t.data[i * cols + j] = r[(i, j)];
        }
    }
    Ok((q_t, r_t))
}

/// Thin QR with the phases fixed so that `diag(R)` is real and non-negative,
/// which makes the factorization unique for full-rank input.
pub fn qr_positive(m: &Tensor) -> Result<(Tensor, Tensor)> {
    let (mut q, mut r) = qr(m)?;
    let k = r.nrows();
    let (qc, rc) = (q.ncols(), r.ncols());
    for i in 0..k {
        let d = r.data[i * rc + i];
        let n = d.norm();
        if n == 0.0 {
            continue;
        }
        let phase = d / n;
        for row in 0..q.nrows() {
            q.data[row * qc + i] *= phase;
        }
        let inv = phase.conj();
        for col in 0..rc {
            r.data[i * rc + col] *= inv;
        }
    }
    Ok((q, r))
}

/// Thin LQ decomposition `m = L Q` with `Q Q† = I` and a real non-negative
/// diagonal of `L`.
pub fn lq_positive(m: &Tensor) -> Result<(Tensor, Tensor)> {
    let (q, r) = qr_positive(&m.adjoint())?;
    Ok((r.adjoint(), q.adjoint()))
}
