//! Dense complex tensors.
//!
//! Data is stored row-major: the last index runs fastest. Every reshape in
//! the crate relies on this order, so a tensor of shape `(a, b, c)` viewed as
//! a matrix `(a*b, c)` needs no copy.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(shape.iter().all(|&e| e >= 1), "tensor extents must be >= 1: {shape:?}");
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![ZERO; len] }
    }

    pub fn from_data(shape: &[usize], data: Vec<C64>) -> Result<Self> {
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::Shape(format!("zero extent in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar(value: C64) -> Self {
        Self { shape: Vec::new(), data: vec![value] }
    }

    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self { shape: vec![r, c], data }
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

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (&i, &e) in index.iter().zip(&self.shape) {
            debug_assert!(i < e);
            off = off * e + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: C64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    /// Reinterpret the data under a new shape with the same element count.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() || shape.iter().any(|&e| e == 0) {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Reorder axes: axis `k` of the result is axis `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let rank = self.rank();
        if perm.len() != rank {
            return Err(Error::Axis(format!("permutation {perm:?} for rank {rank}")));
        }
        let mut seen = vec![false; rank];
        for &p in perm {
            if p >= rank || seen[p] {
                return Err(Error::Axis(format!("invalid permutation {perm:?}")));
            }
            seen[p] = true;
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_strides = strides(&self.shape);
        let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        let inner = rank - 1;
        let inner_len = new_shape[inner];
        let inner_stride = src_strides[inner];
        let mut counter = vec![0usize; rank];
        let outer: usize = new_shape[..inner].iter().product();
        for _ in 0..outer {
            let base: usize = counter[..inner]
                .iter()
                .zip(&src_strides[..inner])
                .map(|(c, s)| c * s)
                .sum();
            for k in 0..inner_len {
                out.push(self.data[base + k * inner_stride]);
            }
            for ax in (0..inner).rev() {
                counter[ax] += 1;
                if counter[ax] < new_shape[ax] {
                    break;
                }
                counter[ax] = 0;
            }
        }
        Ok(Self { shape: new_shape, data: out })
    }

    pub fn scale(&mut self, factor: C64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn scaled(&self, factor: C64) -> Self {
        let mut t = self.clone();
        t.scale(factor);
        t
    }

    pub fn conj(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|x| x.conj()).collect() }
    }

    pub fn add_assign_scaled(&mut self, other: &Self, factor: C64) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>` with `self` conjugated.
    pub fn dot(&self, other: &Self) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        let (r, c) = self.matrix_dims()?;
        Ok(DMatrix::from_row_slice(r, c, &self.data))
    }

    fn matrix_dims(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::Shape(format!("expected a rank-2 tensor, got shape {other:?}"))),
        }
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

/// How an operand enters [`gemm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    N,
    T,
    /// Conjugate transpose.
    H,
    /// Elementwise conjugate, no transpose.
    C,
}

/// `c = alpha * op(a) * op(b) + beta * c` on row-major buffers.
///
/// `a` is stored as an `ar x ac` row-major matrix, `b` as `br x bc`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    alpha: C64,
    a: &[C64],
    (ar, ac): (usize, usize),
    opa: Op,
    b: &[C64],
    (br, bc): (usize, usize),
    opb: Op,
    beta: C64,
    c: &mut [C64],
) {
    use matrixmultiply::CGemmOption;
    debug_assert_eq!(a.len(), ar * ac);
    debug_assert_eq!(b.len(), br * bc);
    let (m, k, rsa, csa) = match opa {
        Op::N | Op::C => (ar, ac, ac as isize, 1),
        Op::T | Op::H => (ac, ar, 1, ac as isize),
    };
    let (k2, n, rsb, csb) = match opb {
        Op::N | Op::C => (br, bc, bc as isize, 1),
        Op::T | Op::H => (bc, br, 1, bc as isize),
    };
    assert_eq!(k, k2, "gemm inner dimension mismatch");
    assert_eq!(c.len(), m * n, "gemm output size mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    // Packing overhead dominates tiny products; loop directly.
    if m * n * k <= 16 * 1024 {
        let (ca, cb) = (matches!(opa, Op::C | Op::H), matches!(opb, Op::C | Op::H));
        let (rsa, csa, rsb, csb) = (rsa as usize, csa as usize, rsb as usize, csb as usize);
        if beta == ZERO {
            c.iter_mut().for_each(|x| *x = ZERO);
        } else if beta != ONE {
            c.iter_mut().for_each(|x| *x *= beta);
        }
        for i in 0..m {
            let row = &mut c[i * n..(i + 1) * n];
            for p in 0..k {
                let x = a[i * rsa + p * csa];
                let x = alpha * if ca { x.conj() } else { x };
                if x == ZERO {
                    continue;
                }
                for (j, out) in row.iter_mut().enumerate() {
                    let y = b[p * rsb + j * csb];
                    *out += x * if cb { y.conj() } else { y };
                }
            }
        }
        return;
    }
    // The backend has no conjugation flag; conjugated operands are copied.
    fn conjugated(x: &[C64], op: Op) -> std::borrow::Cow<'_, [C64]> {
        match op {
            Op::C | Op::H => std::borrow::Cow::Owned(x.iter().map(|v| v.conj()).collect()),
            _ => std::borrow::Cow::Borrowed(x),
        }
    }
    let a = conjugated(a, opa);
    let b = conjugated(b, opb);
    // SAFETY: Complex<f64> is repr(C) with layout [re, im]; strides are in
    // bounds for the asserted buffer sizes.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            rsa,
            csa,
            b.as_ptr() as *const [f64; 2],
            rsb,
            csb,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}

/// Plain product of two row-major matrices.
pub fn matmul(a: &[C64], ad: (usize, usize), opa: Op, b: &[C64], bd: (usize, usize), opb: Op) -> Vec<C64> {
    let m = if matches!(opa, Op::N | Op::C) { ad.0 } else { ad.1 };
    let n = if matches!(opb, Op::N | Op::C) { bd.1 } else { bd.0 };
    let mut c = vec![ZERO; m * n];
    gemm(ONE, a, ad, opa, b, bd, opb, ZERO, &mut c);
    c
}

fn check_axes(t: &DenseTensor, axes: &[usize], which: &str) -> Result<()> {
    for (k, &ax) in axes.iter().enumerate() {
        if ax >= t.rank() {
            return Err(Error::Axis(format!(
                "axis {ax} out of range for {which} of rank {}",
                t.rank()
            )));
        }
        if axes[..k].contains(&ax) {
            return Err(Error::Axis(format!("duplicate axis {ax} for {which}")));
        }
    }
    Ok(())
}

/// Sum over paired axes of `a` and `b`.
///
/// The result carries the free axes of `a` followed by the free axes of `b`,
/// each in their original order.
pub fn contract(a: &DenseTensor, axes_a: &[usize], b: &DenseTensor, axes_b: &[usize]) -> Result<DenseTensor> {
    if axes_a.len() != axes_b.len() {
        return Err(Error::Axis(format!(
            "paired axis lists differ in length: {axes_a:?} vs {axes_b:?}"
        )));
    }
    check_axes(a, axes_a, "left operand")?;
    check_axes(b, axes_b, "right operand")?;
    for (&x, &y) in axes_a.iter().zip(axes_b) {
        if a.shape[x] != b.shape[y] {
            return Err(Error::Shape(format!(
                "extent mismatch: axis {x} of left ({}) vs axis {y} of right ({})",
                a.shape[x], b.shape[y]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|k| !axes_a.contains(k)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|k| !axes_b.contains(k)).collect();
    let perm_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
    let perm_b: Vec<usize> = axes_b.iter().chain(&free_b).copied().collect();
    let ap = a.permute(&perm_a)?;
    let bp = b.permute(&perm_b)?;
    let m: usize = free_a.iter().map(|&k| a.shape[k]).product();
    let k: usize = axes_a.iter().map(|&x| a.shape[x]).product();
    let n: usize = free_b.iter().map(|&x| b.shape[x]).product();
    let data = matmul(&ap.data, (m, k), Op::N, &bp.data, (k, n), Op::N);
    let shape: Vec<usize> = free_a
        .iter()
        .map(|&x| a.shape[x])
        .chain(free_b.iter().map(|&x| b.shape[x]))
        .collect();
    Ok(DenseTensor { shape, data })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationReport {
    pub kept: usize,
    /// Squared weight of the dropped singular values relative to the total.
    pub discarded_weight: f64,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
}

/// Result of [`svd_truncate`]: `m ~ u * diag(s) * v`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseTensor,
    pub s: Vec<f64>,
    pub v: DenseTensor,
    pub report: TruncationReport,
}

/// Thin SVD followed by truncation to at most `max_keep` values, dropping
/// those below `cutoff * s_max`.
pub fn svd_truncate(m: &DenseTensor, max_keep: usize, cutoff: f64) -> Result<Svd> {
    let (rows, cols) = m.matrix_dims()?;
    if max_keep == 0 {
        return Err(Error::InvalidArgument("max_keep must be >= 1".into()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let full = svd_full(&m.data, rows, cols)?;
    let k = full.s.len();
    let total: f64 = full.s.iter().map(|x| x * x).sum();
    let smax = full.s.first().copied().unwrap_or(0.0);
    let above = full.s.iter().take_while(|&&x| x > cutoff * smax && x > 0.0).count();
    let kept = max_keep.min(above).max(1).min(k);
    let dropped: f64 = full.s[kept..].iter().map(|x| x * x).sum();
    let discarded_weight = if total > 0.0 && kept < k { (dropped / total).clamp(0.0, 1.0) } else { 0.0 };
    let mut u = vec![ZERO; rows * kept];
    for i in 0..rows {
        u[i * kept..(i + 1) * kept].copy_from_slice(&full.u[i * k..i * k + kept]);
    }
    let v = full.v[..kept * cols].to_vec();
    Ok(Svd {
        u: DenseTensor { shape: vec![rows, kept], data: u },
        s: full.s[..kept].to_vec(),
        v: DenseTensor { shape: vec![kept, cols], data: v },
        report: TruncationReport { kept, discarded_weight, singular_values: full.s },
    })
}

pub(crate) struct RawSvd {
    /// rows x k, row-major
    pub u: Vec<C64>,
    pub s: Vec<f64>,
    /// k x cols, row-major
    pub v: Vec<C64>,
}

/// Thin SVD with singular values sorted descending; `k = min(rows, cols)`.
pub(crate) fn svd_full(data: &[C64], rows: usize, cols: usize) -> Result<RawSvd> {
    let k = rows.min(cols);
    if data.iter().all(|x| *x == ZERO) {
        // nalgebra handles this, but the degenerate case is common for
        // freshly padded bonds and needs a well-defined orthonormal basis.
        let mut u = vec![ZERO; rows * k];
        let mut v = vec![ZERO; k * cols];
        for i in 0..k {
            u[i * k + i] = ONE;
            v[i * cols + i] = ONE;
        }
        return Ok(RawSvd { u, s: vec![0.0; k], v });
    }
    let mat = DMatrix::from_row_slice(rows, cols, data);
    let svd = mat
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD failed to converge".into()))?;
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return Err(Error::Numerical("SVD returned no singular vectors".into()));
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].max(0.0)).collect();
    let mut uo = vec![ZERO; rows * k];
    for i in 0..rows {
        for (c, &o) in order.iter().enumerate() {
            uo[i * k + c] = u[(i, o)];
        }
    }
    let mut vo = vec![ZERO; k * cols];
    for (r, &o) in order.iter().enumerate() {
        for j in 0..cols {
            vo[r * cols + j] = vt[(o, j)];
        }
    }
    Ok(RawSvd { u: uo, s, v: vo })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `m = q * r` with orthonormal columns in `q`.
    Left,
    /// `m = r * q` with orthonormal rows in `q`.
    Right,
}

/// Orthonormal factor and remainder of a thin QR (or LQ) decomposition.
///
/// Returns `(q, r)` with `q * r = m` for [`Side::Left`] and `r * q = m` for
/// [`Side::Right`]. Rank-deficient input still yields a fully orthonormal
/// factor.
pub fn qr_orthonormalize(m: &DenseTensor, side: Side) -> Result<(DenseTensor, DenseTensor)> {
    let (rows, cols) = m.matrix_dims()?;
    if !m.is_finite() {
        return Err(Error::NonFinite("qr input"));
    }
    match side {
        Side::Left => {
            let (q, r, k) = householder_qr(&m.data, rows, cols);
            Ok((
                DenseTensor { shape: vec![rows, k], data: q },
                DenseTensor { shape: vec![k, cols], data: r },
            ))
        }
        Side::Right => {
            // m = r q  <=>  m^H = q^H r^H
            let mut mh = vec![ZERO; rows * cols];
            for i in 0..rows {
                for j in 0..cols {
                    mh[j * rows + i] = m.data[i * cols + j].conj();
                }
            }
            let (q, r, k) = householder_qr(&mh, cols, rows);
            let mut qh = vec![ZERO; k * cols];
            for i in 0..cols {
                for j in 0..k {
                    qh[j * cols + i] = q[i * k + j].conj();
                }
            }
            let mut rh = vec![ZERO; rows * k];
            for i in 0..k {
                for j in 0..rows {
                    rh[j * k + i] = r[i * rows + j].conj();
                }
            }
            Ok((
                DenseTensor { shape: vec![k, cols], data: qh },
                DenseTensor { shape: vec![rows, k], data: rh },
            ))
        }
    }
}

/// Thin Householder QR of a row-major `rows x cols` matrix.
/// Returns `(q: rows x k, r: k x cols, k)` with `k = min(rows, cols)`.
pub(crate) fn householder_qr(data: &[C64], rows: usize, cols: usize) -> (Vec<C64>, Vec<C64>, usize) {
    let k = rows.min(cols);
    // Work column-major for contiguous Householder updates.
    let mut a = vec![ZERO; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            a[j * rows + i] = data[i * cols + j];
        }
    }
    let mut vs: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut taus: Vec<C64> = Vec::with_capacity(k);
    for j in 0..k {
        let col = &a[j * rows + j..(j + 1) * rows];
        let alpha = col[0];
        let xnorm2: f64 = col[1..].iter().map(|x| x.norm_sqr()).sum();
        if xnorm2 == 0.0 && alpha.im == 0.0 {
            vs.push(Vec::new());
            taus.push(ZERO);
            continue;
        }
        let norm = (alpha.norm_sqr() + xnorm2).sqrt();
        let beta = if alpha.re >= 0.0 { -norm } else { norm };
        let tau = C64::new((beta - alpha.re) / beta, -alpha.im / beta);
        let scale = ONE / (alpha - beta);
        let mut v = Vec::with_capacity(rows - j);
        v.push(ONE);
        v.extend(col[1..].iter().map(|x| x * scale));
        // apply H = I - tau v v^H (conj tau for left application of H^H)
        a[j * rows + j] = C64::new(beta, 0.0);
        for x in &mut a[j * rows + j + 1..(j + 1) * rows] {
            *x = ZERO;
        }
        let tc = tau.conj();
        for c in j + 1..cols {
            let colc = &mut a[c * rows + j..(c + 1) * rows];
            let w: C64 = v.iter().zip(colc.iter()).map(|(vi, x)| vi.conj() * x).sum();
            let f = tc * w;
            for (x, vi) in colc.iter_mut().zip(&v) {
                *x -= f * vi;
            }
        }
        vs.push(v);
        taus.push(tau);
    }
    let mut r = vec![ZERO; k * cols];
    for i in 0..k {
        for j in i..cols {
            r[i * cols + j] = a[j * rows + i];
        }
    }
    // Q = H_0 H_1 ... H_{k-1} applied to the first k unit columns.
    let mut q = vec![ZERO; rows * k]; // column-major
    for c in 0..k {
        q[c * rows + c] = ONE;
    }
    for j in (0..k).rev() {
        let v = &vs[j];
        if v.is_empty() {
            continue;
        }
        let tau = taus[j];
        for c in 0..k {
            let colc = &mut q[c * rows + j..(c + 1) * rows];
            let w: C64 = v.iter().zip(colc.iter()).map(|(vi, x)| vi.conj() * x).sum();
            let f = tau * w;
            for (x, vi) in colc.iter_mut().zip(v) {
                *x -= f * vi;
            }
        }
    }
    let mut qr = vec![ZERO; rows * k];
    for i in 0..rows {
        for c in 0..k {
            qr[i * k + c] = q[c * rows + i];
        }
    }
    (qr, r, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = shape.iter().product();
        let data = (0..len).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        DenseTensor::from_data(shape, data).unwrap()
    }

    fn naive_matmul(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
        let (m, k) = (a.shape()[0], a.shape()[1]);
        let n = b.shape()[1];
        let mut out = DenseTensor::zeros(&[m, n]);
        for i in 0..m {
            for j in 0..n {
                let mut acc = ZERO;
                for l in 0..k {
                    acc += a.get(&[i, l]) * b.get(&[l, j]);
                }
                out.set(&[i, j], acc);
            }
        }
        out
    }

    fn eye(n: usize) -> DenseTensor {
        let mut t = DenseTensor::zeros(&[n, n]);
        for i in 0..n {
            t.set(&[i, i], ONE);
        }
        t
    }

    fn reconstruct(svd: &Svd) -> DenseTensor {
        let mut us = svd.u.clone();
        let k = svd.s.len();
        for (i, x) in us.data_mut().iter_mut().enumerate() {
            *x *= svd.s[i % k];
        }
        contract(&us, &[1], &svd.v, &[0]).unwrap()
    }

    fn gram_defect(q: &DenseTensor, columns: bool) -> f64 {
        let g = if columns {
            contract(&q.conj(), &[0], q, &[0]).unwrap()
        } else {
            contract(q, &[1], &q.conj(), &[1]).unwrap()
        };
        g.max_abs_diff(&eye(g.shape()[0]))
    }

    #[test]
    fn identity_contraction() {
        let v = DenseTensor::from_data(&[2], vec![C64::new(1.0, 2.0), C64::new(-3.0, 0.5)]).unwrap();
        let r = contract(&eye(2), &[1], &v, &[0]).unwrap();
        assert_eq!(r, v);
    }

    #[test]
    fn dot_product_contraction() {
        let v = DenseTensor::from_data(&[2], vec![C64::new(3.0, 0.0), C64::new(4.0, 0.0)]).unwrap();
        let r = contract(&v, &[0], &v, &[0]).unwrap();
        assert!(r.shape().is_empty());
        assert_eq!(r.data(), &[C64::new(25.0, 0.0)]);
    }

    #[test]
    fn contraction_matches_triple_loop() {
        let a = random(&[4, 5], 1);
        let b = random(&[5, 6], 2);
        let r = contract(&a, &[1], &b, &[0]).unwrap();
        assert!(r.max_abs_diff(&naive_matmul(&a, &b)) <= 1e-12);
    }

    #[test]
    fn contraction_keeps_free_axis_order() {
        let a = random(&[2, 3, 4], 3);
        let b = random(&[4, 5, 3], 4);
        let r = contract(&a, &[1, 2], &b, &[2, 0]).unwrap();
        assert_eq!(r.shape(), &[2, 5]);
        for i in 0..2 {
            for j in 0..5 {
                let mut acc = ZERO;
                for x in 0..3 {
                    for y in 0..4 {
                        acc += a.get(&[i, x, y]) * b.get(&[y, j, x]);
                    }
                }
                assert!((acc - r.get(&[i, j])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn contraction_errors() {
        let a = random(&[2, 3], 5);
        let b = random(&[4, 2], 6);
        assert!(matches!(contract(&a, &[1], &b, &[0]), Err(Error::Shape(_))));
        assert!(matches!(contract(&a, &[2], &b, &[0]), Err(Error::Axis(_))));
        assert!(matches!(contract(&a, &[0, 0], &b, &[1, 1]), Err(Error::Axis(_))));
    }

    #[test]
    fn gemm_ops_match_dense_at_all_sizes() {
        // 3x4x5 takes the direct loop, 40x30x20 the blocked backend
        for (m, k, n) in [(3, 4, 5), (40, 30, 20)] {
            for (opa, opb) in [(Op::N, Op::N), (Op::H, Op::N), (Op::N, Op::T), (Op::C, Op::H)] {
                let a_shape = if matches!(opa, Op::N | Op::C) { (m, k) } else { (k, m) };
                let b_shape = if matches!(opb, Op::N | Op::C) { (k, n) } else { (n, k) };
                let a = super::tests_support::random_tensor(&[a_shape.0, a_shape.1], 1);
                let b = super::tests_support::random_tensor(&[b_shape.0, b_shape.1], 2);
                let mut c = super::tests_support::random_tensor(&[m, n], 3).into_data();
                let c0 = DMatrix::from_row_slice(m, n, &c);
                let alpha = C64::new(0.3, -1.1);
                let beta = C64::new(0.5, 0.2);
                gemm(alpha, a.data(), a_shape, opa, b.data(), b_shape, opb, beta, &mut c);
                let op = |t: &DenseTensor, sh: (usize, usize), o: Op| {
                    let x = DMatrix::from_row_slice(sh.0, sh.1, t.data());
                    match o {
                        Op::N => x,
                        Op::C => x.conjugate(),
                        Op::T => x.transpose(),
                        Op::H => x.adjoint(),
                    }
                };
                let want = op(&a, a_shape, opa) * op(&b, b_shape, opb) * alpha + c0 * beta;
                let err = (0..m * n).map(|i| (c[i] - want[(i / n, i % n)]).norm()).fold(0.0, f64::max);
                assert!(err < 1e-12, "{m}x{k}x{n} {opa:?} {opb:?}: {err}");
            }
        }
    }

    #[test]
    fn permute_roundtrip() {
        let a = random(&[2, 3, 4], 7);
        let p = a.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), a.get(&[1, 2, 3]));
        let back = p.permute(&[1, 2, 0]).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn svd_identity_half_discarded() {
        let svd = svd_truncate(&eye(2), 1, 0.0).unwrap();
        assert_eq!(svd.report.kept, 1);
        assert!((svd.report.discarded_weight - 0.5).abs() < 1e-15);
    }

    #[test]
    fn svd_rank_one_exact() {
        let x = random(&[3, 1], 8);
        let y = random(&[1, 4], 9);
        let m = contract(&x, &[1], &y, &[0]).unwrap();
        let svd = svd_truncate(&m, 1, 0.0).unwrap();
        assert!(svd.report.discarded_weight < 1e-28);
        assert!(reconstruct(&svd).max_abs_diff(&m) < 1e-13);
    }

    #[test]
    fn svd_full_rank_reconstruction() {
        let m = random(&[6, 4], 10);
        let svd = svd_truncate(&m, 4, 0.0).unwrap();
        assert!(reconstruct(&svd).max_abs_diff(&m) <= 1e-12);
        assert!(gram_defect(&svd.u, true) < 1e-12);
        assert!(gram_defect(&svd.v, false) < 1e-12);
        let s = &svd.report.singular_values;
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_cutoff_drops_small_values() {
        let mut m = DenseTensor::zeros(&[3, 3]);
        m.set(&[0, 0], C64::new(1.0, 0.0));
        m.set(&[1, 1], C64::new(1e-3, 0.0));
        m.set(&[2, 2], C64::new(1e-8, 0.0));
        let svd = svd_truncate(&m, 3, 1e-6).unwrap();
        assert_eq!(svd.report.kept, 2);
        let expected = 1e-16 / (1.0 + 1e-6 + 1e-16);
        assert!((svd.report.discarded_weight - expected).abs() < 1e-24);
    }

    #[test]
    fn svd_zero_matrix_is_not_an_error() {
        let svd = svd_truncate(&DenseTensor::zeros(&[3, 2]), 2, 1e-10).unwrap();
        assert_eq!(svd.report.kept, 1);
        assert_eq!(svd.report.discarded_weight, 0.0);
        assert!(svd.s.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn svd_rejects_bad_input() {
        assert!(svd_truncate(&random(&[2, 2, 2], 1), 1, 0.0).is_err());
        let mut m = random(&[2, 2], 1);
        m.set(&[0, 1], C64::new(f64::NAN, 0.0));
        assert!(matches!(svd_truncate(&m, 1, 0.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn qr_left_random() {
        let m = random(&[5, 3], 11);
        let (q, r) = qr_orthonormalize(&m, Side::Left).unwrap();
        assert!(gram_defect(&q, true) <= 1e-12);
        assert!(contract(&q, &[1], &r, &[0]).unwrap().max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn qr_right_random() {
        let m = random(&[3, 7], 12);
        let (q, r) = qr_orthonormalize(&m, Side::Right).unwrap();
        assert_eq!(q.shape(), &[3, 7]);
        assert!(gram_defect(&q, false) <= 1e-12);
        assert!(contract(&r, &[1], &q, &[0]).unwrap().max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn qr_of_orthonormal_input() {
        let m = random(&[4, 4], 13);
        let (q0, _) = qr_orthonormalize(&m, Side::Left).unwrap();
        let (q, r) = qr_orthonormalize(&q0, Side::Left).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let x = r.get(&[i, j]);
                if i == j {
                    assert!((x.norm() - 1.0).abs() < 1e-12);
                    for row in 0..4 {
                        assert!((q.get(&[row, i]) * x - q0.get(&[row, i])).norm() < 1e-12);
                    }
                } else {
                    assert!(x.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn qr_zero_column() {
        let mut m = random(&[4, 3], 14);
        for i in 0..4 {
            m.set(&[i, 1], ZERO);
        }
        let (q, r) = qr_orthonormalize(&m, Side::Left).unwrap();
        assert!(gram_defect(&q, true) < 1e-12);
        assert!(r.get(&[1, 1]).norm() < 1e-14);
        assert!(contract(&q, &[1], &r, &[0]).unwrap().max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn qr_all_zero() {
        let (q, r) = qr_orthonormalize(&DenseTensor::zeros(&[3, 2]), Side::Left).unwrap();
        assert!(gram_defect(&q, true) < 1e-14);
        assert!(r.norm() == 0.0);
    }
}

#[cfg(test)]
mod props {
    use super::tests_support::random_tensor;
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn contraction_is_bilinear(seed in 0u64..10_000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let a = random_tensor(&[3, 4, 2], seed);
            let b = random_tensor(&[2, 5, 4], seed + 1);
            let alpha = C64::new(re, im);
            let lhs = contract(&a.scaled(alpha), &[1, 2], &b, &[2, 0]).unwrap();
            let rhs = contract(&a, &[1, 2], &b, &[2, 0]).unwrap().scaled(alpha);
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
        }

        #[test]
        fn svd_preserves_frobenius_norm(seed in 0u64..10_000, rows in 1usize..9, cols in 1usize..9) {
            let m = random_tensor(&[rows, cols], seed);
            let svd = svd_truncate(&m, rows.min(cols), 0.0).unwrap();
            let s2: f64 = svd.report.singular_values.iter().map(|s| s * s).sum();
            prop_assert!((s2 - m.norm_sqr()).abs() <= 1e-10 * m.norm_sqr());
            let mut us = svd.u.clone();
            let k = svd.s.len();
            for (i, x) in us.data_mut().iter_mut().enumerate() {
                *x *= svd.s[i % k];
            }
            let back = contract(&us, &[1], &svd.v, &[0]).unwrap();
            prop_assert!(back.max_abs_diff(&m) <= 1e-12);
        }
    }
}
