//! Matrix product states with canonical-center bookkeeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::SiteBasis;
use crate::env::{left_step, Env};
use crate::mpo::MatrixProductOperator;
use crate::tensor::{gemm, qr_orthonormalize, svd_truncate, DenseTensor, Op, Side, C64, ONE, ZERO};
use crate::{Error, Result};

/// Largest possible bond dimension at every cut, `a_0 .. a_N`.
pub fn bond_caps(bases: &[SiteBasis]) -> Vec<usize> {
    let n = bases.len();
    let mut left = vec![1usize; n + 1];
    for i in 0..n {
        left[i + 1] = left[i].saturating_mul(bases[i].dim());
    }
    let mut right = vec![1usize; n + 1];
    for i in (0..n).rev() {
        right[i] = right[i + 1].saturating_mul(bases[i].dim());
    }
    left.iter().zip(&right).map(|(&l, &r)| l.min(r)).collect()
}

#[derive(Clone, Debug)]
pub struct MatrixProductState {
    /// `(a_{i-1}, d_i, a_i)`
    tensors: Vec<DenseTensor>,
    bases: Vec<SiteBasis>,
    center: Option<usize>,
}

impl MatrixProductState {
    /// Build from raw site tensors; no canonical form is assumed.
    pub fn from_tensors(tensors: Vec<DenseTensor>, bases: Vec<SiteBasis>) -> Result<Self> {
        if tensors.is_empty() || tensors.len() != bases.len() {
            return Err(Error::Shape(format!("{} tensors for {} sites", tensors.len(), bases.len())));
        }
        for (i, (t, b)) in tensors.iter().zip(&bases).enumerate() {
            let s = t.shape();
            if s.len() != 3 || s[1] != b.dim() {
                return Err(Error::Shape(format!("site tensor {i} has shape {s:?} for {b}")));
            }
            if i > 0 && tensors[i - 1].shape()[2] != s[0] {
                return Err(Error::Shape(format!("bond {i} mismatch")));
            }
        }
        if tensors[0].shape()[0] != 1 || tensors.last().unwrap().shape()[2] != 1 {
            return Err(Error::Shape("boundary bonds must be 1".into()));
        }
        Ok(Self { tensors, bases, center: None })
    }

    /// Product state from normalized local vectors; center at site 0.
    pub fn product(bases: &[SiteBasis], local_states: &[Vec<C64>]) -> Result<Self> {
        if bases.len() != local_states.len() || bases.is_empty() {
            return Err(Error::Shape(format!("{} local states for {} sites", local_states.len(), bases.len())));
        }
        let mut tensors = Vec::with_capacity(bases.len());
        for (i, (b, v)) in bases.iter().zip(local_states).enumerate() {
            b.validate()?;
            if v.len() != b.dim() {
                return Err(Error::Shape(format!("local state {i} has length {} for {b}", v.len())));
            }
            let n: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("local state {i} has norm {n}")));
            }
            tensors.push(DenseTensor::from_data(&[1, b.dim(), 1], v.clone())?);
        }
        Ok(Self { tensors, bases: bases.to_vec(), center: Some(0) })
    }

    /// Every site in basis state `index[i]`.
    pub fn basis_state(bases: &[SiteBasis], index: &[usize]) -> Result<Self> {
        let states: Vec<Vec<C64>> = bases
            .iter()
            .zip(index)
            .map(|(b, &k)| {
                let mut v = vec![ZERO; b.dim()];
                if k < v.len() {
                    v[k] = ONE;
                }
                v
            })
            .collect();
        Self::product(bases, &states)
    }

    /// Random normalized state with bonds `min(max_bond, cap)`; center 0.
    pub fn random(bases: &[SiteBasis], max_bond: usize, seed: u64) -> Result<Self> {
        if max_bond == 0 {
            return Err(Error::InvalidArgument("bond dimension must be >= 1".into()));
        }
        let caps = bond_caps(bases);
        let dims: Vec<usize> = caps.iter().map(|&c| c.min(max_bond)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = bases
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let shape = [dims[i], b.dim(), dims[i + 1]];
                let len = shape.iter().product();
                let data = (0..len).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
                DenseTensor::from_data(&shape, data)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut psi = Self::from_tensors(tensors, bases.to_vec())?;
        psi.canonicalize_mut(0)?;
        psi.normalize();
        Ok(psi)
    }

    /// Exact MPS of a dense vector (site 0 most significant) by sequential SVD.
    pub fn from_dense(bases: &[SiteBasis], v: &[C64]) -> Result<Self> {
        let total: usize = bases.iter().map(|b| b.dim()).product();
        if v.len() != total {
            return Err(Error::Shape(format!("vector length {} for dimension {total}", v.len())));
        }
        let mut tensors = Vec::with_capacity(bases.len());
        let mut rest = DenseTensor::from_data(&[1, total], v.to_vec())?;
        let mut left = 1;
        for b in &bases[..bases.len() - 1] {
            let d = b.dim();
            let cols = rest.len() / (left * d);
            let m = rest.reshape(&[left * d, cols])?;
            let svd = svd_truncate(&m, usize::MAX, 0.0)?;
            let k = svd.s.len();
            tensors.push(svd.u.reshape(&[left, d, k])?);
            let mut sv = svd.v;
            for (idx, x) in sv.data_mut().iter_mut().enumerate() {
                *x *= svd.s[idx / cols];
            }
            rest = sv;
            left = k;
        }
        let d = bases.last().unwrap().dim();
        tensors.push(rest.reshape(&[left, d, 1])?);
        let mut psi = Self::from_tensors(tensors, bases.to_vec())?;
        psi.center = Some(bases.len() - 1);
        Ok(psi)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn bases(&self) -> &[SiteBasis] {
        &self.bases
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &DenseTensor {
        &self.tensors[i]
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub(crate) fn set_tensor(&mut self, i: usize, t: DenseTensor) {
        self.tensors[i] = t;
    }

    pub(crate) fn set_center(&mut self, c: Option<usize>) {
        self.center = c;
    }

    /// `a_0 .. a_N`.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut d = vec![self.tensors[0].shape()[0]];
        d.extend(self.tensors.iter().map(|t| t.shape()[2]));
        d
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.len() {
            return Err(Error::SiteOutOfRange { site, len: self.len() });
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Self) -> Result<C64> {
        if self.bases != other.bases {
            return Err(Error::BasisMismatch("overlap of states on different bases".into()));
        }
        let mut e = vec![ONE];
        let (mut lb, mut lk) = (1, 1);
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let (d, rb, rk) = (a.shape()[1], a.shape()[2], b.shape()[2]);
            let mut t = vec![ZERO; lb * d * rk];
            gemm(ONE, &e, (lb, lk), Op::N, b.data(), (lk, d * rk), Op::N, ZERO, &mut t);
            let mut next = vec![ZERO; rb * rk];
            gemm(ONE, a.data(), (lb * d, rb), Op::H, &t, (lb * d, rk), Op::N, ZERO, &mut next);
            e = next;
            lb = rb;
            lk = rk;
        }
        Ok(e[0])
    }

    pub fn norm_sqr(&self) -> f64 {
        if let Some(c) = self.center {
            return self.tensors[c].norm_sqr();
        }
        self.overlap(self).map(|x| x.re).unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescale to unit norm (no-op for the zero state).
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let site = self.center.unwrap_or(0);
            self.tensors[site].scale(C64::new(1.0 / n, 0.0));
        }
    }

    /// Full state vector; site 0 most significant.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut acc = self.tensors[0].clone();
        for t in &self.tensors[1..] {
            let rows = acc.len() / acc.shape()[acc.rank() - 1];
            let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
            let data = crate::tensor::matmul(acc.data(), (rows, l), Op::N, t.data(), (l, d * r), Op::N);
            acc = DenseTensor::from_data(&[rows * d, r], data).unwrap();
        }
        acc.into_data()
    }

    /// Left-orthonormalize site `i` and push the remainder into site `i + 1`.
    pub(crate) fn shift_right(&mut self, i: usize) -> Result<()> {
        let t = &self.tensors[i];
        let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        let m = t.clone().reshape(&[l * d, r])?;
        let (q, rem) = qr_orthonormalize(&m, Side::Left)?;
        let k = q.shape()[1];
        self.tensors[i] = q.reshape(&[l, d, k])?;
        let next = &self.tensors[i + 1];
        let (_, d2, r2) = (next.shape()[0], next.shape()[1], next.shape()[2]);
        let data = crate::tensor::matmul(rem.data(), (k, r), Op::N, next.data(), (r, d2 * r2), Op::N);
        self.tensors[i + 1] = DenseTensor::from_data(&[k, d2, r2], data)?;
        Ok(())
    }

    /// Right-orthonormalize site `i` and push the remainder into site `i - 1`.
    pub(crate) fn shift_left(&mut self, i: usize) -> Result<()> {
        let t = &self.tensors[i];
        let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        let m = t.clone().reshape(&[l, d * r])?;
        let (q, rem) = qr_orthonormalize(&m, Side::Right)?;
        let k = q.shape()[0];
        self.tensors[i] = q.reshape(&[k, d, r])?;
        let prev = &self.tensors[i - 1];
        let (l0, d0, _) = (prev.shape()[0], prev.shape()[1], prev.shape()[2]);
        let data = crate::tensor::matmul(prev.data(), (l0 * d0, l), Op::N, rem.data(), (l, k), Op::N);
        self.tensors[i - 1] = DenseTensor::from_data(&[l0, d0, k], data)?;
        Ok(())
    }

    pub(crate) fn canonicalize_mut(&mut self, new_center: usize) -> Result<()> {
        self.check_site(new_center)?;
        let n = self.len();
        match self.center {
            None => {
                for i in 0..new_center {
                    self.shift_right(i)?;
                }
                for i in (new_center + 1..n).rev() {
                    self.shift_left(i)?;
                }
            }
            Some(c) if new_center >= c => {
                for i in c..new_center {
                    self.shift_right(i)?;
                }
            }
            Some(c) => {
                for i in (new_center + 1..=c).rev() {
                    self.shift_left(i)?;
                }
            }
        }
        self.center = Some(new_center);
        Ok(())
    }

    /// Gauge-transform so that sites left of `new_center` are left
    /// isometries and sites right of it right isometries.
    pub fn canonicalize(&self, new_center: usize) -> Result<Self> {
        let mut out = self.clone();
        out.canonicalize_mut(new_center)?;
        Ok(out)
    }

    /// Largest deviation from the isometry condition implied by the center.
    pub fn isometry_residual(&self) -> f64 {
        let Some(c) = self.center else { return f64::INFINITY };
        let mut worst: f64 = 0.0;
        for (i, t) in self.tensors.iter().enumerate() {
            let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
            let (g, k) = if i < c {
                (crate::tensor::matmul(t.data(), (l * d, r), Op::H, t.data(), (l * d, r), Op::N), r)
            } else if i > c {
                (crate::tensor::matmul(t.data(), (l, d * r), Op::N, t.data(), (l, d * r), Op::H), l)
            } else {
                continue;
            };
            for a in 0..k {
                for b in 0..k {
                    let target = if a == b { ONE } else { ZERO };
                    worst = worst.max((g[a * k + b] - target).norm());
                }
            }
        }
        worst
    }

    /// Truncate every bond to at most `max_bond`, renormalized to the input
    /// norm. Returns the summed per-bond discarded weight. Center ends at 0.
    pub fn compress(&self, max_bond: usize, cutoff: f64) -> Result<(Self, f64)> {
        if max_bond == 0 {
            return Err(Error::InvalidArgument("bond dimension must be >= 1".into()));
        }
        let n = self.len();
        let mut psi = self.canonicalize(n - 1)?;
        let norm0 = psi.norm();
        let mut total = 0.0;
        for i in (1..n).rev() {
            let t = &psi.tensors[i];
            let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
            let svd = svd_truncate(&t.clone().reshape(&[l, d * r])?, max_bond, cutoff)?;
            total += svd.report.discarded_weight;
            let k = svd.s.len();
            psi.tensors[i] = svd.v.reshape(&[k, d, r])?;
            let mut us = svd.u;
            for (idx, x) in us.data_mut().iter_mut().enumerate() {
                *x *= svd.s[idx % k];
            }
            let prev = &psi.tensors[i - 1];
            let (l0, d0, _) = (prev.shape()[0], prev.shape()[1], prev.shape()[2]);
            let data = crate::tensor::matmul(prev.data(), (l0 * d0, l), Op::N, us.data(), (l, k), Op::N);
            psi.tensors[i - 1] = DenseTensor::from_data(&[l0, d0, k], data)?;
        }
        psi.center = Some(0);
        let n1 = psi.norm();
        if n1 > 0.0 {
            psi.tensors[0].scale(C64::new(norm0 / n1, 0.0));
        }
        Ok((psi, total))
    }

    /// `<psi|O|psi>` (not normalized).
    pub fn expectation(&self, op: &MatrixProductOperator) -> Result<C64> {
        if op.bases() != self.bases.as_slice() {
            return Err(Error::BasisMismatch("MPO and MPS live on different bases".into()));
        }
        let mut env = Env::boundary();
        for (i, t) in self.tensors.iter().enumerate() {
            env = left_step(&env, t, op.blocks(i), op.right_dim(i), t);
        }
        Ok(env.scalar())
    }

    /// `<psi|O|psi> / <psi|psi>` taken as a real number.
    pub fn energy(&self, op: &MatrixProductOperator) -> Result<f64> {
        Ok(self.expectation(op)?.re / self.norm_sqr())
    }

    /// Normalized `<O_i>` for a named Hermitian operator on every site.
    pub fn local_expectations(&self, op_name: &str) -> Result<Vec<f64>> {
        let ops = self
            .bases
            .iter()
            .map(|b| {
                let op = b.op(op_name)?;
                if !op.is_hermitian(1e-12) {
                    return Err(Error::NotHermitian(op_name.to_string()));
                }
                Ok(op.matrix)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = self.len();
        // left transfer matrices E_i (bond i, before site i) and right F_i
        let mut lefts: Vec<Vec<C64>> = Vec::with_capacity(n + 1);
        lefts.push(vec![ONE]);
        for (i, t) in self.tensors.iter().enumerate() {
            lefts.push(transfer_left(&lefts[i], t, None));
        }
        let mut rights: Vec<Vec<C64>> = vec![Vec::new(); n + 1];
        rights[n] = vec![ONE];
        for i in (0..n).rev() {
            rights[i] = transfer_right(&rights[i + 1], &self.tensors[i]);
        }
        let norm2 = lefts[n][0].re;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let e = transfer_left(&lefts[i], &self.tensors[i], Some(&ops[i]));
            let v: C64 = e.iter().zip(&rights[i + 1]).map(|(a, b)| a * b).sum();
            out.push(v.re / norm2);
        }
        Ok(out)
    }

    /// Normalized `<O>` of a single named operator on one site.
    pub fn site_expectation(&self, site: usize, op_name: &str) -> Result<f64> {
        self.check_site(site)?;
        let op = self.bases[site].op(op_name)?.matrix;
        let mut e = vec![ONE];
        for (i, t) in self.tensors.iter().enumerate() {
            e = transfer_left(&e, t, (i == site).then_some(&op));
        }
        Ok(e[0].re / self.norm_sqr())
    }
}

/// `E'(r', r) = sum conj(A(l', s', r')) E(l', l) O(s', s) A(l, s, r)`.
fn transfer_left(e: &[C64], t: &DenseTensor, op: Option<&nalgebra::DMatrix<C64>>) -> Vec<C64> {
    let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let mut x = vec![ZERO; l * d * r];
    gemm(ONE, e, (l, l), Op::N, t.data(), (l, d * r), Op::N, ZERO, &mut x);
    if let Some(op) = op {
        let mut y = vec![ZERO; l * d * r];
        for p in 0..l {
            for so in 0..d {
                for si in 0..d {
                    let v = op[(so, si)];
                    if v == ZERO {
                        continue;
                    }
                    for k in 0..r {
                        y[(p * d + so) * r + k] += v * x[(p * d + si) * r + k];
                    }
                }
            }
        }
        x = y;
    }
    let mut out = vec![ZERO; r * r];
    gemm(ONE, t.data(), (l * d, r), Op::H, &x, (l * d, r), Op::N, ZERO, &mut out);
    out
}

/// `F'(l, l') = sum A(l, s, r) F(r, r') conj(A(l', s, r'))`, stored ket x bra
/// so that `<psi|psi> = sum E .* F`.
fn transfer_right(f: &[C64], t: &DenseTensor) -> Vec<C64> {
    let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    // F stored as (ket r, bra r')
    let mut x = vec![ZERO; l * d * r];
    gemm(ONE, t.data(), (l * d, r), Op::N, f, (r, r), Op::N, ZERO, &mut x);
    let mut out = vec![ZERO; l * l];
    gemm(ONE, &x, (l, d * r), Op::N, t.data(), (l, d * r), Op::H, ZERO, &mut out);
    // out(l_ket, l_bra); E is (bra, ket), so transpose to align elementwise
    let mut tr = vec![ZERO; l * l];
    for a in 0..l {
        for b in 0..l {
            tr[a * l + b] = out[b * l + a];
        }
    }
    tr
}
