//! Exact bond expansion ahead of one-site TDVP.
//!
//! The state is rebuilt left to right. At each cut the new left basis holds
//! the full support of the state, then directions from `H psi` and `H^2 psi`
//! outside that support, then seeded random directions, until the bond
//! reaches `min(target, cap)`. The state itself is unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mpo::MatrixProductOperator;
use crate::mps::{bond_caps, MatrixProductState};
use crate::tensor::{matmul, svd_truncate, DenseTensor, Op, C64, ZERO};
use crate::{Error, Result};

const EXPANSION_SEED: u64 = 0x5eed_b0d5;

/// `H |psi>` as an MPS with bonds `a_i * w_i`.
pub fn apply_mpo(h: &MatrixProductOperator, psi: &MatrixProductState) -> Result<MatrixProductState> {
    if h.bases() != psi.bases() {
        return Err(Error::BasisMismatch("MPO and MPS live on different bases".into()));
    }
    let tensors = psi
        .tensors()
        .iter()
        .zip(h.tensors())
        .map(|(a, w)| {
            let (al, d, ar) = (a.shape()[0], a.shape()[1], a.shape()[2]);
            let (wl, wr) = (w.shape()[0], w.shape()[3]);
            let mut out = vec![ZERO; al * wl * d * ar * wr];
            let wd = w.data();
            let ad = a.data();
            for x in 0..wl {
                for so in 0..d {
                    for si in 0..d {
                        for y in 0..wr {
                            let v = wd[((x * d + so) * d + si) * wr + y];
                            if v == ZERO {
                                continue;
                            }
                            for l in 0..al {
                                for r in 0..ar {
                                    let idx = (((l * wl + x) * d + so) * ar + r) * wr + y;
                                    out[idx] += v * ad[(l * d + si) * ar + r];
                                }
                            }
                        }
                    }
                }
            }
            DenseTensor::from_data(&[al * wl, d, ar * wr], out)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixProductState::from_tensors(tensors, psi.bases().to_vec())
}

fn column(m: &DenseTensor, j: usize) -> Vec<C64> {
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    (0..rows).map(|i| m.data()[i * cols + j]).collect()
}

/// Orthogonalize `v` against `basis` (twice) and append it if enough of it
/// survives.
fn extend(basis: &mut Vec<Vec<C64>>, mut v: Vec<C64>, tol: f64) -> bool {
    let n0 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if n0 == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for q in basis.iter() {
            let c: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if n <= tol * n0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    basis.push(v);
    true
}

/// Embed `psi` in an MPS whose bonds are `min(target_bond, cap)` at every
/// cut, using Krylov directions of `h` to fill the new space. The returned
/// state has unit norm and canonical center 0. A target below the current
/// maximal bond returns the normalized input unchanged.
pub fn expand_bond(psi: &MatrixProductState, h: &MatrixProductOperator, target_bond: usize) -> Result<MatrixProductState> {
    if h.bases() != psi.bases() {
        return Err(Error::BasisMismatch("MPO and MPS live on different bases".into()));
    }
    let norm = psi.norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("cannot expand the zero state".into()));
    }
    if target_bond < psi.max_bond() {
        let mut out = psi.clone();
        out.normalize();
        return Ok(out);
    }
    let n = psi.len();
    let caps = bond_caps(psi.bases());
    let dims: Vec<usize> = caps.iter().map(|&c| c.min(target_bond)).collect();

    // Lossless compression drops zero Schmidt values; all vectors end up
    // right-canonical with center 0.
    let (mut base, _) = psi.compress(target_bond, 0.0)?;
    base.normalize();
    let mut vectors = vec![base];
    for _ in 0..2 {
        let next = apply_mpo(h, vectors.last().unwrap())?;
        let (mut c, _) = next.compress(target_bond, 1e-12)?;
        if c.norm() == 0.0 {
            break;
        }
        c.normalize();
        vectors.push(c);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(EXPANSION_SEED);
    let mut xs: Vec<Vec<C64>> = vec![vec![C64::new(1.0, 0.0)]; vectors.len()];
    let mut tensors = Vec::with_capacity(n);
    for i in 0..n {
        let d = psi.bases()[i].dim();
        let rows = dims[i] * d;
        let ms: Vec<DenseTensor> = vectors
            .iter()
            .zip(&xs)
            .map(|(v, x)| {
                let b = v.tensor(i);
                let (bl, br) = (b.shape()[0], b.shape()[2]);
                let data = matmul(x, (dims[i], bl), Op::N, b.data(), (bl, d * br), Op::N);
                DenseTensor::from_data(&[rows, br], data)
            })
            .collect::<Result<_>>()?;
        if i == n - 1 {
            tensors.push(ms[0].clone().reshape(&[dims[i], d, 1])?);
            break;
        }
        let want = dims[i + 1];
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(want);
        let support = svd_truncate(&ms[0], want, 1e-13)?;
        for j in 0..support.s.len() {
            if support.s[j] > 0.0 {
                extend(&mut basis, column(&support.u, j), 1e-8);
            }
        }
        if basis.len() < want && ms.len() > 1 {
            let cols: usize = ms[1..].iter().map(|m| m.shape()[1]).sum();
            let mut f = vec![ZERO; rows * cols];
            let mut off = 0;
            for m in &ms[1..] {
                let c = m.shape()[1];
                for r in 0..rows {
                    f[r * cols + off..r * cols + off + c].copy_from_slice(&m.data()[r * c..(r + 1) * c]);
                }
                off += c;
            }
            for q in &basis {
                // f -= q (q^dagger f)
                let proj: Vec<C64> = (0..cols).map(|j| (0..rows).map(|r| q[r].conj() * f[r * cols + j]).sum()).collect();
                for r in 0..rows {
                    for j in 0..cols {
                        f[r * cols + j] -= q[r] * proj[j];
                    }
                }
            }
            let fm = DenseTensor::from_data(&[rows, cols], f)?;
            let extra = svd_truncate(&fm, want - basis.len(), 1e-10)?;
            for j in 0..extra.s.len() {
                if extra.s[j] > 1e-12 && basis.len() < want {
                    extend(&mut basis, column(&extra.u, j), 1e-6);
                }
            }
        }
        let mut attempts = 0;
        while basis.len() < want {
            let v: Vec<C64> = (0..rows).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
            extend(&mut basis, v, 1e-6);
            attempts += 1;
            if attempts > 10 * want + 100 {
                return Err(Error::Numerical(format!("could not complete basis at bond {}", i + 1)));
            }
        }
        let mut u = vec![ZERO; rows * want];
        for (j, q) in basis.iter().enumerate() {
            for r in 0..rows {
                u[r * want + j] = q[r];
            }
        }
        for (x, m) in xs.iter_mut().zip(&ms) {
            *x = matmul(&u, (rows, want), Op::H, m.data(), (rows, m.shape()[1]), Op::N);
        }
        tensors.push(DenseTensor::from_data(&[dims[i], d, want], u)?);
    }
    let out = MatrixProductState::from_tensors(tensors, psi.bases().to_vec())?;
    let mut out = out.canonicalize(0)?;
    out.normalize();
    Ok(out)
}
