//! Environment tensors and effective-Hamiltonian actions.
//!
//! An environment stores one `bra x ket` matrix per MPO bond index, laid out
//! as `(w, bra, ket)`. Site tensors are `(left, phys, right)`.

use crate::mpo::OpBlock;
use crate::tensor::{gemm, DenseTensor, Op, C64, ONE, ZERO};

#[derive(Clone, Debug)]
pub(crate) struct Env {
    pub w: usize,
    pub bra: usize,
    pub ket: usize,
    pub data: Vec<C64>,
}

impl Env {
    pub fn boundary() -> Self {
        Self { w: 1, bra: 1, ket: 1, data: vec![ONE] }
    }

    pub fn slice(&self, a: usize) -> &[C64] {
        let n = self.bra * self.ket;
        &self.data[a * n..(a + 1) * n]
    }

    pub fn scalar(&self) -> C64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }
}

fn dims3(t: &DenseTensor) -> (usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2])
}

/// `y[o, so, :] += v * x[o, si, :]` for every entry of the local operator.
#[inline]
pub(crate) fn apply_local(entries: &[(usize, usize, C64)], x: &[C64], outer: usize, d: usize, inner: usize, y: &mut [C64]) {
    for o in 0..outer {
        let base = o * d * inner;
        for &(so, si, v) in entries {
            let src = &x[base + si * inner..base + (si + 1) * inner];
            let dst = &mut y[base + so * inner..base + (so + 1) * inner];
            for (a, b) in dst.iter_mut().zip(src) {
                *a += v * b;
            }
        }
    }
}

fn used_left(blocks: &[OpBlock], w: usize) -> Vec<bool> {
    let mut used = vec![false; w];
    for b in blocks {
        used[b.left] = true;
    }
    used
}

fn used_right(blocks: &[OpBlock], w: usize) -> Vec<bool> {
    let mut used = vec![false; w];
    for b in blocks {
        used[b.right] = true;
    }
    used
}

/// Grow a left environment by one site.
pub(crate) fn left_step(env: &Env, bra: &DenseTensor, blocks: &[OpBlock], wr: usize, ket: &DenseTensor) -> Env {
    let (lk, d, rk) = dims3(ket);
    let (lb, db, rb) = dims3(bra);
    debug_assert_eq!((lb, lk, d), (env.bra, env.ket, db));
    let used = used_left(blocks, env.w);
    let mut xs: Vec<Option<Vec<C64>>> = vec![None; env.w];
    for a in 0..env.w {
        if used[a] {
            let mut x = vec![ZERO; lb * d * rk];
            gemm(ONE, env.slice(a), (lb, lk), Op::N, ket.data(), (lk, d * rk), Op::N, ZERO, &mut x);
            xs[a] = Some(x);
        }
    }
    let mut ys: Vec<Option<Vec<C64>>> = vec![None; wr];
    for blk in blocks {
        let x = xs[blk.left].as_ref().unwrap();
        let y = ys[blk.right].get_or_insert_with(|| vec![ZERO; lb * d * rk]);
        apply_local(&blk.entries, x, lb, d, rk, y);
    }
    let mut out = vec![ZERO; wr * rb * rk];
    for (b, y) in ys.iter().enumerate() {
        if let Some(y) = y {
            gemm(
                ONE,
                bra.data(),
                (lb * d, rb),
                Op::H,
                y,
                (lb * d, rk),
                Op::N,
                ZERO,
                &mut out[b * rb * rk..(b + 1) * rb * rk],
            );
        }
    }
    Env { w: wr, bra: rb, ket: rk, data: out }
}

/// Grow a right environment by one site.
pub(crate) fn right_step(env: &Env, bra: &DenseTensor, blocks: &[OpBlock], wl: usize, ket: &DenseTensor) -> Env {
    let (lk, d, rk) = dims3(ket);
    let (lb, _, rb) = dims3(bra);
    debug_assert_eq!((rb, rk), (env.bra, env.ket));
    let used = used_right(blocks, env.w);
    let mut xs: Vec<Option<Vec<C64>>> = vec![None; env.w];
    for b in 0..env.w {
        if used[b] {
            // X(l, s, r') = B(l s, r) R[b](r', r)^T
            let mut x = vec![ZERO; lk * d * rb];
            gemm(ONE, ket.data(), (lk * d, rk), Op::N, env.slice(b), (rb, rk), Op::T, ZERO, &mut x);
            xs[b] = Some(x);
        }
    }
    let mut ys: Vec<Option<Vec<C64>>> = vec![None; wl];
    for blk in blocks {
        let x = xs[blk.right].as_ref().unwrap();
        let y = ys[blk.left].get_or_insert_with(|| vec![ZERO; lk * d * rb]);
        apply_local(&blk.entries, x, lk, d, rb, y);
    }
    let mut out = vec![ZERO; wl * lb * lk];
    for (a, y) in ys.iter().enumerate() {
        if let Some(y) = y {
            gemm(
                ONE,
                bra.data(),
                (lb, d * rb),
                Op::C,
                y,
                (lk, d * rb),
                Op::T,
                ZERO,
                &mut out[a * lb * lk..(a + 1) * lb * lk],
            );
        }
    }
    Env { w: wl, bra: lb, ket: lk, data: out }
}

/// Effective one-site Hamiltonian acting on a center tensor `(l, d, r)`.
pub(crate) fn apply_one_site(left: &Env, blocks: &[OpBlock], right: &Env, c: &[C64], d: usize) -> Vec<C64> {
    let (l, r) = (left.ket, right.ket);
    debug_assert_eq!(c.len(), l * d * r);
    let used = used_left(blocks, left.w);
    let mut xs: Vec<Option<Vec<C64>>> = vec![None; left.w];
    for a in 0..left.w {
        if used[a] {
            let mut x = vec![ZERO; l * d * r];
            gemm(ONE, left.slice(a), (l, l), Op::N, c, (l, d * r), Op::N, ZERO, &mut x);
            xs[a] = Some(x);
        }
    }
    let mut ys: Vec<Option<Vec<C64>>> = vec![None; right.w];
    for blk in blocks {
        let x = xs[blk.left].as_ref().unwrap();
        let y = ys[blk.right].get_or_insert_with(|| vec![ZERO; l * d * r]);
        apply_local(&blk.entries, x, l, d, r, y);
    }
    let mut out = vec![ZERO; l * d * r];
    for (b, y) in ys.iter().enumerate() {
        if let Some(y) = y {
            gemm(ONE, y, (l * d, r), Op::N, right.slice(b), (r, r), Op::T, ONE, &mut out);
        }
    }
    out
}

/// Effective two-site Hamiltonian acting on `(l, d1, d2, r)`.
pub(crate) fn apply_two_site(
    left: &Env,
    blocks1: &[OpBlock],
    w_mid: usize,
    blocks2: &[OpBlock],
    right: &Env,
    theta: &[C64],
    d1: usize,
    d2: usize,
) -> Vec<C64> {
    let (l, r) = (left.ket, right.ket);
    let n = l * d1 * d2 * r;
    debug_assert_eq!(theta.len(), n);
    let used = used_left(blocks1, left.w);
    let mut xs: Vec<Option<Vec<C64>>> = vec![None; left.w];
    for a in 0..left.w {
        if used[a] {
            let mut x = vec![ZERO; n];
            gemm(ONE, left.slice(a), (l, l), Op::N, theta, (l, d1 * d2 * r), Op::N, ZERO, &mut x);
            xs[a] = Some(x);
        }
    }
    let mut ys: Vec<Option<Vec<C64>>> = vec![None; w_mid];
    for blk in blocks1 {
        let x = xs[blk.left].as_ref().unwrap();
        let y = ys[blk.right].get_or_insert_with(|| vec![ZERO; n]);
        apply_local(&blk.entries, x, l, d1, d2 * r, y);
    }
    drop(xs);
    let mut zs: Vec<Option<Vec<C64>>> = vec![None; right.w];
    for blk in blocks2 {
        let Some(y) = ys[blk.left].as_ref() else { continue };
        let z = zs[blk.right].get_or_insert_with(|| vec![ZERO; n]);
        apply_local(&blk.entries, y, l * d1, d2, r, z);
    }
    let mut out = vec![ZERO; n];
    for (c, z) in zs.iter().enumerate() {
        if let Some(z) = z {
            gemm(ONE, z, (l * d1 * d2, r), Op::N, right.slice(c), (r, r), Op::T, ONE, &mut out);
        }
    }
    out
}

/// Effective bond Hamiltonian acting on a `(l, r)` bond matrix.
pub(crate) fn apply_zero_site(left: &Env, right: &Env, c: &[C64]) -> Vec<C64> {
    let (l, r) = (left.ket, right.ket);
    debug_assert_eq!(left.w, right.w);
    let mut out = vec![ZERO; l * r];
    let mut t = vec![ZERO; l * r];
    for a in 0..left.w {
        let la = left.slice(a);
        if la.iter().all(|x| *x == ZERO) {
            continue;
        }
        gemm(ONE, la, (l, l), Op::N, c, (l, r), Op::N, ZERO, &mut t);
        gemm(ONE, &t, (l, r), Op::N, right.slice(a), (r, r), Op::T, ONE, &mut out);
    }
    out
}
