//! Lanczos ground states and Krylov matrix exponentials for Hermitian
//! operators given only by their action.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::tensor::{C64, ZERO};
use crate::{Error, Result};

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], alpha: C64, x: &[C64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Orthogonalize `w` against every stored basis vector, twice.
/// Gram-Schmidt against `basis`, repeated once when the first pass removed
/// most of the vector.
fn reorthogonalize(w: &mut [C64], basis: &[Vec<C64>]) {
    let before = norm(w);
    for q in basis {
        let c = dot(q, w);
        axpy(w, -c, q);
    }
    if norm(w) < 0.7 * before {
        for q in basis {
            let c = dot(q, w);
            axpy(w, -c, q);
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
    pub matvecs: usize,
}

/// Lowest eigenpair by Lanczos with full reorthogonalization and explicit
/// restarts from the current Ritz vector.
///
/// Stops when `||H v - e v|| <= tol`. `max_iter` bounds the Krylov dimension
/// per restart; at most `restarts + 1` cycles run.
pub fn lowest_eigen<F>(mut apply: F, start: &[C64], max_iter: usize, tol: f64, restarts: usize) -> Result<EigenResult>
where
    F: FnMut(&[C64]) -> Vec<C64>,
{
    let n = start.len();
    let nrm = norm(start);
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::Eigensolver("start vector has zero or non-finite norm".into()));
    }
    let mut v0: Vec<C64> = start.iter().map(|x| x / nrm).collect();
    let mut matvecs = 0;
    let mut best = None;
    for _cycle in 0..=restarts {
        let kmax = max_iter.min(n).max(1);
        let mut basis: Vec<Vec<C64>> = vec![v0.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let (e, y, res) = loop {
            let k = basis.len() - 1;
            let mut w = apply(&basis[k]);
            matvecs += 1;
            if w.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                return Err(Error::Eigensolver("non-finite operator action".into()));
            }
            let a = dot(&basis[k], &w).re;
            alpha.push(a);
            reorthogonalize(&mut w, &basis);
            let b = norm(&w);
            let eig = SymmetricEigen::new(tridiagonal(&alpha, &beta));
            let (imin, &emin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .unwrap();
            let y: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
            let res = (b * y[k]).abs();
            let exhausted = b <= 1e-14 * (1.0 + emin.abs()) || basis.len() >= n;
            if res <= tol || exhausted || basis.len() >= kmax {
                break (emin, y, res);
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        };
        let mut vec = vec![ZERO; n];
        for (q, c) in basis.iter().zip(&y) {
            axpy(&mut vec, C64::new(*c, 0.0), q);
        }
        let vn = norm(&vec);
        vec.iter_mut().for_each(|x| *x /= vn);
        // True residual guards against loss of orthogonality.
        let hv = apply(&vec);
        matvecs += 1;
        let r: f64 = hv.iter().zip(&vec).map(|(h, v)| (h - v * e).norm_sqr()).sum::<f64>().sqrt();
        let done = r <= tol.max(res);
        best = Some(EigenResult { value: e, vector: vec.clone(), residual: r, matvecs });
        if done || r <= tol {
            break;
        }
        v0 = vec;
    }
    Ok(best.unwrap())
}

/// `exp(tau * H) v` for Hermitian `H` via Lanczos.
///
/// Grows the Krylov space until the a-posteriori error estimate drops below
/// `tol * ||v||`. If `max_dim` is reached first the step is split in halves
/// (up to ten times) before giving up.
pub fn expm_apply<F>(mut apply: F, v: &[C64], tau: C64, max_dim: usize, tol: f64) -> Result<Vec<C64>>
where
    F: FnMut(&[C64]) -> Vec<C64>,
{
    expm_split(&mut apply, v, tau, max_dim, tol, 0)
}

fn expm_split<F>(apply: &mut F, v: &[C64], tau: C64, max_dim: usize, tol: f64, depth: usize) -> Result<Vec<C64>>
where
    F: FnMut(&[C64]) -> Vec<C64>,
{
    match expm_once(apply, v, tau, max_dim, tol)? {
        Some(out) => Ok(out),
        None if depth < 10 => {
            let sub_tol = (tol * 0.5).max(1e-14);
            let half = expm_split(apply, v, tau * 0.5, max_dim, sub_tol, depth + 1)?;
            expm_split(apply, &half, tau * 0.5, max_dim, sub_tol, depth + 1)
        }
        None => Err(Error::Numerical(format!(
            "Krylov exponential not converged within dimension {max_dim}"
        ))),
    }
}

fn expm_once<F>(apply: &mut F, v: &[C64], tau: C64, max_dim: usize, tol: f64) -> Result<Option<Vec<C64>>>
where
    F: FnMut(&[C64]) -> Vec<C64>,
{
    let n = v.len();
    let nrm = norm(v);
    if nrm == 0.0 {
        return Ok(Some(v.to_vec()));
    }
    let mut basis: Vec<Vec<C64>> = vec![v.iter().map(|x| x / nrm).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    loop {
        let k = basis.len() - 1;
        let mut w = apply(&basis[k]);
        if w.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Numerical("non-finite operator action in Krylov exponential".into()));
        }
        alpha.push(dot(&basis[k], &w).re);
        reorthogonalize(&mut w, &basis);
        let b = norm(&w);
        let m = alpha.len();
        let eig = SymmetricEigen::new(tridiagonal(&alpha, &beta));
        // c = exp(tau T) e_1
        let mut c = vec![ZERO; m];
        for j in 0..m {
            let f = (tau * eig.eigenvalues[j]).exp() * eig.eigenvectors[(0, j)];
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += f * eig.eigenvectors[(i, j)];
            }
        }
        let scale = eig.eigenvalues.iter().fold(1.0f64, |acc, e| acc.max(e.abs()));
        let invariant = b <= 1e-14 * scale;
        let err = tau.norm() * b * c[m - 1].norm();
        if invariant || err <= tol || m >= n {
            let mut out = vec![ZERO; n];
            for (q, ci) in basis.iter().zip(&c) {
                axpy(&mut out, ci * nrm, q);
            }
            return Ok(Some(out));
        }
        if m >= max_dim {
            return Ok(None);
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::tests_support::random_tensor;

    fn hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let a = random_tensor(&[n, n], seed).to_matrix().unwrap();
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    fn matvec(m: &DMatrix<C64>) -> impl FnMut(&[C64]) -> Vec<C64> + '_ {
        move |x: &[C64]| (m * nalgebra::DVector::from_column_slice(x)).iter().copied().collect()
    }

    #[test]
    fn lowest_eigenvalue_matches_dense() {
        let h = hermitian(40, 1);
        let exact = SymmetricEigen::new(h.clone()).eigenvalues.min();
        let start = random_tensor(&[40], 2).into_data();
        let r = lowest_eigen(matvec(&h), &start, 60, 1e-10, 3).unwrap();
        assert!((r.value - exact).abs() < 1e-9);
        assert!(r.residual < 1e-9);
    }

    #[test]
    fn exponential_matches_eigendecomposition() {
        let h = hermitian(30, 3);
        let v = random_tensor(&[30], 4).into_data();
        let tau = C64::new(0.0, -0.7);
        let eig = h.clone().symmetric_eigen();
        let u = eig.eigenvectors.clone();
        let phases = nalgebra::DVector::from_iterator(30, eig.eigenvalues.iter().map(|e| (tau * e).exp()));
        let exact = &u * DMatrix::from_diagonal(&phases) * u.adjoint() * nalgebra::DVector::from_column_slice(&v);
        let got = expm_apply(matvec(&h), &v, tau, 40, 1e-13).unwrap();
        let err = got.iter().zip(exact.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn exponential_splits_when_space_too_small() {
        let h = hermitian(30, 5) * C64::new(3.0, 0.0);
        let v = random_tensor(&[30], 6).into_data();
        let a = expm_apply(matvec(&h), &v, C64::new(0.0, -1.0), 8, 1e-10).unwrap();
        let b = expm_apply(matvec(&h), &v, C64::new(0.0, -1.0), 30, 1e-13).unwrap();
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
}
