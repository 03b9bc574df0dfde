//! Exact-diagonalization reference.
//!
//! Hamiltonians are applied term by term to full state vectors, with no MPS
//! machinery involved, so every solver result can be checked against an
//! independent route. Site 0 is the most significant index of a vector.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::SiteBasis;
use crate::krylov::{expm_apply, lowest_eigen};
use crate::tdvp::Trajectory;
use crate::tensor::{C64, ZERO};
use crate::terms::{validate_terms, ProductTerm};
use crate::{Error, Result};

pub const GROUND_DIM_CAP: usize = 1 << 20;
pub const PROPAGATE_DIM_CAP: usize = 1 << 18;

const SEED: u64 = 0x0ED0_0ED0;

#[derive(Clone, Debug)]
struct Factor {
    site: usize,
    /// sparse (out, in, value)
    entries: Vec<(usize, usize, C64)>,
    diagonal: bool,
}

#[derive(Clone, Debug)]
struct CompiledTerm {
    coefficient: C64,
    factors: Vec<Factor>,
}

/// Matrix-free Hamiltonian on the full tensor-product space.
#[derive(Clone, Debug)]
pub struct DenseHamiltonian {
    dims: Vec<usize>,
    dimension: usize,
    terms: Vec<CompiledTerm>,
}

fn compile_op(m: &DMatrix<C64>) -> (Vec<(usize, usize, C64)>, bool) {
    let d = m.nrows();
    let mut entries = Vec::new();
    let mut diagonal = true;
    for i in 0..d {
        for j in 0..d {
            if m[(i, j)] != ZERO {
                entries.push((i, j, m[(i, j)]));
                diagonal &= i == j;
            }
        }
    }
    (entries, diagonal)
}

impl DenseHamiltonian {
    pub fn new(terms: &[ProductTerm], bases: &[SiteBasis]) -> Result<Self> {
        Self::with_cap(terms, bases, GROUND_DIM_CAP)
    }

    pub fn with_cap(terms: &[ProductTerm], bases: &[SiteBasis], cap: usize) -> Result<Self> {
        validate_terms(terms, bases)?;
        let dims: Vec<usize> = bases.iter().map(|b| b.dim()).collect();
        let dimension = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
        if dimension > cap {
            return Err(Error::DimensionCap { dim: dimension, cap });
        }
        let mut compiled = Vec::with_capacity(terms.len());
        for t in terms {
            let mut factors = Vec::new();
            for (site, name) in &t.factors {
                let (entries, diagonal) = compile_op(&bases[*site].op(name)?.matrix);
                factors.push(Factor { site: *site, entries, diagonal });
            }
            compiled.push(CompiledTerm { coefficient: t.coefficient, factors });
        }
        Ok(Self { dims, dimension, terms: compiled })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn apply_factor(&self, f: &Factor, x: &[C64], out: &mut [C64]) {
        let d = self.dims[f.site];
        let inner: usize = self.dims[f.site + 1..].iter().product();
        let outer = self.dimension / (d * inner);
        out.iter_mut().for_each(|v| *v = ZERO);
        for o in 0..outer {
            let base = o * d * inner;
            for &(so, si, val) in &f.entries {
                let src = &x[base + si * inner..base + (si + 1) * inner];
                let dst = &mut out[base + so * inner..base + (so + 1) * inner];
                for (a, b) in dst.iter_mut().zip(src) {
                    *a += val * b;
                }
            }
        }
    }

    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        assert_eq!(x.len(), self.dimension);
        out.iter_mut().for_each(|v| *v = ZERO);
        let mut a = vec![ZERO; self.dimension];
        let mut b = vec![ZERO; self.dimension];
        for t in &self.terms {
            if t.factors.is_empty() {
                for (o, v) in out.iter_mut().zip(x) {
                    *o += t.coefficient * v;
                }
                continue;
            }
            if t.factors.iter().all(|f| f.diagonal) {
                self.add_diagonal_term(t, x, out);
                continue;
            }
            self.apply_factor(&t.factors[0], x, &mut a);
            for f in &t.factors[1..] {
                self.apply_factor(f, &a, &mut b);
                std::mem::swap(&mut a, &mut b);
            }
            for (o, v) in out.iter_mut().zip(&a) {
                *o += t.coefficient * v;
            }
        }
    }

    fn add_diagonal_term(&self, t: &CompiledTerm, x: &[C64], out: &mut [C64]) {
        let strides: Vec<usize> = t
            .factors
            .iter()
            .map(|f| self.dims[f.site + 1..].iter().product())
            .collect();
        let diags: Vec<Vec<C64>> = t
            .factors
            .iter()
            .map(|f| {
                let mut dv = vec![ZERO; self.dims[f.site]];
                for &(i, _, v) in &f.entries {
                    dv[i] = v;
                }
                dv
            })
            .collect();
        for (idx, (o, v)) in out.iter_mut().zip(x).enumerate() {
            let mut w = t.coefficient;
            for ((f, s), dv) in t.factors.iter().zip(&strides).zip(&diags) {
                w *= dv[(idx / s) % self.dims[f.site]];
            }
            *o += w * v;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dimension];
        self.apply_into(x, &mut out);
        out
    }

    pub fn expectation(&self, v: &[C64]) -> C64 {
        let hv = self.apply(v);
        v.iter().zip(&hv).map(|(a, b)| a.conj() * b).sum()
    }

    /// Dense matrix; only sensible for small spaces.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let n = self.dimension;
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            let col = self.apply(&e);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
            e[j] = ZERO;
        }
        m
    }
}

/// Reproducible random unit vector.
pub fn random_vector(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..dim).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
}

/// Lowest eigenpair by Lanczos with full reorthogonalization from a fixed
/// seed.
pub fn ed_ground(terms: &[ProductTerm], bases: &[SiteBasis]) -> Result<GroundState> {
    let h = DenseHamiltonian::new(terms, bases)?;
    let n = h.dimension();
    let start = random_vector(n, SEED);
    let norm_est = operator_norm_estimate(&h);
    let tol = 1e-10 * norm_est.max(1.0);
    let r = lowest_eigen(|x| h.apply(x), &start, 300.min(n), tol, 20)?;
    if r.residual > 1e-9 * norm_est.max(1.0) {
        return Err(Error::Eigensolver(format!("ground state residual {:.3e} too large", r.residual)));
    }
    Ok(GroundState { energy: r.value, vector: r.vector, residual: r.residual })
}

/// Cheap upper bound on the spectral radius: sum of term norms.
fn operator_norm_estimate(h: &DenseHamiltonian) -> f64 {
    h.terms
        .iter()
        .map(|t| {
            let mut n = t.coefficient.norm();
            for f in &t.factors {
                let d = h.dims[f.site];
                let mut row = vec![0.0; d];
                let mut col = vec![0.0; d];
                for &(i, j, v) in &f.entries {
                    row[i] += v.norm();
                    col[j] += v.norm();
                }
                let r = row.iter().cloned().fold(0.0, f64::max);
                let c = col.iter().cloned().fold(0.0, f64::max);
                n *= (r * c).sqrt();
            }
            n
        })
        .sum()
}

/// Named observable given as a term list.
#[derive(Clone, Debug)]
pub struct DenseObservable {
    pub name: String,
    pub terms: Vec<ProductTerm>,
}

/// Exact real-time propagation `|psi(t + dt)> = exp(-i H dt)|psi(t)>`.
#[allow(clippy::too_many_arguments)]
pub fn exact_propagate(
    terms: &[ProductTerm],
    bases: &[SiteBasis],
    psi0: &[C64],
    dt: f64,
    n_steps: usize,
    observables: &[DenseObservable],
) -> Result<Trajectory> {
    let h = DenseHamiltonian::with_cap(terms, bases, PROPAGATE_DIM_CAP)?;
    if psi0.len() != h.dimension() {
        return Err(Error::Shape(format!("initial vector length {} vs dimension {}", psi0.len(), h.dimension())));
    }
    let n0 = psi0.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("initial state norm {n0} is not 1")));
    }
    let obs: Vec<(String, DenseHamiltonian)> = observables
        .iter()
        .map(|o| Ok((o.name.clone(), DenseHamiltonian::with_cap(&o.terms, bases, PROPAGATE_DIM_CAP)?)))
        .collect::<Result<_>>()?;
    let exact_bond = exact_bond_dim(bases);
    let mut traj = Trajectory::new(obs.iter().map(|o| o.0.clone()).collect());
    let mut psi = psi0.to_vec();
    let record = |traj: &mut Trajectory, t: f64, psi: &[C64]| {
        let norm2: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        let values: Vec<f64> = obs.iter().map(|(_, o)| o.expectation(psi).re / norm2).collect();
        traj.push(t, &values, norm2.sqrt(), h.expectation(psi).re / norm2, exact_bond, 0.0);
    };
    record(&mut traj, 0.0, &psi);
    for step in 1..=n_steps {
        psi = expm_apply(|x| h.apply(x), &psi, C64::new(0.0, -dt), 60, 1e-12).map_err(|e| {
            Error::KrylovNotConverged { step, detail: e.to_string() }
        })?;
        record(&mut traj, step as f64 * dt, &psi);
    }
    Ok(traj)
}

/// Largest Schmidt rank any cut of the chain can carry.
pub fn exact_bond_dim(bases: &[SiteBasis]) -> usize {
    crate::mps::bond_caps(bases).into_iter().max().unwrap_or(1)
}

/// Dense product state; site 0 most significant.
pub fn product_vector(local_states: &[Vec<C64>]) -> Vec<C64> {
    let mut v = vec![C64::new(1.0, 0.0)];
    for s in local_states {
        let mut next = Vec::with_capacity(v.len() * s.len());
        for a in &v {
            for b in s {
                next.push(a * b);
            }
        }
        v = next;
    }
    v
}
