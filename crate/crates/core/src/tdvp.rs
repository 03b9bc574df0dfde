//! Real-time TDVP with symmetric one-site and two-site sweeps.

use crate::env::{apply_one_site, apply_two_site, apply_zero_site, left_step, right_step, Env};
use crate::expand::expand_bond;
use crate::krylov::expm_apply;
use crate::mpo::MatrixProductOperator;
use crate::mps::{bond_caps, MatrixProductState};
use crate::tensor::{matmul, qr_orthonormalize, svd_truncate, DenseTensor, Op, Side, C64};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    OneSite,
    TwoSite,
    /// Two-site steps until every bond reaches `min(M, cap)` or more than
    /// `switch_step` steps have run; then `expand_bond` if still needed and
    /// one-site steps.
    Hybrid { switch_step: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TdvpConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub scheme: Scheme,
    pub max_bond: usize,
    pub cutoff: f64,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
}

impl Default for TdvpConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            n_steps: 200,
            scheme: Scheme::Hybrid { switch_step: 10 },
            max_bond: 16,
            cutoff: 1e-10,
            krylov_dim: 32,
            krylov_tol: 1e-12,
        }
    }
}

impl TdvpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.max_bond == 0 || self.krylov_dim < 2 {
            return Err(Error::InvalidArgument("need max_bond >= 1 and krylov_dim >= 2".into()));
        }
        if !(self.cutoff >= 0.0) || !(self.krylov_tol > 0.0) {
            return Err(Error::InvalidArgument("cutoff must be >= 0 and krylov_tol > 0".into()));
        }
        Ok(())
    }
}

/// Quantity sampled along a trajectory. Values are normalized expectation
/// values, real parts of Hermitian operators.
#[derive(Clone, Debug)]
pub enum Observable {
    Local { name: String, site: usize, op: String },
    Mpo { name: String, mpo: MatrixProductOperator },
}

impl Observable {
    pub fn local(name: &str, site: usize, op: &str) -> Self {
        Observable::Local { name: name.to_string(), site, op: op.to_string() }
    }

    pub fn name(&self) -> &str {
        match self {
            Observable::Local { name, .. } | Observable::Mpo { name, .. } => name,
        }
    }

    fn evaluate(&self, psi: &MatrixProductState) -> Result<f64> {
        match self {
            Observable::Local { site, op, .. } => psi.site_expectation(*site, op),
            Observable::Mpo { mpo, .. } => Ok(psi.expectation(mpo)?.re / psi.norm_sqr()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `values[k][step]` for observable `names[k]`.
    pub values: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    pub energies: Vec<f64>,
    pub bond_profile: Vec<usize>,
    /// Largest per-bond discarded weight in each step (0 at t = 0 and for
    /// one-site steps).
    pub discarded: Vec<f64>,
}

impl Trajectory {
    pub fn new(names: Vec<String>) -> Self {
        let values = vec![Vec::new(); names.len()];
        Self { names, values, ..Self::default() }
    }

    pub fn push(&mut self, t: f64, values: &[f64], norm: f64, energy: f64, max_bond: usize, discarded: f64) {
        self.times.push(t);
        for (series, v) in self.values.iter_mut().zip(values) {
            series.push(*v);
        }
        self.norms.push(norm);
        self.energies.push(energy);
        self.bond_profile.push(max_bond);
        self.discarded.push(discarded);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.values[k].as_slice())
    }
}

/// True when every bond equals `min(max_bond, cap)`; otherwise the first
/// offending `(bond, have, need)`.
pub fn saturation_gap(psi: &MatrixProductState, max_bond: usize) -> Option<(usize, usize, usize)> {
    let caps = bond_caps(psi.bases());
    psi.bond_dims()
        .iter()
        .zip(&caps)
        .enumerate()
        .find(|(_, (&have, &cap))| have != cap.min(max_bond))
        .map(|(i, (&have, &cap))| (i, have, cap.min(max_bond)))
}

struct Stepper<'a> {
    h: &'a MatrixProductOperator,
    psi: MatrixProductState,
    lefts: Vec<Env>,
    rights: Vec<Env>,
    cfg: &'a TdvpConfig,
    step: usize,
}

impl<'a> Stepper<'a> {
    fn new(h: &'a MatrixProductOperator, psi: &MatrixProductState, cfg: &'a TdvpConfig) -> Result<Self> {
        let n = psi.len();
        let psi = psi.canonicalize(0)?;
        let mut s = Self {
            h,
            psi,
            lefts: vec![Env::boundary(); n + 1],
            rights: vec![Env::boundary(); n + 1],
            cfg,
            step: 0,
        };
        for i in (1..n).rev() {
            s.push_right(i);
        }
        Ok(s)
    }

    fn push_left(&mut self, i: usize) {
        let t = self.psi.tensor(i);
        self.lefts[i + 1] = left_step(&self.lefts[i], t, self.h.blocks(i), self.h.right_dim(i), t);
    }

    fn push_right(&mut self, i: usize) {
        let t = self.psi.tensor(i);
        self.rights[i] = right_step(&self.rights[i + 1], t, self.h.blocks(i), self.h.left_dim(i), t);
    }

    fn expm<F: FnMut(&[C64]) -> Vec<C64>>(&self, apply: F, v: &[C64], tau: f64) -> Result<Vec<C64>> {
        expm_apply(apply, v, C64::new(0.0, -tau), self.cfg.krylov_dim, self.cfg.krylov_tol)
            .map_err(|e| Error::KrylovNotConverged { step: self.step, detail: e.to_string() })
    }

    fn evolve_site(&self, i: usize, data: &[C64], tau: f64) -> Result<Vec<C64>> {
        let d = self.psi.bases()[i].dim();
        let (l, r, b) = (&self.lefts[i], &self.rights[i + 1], self.h.blocks(i));
        self.expm(|x| apply_one_site(l, b, r, x, d), data, tau)
    }

    fn one_site_step(&mut self) -> Result<()> {
        let n = self.psi.len();
        let half = self.cfg.dt / 2.0;
        if n == 1 {
            let c = self.evolve_site(0, self.psi.tensor(0).data(), self.cfg.dt)?;
            let shape = self.psi.tensor(0).shape().to_vec();
            self.psi.set_tensor(0, DenseTensor::from_data(&shape, c)?);
            return Ok(());
        }
        for i in 0..n {
            let shape = self.psi.tensor(i).shape().to_vec();
            let c = self.evolve_site(i, self.psi.tensor(i).data(), half)?;
            if i == n - 1 {
                self.psi.set_tensor(i, DenseTensor::from_data(&shape, c)?);
                break;
            }
            let (l, d, r) = (shape[0], shape[1], shape[2]);
            let (q, rem) = qr_orthonormalize(&DenseTensor::from_data(&[l * d, r], c)?, Side::Left)?;
            let k = q.shape()[1];
            self.psi.set_tensor(i, q.reshape(&[l, d, k])?);
            self.push_left(i);
            let (lf, rt) = (&self.lefts[i + 1], &self.rights[i + 1]);
            let rem = self.expm(|x| apply_zero_site(lf, rt, x), rem.data(), -half)?;
            let next = self.psi.tensor(i + 1);
            let (_, d2, r2) = (next.shape()[0], next.shape()[1], next.shape()[2]);
            let merged = matmul(&rem, (k, r), Op::N, next.data(), (r, d2 * r2), Op::N);
            self.psi.set_tensor(i + 1, DenseTensor::from_data(&[k, d2, r2], merged)?);
        }
        for i in (0..n).rev() {
            let shape = self.psi.tensor(i).shape().to_vec();
            let c = self.evolve_site(i, self.psi.tensor(i).data(), half)?;
            if i == 0 {
                self.psi.set_tensor(0, DenseTensor::from_data(&shape, c)?);
                break;
            }
            let (l, d, r) = (shape[0], shape[1], shape[2]);
            let (q, rem) = qr_orthonormalize(&DenseTensor::from_data(&[l, d * r], c)?, Side::Right)?;
            let k = q.shape()[0];
            self.psi.set_tensor(i, q.reshape(&[k, d, r])?);
            self.push_right(i);
            let (lf, rt) = (&self.lefts[i], &self.rights[i]);
            let rem = self.expm(|x| apply_zero_site(lf, rt, x), rem.data(), -half)?;
            let prev = self.psi.tensor(i - 1);
            let (l0, d0) = (prev.shape()[0], prev.shape()[1]);
            let merged = matmul(prev.data(), (l0 * d0, l), Op::N, &rem, (l, k), Op::N);
            self.psi.set_tensor(i - 1, DenseTensor::from_data(&[l0, d0, k], merged)?);
        }
        self.psi.set_center(Some(0));
        Ok(())
    }

    /// Evolve sites `(i, i+1)` by `tau` and split; returns discarded weight.
    fn two_site_update(&mut self, i: usize, tau: f64, moving_right: bool) -> Result<f64> {
        let a = self.psi.tensor(i);
        let b = self.psi.tensor(i + 1);
        let (l, d1, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
        let (d2, r) = (b.shape()[1], b.shape()[2]);
        let theta = matmul(a.data(), (l * d1, k), Op::N, b.data(), (k, d2 * r), Op::N);
        let (lf, rt) = (&self.lefts[i], &self.rights[i + 2]);
        let (b1, b2, wm) = (self.h.blocks(i), self.h.blocks(i + 1), self.h.right_dim(i));
        let theta = self.expm(|x| apply_two_site(lf, b1, wm, b2, rt, x, d1, d2), &theta, tau)?;
        let svd = svd_truncate(&DenseTensor::from_data(&[l * d1, d2 * r], theta)?, self.cfg.max_bond, self.cfg.cutoff)?;
        let kept = svd.s.len();
        let total: f64 = svd.report.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt();
        let norm: f64 = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        // keep the pre-truncation norm
        let s: Vec<f64> = svd.s.iter().map(|x| x * total / norm).collect();
        let (mut u, mut vt) = (svd.u, svd.v);
        if moving_right {
            for (idx, x) in vt.data_mut().iter_mut().enumerate() {
                *x *= s[idx / (d2 * r)];
            }
        } else {
            for (idx, x) in u.data_mut().iter_mut().enumerate() {
                *x *= s[idx % kept];
            }
        }
        self.psi.set_tensor(i, u.reshape(&[l, d1, kept])?);
        self.psi.set_tensor(i + 1, vt.reshape(&[kept, d2, r])?);
        Ok(svd.report.discarded_weight)
    }

    fn two_site_step(&mut self) -> Result<f64> {
        let n = self.psi.len();
        if n < 2 {
            self.one_site_step()?;
            return Ok(0.0);
        }
        let half = self.cfg.dt / 2.0;
        let mut worst: f64 = 0.0;
        for i in 0..n - 1 {
            worst = worst.max(self.two_site_update(i, half, true)?);
            self.push_left(i);
            if i + 2 < n {
                let c = self.evolve_site(i + 1, self.psi.tensor(i + 1).data(), -half)?;
                let shape = self.psi.tensor(i + 1).shape().to_vec();
                self.psi.set_tensor(i + 1, DenseTensor::from_data(&shape, c)?);
            }
        }
        for i in (0..n - 1).rev() {
            worst = worst.max(self.two_site_update(i, half, false)?);
            self.push_right(i + 1);
            if i > 0 {
                let c = self.evolve_site(i, self.psi.tensor(i).data(), -half)?;
                let shape = self.psi.tensor(i).shape().to_vec();
                self.psi.set_tensor(i, DenseTensor::from_data(&shape, c)?);
            }
        }
        self.psi.set_center(Some(0));
        Ok(worst)
    }
}

fn record(
    traj: &mut Trajectory,
    t: f64,
    psi: &MatrixProductState,
    h: &MatrixProductOperator,
    observables: &[Observable],
    discarded: f64,
) -> Result<()> {
    let values = observables.iter().map(|o| o.evaluate(psi)).collect::<Result<Vec<_>>>()?;
    let norm = psi.norm();
    let energy = psi.expectation(h)?.re / (norm * norm);
    traj.push(t, &values, norm, energy, psi.max_bond(), discarded);
    Ok(())
}

/// Evolve `psi0` under `h` for `cfg.n_steps` steps of `cfg.dt`, sampling
/// every observable, the norm, energy and maximal bond after each step.
///
/// The one-site scheme requires every bond of `psi0` to equal
/// `min(max_bond, cap)`; see [`expand_bond`].
pub fn tdvp_evolve(
    h: &MatrixProductOperator,
    psi0: &MatrixProductState,
    cfg: &TdvpConfig,
    observables: &[Observable],
) -> Result<Trajectory> {
    check_one_site(psi0, cfg)?;
    evolve(h, psi0, cfg, observables)
}

fn check_one_site(psi0: &MatrixProductState, cfg: &TdvpConfig) -> Result<()> {
    if cfg.scheme == Scheme::OneSite {
        if let Some((bond, have, need)) = saturation_gap(psi0, cfg.max_bond) {
            return Err(Error::BondsNotExpanded { bond, have, need });
        }
    }
    Ok(())
}

/// Step loop shared by the public entry points; `on_step` sees the state
/// after every step together with that step's discarded weight.
fn run<F>(h: &MatrixProductOperator, psi0: &MatrixProductState, cfg: &TdvpConfig, mut on_step: F) -> Result<MatrixProductState>
where
    F: FnMut(usize, &MatrixProductState, f64) -> Result<()>,
{
    cfg.validate()?;
    if h.bases() != psi0.bases() {
        return Err(Error::BasisMismatch("Hamiltonian and initial state live on different bases".into()));
    }
    let mut one_site = cfg.scheme == Scheme::OneSite;
    let mut stepper = Stepper::new(h, psi0, cfg)?;
    for step in 1..=cfg.n_steps {
        stepper.step = step;
        if let Scheme::Hybrid { switch_step } = cfg.scheme {
            let saturated = saturation_gap(&stepper.psi, cfg.max_bond).is_none();
            if !one_site && (step > switch_step || saturated) {
                if !saturated {
                    let expanded = expand_bond(&stepper.psi, h, cfg.max_bond)?;
                    stepper = Stepper::new(h, &expanded, cfg)?;
                    stepper.step = step;
                }
                one_site = true;
            }
        }
        let discarded = if one_site {
            stepper.one_site_step()?;
            0.0
        } else {
            stepper.two_site_step()?
        };
        on_step(step, &stepper.psi, discarded)?;
    }
    Ok(stepper.psi)
}

/// [`tdvp_evolve`] without the one-site precondition.
pub(crate) fn evolve(
    h: &MatrixProductOperator,
    psi0: &MatrixProductState,
    cfg: &TdvpConfig,
    observables: &[Observable],
) -> Result<Trajectory> {
    for o in observables {
        if let Observable::Local { site, op, .. } = o {
            if *site >= psi0.len() {
                return Err(Error::SiteOutOfRange { site: *site, len: psi0.len() });
            }
            let local = psi0.bases()[*site].op(op)?;
            if !local.is_hermitian(1e-12) {
                return Err(Error::NotHermitian(op.clone()));
            }
        }
    }
    let mut traj = Trajectory::new(observables.iter().map(|o| o.name().to_string()).collect());
    record(&mut traj, 0.0, psi0, h, observables, 0.0)?;
    run(h, psi0, cfg, |step, psi, discarded| {
        record(&mut traj, step as f64 * cfg.dt, psi, h, observables, discarded)
    })?;
    Ok(traj)
}

/// Evolve without sampling and return the final state.
pub fn tdvp_evolve_state(
    h: &MatrixProductOperator,
    psi0: &MatrixProductState,
    cfg: &TdvpConfig,
) -> Result<MatrixProductState> {
    check_one_site(psi0, cfg)?;
    run(h, psi0, cfg, |_, _, _| Ok(()))
}
