//! Two-site DMRG ground-state search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{apply_one_site, apply_two_site, left_step, right_step, Env};
use crate::krylov::lowest_eigen;
use crate::mpo::MatrixProductOperator;
use crate::mps::MatrixProductState;
use crate::tensor::{matmul, svd_truncate, DenseTensor, Op, C64};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepParams {
    pub max_bond: usize,
    pub cutoff: f64,
    /// Relative amplitude of the random perturbation added to each two-site
    /// tensor after its update.
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DmrgSchedule {
    /// One entry per full (left-right-left) sweep. Noise is ignored on the
    /// final entry.
    pub sweeps: Vec<SweepParams>,
    pub energy_tol: f64,
    pub max_local_iters: usize,
    pub local_tol: f64,
    pub noise_seed: u64,
}

impl DmrgSchedule {
    /// `n_sweeps` identical noiseless sweeps at `max_bond`.
    pub fn fixed(max_bond: usize, n_sweeps: usize) -> Self {
        let entry = SweepParams { max_bond, cutoff: 1e-10, noise: 0.0 };
        Self { sweeps: vec![entry; n_sweeps.max(1)], ..Self::default() }
    }

    /// `sweeps_each` sweeps at each bond dimension in turn; noise `1e-4` on
    /// all but the last stage.
    pub fn ramp(bonds: &[usize], sweeps_each: usize) -> Self {
        let mut sweeps = Vec::new();
        for (i, &m) in bonds.iter().enumerate() {
            let noise = if i + 1 < bonds.len() { 1e-4 } else { 0.0 };
            for _ in 0..sweeps_each.max(1) {
                sweeps.push(SweepParams { max_bond: m, cutoff: 1e-10, noise });
            }
        }
        Self { sweeps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps.is_empty() {
            return Err(Error::InvalidArgument("DMRG schedule needs at least one sweep".into()));
        }
        if self.sweeps.iter().any(|s| s.max_bond == 0 || !(s.cutoff >= 0.0) || !(s.noise >= 0.0)) {
            return Err(Error::InvalidArgument("sweep entries need max_bond >= 1 and nonnegative cutoff/noise".into()));
        }
        if !(self.energy_tol > 0.0 && self.local_tol > 0.0) || self.max_local_iters == 0 {
            return Err(Error::InvalidArgument("DMRG tolerances must be positive".into()));
        }
        Ok(())
    }
}

impl Default for DmrgSchedule {
    fn default() -> Self {
        Self {
            sweeps: vec![SweepParams { max_bond: 32, cutoff: 1e-10, noise: 0.0 }; 8],
            energy_tol: 1e-8,
            max_local_iters: 40,
            local_tol: 1e-9,
            noise_seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DmrgResult {
    pub energy: f64,
    /// Unit norm, canonical center at site 0.
    pub state: MatrixProductState,
    pub energy_per_sweep: Vec<f64>,
    pub converged: bool,
    /// Largest per-bond discarded weight of the last sweep.
    pub max_discarded_weight: f64,
}

struct Sweeper<'a> {
    h: &'a MatrixProductOperator,
    psi: MatrixProductState,
    lefts: Vec<Env>,
    rights: Vec<Env>,
    max_local_iters: usize,
    local_tol: f64,
    rng: ChaCha8Rng,
}

impl<'a> Sweeper<'a> {
    fn push_left(&mut self, i: usize) {
        let t = self.psi.tensor(i);
        let env = left_step(&self.lefts[i], t, self.h.blocks(i), self.h.right_dim(i), t);
        self.lefts[i + 1] = env;
    }

    fn push_right(&mut self, i: usize) {
        let t = self.psi.tensor(i);
        let env = right_step(&self.rights[i + 1], t, self.h.blocks(i), self.h.left_dim(i), t);
        self.rights[i] = env;
    }

    /// Optimize sites `(i, i+1)` and split; the center ends on `i+1` when
    /// moving right and on `i` otherwise. Returns the discarded weight.
    fn update(&mut self, i: usize, params: SweepParams, noise: f64, moving_right: bool) -> Result<f64> {
        let a = self.psi.tensor(i);
        let b = self.psi.tensor(i + 1);
        let (l, d1, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
        let (d2, r) = (b.shape()[1], b.shape()[2]);
        let theta = matmul(a.data(), (l * d1, k), Op::N, b.data(), (k, d2 * r), Op::N);
        let (left, right) = (&self.lefts[i], &self.rights[i + 2]);
        let (b1, b2, wm) = (self.h.blocks(i), self.h.blocks(i + 1), self.h.right_dim(i));
        let eig = lowest_eigen(
            |x| apply_two_site(left, b1, wm, b2, right, x, d1, d2),
            &theta,
            self.max_local_iters,
            self.local_tol,
            2,
        )?;
        if !eig.value.is_finite() || eig.vector.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Eigensolver(format!("non-finite local solution at bond {}", i + 1)));
        }
        let mut v = eig.vector;
        if noise > 0.0 {
            let r: Vec<C64> = (0..v.len()).map(|_| C64::new(self.rng.gen::<f64>() - 0.5, self.rng.gen::<f64>() - 0.5)).collect();
            let rn = r.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            for (x, y) in v.iter_mut().zip(&r) {
                *x += y * (noise / rn);
            }
            let vn = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= vn);
        }
        let m = DenseTensor::from_data(&[l * d1, d2 * r], v)?;
        let svd = svd_truncate(&m, params.max_bond, params.cutoff)?;
        let kept = svd.s.len();
        let norm: f64 = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        let s: Vec<f64> = svd.s.iter().map(|x| x / norm).collect();
        let (mut u, mut vt) = (svd.u, svd.v);
        if moving_right {
            for (idx, x) in vt.data_mut().iter_mut().enumerate() {
                *x *= s[idx / (d2 * r)];
            }
            self.psi.set_center(Some(i + 1));
        } else {
            for (idx, x) in u.data_mut().iter_mut().enumerate() {
                *x *= s[idx % kept];
            }
            self.psi.set_center(Some(i));
        }
        self.psi.set_tensor(i, u.reshape(&[l, d1, kept])?);
        self.psi.set_tensor(i + 1, vt.reshape(&[kept, d2, r])?);
        Ok(svd.report.discarded_weight)
    }

    fn sweep(&mut self, params: SweepParams, noise: f64) -> Result<f64> {
        let n = self.psi.len();
        let mut worst: f64 = 0.0;
        for i in 0..n - 1 {
            worst = worst.max(self.update(i, params, noise, true)?);
            self.push_left(i);
        }
        for i in (0..n - 1).rev() {
            worst = worst.max(self.update(i, params, noise, false)?);
            self.push_right(i + 1);
        }
        Ok(worst)
    }
}

fn single_site(h: &MatrixProductOperator, init: &MatrixProductState, schedule: &DmrgSchedule) -> Result<DmrgResult> {
    let b = Env::boundary();
    let d = init.bases()[0].dim();
    let eig = lowest_eigen(
        |x| apply_one_site(&b, h.blocks(0), &b, x, d),
        init.tensor(0).data(),
        schedule.max_local_iters.max(d),
        schedule.local_tol,
        2,
    )?;
    let state = MatrixProductState::product(init.bases(), &[eig.vector])?;
    let energy = state.energy(h)?;
    Ok(DmrgResult { energy, state, energy_per_sweep: vec![energy], converged: true, max_discarded_weight: 0.0 })
}

/// Minimize `<psi|H|psi>` by two-site sweeps following `schedule`.
///
/// Stops early once two consecutive sweeps differ by less than `energy_tol`
/// and the remaining schedule entries are all equal to the final one.
pub fn dmrg_ground_state(
    h: &MatrixProductOperator,
    init: &MatrixProductState,
    schedule: &DmrgSchedule,
) -> Result<DmrgResult> {
    schedule.validate()?;
    if h.bases() != init.bases() {
        return Err(Error::BasisMismatch("Hamiltonian and initial state live on different bases".into()));
    }
    if init.norm() == 0.0 {
        return Err(Error::InvalidArgument("initial state has zero norm".into()));
    }
    let n = init.len();
    if n == 1 {
        let mut s = init.clone();
        s.normalize();
        return single_site(h, &s, schedule);
    }
    let mut psi = init.canonicalize(0)?;
    psi.normalize();
    let mut sweeper = Sweeper {
        h,
        psi,
        lefts: vec![Env::boundary(); n + 1],
        rights: vec![Env::boundary(); n + 1],
        max_local_iters: schedule.max_local_iters,
        local_tol: schedule.local_tol,
        rng: ChaCha8Rng::seed_from_u64(schedule.noise_seed),
    };
    for i in (1..n).rev() {
        sweeper.push_right(i);
    }
    let last = *schedule.sweeps.last().unwrap();
    let n_sweeps = schedule.sweeps.len();
    let mut energies = Vec::with_capacity(n_sweeps);
    let mut converged = false;
    let mut discarded = 0.0;
    for (k, params) in schedule.sweeps.iter().enumerate() {
        let noise = if k + 1 == n_sweeps { 0.0 } else { params.noise };
        discarded = sweeper.sweep(*params, noise)?;
        let e = sweeper.psi.energy(h)?;
        if !e.is_finite() {
            return Err(Error::Eigensolver(format!("non-finite energy after sweep {}", k + 1)));
        }
        energies.push(e);
        converged = energies.len() >= 2 && (e - energies[energies.len() - 2]).abs() < schedule.energy_tol;
        let settled = schedule.sweeps[k..].iter().all(|s| s.max_bond == last.max_bond && s.cutoff == last.cutoff)
            && noise == 0.0;
        if converged && settled {
            break;
        }
    }
    let mut state = sweeper.psi;
    state.normalize();
    Ok(DmrgResult {
        energy: *energies.last().unwrap(),
        state,
        energy_per_sweep: energies,
        converged,
        max_discarded_weight: discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SiteBasis;
    use crate::models::ising::{ising2d_terms, Boundary, IsingParams};
    use crate::mpo::mpo_from_terms;
    use crate::oracle::ed_ground;
    use crate::terms::ProductTerm;

    fn chain_ising(n: usize, j: f64, h: f64) -> Vec<ProductTerm> {
        let mut t: Vec<_> = (0..n - 1).map(|i| ProductTerm::real(-j, &[(i, "sz"), (i + 1, "sz")]).unwrap()).collect();
        if h != 0.0 {
            t.extend((0..n).map(|i| ProductTerm::real(-h, &[(i, "sx")]).unwrap()));
        }
        t
    }

    fn run(terms: &[ProductTerm], bases: &[SiteBasis], schedule: &DmrgSchedule, seed: u64) -> DmrgResult {
        let mpo = mpo_from_terms(terms, bases).unwrap();
        let init = MatrixProductState::random(bases, schedule.sweeps[0].max_bond, seed).unwrap();
        dmrg_ground_state(&mpo, &init, schedule).unwrap()
    }

    #[test]
    fn two_site_chain_closed_form() {
        let bases = vec![SiteBasis::SpinHalf; 2];
        let r = run(&chain_ising(2, 1.0, 1.0), &bases, &DmrgSchedule::fixed(4, 4), 1);
        assert!((r.energy + 5f64.sqrt()).abs() < 1e-10);
        assert!(r.converged);
    }

    #[test]
    fn classical_three_by_three() {
        let mut p = IsingParams::new(3, 3, 1.0, 0.0, Boundary::Open);
        p.pin = None;
        let m = ising2d_terms(&p).unwrap();
        let r = run(&m.terms, &m.bases, &DmrgSchedule::fixed(8, 6), 2);
        assert!((r.energy + 12.0).abs() < 1e-8);
    }

    #[test]
    fn exact_at_full_bond_dimension() {
        let n = 10;
        let bases = vec![SiteBasis::SpinHalf; n];
        let mut terms = chain_ising(n, 1.0, 0.9);
        terms.push(ProductTerm::real(0.3, &[(1, "sx"), (6, "sy")]).unwrap());
        let exact = ed_ground(&terms, &bases).unwrap().energy;
        let r = run(&terms, &bases, &DmrgSchedule::fixed(32, 10), 3);
        assert!((r.energy - exact).abs() < 1e-9 * exact.abs());
        assert!(r.energy >= exact - 1e-10);
    }

    #[test]
    fn result_is_normalized_and_consistent() {
        let bases = vec![SiteBasis::SpinHalf; 6];
        let terms = chain_ising(6, 1.0, 1.3);
        let mpo = mpo_from_terms(&terms, &bases).unwrap();
        let r = run(&terms, &bases, &DmrgSchedule::ramp(&[2, 4, 8], 2), 4);
        assert!((r.state.norm() - 1.0).abs() < 1e-12);
        assert_eq!(r.state.center(), Some(0));
        assert!((r.state.energy(&mpo).unwrap() - r.energy).abs() < 1e-9 * r.energy.abs());
        let noiseless: Vec<_> = r.energy_per_sweep.iter().skip(4).collect();
        for w in noiseless.windows(2) {
            assert!(*w[1] <= *w[0] + 1e-7);
        }
    }

    #[test]
    fn spin_boson_ground_state_matches_oracle() {
        use crate::models::spin_boson::{spin_boson_terms, SpinBosonParams};
        let p = SpinBosonParams { delta: 1.0, eps: 0.0, alpha: 0.1, s: 0.5, omega_c: 10.0, n_modes: 4, d_b: 6 };
        let m = spin_boson_terms(&p).unwrap();
        let exact = ed_ground(&m.terms, &m.bases).unwrap().energy;
        let r = run(&m.terms, &m.bases, &DmrgSchedule::fixed(16, 10), 5);
        assert!((r.energy - exact).abs() < 1e-8 * exact.abs().max(1.0));
    }

    #[test]
    fn energy_decreases_with_field() {
        let bases = vec![SiteBasis::SpinHalf; 8];
        let mut prev = f64::INFINITY;
        for h in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let r = run(&chain_ising(8, 1.0, h), &bases, &DmrgSchedule::fixed(16, 6), 6);
            assert!(r.energy <= prev + 1e-10);
            prev = r.energy;
        }
    }

    #[test]
    fn rejects_bad_input() {
        let bases = vec![SiteBasis::SpinHalf; 3];
        let mpo = mpo_from_terms(&chain_ising(3, 1.0, 1.0), &bases).unwrap();
        let other = MatrixProductState::random(&vec![SiteBasis::SpinHalf; 4], 2, 0).unwrap();
        assert!(dmrg_ground_state(&mpo, &other, &DmrgSchedule::default()).is_err());
        let init = MatrixProductState::random(&bases, 2, 0).unwrap();
        let empty = DmrgSchedule { sweeps: vec![], ..DmrgSchedule::default() };
        assert!(dmrg_ground_state(&mpo, &init, &empty).is_err());
    }

    #[test]
    fn single_site_system() {
        let bases = vec![SiteBasis::SpinHalf];
        let r = run(&[ProductTerm::real(-2.0, &[(0, "sx")]).unwrap()], &bases, &DmrgSchedule::fixed(1, 1), 7);
        assert!((r.energy + 2.0).abs() < 1e-12);
    }
}
