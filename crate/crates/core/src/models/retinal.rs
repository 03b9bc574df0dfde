//! Two-state torsional photoisomerization model: electronic site, torsion on
//! an exponential DVR grid, one coupling mode and a harmonic bath.

use crate::basis::SiteBasis;
use crate::dmrg::{dmrg_ground_state, DmrgSchedule};
use crate::mpo::mpo_from_terms;
use crate::mps::MatrixProductState;
use crate::tensor::{DenseTensor, ONE, ZERO};
use crate::terms::ProductTerm;
use crate::{Error, Result};

/// Hartree energy in electronvolts.
pub const HARTREE_IN_EV: f64 = 27.211386245988;

pub const BATH_MODES: usize = 23;

pub fn ev_to_hartree(x: f64) -> f64 {
    x / HARTREE_IN_EV
}

pub fn hartree_to_ev(x: f64) -> f64 {
    x * HARTREE_IN_EV
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyUnits {
    Ev,
    Hartree,
}

impl std::str::FromStr for EnergyUnits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ev" | "eV" => Ok(EnergyUnits::Ev),
            "hartree" | "au" => Ok(EnergyUnits::Hartree),
            other => Err(Error::InvalidArgument(format!("unknown unit tag `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetinalParams {
    /// Torsional moment of inertia, in inverse energy units.
    pub inertia: f64,
    pub w0: f64,
    pub w1: f64,
    pub e1: f64,
    pub omega_c: f64,
    pub kappa_c: f64,
    pub lambda: f64,
    /// `(omega_j, kappa_j)` for the bath modes.
    pub bath: Vec<(f64, f64)>,
    pub n_theta: usize,
    pub d_modes: usize,
    pub input_units: EnergyUnits,
}

impl RetinalParams {
    /// Placeholder values of a plausible magnitude (eV) for smoke tests and
    /// demos. They are not reference data.
    pub fn placeholder() -> Self {
        let bath = (0..BATH_MODES)
            .map(|j| {
                let omega = 0.08 + 0.12 * j as f64 / (BATH_MODES - 1) as f64;
                let kappa = 0.02 * if j % 2 == 0 { 1.0 } else { -1.0 } * (1.0 - 0.5 * j as f64 / BATH_MODES as f64);
                (omega, kappa)
            })
            .collect();
        Self {
            inertia: 1.0 / 4.84e-4,
            w0: 3.6,
            w1: 1.09,
            e1: 2.48,
            omega_c: 0.19,
            kappa_c: 0.1,
            lambda: 0.19,
            bath,
            n_theta: 11,
            d_modes: 6,
            input_units: EnergyUnits::Ev,
        }
    }

    /// Same parameters with only the first `n_bath` bath modes.
    pub fn truncated_bath(&self, n_bath: usize) -> Self {
        let mut p = self.clone();
        p.bath.truncate(n_bath);
        p
    }

    fn validate_common(&self) -> Result<()> {
        if self.n_theta % 2 == 0 || self.n_theta < 3 {
            return Err(Error::InvalidArgument(format!("n_theta must be odd and >= 3, got {}", self.n_theta)));
        }
        if self.d_modes < 2 {
            return Err(Error::InvalidArgument(format!("d_modes must be >= 2, got {}", self.d_modes)));
        }
        let scalars = [self.inertia, self.w0, self.w1, self.e1, self.omega_c, self.kappa_c, self.lambda];
        if scalars.iter().chain(self.bath.iter().flat_map(|(a, b)| [a, b])).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("retinal parameters must be finite".into()));
        }
        if self.inertia <= 0.0 {
            return Err(Error::InvalidArgument("inertia must be positive".into()));
        }
        if self.omega_c <= 0.0 || self.bath.iter().any(|b| b.0 <= 0.0) {
            return Err(Error::InvalidArgument("mode frequencies must be positive".into()));
        }
        Ok(())
    }

    /// Full-model validation: exactly 23 bath modes.
    pub fn validate(&self) -> Result<()> {
        if self.bath.len() != BATH_MODES {
            return Err(Error::InvalidArgument(format!(
                "bath must have exactly {BATH_MODES} modes, got {}",
                self.bath.len()
            )));
        }
        self.validate_common()
    }

    /// Copy with every energy in hartree.
    pub fn in_hartree(&self) -> Self {
        match self.input_units {
            EnergyUnits::Hartree => self.clone(),
            EnergyUnits::Ev => Self {
                inertia: self.inertia * HARTREE_IN_EV,
                w0: ev_to_hartree(self.w0),
                w1: ev_to_hartree(self.w1),
                e1: ev_to_hartree(self.e1),
                omega_c: ev_to_hartree(self.omega_c),
                kappa_c: ev_to_hartree(self.kappa_c),
                lambda: ev_to_hartree(self.lambda),
                bath: self.bath.iter().map(|&(w, k)| (ev_to_hartree(w), ev_to_hartree(k))).collect(),
                input_units: EnergyUnits::Hartree,
                ..self.clone()
            },
        }
    }

    pub fn bases(&self) -> Vec<SiteBasis> {
        let mut b = vec![SiteBasis::Electronic, SiteBasis::ExpDvr { points: self.n_theta }];
        b.extend(std::iter::repeat(SiteBasis::Boson { levels: self.d_modes }).take(1 + self.bath.len()));
        b
    }
}

pub const ELECTRONIC_SITE: usize = 0;
pub const TORSION_SITE: usize = 1;
pub const COUPLING_SITE: usize = 2;

#[derive(Clone, Debug)]
pub struct RetinalModel {
    pub terms: Vec<ProductTerm>,
    pub bases: Vec<SiteBasis>,
    /// Parameters after unit conversion.
    pub params: RetinalParams,
}

fn push(terms: &mut Vec<ProductTerm>, c: f64, factors: &[(usize, &str)]) -> Result<()> {
    if c != 0.0 {
        terms.push(ProductTerm::real(c, factors)?);
    }
    Ok(())
}

/// Harmonic modes `omega (n + 1/2)`; the zero-point part is one constant term.
fn vibrational_terms(terms: &mut Vec<ProductTerm>, p: &RetinalParams) -> Result<()> {
    let mut zero_point = 0.5 * p.omega_c;
    push(terms, p.omega_c, &[(COUPLING_SITE, "n")])?;
    for (j, &(w, _)) in p.bath.iter().enumerate() {
        push(terms, w, &[(COUPLING_SITE + 1 + j, "n")])?;
        zero_point += 0.5 * w;
    }
    push(terms, zero_point, &[])
}

fn build(p: &RetinalParams) -> Result<RetinalModel> {
    p.validate_common()?;
    let p = p.in_hartree();
    let (el, tor, cm) = (ELECTRONIC_SITE, TORSION_SITE, COUPLING_SITE);
    let mut terms = Vec::new();
    push(&mut terms, 1.0 / p.inertia, &[(tor, "dvr_kin")])?;
    push(&mut terms, p.w0 / 2.0, &[(el, "proj(0)"), (tor, "dvr_pot(1-cos)")])?;
    push(&mut terms, p.e1, &[(el, "proj(1)")])?;
    push(&mut terms, -p.w1 / 2.0, &[(el, "proj(1)"), (tor, "dvr_pot(1-cos)")])?;
    vibrational_terms(&mut terms, &p)?;
    push(&mut terms, p.kappa_c, &[(el, "proj(1)"), (cm, "x_dimless")])?;
    for (j, &(_, kappa)) in p.bath.iter().enumerate() {
        push(&mut terms, kappa, &[(el, "proj(1)"), (cm + 1 + j, "x_dimless")])?;
    }
    push(&mut terms, p.lambda, &[(el, "sx"), (cm, "x_dimless")])?;
    Ok(RetinalModel { terms, bases: p.bases(), params: p })
}

/// Full model with 26 sites.
pub fn retinal_terms(p: &RetinalParams) -> Result<RetinalModel> {
    p.validate()?;
    build(p)
}

/// Same Hamiltonian with any number of bath modes (desk-scale reductions).
pub fn retinal_terms_reduced(p: &RetinalParams) -> Result<RetinalModel> {
    build(p)
}

/// Nuclear Hamiltonian on the ground-state surface, on sites `1..` shifted
/// down by one: kinetic, `(W0/2)(1 - cos)`, harmonic modes.
pub fn nuclear_ground_terms(p: &RetinalParams) -> Result<(Vec<ProductTerm>, Vec<SiteBasis>)> {
    p.validate_common()?;
    let p = p.in_hartree();
    let mut terms = Vec::new();
    push(&mut terms, 1.0 / p.inertia, &[(TORSION_SITE, "dvr_kin")])?;
    push(&mut terms, p.w0 / 2.0, &[(TORSION_SITE, "dvr_pot(1-cos)")])?;
    vibrational_terms(&mut terms, &p)?;
    let shifted = terms
        .into_iter()
        .map(|t| ProductTerm {
            coefficient: t.coefficient,
            factors: t.factors.into_iter().map(|(s, n)| (s - 1, n)).collect(),
        })
        .collect();
    Ok((shifted, p.bases()[1..].to_vec()))
}

/// Vibrational ground state of the S0 surface, found by DMRG, placed on the
/// electronic state `|1>`.
pub fn retinal_initial_state(p: &RetinalParams, seed: u64) -> Result<MatrixProductState> {
    let (terms, bases) = nuclear_ground_terms(p)?;
    let mpo = mpo_from_terms(&terms, &bases)?;
    let init = MatrixProductState::random(&bases, 2, seed)?;
    let mut schedule = DmrgSchedule::fixed(4, 6);
    schedule.energy_tol = 1e-12;
    let ground = dmrg_ground_state(&mpo, &init, &schedule)?;
    let nuclear = ground.state.canonicalize(0)?;
    let mut tensors = vec![DenseTensor::from_data(&[1, 2, 1], vec![ZERO, ONE])?];
    tensors.extend(nuclear.tensors().iter().cloned());
    let mut all_bases = vec![SiteBasis::Electronic];
    all_bases.extend(bases);
    let mut psi = MatrixProductState::from_tensors(tensors, all_bases)?;
    psi = psi.canonicalize(0)?;
    psi.normalize();
    Ok(psi)
}

/// Population observables: S0 and S1 diabatic populations and the trans
/// population summed over electronic states.
pub fn population_observables() -> Vec<(&'static str, usize, &'static str)> {
    vec![
        ("p_s0", ELECTRONIC_SITE, "proj(0)"),
        ("p_s1", ELECTRONIC_SITE, "proj(1)"),
        ("p_trans", TORSION_SITE, "dvr_pot(trans)"),
    ]
}
