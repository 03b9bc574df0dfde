//! Spin-boson model with an exponentially discretized power-law bath.

use std::f64::consts::SQRT_2;

use crate::basis::SiteBasis;
use crate::mps::MatrixProductState;
use crate::tensor::{C64, ONE, ZERO};
use crate::terms::ProductTerm;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SpinBosonParams {
    pub delta: f64,
    pub eps: f64,
    pub alpha: f64,
    pub s: f64,
    pub omega_c: f64,
    pub n_modes: usize,
    pub d_b: usize,
}

impl SpinBosonParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.delta, self.eps, self.alpha, self.s, self.omega_c].iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("spin-boson parameters must be finite".into()));
        }
        if self.alpha < 0.0 {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.omega_c <= 0.0 {
            return Err(Error::InvalidArgument(format!("omega_c must be > 0, got {}", self.omega_c)));
        }
        if self.s <= 0.0 {
            return Err(Error::InvalidArgument(format!("spectral exponent s must be > 0, got {}", self.s)));
        }
        if self.n_modes == 0 {
            return Err(Error::InvalidArgument("need at least one bath mode".into()));
        }
        if self.d_b < 2 {
            return Err(Error::InvalidArgument(format!("boson truncation d_b must be >= 2, got {}", self.d_b)));
        }
        Ok(())
    }

    pub fn bases(&self) -> Vec<SiteBasis> {
        let mut b = vec![SiteBasis::SpinHalf];
        b.extend(std::iter::repeat(SiteBasis::Boson { levels: self.d_b }).take(self.n_modes));
        b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BathDiscretization {
    pub omegas: Vec<f64>,
    pub couplings: Vec<f64>,
}

/// `omega_k = -omega_c ln(1 - k/(N+1))` and
/// `g_k = sqrt(2 alpha omega_c^(2-s) omega_k^s / (N+1))`, `k = 1..=N`.
pub fn discretize_bath(alpha: f64, s: f64, omega_c: f64, n_modes: usize) -> Result<BathDiscretization> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("need at least one bath mode".into()));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("spectral exponent s must be > 0, got {s}")));
    }
    if !(omega_c > 0.0 && omega_c.is_finite()) || !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument("need omega_c > 0 and alpha >= 0".into()));
    }
    let np1 = (n_modes + 1) as f64;
    let omegas: Vec<f64> = (1..=n_modes).map(|k| -omega_c * (1.0 - k as f64 / np1).ln()).collect();
    let couplings = omegas
        .iter()
        .map(|w| (2.0 * alpha * omega_c.powf(2.0 - s) * w.powf(s) / np1).sqrt())
        .collect();
    Ok(BathDiscretization { omegas, couplings })
}

#[derive(Clone, Debug)]
pub struct SpinBosonModel {
    pub terms: Vec<ProductTerm>,
    pub bases: Vec<SiteBasis>,
    pub bath: BathDiscretization,
}

/// `H = (delta/2) sx + (eps/2) sz + sum_k omega_k n_k + (sz/2) sum_k g_k (b_k + b_k^dagger)`.
///
/// Spin on site 0, mode `k` on site `k`. Zero coefficients are omitted.
pub fn spin_boson_terms(p: &SpinBosonParams) -> Result<SpinBosonModel> {
    p.validate()?;
    let bath = discretize_bath(p.alpha, p.s, p.omega_c, p.n_modes)?;
    let mut terms = Vec::with_capacity(2 + 2 * p.n_modes);
    if p.delta != 0.0 {
        terms.push(ProductTerm::real(p.delta / 2.0, &[(0, "sx")])?);
    }
    if p.eps != 0.0 {
        terms.push(ProductTerm::real(p.eps / 2.0, &[(0, "sz")])?);
    }
    for (k, (&w, &g)) in bath.omegas.iter().zip(&bath.couplings).enumerate() {
        terms.push(ProductTerm::real(w, &[(k + 1, "n")])?);
        if g != 0.0 {
            // b + b^dagger = sqrt(2) x_dimless
            terms.push(ProductTerm::real(g / 2.0 * SQRT_2, &[(0, "sz"), (k + 1, "x_dimless")])?);
        }
    }
    Ok(SpinBosonModel { terms, bases: p.bases(), bath })
}

/// Local states of `|up> (x) |0>^N`.
pub fn spin_boson_initial_locals(p: &SpinBosonParams) -> Vec<Vec<C64>> {
    let mut vac = vec![ZERO; p.d_b];
    vac[0] = ONE;
    let mut states = vec![vec![ONE, ZERO]];
    states.extend(std::iter::repeat(vac).take(p.n_modes));
    states
}

/// `|up> (x) |0>^N` as a bond-1 MPS.
pub fn spin_boson_initial_state(p: &SpinBosonParams) -> Result<MatrixProductState> {
    p.validate()?;
    MatrixProductState::product(&p.bases(), &spin_boson_initial_locals(p))
}
