//! Transverse-field Ising model on an `nx x ny` square lattice, mapped onto a
//! chain in snake order.

use crate::basis::SiteBasis;
use crate::terms::ProductTerm;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsingParams {
    pub nx: usize,
    pub ny: usize,
    pub j: f64,
    pub h: f64,
    pub bc: Boundary,
    /// Field `-pin * sz` on chain site 0; `None` disables it.
    pub pin: Option<f64>,
}

impl IsingParams {
    /// Default pinning field `1e-3 * J`.
    pub fn new(nx: usize, ny: usize, j: f64, h: f64, bc: Boundary) -> Self {
        Self { nx, ny, j, h, bc, pin: Some(1e-3 * j) }
    }

    pub fn n_sites(&self) -> usize {
        self.nx * self.ny
    }

    pub fn validate(&self) -> Result<()> {
        // Open strips (one extent 1) are allowed so that tiny closed-form
        // checks can run; periodic wrapping needs both extents >= 2.
        let (lo, hi) = (self.nx.min(self.ny), self.nx.max(self.ny));
        if lo == 0 || hi < 2 || (self.bc == Boundary::Periodic && lo < 2) {
            return Err(Error::InvalidArgument(format!(
                "lattice {}x{} too small for {:?} boundaries",
                self.nx, self.ny, self.bc
            )));
        }
        if !(self.j.is_finite() && self.j > 0.0) {
            return Err(Error::InvalidArgument(format!("coupling J must be positive, got {}", self.j)));
        }
        if !self.h.is_finite() || self.pin.is_some_and(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("field values must be finite".into()));
        }
        Ok(())
    }
}

/// Chain index of lattice site `(x, y)`; odd rows run backwards.
pub fn snake_index(nx: usize, x: usize, y: usize) -> usize {
    y * nx + if y % 2 == 0 { x } else { nx - 1 - x }
}

/// Lattice bonds as pairs of `(x, y)` coordinates.
pub fn lattice_bonds(nx: usize, ny: usize, bc: Boundary) -> Vec<((usize, usize), (usize, usize))> {
    let mut bonds = Vec::new();
    for y in 0..ny {
        for x in 0..nx {
            if x + 1 < nx {
                bonds.push(((x, y), (x + 1, y)));
            } else if bc == Boundary::Periodic {
                bonds.push(((x, y), (0, y)));
            }
            if y + 1 < ny {
                bonds.push(((x, y), (x, y + 1)));
            } else if bc == Boundary::Periodic {
                bonds.push(((x, y), (x, 0)));
            }
        }
    }
    bonds
}

#[derive(Clone, Debug)]
pub struct IsingModel {
    pub terms: Vec<ProductTerm>,
    pub bases: Vec<SiteBasis>,
    /// `site_map[y * nx + x]` is the chain index of `(x, y)`.
    pub site_map: Vec<usize>,
    pub n_bonds: usize,
}

/// `H = -J sum_<ij> sz_i sz_j - h sum_i sx_i [- pin sz_0]`.
pub fn ising2d_terms(p: &IsingParams) -> Result<IsingModel> {
    p.validate()?;
    let (nx, ny) = (p.nx, p.ny);
    let site_map: Vec<usize> = (0..ny).flat_map(|y| (0..nx).map(move |x| snake_index(nx, x, y))).collect();
    let bonds = lattice_bonds(nx, ny, p.bc);
    let mut terms = Vec::with_capacity(bonds.len() + nx * ny + 1);
    for &((x1, y1), (x2, y2)) in &bonds {
        let a = snake_index(nx, x1, y1);
        let b = snake_index(nx, x2, y2);
        terms.push(ProductTerm::real(-p.j, &[(a, "sz"), (b, "sz")])?);
    }
    if p.h != 0.0 {
        for i in 0..nx * ny {
            terms.push(ProductTerm::real(-p.h, &[(i, "sx")])?);
        }
    }
    if let Some(pin) = p.pin.filter(|&e| e != 0.0) {
        terms.push(ProductTerm::real(-pin, &[(0, "sz")])?);
    }
    Ok(IsingModel { terms, bases: vec![SiteBasis::SpinHalf; nx * ny], site_map, n_bonds: bonds.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpo::mpo_from_terms;
    use crate::oracle::{ed_ground, random_vector, DenseHamiltonian};

    fn count(m: &IsingModel, n_factors: usize) -> usize {
        m.terms.iter().filter(|t| t.factors.len() == n_factors).count()
    }

    #[test]
    fn open_three_by_three_counts() {
        let mut p = IsingParams::new(3, 3, 1.0, 0.5, Boundary::Open);
        p.pin = None;
        let m = ising2d_terms(&p).unwrap();
        assert_eq!(count(&m, 2), 12);
        assert_eq!(count(&m, 1), 9);
    }

    #[test]
    fn periodic_eight_by_eight_has_128_bonds() {
        let m = ising2d_terms(&IsingParams::new(8, 8, 1.0, 1.0, Boundary::Periodic)).unwrap();
        assert_eq!(m.n_bonds, 128);
        assert_eq!(count(&m, 2), 128);
    }

    #[test]
    fn snake_reverses_odd_rows() {
        assert_eq!(snake_index(8, 7, 1), 8);
        assert_eq!(snake_index(8, 0, 1), 15);
        assert_eq!(snake_index(8, 3, 0), 3);
        let m = ising2d_terms(&IsingParams::new(8, 2, 1.0, 1.0, Boundary::Open)).unwrap();
        assert_eq!(m.site_map[8 + 7], 8);
    }

    #[test]
    fn snake_bond_ranges() {
        let nx = 5;
        for ((x1, y1), (x2, y2)) in lattice_bonds(nx, 4, Boundary::Open) {
            let d = snake_index(nx, x1, y1).abs_diff(snake_index(nx, x2, y2));
            if y1 == y2 {
                assert_eq!(d, 1);
            } else {
                assert!((1..=2 * nx - 1).contains(&d));
            }
        }
    }

    #[test]
    fn pinning_is_optional_and_reported() {
        let p = IsingParams::new(2, 2, 2.0, 0.0, Boundary::Open);
        let m = ising2d_terms(&p).unwrap();
        let pin: Vec<_> = m.terms.iter().filter(|t| t.factors == vec![(0, "sz".to_string())]).collect();
        assert_eq!(pin.len(), 1);
        assert!((pin[0].coefficient.re + 2e-3).abs() < 1e-15);
    }

    #[test]
    fn classical_limit_energy() {
        let mut p = IsingParams::new(3, 3, 1.0, 0.0, Boundary::Open);
        p.pin = None;
        let m = ising2d_terms(&p).unwrap();
        let g = ed_ground(&m.terms, &m.bases).unwrap();
        assert!((g.energy + 12.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_lattices_rejected() {
        assert!(ising2d_terms(&IsingParams::new(1, 3, 1.0, 1.0, Boundary::Periodic)).is_err());
        assert!(ising2d_terms(&IsingParams::new(1, 1, 1.0, 1.0, Boundary::Open)).is_err());
        assert!(ising2d_terms(&IsingParams::new(1, 3, 1.0, 1.0, Boundary::Open)).is_ok());
        assert!(ising2d_terms(&IsingParams::new(3, 3, -1.0, 1.0, Boundary::Open)).is_err());
    }

    #[test]
    fn snake_mpo_matches_dense_action() {
        for bc in [Boundary::Open, Boundary::Periodic] {
            let m = ising2d_terms(&IsingParams::new(3, 3, 1.0, 0.7, bc)).unwrap();
            let mpo = mpo_from_terms(&m.terms, &m.bases).unwrap();
            let h = DenseHamiltonian::new(&m.terms, &m.bases).unwrap();
            let v = random_vector(512, 3);
            let a = mpo.apply_dense(&v).unwrap();
            let b = h.apply(&v);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-10));
        }
    }
}
