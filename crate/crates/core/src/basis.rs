//! Local Hilbert spaces and their named operators.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::models::dvr;
use crate::tensor::{C64, ONE, ZERO};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SiteBasis {
    /// `|up>` is index 0, so `sz = diag(1, -1)`.
    SpinHalf,
    /// Truncated harmonic oscillator with `levels` Fock states.
    Boson { levels: usize },
    /// Exponential DVR on `points` equidistant angles in `[0, 2pi)`.
    ExpDvr { points: usize },
    /// Two diabatic electronic states `|0>`, `|1>`.
    Electronic,
}

impl fmt::Display for SiteBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiteBasis::SpinHalf => write!(f, "spin-1/2"),
            SiteBasis::Boson { levels } => write!(f, "boson(d={levels})"),
            SiteBasis::ExpDvr { points } => write!(f, "exp-dvr(N={points})"),
            SiteBasis::Electronic => write!(f, "electronic"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalOp {
    pub name: String,
    pub matrix: DMatrix<C64>,
}

impl LocalOp {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let m = &self.matrix;
        let d = m.nrows();
        (0..d).all(|i| (0..d).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol))
    }
}

fn real(v: f64) -> C64 {
    C64::new(v, 0.0)
}

fn diag(values: impl IntoIterator<Item = f64>) -> DMatrix<C64> {
    let v: Vec<C64> = values.into_iter().map(real).collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v))
}

fn pauli(name: &str) -> Option<DMatrix<C64>> {
    let i = C64::new(0.0, 1.0);
    let m = match name {
        "id" => DMatrix::identity(2, 2),
        "sx" => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        "sy" => DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        "sz" => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        "sp" => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]),
        "sm" => DMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]),
        "proj(0)" | "up" => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]),
        "proj(1)" | "down" => DMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]),
        _ => return None,
    };
    Some(m)
}

fn boson(name: &str, d: usize) -> Option<DMatrix<C64>> {
    let mut b = DMatrix::zeros(d, d);
    for n in 1..d {
        b[(n - 1, n)] = real((n as f64).sqrt());
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let m = match name {
        "id" => DMatrix::identity(d, d),
        "b" => b,
        "bdag" => b.adjoint(),
        "n" => diag((0..d).map(|n| n as f64)),
        // (b^dag + b)/sqrt2 and i(b^dag - b)/sqrt2: H_vib = w/2 (p^2 + x^2)
        "x_dimless" => (b.adjoint() + &b) * real(s),
        "p_dimless" => (b.adjoint() - &b) * C64::new(0.0, s),
        _ => {
            let level = parse_arg(name, "proj")?.parse::<usize>().ok()?;
            if level >= d {
                return None;
            }
            let mut p = DMatrix::zeros(d, d);
            p[(level, level)] = ONE;
            p
        }
    };
    Some(m)
}

fn parse_arg<'a>(name: &'a str, head: &str) -> Option<&'a str> {
    name.strip_prefix(head)?.strip_prefix('(')?.strip_suffix(')')
}

fn exp_dvr(name: &str, n: usize) -> Option<DMatrix<C64>> {
    if name == "id" {
        return Some(DMatrix::identity(n, n));
    }
    if name == "dvr_kin" {
        let k = dvr::kinetic_matrix(n, 1.0);
        return Some(k.map(real));
    }
    let grid: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
    if let Some(f) = parse_arg(name, "dvr_pot") {
        let values: Vec<f64> = match f {
            "cos" => grid.iter().map(|t| t.cos()).collect(),
            "sin" => grid.iter().map(|t| t.sin()).collect(),
            "1-cos" => grid.iter().map(|t| 1.0 - t.cos()).collect(),
            "trans" => grid.iter().map(|t| if t.cos() < 0.0 { 1.0 } else { 0.0 }).collect(),
            "cis" => grid.iter().map(|t| if t.cos() < 0.0 { 0.0 } else { 1.0 }).collect(),
            _ => return None,
        };
        return Some(diag(values));
    }
    let j = parse_arg(name, "proj")?.parse::<usize>().ok()?;
    (j < n).then(|| diag((0..n).map(|i| if i == j { 1.0 } else { 0.0 })))
}

impl SiteBasis {
    pub fn dim(&self) -> usize {
        match *self {
            SiteBasis::SpinHalf | SiteBasis::Electronic => 2,
            SiteBasis::Boson { levels } => levels,
            SiteBasis::ExpDvr { points } => points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SiteBasis::Boson { levels } if levels < 2 => {
                Err(Error::InvalidArgument(format!("boson truncation must be >= 2, got {levels}")))
            }
            SiteBasis::ExpDvr { points } if points % 2 == 0 || points < 3 => Err(Error::InvalidArgument(
                format!("exponential DVR needs an odd point count >= 3, got {points}"),
            )),
            _ => Ok(()),
        }
    }

    /// Look up a named operator on this basis.
    ///
    /// Spin and electronic sites know `id sx sy sz sp sm proj(0) proj(1)`;
    /// bosons `id b bdag n x_dimless p_dimless proj(k)`; DVR sites `id dvr_kin
    /// dvr_pot(cos|sin|1-cos|trans|cis) proj(j)`. `dvr_kin` is `p^2/2` at unit
    /// inertia.
    pub fn op(&self, name: &str) -> Result<LocalOp> {
        let matrix = match *self {
            SiteBasis::SpinHalf | SiteBasis::Electronic => pauli(name),
            SiteBasis::Boson { levels } => boson(name, levels),
            SiteBasis::ExpDvr { points } => exp_dvr(name, points),
        };
        matrix
            .map(|matrix| LocalOp { name: name.to_string(), matrix })
            .ok_or_else(|| Error::UnknownOperator { name: name.to_string(), basis: self.to_string() })
    }
}
