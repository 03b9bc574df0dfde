//! Exponential DVR for a periodic coordinate on `[0, 2pi)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ExpDvrBasis {
    pub n_points: usize,
    pub inertia: f64,
    /// `theta_j = 2 pi j / N`
    pub grid: Vec<f64>,
    /// Grid representation of `-(1/2I) d^2/dtheta^2`.
    pub kinetic: DMatrix<f64>,
}

/// Build the grid and kinetic matrix for `n_points` (odd) points.
pub fn exp_dvr(n_points: usize, inertia: f64) -> Result<ExpDvrBasis> {
    if n_points % 2 == 0 || n_points < 3 {
        return Err(Error::InvalidArgument(format!("exponential DVR needs an odd point count >= 3, got {n_points}")));
    }
    if !(inertia.is_finite() && inertia > 0.0) {
        return Err(Error::InvalidArgument(format!("inertia must be positive, got {inertia}")));
    }
    Ok(ExpDvrBasis {
        n_points,
        inertia,
        grid: grid(n_points),
        kinetic: kinetic_matrix(n_points, inertia),
    })
}

pub fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

/// `K = U diag(k^2 / 2I) U^dagger` with `U_{jk} = exp(i k theta_j) / sqrt(N)`,
/// `k = -(N-1)/2 ..= (N-1)/2`. The `+-k` pairs combine into cosines, so the
/// result is real symmetric.
pub fn kinetic_matrix(n: usize, inertia: f64) -> DMatrix<f64> {
    let kmax = (n as i64 - 1) / 2;
    let theta = grid(n);
    DMatrix::from_fn(n, n, |j, l| {
        let d = theta[j] - theta[l];
        let s: f64 = (-kmax..=kmax).map(|k| (k * k) as f64 * (k as f64 * d).cos()).sum();
        s / (2.0 * inertia * n as f64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SiteBasis;

    fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn free_rotor_spectrum_five_points() {
        let b = exp_dvr(5, 1.0).unwrap();
        let e = sorted_eigenvalues(&b.kinetic);
        for (got, want) in e.iter().zip([0.0, 0.5, 0.5, 2.0, 2.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn free_rotor_spectrum_with_inertia() {
        let inertia = 2.7;
        let b = exp_dvr(11, inertia).unwrap();
        let mut want: Vec<f64> = (-5i32..=5).map(|k| (k * k) as f64 / (2.0 * inertia)).collect();
        want.sort_by(f64::total_cmp);
        for (g, w) in sorted_eigenvalues(&b.kinetic).iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn kinetic_annihilates_constant_and_is_symmetric() {
        let k = exp_dvr(11, 1.0).unwrap().kinetic;
        let ones = nalgebra::DVector::from_element(11, 1.0);
        assert!((&k * ones).amax() < 1e-12);
        assert!((&k - k.transpose()).amax() < 1e-12);
    }

    #[test]
    fn potential_is_diagonal_and_commutes_with_projectors() {
        let basis = SiteBasis::ExpDvr { points: 7 };
        let v = basis.op("dvr_pot(cos)").unwrap().matrix;
        let g = grid(7);
        for i in 0..7 {
            for j in 0..7 {
                let want = if i == j { g[i].cos() } else { 0.0 };
                assert!((v[(i, j)].re - want).abs() < 1e-15 && v[(i, j)].im == 0.0);
            }
        }
        for j in 0..7 {
            let p = basis.op(&format!("proj({j})")).unwrap().matrix;
            assert!((&v * &p - &p * &v).iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-15);
        }
    }

    #[test]
    fn even_point_count_rejected() {
        assert!(exp_dvr(10, 1.0).is_err());
        assert!(exp_dvr(1, 1.0).is_err());
        assert!(exp_dvr(5, 0.0).is_err());
    }
}
