use mpsbench::models::ising::{ising2d_terms, Boundary, IsingParams};
use mpsbench::models::retinal::{retinal_terms_reduced, RetinalParams};
use mpsbench::models::spin_boson::{spin_boson_terms, SpinBosonParams};
use mpsbench::oracle::{random_vector, DenseHamiltonian};
use mpsbench::{mpo_from_terms, ProductTerm, SiteBasis};

fn check(name: &str, terms: &[ProductTerm], bases: &[SiteBasis]) {
    let h = mpo_from_terms(terms, bases).unwrap();
    let dense = DenseHamiltonian::new(terms, bases).unwrap();
    for seed in 0..10 {
        let v = random_vector(dense.dimension(), 100 + seed);
        let a = h.apply_dense(&v).unwrap();
        let b = dense.apply(&v);
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{name}: seed {seed} deviates by {err:e}");
    }
}

#[test]
fn ising_lattices_agree_with_matrix_free_action() {
    for (nx, ny) in [(3, 3), (4, 3), (2, 2)] {
        for bc in [Boundary::Open, Boundary::Periodic] {
            let m = ising2d_terms(&IsingParams::new(nx, ny, 1.0, 2.5, bc)).unwrap();
            check(&format!("ising {nx}x{ny} {bc:?}"), &m.terms, &m.bases);
        }
    }
}

#[test]
fn spin_boson_agrees_with_matrix_free_action() {
    for (n, d) in [(4, 6), (6, 4)] {
        let p = SpinBosonParams { delta: 1.0, eps: 0.3, alpha: 0.2, s: 0.5, omega_c: 10.0, n_modes: n, d_b: d };
        let m = spin_boson_terms(&p).unwrap();
        check(&format!("spin-boson N_b={n}"), &m.terms, &m.bases);
    }
}

#[test]
fn reduced_retinal_agrees_with_matrix_free_action() {
    let mut p = RetinalParams::placeholder().truncated_bath(2);
    p.n_theta = 7;
    p.d_modes = 4;
    let m = retinal_terms_reduced(&p).unwrap();
    check("retinal reduced", &m.terms, &m.bases);
}
