//! Benchmark model families compiled to term lists.

pub mod dvr;
pub mod ising;
pub mod retinal;
pub mod spin_boson;

pub use dvr::{exp_dvr, ExpDvrBasis};
pub use ising::{ising2d_terms, snake_index, Boundary, IsingModel, IsingParams};
pub use retinal::{
    ev_to_hartree, retinal_initial_state, retinal_terms, retinal_terms_reduced, EnergyUnits, RetinalModel,
    RetinalParams,
};
pub use spin_boson::{
    discretize_bath, spin_boson_initial_state, spin_boson_terms, BathDiscretization, SpinBosonModel,
    SpinBosonParams,
};
