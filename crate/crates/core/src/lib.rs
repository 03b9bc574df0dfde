//! Matrix product state engine.
//!
//! Two-site DMRG ground states, one- and two-site TDVP real-time evolution,
//! an exact-diagonalization oracle, and the three benchmark model families:
//! the 2D transverse-field Ising model, the sub-Ohmic spin-boson model and a
//! two-state torsional photoisomerization model.

pub mod analysis;
pub mod basis;
pub mod dmrg;
mod env;
pub mod expand;
pub mod krylov;
pub mod models;
pub mod mpo;
pub mod mps;
pub mod oracle;
pub mod tdvp;
pub mod tensor;
pub mod terms;

pub use basis::{LocalOp, SiteBasis};
pub use dmrg::{dmrg_ground_state, DmrgResult, DmrgSchedule, SweepParams};
pub use expand::expand_bond;
pub use mpo::{mpo_from_terms, MatrixProductOperator};
pub use mps::MatrixProductState;
pub use tdvp::{tdvp_evolve, Observable, Scheme, TdvpConfig, Trajectory};
pub use tensor::{contract, qr_orthonormalize, svd_truncate, DenseTensor, Side, TruncationReport, C64};
pub use terms::ProductTerm;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("axis error: {0}")]
    Axis(String),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown operator `{name}` for {basis} site")]
    UnknownOperator { name: String, basis: String },
    #[error("operator `{0}` is not Hermitian")]
    NotHermitian(String),
    #[error("site index {site} out of range for {len} sites")]
    SiteOutOfRange { site: usize, len: usize },
    #[error("empty term list")]
    EmptyTerms,
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("Hilbert dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error(
        "one-site TDVP needs saturated bonds: bond {bond} has dimension {have}, expected {need}; \
         call expand_bond first"
    )]
    BondsNotExpanded { bond: usize, have: usize, need: usize },
    #[error("Krylov exponential did not converge at step {step}: {detail}")]
    KrylovNotConverged { step: usize, detail: String },
    #[error("eigensolver breakdown: {0}")]
    Eigensolver(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
