//! Projective quantum eigensolver (PQE) laboratory.
//!
//! Exact statevector simulation of disentangled unitary coupled cluster
//! states over molecular Hamiltonians, residue-based quasi-Newton
//! optimizers, and eigenvalue error certificates (Kato / Temple
//! brackets), validated against a built-in exact-diagonalization oracle.

pub mod ansatz;
pub mod bounds;
pub mod cli;
pub mod exactdiag;
pub mod fock;
pub mod integrals;
pub mod optimizers;
pub mod residues;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum PqeError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("header error: {0}")]
    Header(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("eigensolver did not converge: residual norm {residual:.3e}")]
    NonConvergence { residual: f64 },
    #[error("degenerate denominator for excitation {index}: |{value:.3e}| below guard")]
    DegenerateDenominator { index: usize, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PqeError>;
