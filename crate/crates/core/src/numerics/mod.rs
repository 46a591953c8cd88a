//! Dense complex linear algebra and fixed-step Schrödinger integration.
//!
//! Units: ħ = 1, energies in rad/s, times in seconds. Public APIs elsewhere in
//! the crate take Hz and convert with [`hz_to_rad`] at the boundary.

mod eigh;
mod evolve;
mod matrix;

pub use eigh::{check_hermitian, eigh, expm_hermitian, Eigh, HERMITIAN_TOL, MAX_EIGH_DIM};
pub use evolve::{
    evolve, evolve_many, step_count, DenseHamiltonian, Hamiltonian, StaticHamiltonian,
    NORM_DRIFT_TOL,
};
pub use matrix::{ComplexMatrix, StateVector, C64};

use std::f64::consts::PI;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not Hermitian (max |A - A†| = {max_deviation:e})")]
    NonHermitianInput { max_deviation: f64 },
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("norm drifted by {drift:e} during integration; reduce the time step")]
    NormDrift { drift: f64 },
    #[error("bad time grid: dt = {dt:e}, span = {span:e}")]
    BadTimeGrid { dt: f64, span: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// Reduces an angle to `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x.rem_euclid(two_pi);
    if y > PI {
        y -= two_pi;
    }
    y
}
