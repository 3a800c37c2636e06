//! Exact phase-space dynamics of a single degree of freedom under a
//! quadratic Hamiltonian and linear Lindblad operators.
//!
//! Phase-space points are `x = (p, q)`; chord functions are the symplectic
//! Fourier transforms of Wigner functions. The [`oracle`] module holds
//! brute-force solvers used to validate the exact propagator.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod langevin;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod states;

pub use error::{Error, Result};
pub use grid::{GridField, GridSpec};
pub use linalg::{Mat2, Vec2};
pub use model::{HamiltonianForm, LindbladChannel, OpenSystem, Regime};
pub use states::{CatParameters, ChordState};
