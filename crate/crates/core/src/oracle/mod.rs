//! Brute-force reference solvers. Neither shares code with the exact
//! propagator beyond the system and grid data types.

pub mod fock;
pub mod fokker_planck;

pub use fock::{integrate_fock_lindblad, wigner_from_fock, FockDensity};
pub use fokker_planck::{integrate_fokker_planck, FokkerPlanckReport};
