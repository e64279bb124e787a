//! Discretized Hilbert scale generated by `H^{-1}`, free-field covariances,
//! Wick powers, pairing moments and the lattice free propagator.

mod eigen;
mod free_field;
mod grid;
mod propagator;
mod scale;
mod wick;

pub use eigen::{eigensystem, operator_matrix, EigenSystem};
pub use free_field::{continuity_slack, fourth_moment_gap, free_field_covariance, gaussian_characteristic, pd_gram_check};
pub use grid::GridSpec;
pub use propagator::{lattice_propagator, lattice_propagator_1d_exact, periodic_lattice_propagator};
pub use scale::ScaleMap;
pub use wick::{double_factorial, pairing_moment, wick4};
