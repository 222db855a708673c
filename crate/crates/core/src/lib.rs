//! Hybrid auxiliary-spin solver for the half-filled anisotropic Fermi-Hubbard
//! model on rectangular lattices.
//!
//! The fermionic half is solved in closed form on a k-grid; the spin half is
//! a transverse-field Ising problem handled by an exact state-vector backend
//! or by an emulated Rydberg register (annealing, shots, SPAM and hardware
//! noise).
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the precision used by the drivers.

pub mod error;
pub mod fermion;
pub mod lattice;
pub mod measurement;
pub mod noise;
pub mod quench;
pub mod scalar;
pub mod scf;
pub mod seeding;
pub mod spin_model;
pub mod spin_solver;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Lattice = lattice::LatticeSpec<f64>;
pub type Lattice32 = lattice::LatticeSpec<f32>;
pub type Hubbard = fermion::HubbardParams<f64>;
pub type Hubbard32 = fermion::HubbardParams<f32>;
pub type Hamiltonian = spin_model::SpinHamiltonian<f64>;
pub type Hamiltonian32 = spin_model::SpinHamiltonian<f32>;
pub type State = spin_solver::SpinState<f64>;
pub type State32 = spin_solver::SpinState<f32>;
