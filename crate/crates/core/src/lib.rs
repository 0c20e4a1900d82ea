//! Numerical laboratory for quantum, classical and hybrid wavefunction
//! dynamics.
//!
//! Wavefunctions live on uniform periodic grids ([`grid`]) and are evolved by
//! split-step Fourier schemes ([`solvers`]). The classical dynamics uses the
//! nonlinear wave equation obtained by subtracting the quantum potential from
//! the Schrödinger Hamiltonian, whose polar parts are the uncoupled
//! Hamilton–Jacobi and continuity equations ([`polar`]).

pub mod grid;
pub mod io;
pub mod measurement;
pub mod observables;
pub mod polar;
pub mod solvers;
pub mod spectral;
pub mod trajectories;
pub mod experiments;

pub use grid::{Axis, Field, Grid, GridError, C64};
