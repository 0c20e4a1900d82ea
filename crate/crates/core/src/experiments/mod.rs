//! Reproducible scenario drivers built on the solvers, observables and
//! measurement modules.

mod double_slit;
mod measurement_demo;
mod spreading;

pub use double_slit::{
    fringe_spacing, run_double_slit, scan_slit_distance, DoubleSlitResult, ScanRow, SlitConfig, SlitKind,
};
pub use measurement_demo::{run_measurement_demo, MeasurementReport, OverlapRow};
pub use spreading::{run_spreading_comparison, SpreadingConfig, SpreadingRow, SpreadingTable};

use crate::grid::{Field, GridError};
use crate::measurement::MeasurementError;
use crate::observables::ObservableError;
use crate::polar::PolarError;
use crate::solvers::SolverError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("wavepacket reaches the domain boundary at t = {t}: edge probability {mass:.3e}")]
    DomainBreach { t: f64, mass: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl ExperimentError {
    /// Failures of the numerics as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, ExperimentError::Config(_) | ExperimentError::Grid(_))
    }
}

/// Fraction of `∫|ψ|²` lying in the outer `frac` of each axis.
pub fn edge_mass(psi: &Field, frac: f64) -> f64 {
    let g = psi.grid();
    let total = psi.norm_sqr();
    if total <= 0.0 {
        return 0.0;
    }
    let near_edge = |p: [f64; 2]| {
        g.axes().iter().enumerate().any(|(a, ax)| {
            let m = frac * ax.length();
            p[a] < ax.min + m || p[a] > ax.max - m
        })
    };
    let edge: f64 = g.points().zip(psi.values()).filter(|(p, _)| near_edge(*p)).map(|(_, v)| v.norm_sqr()).sum();
    edge * g.cell_volume() / total
}

/// Edge band and tolerated probability used by the boundary check.
pub const EDGE_BAND: f64 = 0.05;
pub const EDGE_TOLERANCE: f64 = 1e-4;
