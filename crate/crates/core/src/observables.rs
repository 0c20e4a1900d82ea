//! Expectation values, uncertainties and screen-intensity analysis.

use crate::grid::{Field, Grid, GridError, C64};
use crate::solvers::SolverSpec;
use crate::spectral;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("state is not normalised: norm² = {0}")]
    NotNormalized(f64),
    #[error("intensity is zero everywhere")]
    ZeroIntensity,
    #[error("intensity is negative at node {0}")]
    NegativeIntensity(usize),
    #[error("fringe analysis needs a 1D grid")]
    NotOneDimensional,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Moments of one state. Per-axis arrays only use the first `dims` entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub t: f64,
    pub dims: usize,
    pub norm: f64,
    pub mean_x: [f64; 2],
    pub mean_p: [f64; 2],
    pub sigma_x: [f64; 2],
    pub sigma_p: [f64; 2],
    pub energy: f64,
    /// `min over axes of σ_x·σ_p − ℏ/2`.
    pub robertson_margin: f64,
}

/// Moments without the normalisation check; expectation values are divided
/// by the actual norm.
pub fn observable_row(psi: &Field, spec: &SolverSpec, t: f64) -> ObservableRow {
    let grid = *psi.grid();
    let dims = grid.dims();
    let norm = psi.norm_sqr();
    let rho = psi.density();
    let dv = grid.cell_volume();
    let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };

    let mut mean_x = [0.0; 2];
    let mut mean_x2 = [0.0; 2];
    for (p, r) in grid.points().zip(&rho) {
        for a in 0..dims {
            mean_x[a] += p[a] * r;
            mean_x2[a] += p[a] * p[a] * r;
        }
    }
    for a in 0..dims {
        mean_x[a] *= dv * inv;
        mean_x2[a] *= dv * inv;
    }

    let mut hat = psi.values().to_vec();
    spectral::forward(&grid, &mut hat);
    let total: f64 = hat.iter().map(|v| v.norm_sqr()).sum();
    let mut mean_k = [0.0; 2];
    let mut mean_k2 = [0.0; 2];
    for (v, k) in hat.iter().zip(grid.wavevectors()) {
        let w = v.norm_sqr();
        for a in 0..dims {
            mean_k[a] += k[a] * w;
            mean_k2[a] += k[a] * k[a] * w;
        }
    }
    let tinv = if total > 0.0 { 1.0 / total } else { 0.0 };
    let hbar = spec.hbar;
    let mut mean_p = [0.0; 2];
    let mut sigma_x = [0.0; 2];
    let mut sigma_p = [0.0; 2];
    let mut kinetic = 0.0;
    let mut margin = f64::INFINITY;
    for a in 0..dims {
        mean_p[a] = hbar * mean_k[a] * tinv;
        let p2 = hbar * hbar * mean_k2[a] * tinv;
        kinetic += p2 / (2.0 * spec.mass);
        sigma_x[a] = (mean_x2[a] - mean_x[a] * mean_x[a]).max(0.0).sqrt();
        sigma_p[a] = (p2 - mean_p[a] * mean_p[a]).max(0.0).sqrt();
        margin = margin.min(sigma_x[a] * sigma_p[a] - 0.5 * hbar);
    }
    let v = spec.potential.sample(&grid, spec.mass, t);
    let potential: f64 = v.iter().zip(&rho).map(|(v, r)| v * r).sum::<f64>() * dv * inv;
    ObservableRow {
        t,
        dims,
        norm,
        mean_x,
        mean_p,
        sigma_x,
        sigma_p,
        energy: kinetic + potential,
        robertson_margin: margin,
    }
}

/// Moments of a normalised state; `⟨p⟩` and `⟨p²⟩` are taken in Fourier space
/// with `p̂ = −iℏ∇`.
pub fn moments(psi: &Field, spec: &SolverSpec, t: f64) -> Result<ObservableRow, ObservableError> {
    let n = psi.norm_sqr();
    if (n - 1.0).abs() > 1e-6 {
        return Err(ObservableError::NotNormalized(n));
    }
    Ok(observable_row(psi, spec, t))
}

/// Fringe metrics of a screen profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeReport {
    pub visibility: f64,
    pub spectral_peak: f64,
}

/// `(I_max − I_min)/(I_max + I_min)` over the central half of the support
/// (nodes with `I ≥ 10⁻³·I_max`), and `|Î(k_expected)|/|Î(0)|`.
pub fn fringe_visibility(intensity: &Field, k_expected: f64) -> Result<FringeReport, ObservableError> {
    let grid = *intensity.grid();
    if grid.dims() != 1 {
        return Err(ObservableError::NotOneDimensional);
    }
    let vals: Vec<f64> = intensity.values().iter().map(|v| v.re).collect();
    if let Some(i) = vals.iter().position(|&v| v < 0.0) {
        return Err(ObservableError::NegativeIntensity(i));
    }
    let peak = vals.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(ObservableError::ZeroIntensity);
    }
    let first = vals.iter().position(|&v| v >= 1e-3 * peak).expect("peak exists");
    let last = vals.iter().rposition(|&v| v >= 1e-3 * peak).expect("peak exists");
    let quarter = (last - first) / 4;
    let window = &vals[first + quarter..=last - quarter];
    let i_max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let i_min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let visibility = if i_max + i_min > 0.0 { (i_max - i_min) / (i_max + i_min) } else { 0.0 };

    let mut hat: Vec<C64> = vals.iter().map(|&v| C64::new(v, 0.0)).collect();
    spectral::forward(&grid, &mut hat);
    let axis = grid.axes()[0];
    let n = axis.n as isize;
    let bin = (k_expected * axis.length() / (2.0 * std::f64::consts::PI)).round() as isize;
    let idx = bin.rem_euclid(n) as usize;
    let spectral_peak = hat[idx].norm() / hat[0].norm();
    Ok(FringeReport { visibility, spectral_peak })
}

/// Real 1D field from screen samples.
pub fn intensity_field(grid: Grid, values: &[f64]) -> Result<Field, GridError> {
    Field::from_real(grid, values)
}
