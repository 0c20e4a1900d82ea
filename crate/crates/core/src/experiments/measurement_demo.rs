use super::ExperimentError;
use crate::measurement::{
    branch_overlap, chi_square, evolve_impulsive, resolution_time, sample_outcomes, ChiSquare, Histogram,
    MeasurementConfig, Phase,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub t: f64,
    pub overlap: f64,
    pub phase: Phase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementReport {
    pub config: MeasurementConfig,
    pub tau: f64,
    pub overlaps: Vec<OverlapRow>,
    /// Linear interpolation of the first downward crossing of 0.5.
    pub half_overlap_time: Option<f64>,
    /// Time of the sampled state: the first grid time at or after `τ`, or
    /// `τ` itself when the grid ends earlier.
    pub sample_time: f64,
    /// Branch centres at `sample_time`.
    pub centers: Vec<f64>,
    pub histogram: Histogram,
    pub chi_square: ChiSquare,
}

/// Sweeps the impulsive measurement over `t_grid`, then draws `n_samples`
/// outcomes once the branches are resolved.
pub fn run_measurement_demo(
    config: &MeasurementConfig,
    t_grid: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<MeasurementReport, ExperimentError> {
    config.validate()?;
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ExperimentError::Config("t_grid must be strictly increasing".into()));
    }
    let tau = resolution_time(config);
    let overlaps = t_grid
        .iter()
        .map(|&t| {
            let s = evolve_impulsive(config, t)?;
            Ok(OverlapRow { t, overlap: branch_overlap(&s)?, phase: s.phase })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let half_overlap_time = overlaps.windows(2).find(|w| w[0].overlap >= 0.5 && w[1].overlap < 0.5).map(|w| {
        let (a, b) = (&w[0], &w[1]);
        a.t + (a.overlap - 0.5) / (a.overlap - b.overlap) * (b.t - a.t)
    });
    let sample_time = t_grid.iter().copied().find(|&t| t >= tau).unwrap_or(tau);
    let state = evolve_impulsive(config, sample_time)?;
    let histogram = sample_outcomes(&state, n_samples, seed)?;
    Ok(MeasurementReport {
        config: config.clone(),
        tau,
        overlaps,
        half_overlap_time,
        sample_time,
        centers: state.centers(),
        chi_square: chi_square(&histogram),
        histogram,
    })
}
