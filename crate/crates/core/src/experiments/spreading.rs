use super::ExperimentError;
use crate::grid::{Field, Grid, C64};
use crate::observables::ObservableRow;
use crate::solvers::{evolve, EvolutionState, EvolveOptions, SolverSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpreadingConfig {
    pub sigma0: f64,
    pub p0: f64,
    pub t_final: f64,
    pub lambdas: Vec<f64>,
    pub hbar: f64,
    pub mass: f64,
    pub grid: Grid,
    pub dt: f64,
    /// Steps between table rows.
    pub stride: usize,
}

impl SpreadingConfig {
    /// `σ₀ = 1`, `p₀ = 1`, `T = 2mσ₀²/ℏ`, λ ∈ {0.25, 0.5, 0.75}.
    pub fn standard() -> Self {
        SpreadingConfig {
            sigma0: 1.0,
            p0: 1.0,
            t_final: 2.0,
            lambdas: vec![0.25, 0.5, 0.75],
            hbar: 1.0,
            mass: 1.0,
            grid: Grid::line(512, -20.0, 30.0).expect("valid grid"),
            dt: 1e-3,
            stride: 100,
        }
    }

    pub fn initial(&self) -> Field {
        let s = self.sigma0;
        Field::from_fn(self.grid, |p| C64::from_polar((-p[0] * p[0] / (4.0 * s * s)).exp(), self.p0 * p[0] / self.hbar))
            .normalized()
    }

    /// `σ₀ √(1 + (ℏt/2mσ₀²)²)`.
    pub fn analytic_sigma(&self, t: f64) -> f64 {
        let s = self.sigma0;
        s * (1.0 + (self.hbar * t / (2.0 * self.mass * s * s)).powi(2)).sqrt()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.grid.dims() != 1 {
            return bad("spreading comparison needs a 1D grid".into());
        }
        for (n, v) in [("sigma0", self.sigma0), ("t_final", self.t_final), ("hbar", self.hbar), ("mass", self.mass), ("dt", self.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{n} must be positive, got {v}"));
            }
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return bad(format!("lambda {l} outside [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadingRow {
    pub t: f64,
    pub sigma_analytic: f64,
    pub sigma_quantum: f64,
    pub sigma_classical: f64,
    /// One entry per configured λ, in order.
    pub sigma_hybrid: Vec<f64>,
    /// Smallest Robertson margin over all runs at this time.
    pub robertson_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadingTable {
    pub lambdas: Vec<f64>,
    pub rows: Vec<SpreadingRow>,
    /// Full observable rows per run, labelled `quantum`, `classical_nonlinear`
    /// and `hybrid_<λ>`.
    pub runs: Vec<(String, Vec<ObservableRow>)>,
}

/// Evolves one free Gaussian with `S = p₀x` under the quantum, classical and
/// hybrid dynamics and tabulates `σ_x(t)`.
pub fn run_spreading_comparison(config: &SpreadingConfig) -> Result<SpreadingTable, ExperimentError> {
    config.validate()?;
    let mut specs = vec![SolverSpec::quantum(config.dt), SolverSpec::classical_nonlinear(config.dt)];
    specs.extend(config.lambdas.iter().map(|&l| SolverSpec::hybrid(l, config.dt)));
    let start = EvolutionState::wave(0.0, config.initial());
    let opts = EvolveOptions { stride: config.stride.max(1), keep_snapshots: false, record_observables: true };
    let runs = specs
        .par_iter()
        .map(|s| {
            let s = s.clone().with_units(config.hbar, config.mass);
            evolve(&start, &s, config.t_final, opts, &mut []).map(|h| h.observables)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = (0..runs[0].len())
        .map(|i| {
            let t = runs[0][i].t;
            SpreadingRow {
                t,
                sigma_analytic: config.analytic_sigma(t),
                sigma_quantum: runs[0][i].sigma_x[0],
                sigma_classical: runs[1][i].sigma_x[0],
                sigma_hybrid: runs[2..].iter().map(|r| r[i].sigma_x[0]).collect(),
                robertson_margin: runs.iter().map(|r| r[i].robertson_margin).fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    let labels = ["quantum".to_string(), "classical_nonlinear".to_string()]
        .into_iter()
        .chain(config.lambdas.iter().map(|l| format!("hybrid_{l}")));
    Ok(SpreadingTable { lambdas: config.lambdas.clone(), rows, runs: labels.zip(runs).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_run_orders_columns() {
        let c = SpreadingConfig { t_final: 0.5, grid: Grid::line(256, -15.0, 20.0).unwrap(), stride: 50, ..SpreadingConfig::standard() };
        let t = run_spreading_comparison(&c).unwrap();
        let last = t.rows.last().unwrap();
        assert!((last.sigma_quantum / last.sigma_analytic - 1.0).abs() < 1e-3);
        assert!((last.sigma_classical - 1.0).abs() < 1e-3);
        let mut prev = last.sigma_quantum;
        for s in &last.sigma_hybrid {
            assert!(*s < prev && *s > last.sigma_classical);
            prev = *s;
        }
    }

    #[test]
    fn lambda_out_of_range() {
        let c = SpreadingConfig { lambdas: vec![1.5], ..SpreadingConfig::standard() };
        assert!(c.validate().is_err());
    }
}
