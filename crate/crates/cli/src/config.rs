//! Declarative run configuration.
//!
//! A run file names one experiment and carries the blocks that experiment
//! reads. Every field is optional on input; [`RunConfig::normalize`] fills in
//! defaults, rejects blocks and fields the experiment would ignore, and
//! checks the result against the core validators. The normalized form is
//! the canonical echo written by `validate` and stored with each run.

use mdllab::experiments::{SlitConfig, SlitKind, SpreadingConfig};
use mdllab::measurement::{MeasurementConfig, PointerSpec};
use mdllab::polar::{PolarPair, DEFAULT_FLOOR};
use mdllab::solvers::{EvolutionState, Potential, SolverKind, SolverSpec, DEFAULT_COUPLING_FLOOR};
use mdllab::{Axis, Field, Grid, C64};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    DoubleSlit,
    SlitScan,
    Spreading,
    Measurement,
    CustomEvolve,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::DoubleSlit => "double_slit",
            Experiment::SlitScan => "slit_scan",
            Experiment::Spreading => "spreading",
            Experiment::Measurement => "measurement",
            Experiment::CustomEvolve => "custom_evolve",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Steps between recorded states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spreading: Option<SpreadingBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub double_slit: Option<SlitBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slit_scan: Option<ScanBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_evolve: Option<CustomBlock>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Quantum,
    ClassicalNonlinear,
    ClassicalDecoupled,
    Hybrid,
}

impl From<KindName> for SolverKind {
    fn from(k: KindName) -> Self {
        match k {
            KindName::Quantum => SolverKind::Quantum,
            KindName::ClassicalNonlinear => SolverKind::ClassicalNonlinear,
            KindName::ClassicalDecoupled => SolverKind::ClassicalDecoupled,
            KindName::Hybrid => SolverKind::Hybrid,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<KindName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialBlock {
    Free,
    Harmonic {
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<[f64; 2]>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisBlock {
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub axes: Vec<AxisBlock>,
}

impl GridBlock {
    fn of(grid: &Grid) -> Self {
        GridBlock { axes: grid.axes().iter().map(|a| AxisBlock { n: a.n, min: a.min, max: a.max }).collect() }
    }

    pub fn build(&self) -> Result<Grid, ConfigError> {
        let axes: Vec<Axis> = self.axes.iter().map(|a| Axis { n: a.n, min: a.min, max: a.max }).collect();
        Grid::from_axes(&axes).map_err(|e| ConfigError::Invalid(format!("grid: {e}")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpreadingBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
}

/// Two-slit geometry; also read by `slit_scan`, which supplies its own `d`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlitBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_slit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_envelope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_quantum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_classical: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<SlitKind>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    /// `[re, im]` per eigenvalue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer_center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer_sigma: Option<f64>,
    /// The overlap sweep covers `t_points` uniform times in `[0, t_end]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
}

/// Gaussian initial state `∏ exp(−(x−c)²/4σ² + i p x/ℏ)`, one entry per axis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<Vec<f64>>,
}

/// Fully resolved inputs of one run.
#[derive(Clone, Debug)]
pub enum Plan {
    Spreading(SpreadingConfig),
    DoubleSlit { config: SlitConfig, kinds: Vec<SlitKind> },
    SlitScan { config: SlitConfig, d_values: Vec<f64> },
    Measurement { config: MeasurementConfig, t_grid: Vec<f64>, samples: u64, seed: u64 },
    Custom { spec: SolverSpec, initial: EvolutionState, t_final: f64, stride: usize },
}

pub const DEFAULT_SEED: u64 = 0;

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Defaults filled in, inapplicable settings rejected, result checked by
    /// building its [`Plan`].
    pub fn normalize(&self) -> Result<RunConfig, ConfigError> {
        let e = self.experiment;
        let present = |name: &str, some: bool| if some { invalid(format!("[{name}] does not apply to experiment {}", e.name())) } else { Ok(()) };
        present("spreading", self.spreading.is_some() && e != Experiment::Spreading)?;
        present("double_slit", self.double_slit.is_some() && !matches!(e, Experiment::DoubleSlit | Experiment::SlitScan))?;
        present("slit_scan", self.slit_scan.is_some() && e != Experiment::SlitScan)?;
        present("measurement", self.measurement.is_some() && e != Experiment::Measurement)?;
        present("custom_evolve", self.custom_evolve.is_some() && e != Experiment::CustomEvolve)?;
        present("solver", self.solver.is_some() && e == Experiment::Measurement)?;
        if self.stride.is_some() && e == Experiment::Measurement {
            return invalid("stride does not apply to experiment measurement");
        }
        if self.stride == Some(0) {
            return invalid("stride must be at least 1");
        }

        let mut out = RunConfig {
            experiment: e,
            out: self.out.clone(),
            seed: Some(self.seed.unwrap_or(DEFAULT_SEED)),
            stride: None,
            solver: None,
            grid: None,
            spreading: None,
            double_slit: None,
            slit_scan: None,
            measurement: None,
            custom_evolve: None,
        };
        let solver = self.solver.clone().unwrap_or_default();
        match e {
            Experiment::Spreading => {
                let d = SpreadingConfig::standard();
                solver.allow(&["hbar", "mass", "dt"])?;
                out.solver = Some(SolverBlock {
                    hbar: Some(solver.hbar.unwrap_or(d.hbar)),
                    mass: Some(solver.mass.unwrap_or(d.mass)),
                    dt: Some(solver.dt.unwrap_or(d.dt)),
                    ..SolverBlock::default()
                });
                let b = self.spreading.clone().unwrap_or_default();
                out.spreading = Some(SpreadingBlock {
                    sigma0: Some(b.sigma0.unwrap_or(d.sigma0)),
                    p0: Some(b.p0.unwrap_or(d.p0)),
                    t_final: Some(b.t_final.unwrap_or(d.t_final)),
                    lambdas: Some(b.lambdas.unwrap_or(d.lambdas.clone())),
                });
                out.grid = Some(self.grid.clone().unwrap_or_else(|| GridBlock::of(&d.grid)));
                out.stride = Some(self.stride.unwrap_or(d.stride));
            }
            Experiment::DoubleSlit | Experiment::SlitScan => {
                let d = SlitConfig::standard();
                solver.allow(&["hbar", "mass"])?;
                out.solver = Some(SolverBlock {
                    hbar: Some(solver.hbar.unwrap_or(d.hbar)),
                    mass: Some(solver.mass.unwrap_or(d.mass)),
                    ..SolverBlock::default()
                });
                let b = self.double_slit.clone().unwrap_or_default();
                let scan = e == Experiment::SlitScan;
                if scan && b.d.is_some() {
                    return invalid("slit_scan takes its separations from slit_scan.d_values, not double_slit.d");
                }
                if scan && b.kinds.is_some() {
                    return invalid("slit_scan runs classical packets only; remove double_slit.kinds");
                }
                out.double_slit = Some(SlitBlock {
                    d: (!scan).then(|| b.d.unwrap_or(d.d)),
                    y_center: Some(b.y_center.unwrap_or(d.y_center)),
                    sigma_s: Some(b.sigma_s.unwrap_or(d.sigma_s)),
                    sigma_x: Some(b.sigma_x.unwrap_or(d.sigma_x)),
                    x_slit: Some(b.x_slit.unwrap_or(d.x_slit)),
                    x_s: Some(b.x_s.unwrap_or(d.x_s)),
                    k_x: Some(b.k_x.unwrap_or(d.k_x)),
                    k_y: Some(b.k_y.unwrap_or(d.k_y)),
                    sigma_envelope: Some(b.sigma_envelope.unwrap_or(d.sigma_envelope)),
                    dt_quantum: Some(b.dt_quantum.unwrap_or(d.dt_quantum)),
                    dt_classical: Some(b.dt_classical.unwrap_or(d.dt_classical)),
                    coupling_floor: Some(b.coupling_floor.unwrap_or(d.coupling_floor)),
                    kinds: (!scan).then(|| b.kinds.unwrap_or(vec![SlitKind::Quantum, SlitKind::Classical])),
                });
                if scan {
                    let s = self.slit_scan.clone().unwrap_or_default();
                    out.slit_scan = Some(ScanBlock { d_values: Some(s.d_values.unwrap_or(vec![2.0, 2.5, 3.0, 3.5, 4.0])) });
                }
                out.grid = Some(self.grid.clone().unwrap_or_else(|| GridBlock::of(&d.grid)));
                out.stride = Some(self.stride.unwrap_or(d.stride));
            }
            Experiment::Measurement => {
                let b = self.measurement.clone().unwrap_or_default();
                out.measurement = Some(MeasurementBlock {
                    eigenvalues: Some(b.eigenvalues.unwrap_or(vec![-1.0, 1.0])),
                    amplitudes: Some(b.amplitudes.unwrap_or(vec![[0.3f64.sqrt(), 0.0], [0.7f64.sqrt(), 0.0]])),
                    coupling: Some(b.coupling.unwrap_or(1.0)),
                    pointer_center: Some(b.pointer_center.unwrap_or(0.0)),
                    pointer_sigma: Some(b.pointer_sigma.unwrap_or(1.0)),
                    t_end: Some(b.t_end.unwrap_or(4.0)),
                    t_points: Some(b.t_points.unwrap_or(81)),
                    samples: Some(b.samples.unwrap_or(100_000)),
                });
                out.grid = Some(self.grid.clone().unwrap_or(GridBlock { axes: vec![AxisBlock { n: 1024, min: -20.0, max: 20.0 }] }));
            }
            Experiment::CustomEvolve => {
                let kind = solver.kind.unwrap_or(KindName::Quantum);
                if solver.lambda.is_some() && kind != KindName::Hybrid {
                    return invalid("solver.lambda applies to kind = \"hybrid\" only");
                }
                out.solver = Some(SolverBlock {
                    kind: Some(kind),
                    dt: Some(solver.dt.unwrap_or(1e-3)),
                    hbar: Some(solver.hbar.unwrap_or(1.0)),
                    mass: Some(solver.mass.unwrap_or(1.0)),
                    lambda: (kind == KindName::Hybrid).then(|| solver.lambda.unwrap_or(0.5)),
                    eps: Some(solver.eps.unwrap_or(DEFAULT_FLOOR)),
                    coupling_floor: Some(solver.coupling_floor.unwrap_or(DEFAULT_COUPLING_FLOOR)),
                    potential: Some(match solver.potential.unwrap_or(PotentialBlock::Free) {
                        PotentialBlock::Harmonic { omega, center } => {
                            PotentialBlock::Harmonic { omega, center: Some(center.unwrap_or([0.0; 2])) }
                        }
                        p => p,
                    }),
                });
                let grid = self.grid.clone().unwrap_or(GridBlock { axes: vec![AxisBlock { n: 512, min: -20.0, max: 20.0 }] });
                let dims = grid.axes.len();
                let b = self.custom_evolve.clone().unwrap_or_default();
                out.custom_evolve = Some(CustomBlock {
                    t_final: Some(b.t_final.unwrap_or(1.0)),
                    sigma: Some(b.sigma.unwrap_or(vec![1.0; dims])),
                    center: Some(b.center.unwrap_or(vec![0.0; dims])),
                    momentum: Some(b.momentum.unwrap_or(vec![0.0; dims])),
                });
                out.grid = Some(grid);
                out.stride = Some(self.stride.unwrap_or(100));
            }
        }
        out.plan()?;
        Ok(out)
    }

    /// Builds the run inputs from a normalized config.
    pub fn plan(&self) -> Result<Plan, ConfigError> {
        let missing = || ConfigError::Invalid("config is not normalized".into());
        let grid = self.grid.as_ref().ok_or_else(missing)?.build()?;
        let solver = self.solver.clone().unwrap_or_default();
        let stride = self.stride.unwrap_or(1);
        match self.experiment {
            Experiment::Spreading => {
                let b = self.spreading.as_ref().ok_or_else(missing)?;
                let c = SpreadingConfig {
                    sigma0: b.sigma0.ok_or_else(missing)?,
                    p0: b.p0.ok_or_else(missing)?,
                    t_final: b.t_final.ok_or_else(missing)?,
                    lambdas: b.lambdas.clone().ok_or_else(missing)?,
                    hbar: solver.hbar.ok_or_else(missing)?,
                    mass: solver.mass.ok_or_else(missing)?,
                    grid,
                    dt: solver.dt.ok_or_else(missing)?,
                    stride,
                };
                c.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(Plan::Spreading(c))
            }
            Experiment::DoubleSlit | Experiment::SlitScan => {
                let b = self.double_slit.as_ref().ok_or_else(missing)?;
                let c = SlitConfig {
                    d: b.d.unwrap_or(0.0),
                    y_center: b.y_center.ok_or_else(missing)?,
                    sigma_s: b.sigma_s.ok_or_else(missing)?,
                    sigma_x: b.sigma_x.ok_or_else(missing)?,
                    x_slit: b.x_slit.ok_or_else(missing)?,
                    x_s: b.x_s.ok_or_else(missing)?,
                    k_x: b.k_x.ok_or_else(missing)?,
                    k_y: b.k_y.ok_or_else(missing)?,
                    sigma_envelope: b.sigma_envelope.ok_or_else(missing)?,
                    hbar: solver.hbar.ok_or_else(missing)?,
                    mass: solver.mass.ok_or_else(missing)?,
                    grid,
                    dt_quantum: b.dt_quantum.ok_or_else(missing)?,
                    dt_classical: b.dt_classical.ok_or_else(missing)?,
                    coupling_floor: b.coupling_floor.ok_or_else(missing)?,
                    stride,
                };
                let check = |c: &SlitConfig| c.validate().map_err(|e| ConfigError::Invalid(format!("d = {}: {e}", c.d)));
                if self.experiment == Experiment::DoubleSlit {
                    check(&c)?;
                    let kinds = b.kinds.clone().ok_or_else(missing)?;
                    if kinds.is_empty() {
                        return invalid("double_slit.kinds is empty");
                    }
                    Ok(Plan::DoubleSlit { config: c, kinds })
                } else {
                    let d_values = self.slit_scan.as_ref().and_then(|s| s.d_values.clone()).ok_or_else(missing)?;
                    if d_values.is_empty() {
                        return invalid("slit_scan.d_values is empty");
                    }
                    for &d in &d_values {
                        check(&c.with_d(d))?;
                    }
                    Ok(Plan::SlitScan { config: c, d_values })
                }
            }
            Experiment::Measurement => {
                let b = self.measurement.as_ref().ok_or_else(missing)?;
                let config = MeasurementConfig {
                    eigenvalues: b.eigenvalues.clone().ok_or_else(missing)?,
                    amplitudes: b.amplitudes.as_ref().ok_or_else(missing)?.iter().map(|a| C64::new(a[0], a[1])).collect(),
                    coupling: b.coupling.ok_or_else(missing)?,
                    pointer: PointerSpec { center: b.pointer_center.ok_or_else(missing)?, sigma: b.pointer_sigma.ok_or_else(missing)? },
                    grid,
                };
                config.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let t_end = b.t_end.ok_or_else(missing)?;
                let n = b.t_points.ok_or_else(missing)?;
                if !(t_end > 0.0 && t_end.is_finite()) || n < 2 {
                    return invalid("measurement needs t_end > 0 and t_points ≥ 2");
                }
                let t_grid: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
                // the widest branch separation must still fit the pointer grid
                mdllab::measurement::evolve_impulsive(&config, t_end).map_err(|e| ConfigError::Invalid(format!("at t_end: {e}")))?;
                let samples = b.samples.ok_or_else(missing)?;
                if samples == 0 {
                    return invalid("measurement.samples must be positive");
                }
                Ok(Plan::Measurement { config, t_grid, samples, seed: self.seed.unwrap_or(DEFAULT_SEED) })
            }
            Experiment::CustomEvolve => {
                let kind: SolverKind = solver.kind.ok_or_else(missing)?.into();
                let potential = match solver.potential.clone().ok_or_else(missing)? {
                    PotentialBlock::Free => Potential::Free,
                    PotentialBlock::Harmonic { omega, center } => Potential::Harmonic { omega, center: center.unwrap_or([0.0; 2]) },
                };
                let spec = SolverSpec::quantum(solver.dt.ok_or_else(missing)?)
                    .with_kind(kind)
                    .with_units(solver.hbar.ok_or_else(missing)?, solver.mass.ok_or_else(missing)?)
                    .with_eps(solver.eps.ok_or_else(missing)?)
                    .with_coupling_floor(solver.coupling_floor.ok_or_else(missing)?)
                    .with_potential(potential);
                let spec = SolverSpec { lambda: solver.lambda.unwrap_or(0.0), ..spec };
                spec.check(&grid).map_err(|e| ConfigError::Invalid(format!("solver: {e}")))?;
                let b = self.custom_evolve.as_ref().ok_or_else(missing)?;
                let (sigma, center, momentum) = (
                    b.sigma.clone().ok_or_else(missing)?,
                    b.center.clone().ok_or_else(missing)?,
                    b.momentum.clone().ok_or_else(missing)?,
                );
                let dims = grid.dims();
                if sigma.len() != dims || center.len() != dims || momentum.len() != dims {
                    return invalid(format!("custom_evolve.sigma, center and momentum need one entry per grid axis ({dims})"));
                }
                if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return invalid("custom_evolve.sigma entries must be positive");
                }
                let t_final = b.t_final.ok_or_else(missing)?;
                if !(t_final >= 0.0 && t_final.is_finite()) {
                    return invalid("custom_evolve.t_final must be non-negative");
                }
                let amp = |p: [f64; 2]| (0..dims).map(|a| (-(p[a] - center[a]).powi(2) / (4.0 * sigma[a] * sigma[a])).exp()).product::<f64>();
                let action = |p: [f64; 2]| (0..dims).map(|a| momentum[a] * p[a]).sum::<f64>();
                let norm = Field::from_real_fn(grid, amp).norm();
                let initial = if kind == SolverKind::ClassicalDecoupled {
                    EvolutionState::polar(0.0, PolarPair::from_fns(grid, |p| amp(p) / norm, action))
                } else {
                    let hbar = spec.hbar;
                    EvolutionState::wave(0.0, Field::from_fn(grid, |p| C64::from_polar(amp(p) / norm, action(p) / hbar)))
                };
                Ok(Plan::Custom { spec, initial, t_final, stride })
            }
        }
    }
}

impl SolverBlock {
    fn allow(&self, names: &[&str]) -> Result<(), ConfigError> {
        let set = [
            ("kind", self.kind.is_some()),
            ("dt", self.dt.is_some()),
            ("hbar", self.hbar.is_some()),
            ("mass", self.mass.is_some()),
            ("lambda", self.lambda.is_some()),
            ("eps", self.eps.is_some()),
            ("coupling_floor", self.coupling_floor.is_some()),
            ("potential", self.potential.is_some()),
        ];
        match set.iter().find(|(n, some)| *some && !names.contains(n)) {
            Some((n, _)) => invalid(format!("solver.{n} does not apply to this experiment (allowed: {})", names.join(", "))),
            None => Ok(()),
        }
    }
}
