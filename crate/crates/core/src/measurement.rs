//! Von Neumann measurement with a Gaussian pointer.
//!
//! The interaction `Ĥ_I = −g P̂ p̂_y` translates the pointer branch attached to
//! eigenvalue `p` rigidly, `f_p(y, t) = f⁰(y − g p t)`. The system factor is
//! kept symbolic: branches are labelled by eigenvalue and carry the weight
//! `|c_p|²`. Once adjacent branches are resolved each one is evolved on its
//! own by the classical solver, and the result is a list of weighted branches
//! with no global wavefunction.

use crate::grid::{Field, Grid, C64};
use crate::solvers::{evolve, EvolutionState, EvolveOptions, SolverError, SolverKind, SolverSpec};
use crate::spectral;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

/// FWHM of a Gaussian in units of its standard deviation, as rounded in the
/// resolution criterion (`2√(2 ln 2) = 2.35482…`).
pub const FWHM_FACTOR: f64 = 2.355;

/// Name of the generator used for outcome sampling.
pub const RNG_NAME: &str = "ChaCha8Rng";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error("need at least 2 eigenvalues, got {0}")]
    TooFewEigenvalues(usize),
    #[error("eigenvalues must be strictly ascending (degenerate or unsorted at index {0})")]
    NotAscending(usize),
    #[error("{eigenvalues} eigenvalues but {amplitudes} amplitudes")]
    LengthMismatch { eigenvalues: usize, amplitudes: usize },
    #[error("Σ|c_p|² = {0}, expected 1 ± 1e-12")]
    NotNormalized(f64),
    #[error("coupling g must be positive, got {0}")]
    Coupling(f64),
    #[error("pointer width must be positive, got {0}")]
    Width(f64),
    #[error("pointer axis must be a 1D grid")]
    NotOneDimensional,
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("branch for p = {eigenvalue} centred at {center} lies within 3σ of the domain edge")]
    DomainTooSmall { eigenvalue: f64, center: f64 },
    #[error("outcome probabilities exist only after resolution (t = {t} < τ = {tau})")]
    NotResolved { t: f64, tau: f64 },
    #[error("need at least 2 branches")]
    TooFewBranches,
    #[error("all branch weights vanish")]
    ZeroWeights,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Gaussian pointer with `|f⁰(y)|² ∝ exp(−(y − y₀)²/2σ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointerSpec {
    pub center: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    pub eigenvalues: Vec<f64>,
    pub amplitudes: Vec<C64>,
    pub coupling: f64,
    pub pointer: PointerSpec,
    pub grid: Grid,
}

impl MeasurementConfig {
    pub fn validate(&self) -> Result<(), MeasurementError> {
        let n = self.eigenvalues.len();
        if n < 2 {
            return Err(MeasurementError::TooFewEigenvalues(n));
        }
        if self.amplitudes.len() != n {
            return Err(MeasurementError::LengthMismatch { eigenvalues: n, amplitudes: self.amplitudes.len() });
        }
        if let Some(i) = self.eigenvalues.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(MeasurementError::NotAscending(i + 1));
        }
        let total: f64 = self.amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeasurementError::NotNormalized(total));
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(MeasurementError::Coupling(self.coupling));
        }
        if !(self.pointer.sigma > 0.0 && self.pointer.sigma.is_finite()) {
            return Err(MeasurementError::Width(self.pointer.sigma));
        }
        if self.grid.dims() != 1 {
            return Err(MeasurementError::NotOneDimensional);
        }
        Ok(())
    }

    /// Smallest gap between successive eigenvalues.
    pub fn gap(&self) -> f64 {
        self.eigenvalues.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Normalised initial pointer `f⁰`.
    pub fn initial_pointer(&self) -> Field {
        let PointerSpec { center, sigma } = self.pointer;
        Field::from_real_fn(self.grid, |p| (-(p[0] - center).powi(2) / (4.0 * sigma * sigma)).exp()).normalized()
    }
}

/// `τ = 2.355 σ/(g δp)`.
pub fn resolution_time(config: &MeasurementConfig) -> f64 {
    FWHM_FACTOR * config.pointer.sigma / (config.coupling * config.gap())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Entangled,
    Resolved,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub eigenvalue: f64,
    pub weight: f64,
    pub pointer: Field,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointerState {
    pub t: f64,
    pub phase: Phase,
    pub tau: f64,
    pub branches: Vec<Branch>,
}

impl PointerState {
    pub fn weights(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.weight).collect()
    }

    /// `⟨y⟩` of each branch pointer.
    pub fn centers(&self) -> Vec<f64> {
        self.branches
            .iter()
            .map(|b| {
                let g = b.pointer.grid();
                let rho = b.pointer.density();
                let n: f64 = rho.iter().sum();
                g.points().zip(&rho).map(|(p, r)| p[0] * r).sum::<f64>() / n
            })
            .collect()
    }

    /// Pointer marginal `Σ_p |c_p|² |f_p(y)|²`, valid for orthonormal system
    /// states.
    pub fn pointer_density(&self) -> Vec<f64> {
        let n = self.branches.first().map_or(0, |b| b.pointer.values().len());
        let mut out = vec![0.0; n];
        for b in &self.branches {
            for (o, v) in out.iter_mut().zip(b.pointer.values()) {
                *o += b.weight * v.norm_sqr();
            }
        }
        out
    }
}

/// Exact impulsive evolution: each branch is `f⁰` shifted by `g p t` through a
/// Fourier phase.
pub fn evolve_impulsive(config: &MeasurementConfig, t: f64) -> Result<PointerState, MeasurementError> {
    config.validate()?;
    if !(t >= 0.0) {
        return Err(MeasurementError::NegativeTime(t));
    }
    let axis = config.grid.axes()[0];
    let sigma = config.pointer.sigma;
    let f0 = config.initial_pointer();
    let tau = resolution_time(config);
    let branches = config
        .eigenvalues
        .iter()
        .zip(&config.amplitudes)
        .map(|(&p, c)| {
            let shift = config.coupling * p * t;
            let center = config.pointer.center + shift;
            if center - 3.0 * sigma < axis.min || center + 3.0 * sigma > axis.max {
                return Err(MeasurementError::DomainTooSmall { eigenvalue: p, center });
            }
            let pointer = spectral::translate(&f0, 0, shift).expect("1D grid");
            Ok(Branch { eigenvalue: p, weight: c.norm_sqr(), pointer })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let phase = if t >= tau { Phase::Resolved } else { Phase::Entangled };
    Ok(PointerState { t, phase, tau, branches })
}

/// Largest normalised overlap `∫|f_p||f_q| dy/(‖f_p‖‖f_q‖)` over adjacent
/// branches.
pub fn branch_overlap(state: &PointerState) -> Result<f64, MeasurementError> {
    if state.branches.len() < 2 {
        return Err(MeasurementError::TooFewBranches);
    }
    Ok(state
        .branches
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].pointer, &w[1].pointer);
            let dv = a.grid().cell_volume();
            let s: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x.norm() * y.norm()).sum::<f64>() * dv;
            s / (a.norm() * b.norm())
        })
        .fold(0.0, f64::max))
}

/// Evolves each resolved branch separately for `t_extra` with the classical
/// nonlinear solver. Weights are copied unchanged.
pub fn classicalize(state: &PointerState, t_extra: f64, spec: &SolverSpec) -> Result<PointerState, MeasurementError> {
    if state.phase != Phase::Resolved {
        return Err(MeasurementError::NotResolved { t: state.t, tau: state.tau });
    }
    if spec.kind != SolverKind::ClassicalNonlinear {
        return Err(SolverError::WrongKind { expected: SolverKind::ClassicalNonlinear.name(), found: spec.kind.name() }.into());
    }
    let opts = EvolveOptions { stride: usize::MAX, keep_snapshots: true, record_observables: false };
    let branches = state
        .branches
        .par_iter()
        .map(|b| {
            let start = EvolutionState::wave(state.t, b.pointer.clone());
            let h = evolve(&start, spec, state.t + t_extra, opts, &mut [])?;
            let pointer = h.last().expect("initial state is recorded").to_field(spec.hbar);
            Ok(Branch { eigenvalue: b.eigenvalue, weight: b.weight, pointer })
        })
        .collect::<Result<Vec<_>, SolverError>>()?;
    Ok(PointerState { t: state.t + t_extra, phase: Phase::Resolved, tau: state.tau, branches })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub eigenvalues: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub counts: Vec<u64>,
    pub seed: u64,
    pub rng: String,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// `n` independent outcomes drawn with the branch weights.
pub fn sample_outcomes(state: &PointerState, n: u64, seed: u64) -> Result<Histogram, MeasurementError> {
    if state.phase != Phase::Resolved {
        return Err(MeasurementError::NotResolved { t: state.t, tau: state.tau });
    }
    let weights = state.weights();
    let dist = WeightedIndex::new(&weights).map_err(|_| MeasurementError::ZeroWeights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; weights.len()];
    for _ in 0..n {
        counts[dist.sample(&mut rng)] += 1;
    }
    Ok(Histogram {
        eigenvalues: state.branches.iter().map(|b| b.eigenvalue).collect(),
        probabilities: weights,
        counts,
        seed,
        rng: RNG_NAME.to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of the counts against the branch weights. Bins
/// with zero probability drop out unless they were hit, which gives p = 0.
pub fn chi_square(hist: &Histogram) -> ChiSquare {
    let n = hist.total() as f64;
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (&p, &c) in hist.probabilities.iter().zip(&hist.counts) {
        if p > 0.0 {
            let e = n * p;
            stat += (c as f64 - e).powi(2) / e;
            bins += 1;
        } else if c > 0 {
            return ChiSquare { statistic: f64::INFINITY, dof: bins.max(1), p_value: 0.0 };
        }
    }
    let dof = bins.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("positive dof").sf(stat)
    };
    ChiSquare { statistic: stat, dof, p_value }
}
