//! Time evolution under the quantum, classical-nonlinear, classical-decoupled
//! and hybrid dynamics.
//!
//! Field-based kinds share one Strang split-step scheme whose kick potential
//! is `V − c·Q(|ψ|)`, with coupling `c = 0` (quantum), `c = 1` (classical) or
//! `c = λ` (hybrid). The decoupled kind integrates the Hamilton–Jacobi and
//! continuity equations for `(ρ, S)` directly with RK4.

mod decoupled;
mod evolve;
mod split;

pub use decoupled::step_classical_decoupled;
pub use evolve::{evolve, EvolutionHistory, EvolveOptions, Observer};
pub use split::{step_classical_nonlinear, step_hybrid, step_quantum, SplitStepper, MAX_HALVINGS};

use crate::grid::{Field, Grid, GridError, C64};
use crate::polar::{recompose, PolarPair};
use crate::spectral;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// External potential `V(x, t)`.
#[derive(Clone)]
pub enum Potential {
    Free,
    /// `½ m ω² |x − center|²`.
    Harmonic { omega: f64, center: [f64; 2] },
    /// Fixed samples in grid storage order.
    Samples(Arc<Vec<f64>>),
    TimeDependent(Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Free => write!(f, "Free"),
            Potential::Harmonic { omega, center } => write!(f, "Harmonic {{ omega: {omega}, center: {center:?} }}"),
            Potential::Samples(s) => write!(f, "Samples({} values)", s.len()),
            Potential::TimeDependent(_) => write!(f, "TimeDependent(..)"),
        }
    }
}

impl Potential {
    pub fn harmonic(omega: f64) -> Self {
        Potential::Harmonic { omega, center: [0.0; 2] }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Potential::TimeDependent(_))
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Potential::Free)
    }

    pub fn sample(&self, grid: &Grid, mass: f64, t: f64) -> Vec<f64> {
        match self {
            Potential::Free => vec![0.0; grid.len()],
            Potential::Harmonic { omega, center } => grid
                .points()
                .map(|p| {
                    let r2: f64 = (0..grid.dims()).map(|a| (p[a] - center[a]).powi(2)).sum();
                    0.5 * mass * omega * omega * r2
                })
                .collect(),
            Potential::Samples(s) => s.as_ref().clone(),
            Potential::TimeDependent(f) => grid.points().map(|p| f(p, t)).collect(),
        }
    }

    /// `∇V` at every node.
    pub fn gradient(&self, grid: &Grid, mass: f64, t: f64) -> Vec<[f64; 2]> {
        match self {
            Potential::Free => vec![[0.0; 2]; grid.len()],
            Potential::Harmonic { omega, center } => grid
                .points()
                .map(|p| {
                    let mut g = [0.0; 2];
                    for a in 0..grid.dims() {
                        g[a] = mass * omega * omega * (p[a] - center[a]);
                    }
                    g
                })
                .collect(),
            _ => {
                let v = self.sample(grid, mass, t);
                let mut out = vec![[0.0; 2]; grid.len()];
                for a in 0..grid.dims() {
                    let (d, _) = spectral::aperiodic_derivatives(&v, grid, a).expect("samples match grid");
                    for (o, d) in out.iter_mut().zip(d) {
                        o[a] = d;
                    }
                }
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Quantum,
    ClassicalNonlinear,
    ClassicalDecoupled,
    Hybrid,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Quantum => "quantum",
            SolverKind::ClassicalNonlinear => "classical_nonlinear",
            SolverKind::ClassicalDecoupled => "classical_decoupled",
            SolverKind::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("hbar must be positive and finite, got {0}")]
    Hbar(f64),
    #[error("mass must be positive and finite, got {0}")]
    Mass(f64),
    #[error("dt must be positive and finite, got {0}")]
    Dt(f64),
    #[error("lambda must lie in [0, 1], got {0}")]
    Lambda(f64),
    #[error("eps must be positive and finite, got {0}")]
    Eps(f64),
    #[error("potential has {got} samples, grid has {expected} nodes")]
    PotentialSize { expected: usize, got: usize },
}

/// Physical constants, potential, scheme choice and step size.
#[derive(Clone, Debug)]
pub struct SolverSpec {
    pub hbar: f64,
    pub mass: f64,
    pub potential: Potential,
    pub kind: SolverKind,
    /// Coupling of the quantum-potential subtraction; only read for
    /// [`SolverKind::Hybrid`].
    pub lambda: f64,
    pub dt: f64,
    /// Relative amplitude floor: nodes with `|ψ| ≤ eps · max|ψ|` are
    /// regularised when the quantum potential is formed.
    pub eps: f64,
    /// Relative amplitude below which the `Q` subtraction in the split-step
    /// kinds is tapered off as `A²/(A² + floor²)`. Tails thinner than this
    /// evolve with the plain kinetic term.
    pub coupling_floor: f64,
}

/// Default for [`SolverSpec::coupling_floor`].
pub const DEFAULT_COUPLING_FLOOR: f64 = 1e-8;

impl SolverSpec {
    fn base(kind: SolverKind, dt: f64) -> Self {
        SolverSpec {
            hbar: 1.0,
            mass: 1.0,
            potential: Potential::Free,
            kind,
            lambda: 0.0,
            dt,
            eps: crate::polar::DEFAULT_FLOOR,
            coupling_floor: DEFAULT_COUPLING_FLOOR,
        }
    }

    pub fn quantum(dt: f64) -> Self {
        Self::base(SolverKind::Quantum, dt)
    }

    pub fn classical_nonlinear(dt: f64) -> Self {
        Self::base(SolverKind::ClassicalNonlinear, dt)
    }

    pub fn classical_decoupled(dt: f64) -> Self {
        Self::base(SolverKind::ClassicalDecoupled, dt)
    }

    pub fn hybrid(lambda: f64, dt: f64) -> Self {
        SolverSpec { lambda, ..Self::base(SolverKind::Hybrid, dt) }
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_units(mut self, hbar: f64, mass: f64) -> Self {
        self.hbar = hbar;
        self.mass = mass;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_coupling_floor(mut self, floor: f64) -> Self {
        self.coupling_floor = floor;
        self
    }

    pub fn with_kind(mut self, kind: SolverKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Coefficient multiplying `Q` in the kick potential.
    pub fn coupling(&self) -> f64 {
        match self.kind {
            SolverKind::Quantum => 0.0,
            SolverKind::ClassicalNonlinear | SolverKind::ClassicalDecoupled => 1.0,
            SolverKind::Hybrid => self.lambda,
        }
    }

    pub fn check(&self, grid: &Grid) -> Result<(), SpecError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.hbar) {
            return Err(SpecError::Hbar(self.hbar));
        }
        if !ok(self.mass) {
            return Err(SpecError::Mass(self.mass));
        }
        if !ok(self.dt) {
            return Err(SpecError::Dt(self.dt));
        }
        if !ok(self.eps) {
            return Err(SpecError::Eps(self.eps));
        }
        if !ok(self.coupling_floor) {
            return Err(SpecError::Eps(self.coupling_floor));
        }
        if self.kind == SolverKind::Hybrid && !(0.0..=1.0).contains(&self.lambda) {
            return Err(SpecError::Lambda(self.lambda));
        }
        if let Potential::Samples(s) = &self.potential {
            if s.len() != grid.len() {
                return Err(SpecError::PotentialSize { expected: grid.len(), got: s.len() });
            }
        }
        Ok(())
    }

    /// Empirical step bound `0.5 m dx²/ℏ` for the nonlinear kinds. Not
    /// enforced; stiff steps are caught by step rejection instead.
    pub fn advisory_dt(&self, grid: &Grid) -> Option<f64> {
        match self.kind {
            SolverKind::ClassicalNonlinear | SolverKind::Hybrid => {
                let dx = grid.axes().iter().map(|a| a.spacing()).fold(f64::INFINITY, f64::min);
                Some(0.5 * self.mass * dx * dx / self.hbar)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    Wave(Field),
    Polar(PolarPair),
}

/// Time and state of one simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionState {
    pub t: f64,
    pub repr: Representation,
}

impl EvolutionState {
    pub fn wave(t: f64, psi: Field) -> Self {
        EvolutionState { t, repr: Representation::Wave(psi) }
    }

    pub fn polar(t: f64, pair: PolarPair) -> Self {
        EvolutionState { t, repr: Representation::Polar(pair) }
    }

    pub fn grid(&self) -> &Grid {
        match &self.repr {
            Representation::Wave(f) => f.grid(),
            Representation::Polar(p) => &p.grid,
        }
    }

    /// Wavefunction view; polar states are recomposed.
    pub fn to_field(&self, hbar: f64) -> Field {
        match &self.repr {
            Representation::Wave(f) => f.clone(),
            Representation::Polar(p) => recompose(p, hbar),
        }
    }

    pub fn as_field(&self) -> Option<&Field> {
        match &self.repr {
            Representation::Wave(f) => Some(f),
            Representation::Polar(_) => None,
        }
    }

    pub fn as_polar(&self) -> Option<&PolarPair> {
        match &self.repr {
            Representation::Polar(p) => Some(p),
            Representation::Wave(_) => None,
        }
    }

    /// `∫|ψ|²` or `∫ρ`.
    pub fn norm_sqr(&self) -> f64 {
        match &self.repr {
            Representation::Wave(f) => f.norm_sqr(),
            Representation::Polar(p) => p.mass(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver spec: {0}")]
    Spec(#[from] SpecError),
    #[error("solver kind {expected} cannot step a {found} state")]
    WrongKind { expected: &'static str, found: &'static str },
    #[error("characteristics cross: min(1 + dt·∇²S/m) = {min_jacobian:.3e} at t = {t}")]
    Caustic { t: f64, min_jacobian: f64 },
    #[error("quantum potential too stiff at t = {t}: sup|Q| = {q_sup:.3e} after {halvings} halvings of dt")]
    Stiff { t: f64, q_sup: f64, halvings: u32 },
    #[error("ray speed {speed:.3e} at t = {t} needs more than {substeps} RK4 substeps")]
    RaySpeed { t: f64, speed: f64, substeps: usize },
    #[error("amplitudes differ by {relative:.3e} (relative), tolerance {tol:.3e}")]
    AmplitudeMismatch { relative: f64, tol: f64 },
    #[error("t_final = {t_final} precedes state time {t}")]
    BackwardsInTime { t: f64, t_final: f64 },
    #[error("at t = {t}: {source}")]
    AtTime { t: f64, source: Box<SolverError> },
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl SolverError {
    /// Strips [`SolverError::AtTime`] wrappers.
    pub fn root(&self) -> &SolverError {
        match self {
            SolverError::AtTime { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_caustic(&self) -> bool {
        matches!(self.root(), SolverError::Caustic { .. })
    }
}

/// Weighted superposition `w · (ψ_a + ψ_b)` of two polar states that share one
/// amplitude. Nodes where the two terms cancel to rounding are set to exactly
/// zero.
pub fn superpose_classical_scaled(a: &PolarPair, b: &PolarPair, tol: f64, hbar: f64, weight: f64) -> Result<Field, SolverError> {
    if a.grid != b.grid {
        return Err(GridError::GridMismatch.into());
    }
    let diff: f64 = a.amplitude.iter().zip(&b.amplitude).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = a.amplitude.iter().map(|x| x * x).sum::<f64>().sqrt();
    let relative = if norm > 0.0 { diff / norm } else { f64::INFINITY };
    if !(relative < tol) {
        return Err(SolverError::AmplitudeMismatch { relative, tol });
    }
    let fa = recompose(a, hbar);
    let fb = recompose(b, hbar);
    let sum = fa.zip_with(&fb, |x, y| {
        let s = x + y;
        if s.norm() <= 1e-14 * (x.norm() + y.norm()) {
            C64::new(0.0, 0.0)
        } else {
            s * weight
        }
    })?;
    Ok(sum)
}

/// Normalised `ψ_a + ψ_b` for two polar states with the same amplitude.
pub fn superpose_classical(a: &PolarPair, b: &PolarPair, tol: f64, hbar: f64) -> Result<Field, SolverError> {
    Ok(superpose_classical_scaled(a, b, tol, hbar, 1.0)?.normalized())
}
