//! Strang split-step scheme shared by the quantum, classical-nonlinear and
//! hybrid kinds.

use super::{EvolutionState, Representation, SolverError, SolverKind, SolverSpec};
use crate::grid::{Field, Grid, C64};
use crate::polar::{amplitude_floor, quantum_potential_tapered};
use crate::spectral;

/// Maximum number of step halvings before a stiff step is reported.
pub const MAX_HALVINGS: u32 = 10;
const FILTER_ORDER: i32 = 4;

/// Cached propagator for one grid. Kinetic phase factors are rebuilt only when
/// the step size changes.
pub struct SplitStepper {
    grid: Grid,
    k2: Vec<f64>,
    kinetic: Option<(f64, Vec<C64>)>,
    potential: Option<Vec<f64>>,
}

impl SplitStepper {
    pub fn new(grid: Grid) -> Self {
        let k2 = grid.wavevectors().into_iter().map(|k| k[0] * k[0] + k[1] * k[1]).collect();
        SplitStepper { grid, k2, kinetic: None, potential: None }
    }

    fn kinetic_factors(&mut self, h: f64, spec: &SolverSpec) -> &[C64] {
        let stale = !matches!(&self.kinetic, Some((dt, _)) if *dt == h);
        if stale {
            let c = -spec.hbar * h / (2.0 * spec.mass);
            let f = self.k2.iter().map(|k2| C64::from_polar(1.0, c * k2)).collect();
            self.kinetic = Some((h, f));
        }
        &self.kinetic.as_ref().expect("just set").1
    }

    fn potential_at(&mut self, spec: &SolverSpec, t: f64) -> Vec<f64> {
        if spec.potential.is_time_dependent() {
            return spec.potential.sample(&self.grid, spec.mass, t);
        }
        self.potential.get_or_insert_with(|| spec.potential.sample(&self.grid, spec.mass, t)).clone()
    }

    /// `c·Q(|ψ|)` or `None` when the coupling vanishes.
    fn scaled_q(&self, psi: &[C64], spec: &SolverSpec) -> Option<Vec<f64>> {
        let c = spec.coupling();
        if c == 0.0 {
            return None;
        }
        let amp = Field::new(self.grid, psi.iter().map(|v| C64::new(v.norm(), 0.0)).collect()).expect("grid");
        let a: Vec<f64> = amp.values().iter().map(|v| v.re).collect();
        let eps = amplitude_floor(&a, spec.coupling_floor);
        let q = quantum_potential_tapered(&amp, spec.mass, spec.hbar, eps);
        let qf = Field::from_real(self.grid, &q).expect("grid");
        let kmax: Vec<f64> = self.grid.axes().iter().map(|a| std::f64::consts::PI / a.spacing()).collect();
        let filt = spectral::apply_symbol(&qf, |k| {
            let r: f64 = k.iter().zip(&kmax).map(|(k, m)| (k / m).powi(2)).sum::<f64>().sqrt();
            C64::new((-36.0 * r.powi(FILTER_ORDER)).exp(), 0.0)
        });
        Some(filt.values().iter().map(|q| c * q.re).collect())
    }

    fn kick(psi: &mut [C64], v: &[f64], q: Option<&[f64]>, h: f64, hbar: f64) {
        let c = -0.5 * h / hbar;
        match q {
            None => psi.iter_mut().zip(v).for_each(|(p, v)| *p *= C64::from_polar(1.0, c * v)),
            Some(q) => psi.iter_mut().zip(v).zip(q).for_each(|((p, v), q)| *p *= C64::from_polar(1.0, c * (v - q))),
        }
    }

    fn stiff(q: &Option<Vec<f64>>, h: f64, hbar: f64) -> Option<f64> {
        let q = q.as_ref()?;
        let sup = q.iter().map(|x| x.abs()).fold(0.0, f64::max);
        (sup > hbar / (h * 10.0)).then_some(sup)
    }

    /// One Strang step of size `h` with no retry. `q_start` may carry `c·Q`
    /// already evaluated for the current amplitude. Returns `c·Q` for the
    /// amplitude at the end of the step.
    fn try_step(
        &mut self,
        psi: &mut [C64],
        t: f64,
        h: f64,
        spec: &SolverSpec,
        q_start: Option<Vec<f64>>,
    ) -> Result<Option<Vec<f64>>, f64> {
        let v = self.potential_at(spec, t + 0.5 * h);
        let q1 = match q_start {
            Some(q) => Some(q),
            None => self.scaled_q(psi, spec),
        };
        if let Some(sup) = Self::stiff(&q1, h, spec.hbar) {
            return Err(sup);
        }
        Self::kick(psi, &v, q1.as_deref(), h, spec.hbar);
        let grid = self.grid;
        spectral::forward(&grid, psi);
        for (p, k) in psi.iter_mut().zip(self.kinetic_factors(h, spec)) {
            *p *= k;
        }
        spectral::inverse(&grid, psi);
        // the kick only changes the phase, so Q after the drift stays valid
        // through the second half-kick and into the next step
        let q2 = self.scaled_q(psi, spec);
        if let Some(sup) = Self::stiff(&q2, h, spec.hbar) {
            return Err(sup);
        }
        Self::kick(psi, &v, q2.as_deref(), h, spec.hbar);
        Ok(q2)
    }

    /// Advances `psi` from `t` by `h`, halving the step (up to
    /// [`MAX_HALVINGS`] times) when `sup|c·Q| > ℏ/(10·dt)`.
    pub fn advance(
        &mut self,
        psi: &mut Vec<C64>,
        t: f64,
        h: f64,
        spec: &SolverSpec,
        q_start: Option<Vec<f64>>,
    ) -> Result<Option<Vec<f64>>, SolverError> {
        self.advance_inner(psi, t, h, spec, q_start, 0)
    }

    fn advance_inner(
        &mut self,
        psi: &mut Vec<C64>,
        t: f64,
        h: f64,
        spec: &SolverSpec,
        q_start: Option<Vec<f64>>,
        depth: u32,
    ) -> Result<Option<Vec<f64>>, SolverError> {
        let backup = psi.clone();
        match self.try_step(psi, t, h, spec, q_start) {
            Ok(q) => Ok(q),
            Err(q_sup) => {
                *psi = backup;
                if depth >= MAX_HALVINGS {
                    return Err(SolverError::Stiff { t, q_sup, halvings: depth });
                }
                let q = self.advance_inner(psi, t, 0.5 * h, spec, None, depth + 1)?;
                self.advance_inner(psi, t + 0.5 * h, 0.5 * h, spec, q, depth + 1)
            }
        }
    }
}

fn step_field(state: &EvolutionState, spec: &SolverSpec, kind: SolverKind) -> Result<EvolutionState, SolverError> {
    if spec.kind != kind {
        return Err(SolverError::WrongKind { expected: kind.name(), found: spec.kind.name() });
    }
    let psi = match &state.repr {
        Representation::Wave(f) => f,
        Representation::Polar(_) => return Err(SolverError::WrongKind { expected: kind.name(), found: "polar" }),
    };
    spec.check(psi.grid())?;
    let mut stepper = SplitStepper::new(*psi.grid());
    let mut values = psi.values().to_vec();
    stepper.advance(&mut values, state.t, spec.dt, spec, None)?;
    Ok(EvolutionState::wave(state.t + spec.dt, Field::new(*psi.grid(), values)?))
}

/// One Strang step of the linear Schrödinger equation.
pub fn step_quantum(state: &EvolutionState, spec: &SolverSpec) -> Result<EvolutionState, SolverError> {
    step_field(state, spec, SolverKind::Quantum)
}

/// One Strang step of the classical (nonlinear) wave equation, kick potential
/// `V − Q(|ψ|)`.
pub fn step_classical_nonlinear(state: &EvolutionState, spec: &SolverSpec) -> Result<EvolutionState, SolverError> {
    step_field(state, spec, SolverKind::ClassicalNonlinear)
}

/// One Strang step with kick potential `V − λ·Q(|ψ|)`.
pub fn step_hybrid(state: &EvolutionState, spec: &SolverSpec) -> Result<EvolutionState, SolverError> {
    step_field(state, spec, SolverKind::Hybrid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Potential;
    use std::f64::consts::PI;

    #[test]
    fn plane_wave_phase_advance() {
        let l = 20.0;
        let g = Grid::line(64, 0.0, l).unwrap();
        let k = 2.0 * PI * 5.0 / l;
        let psi = Field::from_fn(g, |p| C64::from_polar(1.0 / l.sqrt(), k * p[0]));
        let spec = SolverSpec::quantum(1e-3).with_units(0.9, 1.7);
        let next = step_quantum(&EvolutionState::wave(0.0, psi.clone()), &spec).unwrap();
        let omega = 0.9 * k * k / (2.0 * 1.7);
        let expected = psi.scaled(C64::from_polar(1.0, -omega * 1e-3));
        assert!(next.as_field().unwrap().l2_distance(&expected).unwrap() < 1e-13);
    }

    #[test]
    fn wrong_kind_rejected() {
        let g = Grid::line(16, 0.0, 1.0).unwrap();
        let s = EvolutionState::wave(0.0, Field::zeros(g));
        let spec = SolverSpec::quantum(1e-3);
        assert!(matches!(step_classical_nonlinear(&s, &spec), Err(SolverError::WrongKind { .. })));
    }

    #[test]
    fn norm_preserved_with_potential() {
        let g = Grid::line(256, -10.0, 10.0).unwrap();
        let psi = Field::from_fn(g, |p| C64::from_polar((-(p[0] - 1.0).powi(2) / 4.0).exp(), 0.7 * p[0])).normalized();
        let spec = SolverSpec::classical_nonlinear(1e-3).with_potential(Potential::harmonic(1.0));
        let mut st = SplitStepper::new(g);
        let mut v = psi.values().to_vec();
        let mut q = None;
        for i in 0..1000 {
            q = st.advance(&mut v, i as f64 * 1e-3, 1e-3, &spec, q).unwrap();
        }
        let after = Field::new(g, v).unwrap();
        assert!((after.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn stiff_state_halves_then_fails() {
        let g = Grid::line(64, -4.0, 4.0).unwrap();
        // a near-node state has a huge quantum potential
        let psi = Field::from_real_fn(g, |p| (p[0] * 3.0).sin().abs() + 1e-6);
        let spec = SolverSpec::classical_nonlinear(1.0);
        let err = step_classical_nonlinear(&EvolutionState::wave(0.0, psi), &spec).unwrap_err();
        assert!(matches!(err, SolverError::Stiff { halvings: MAX_HALVINGS, .. }));
    }

    #[test]
    fn halving_recovers_moderately_stiff_step() {
        let g = Grid::line(128, -10.0, 10.0).unwrap();
        let psi = Field::from_real_fn(g, |p| (-p[0] * p[0] / 4.0).exp()).normalized();
        // sup|Q| ≈ 9 at the floor edge; dt = 0.02 exceeds ℏ/(10·dt) = 5
        let spec = SolverSpec::classical_nonlinear(0.02);
        let out = step_classical_nonlinear(&EvolutionState::wave(0.0, psi.clone()), &spec).unwrap();
        assert!((out.t - 0.02).abs() < 1e-15);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
