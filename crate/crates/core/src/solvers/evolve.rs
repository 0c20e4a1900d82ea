use super::decoupled::rk4_step;
use super::split::SplitStepper;
use super::{EvolutionState, Representation, SolverError, SolverKind, SolverSpec};
use crate::grid::Field;
use crate::observables::{observable_row, ObservableRow};

/// Callback invoked on every recorded state.
pub trait Observer {
    fn observe(&mut self, state: &EvolutionState, spec: &SolverSpec);
}

impl<F: FnMut(&EvolutionState, &SolverSpec)> Observer for F {
    fn observe(&mut self, state: &EvolutionState, spec: &SolverSpec) {
        self(state, spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Record every `stride` steps; the initial and final states are always
    /// recorded.
    pub stride: usize,
    pub keep_snapshots: bool,
    pub record_observables: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { stride: 1, keep_snapshots: true, record_observables: true }
    }
}

#[derive(Clone, Debug, Default)]
pub struct EvolutionHistory {
    pub snapshots: Vec<EvolutionState>,
    pub observables: Vec<ObservableRow>,
    pub steps: usize,
}

impl EvolutionHistory {
    /// `(t, ψ)` pairs, recomposing polar snapshots.
    pub fn fields(&self, hbar: f64) -> Vec<(f64, Field)> {
        self.snapshots.iter().map(|s| (s.t, s.to_field(hbar))).collect()
    }

    pub fn last(&self) -> Option<&EvolutionState> {
        self.snapshots.last()
    }
}

/// Number of uniform steps covering `span` with steps no longer than `dt`.
pub(crate) fn step_count(span: f64, dt: f64) -> usize {
    if span <= 0.0 {
        0
    } else {
        ((span / dt) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Steps `state` to `t_final` in uniform steps of at most `spec.dt`.
pub fn evolve(
    state: &EvolutionState,
    spec: &SolverSpec,
    t_final: f64,
    options: EvolveOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<EvolutionHistory, SolverError> {
    if t_final < state.t {
        return Err(SolverError::BackwardsInTime { t: state.t, t_final });
    }
    spec.check(state.grid())?;
    match (&state.repr, spec.kind) {
        (Representation::Polar(_), SolverKind::ClassicalDecoupled) => {}
        (Representation::Wave(_), k) if k != SolverKind::ClassicalDecoupled => {}
        (Representation::Polar(_), k) => return Err(SolverError::WrongKind { expected: k.name(), found: "polar" }),
        (Representation::Wave(_), k) => return Err(SolverError::WrongKind { expected: k.name(), found: "wave" }),
    }
    let t0 = state.t;
    let n = step_count(t_final - t0, spec.dt);
    let h = if n > 0 { (t_final - t0) / n as f64 } else { 0.0 };
    let stride = options.stride.max(1);

    let mut history = EvolutionHistory { steps: n, ..Default::default() };
    let record = |s: &EvolutionState, history: &mut EvolutionHistory, observers: &mut [&mut dyn Observer]| {
        if options.record_observables {
            history.observables.push(observable_row(&s.to_field(spec.hbar), spec, s.t));
        }
        for o in observers.iter_mut() {
            o.observe(s, spec);
        }
        if options.keep_snapshots {
            history.snapshots.push(s.clone());
        }
    };
    record(state, &mut history, observers);

    let wrap = |t: f64, e: SolverError| SolverError::AtTime { t, source: Box::new(e) };
    match &state.repr {
        Representation::Wave(psi) => {
            let grid = *psi.grid();
            let mut stepper = SplitStepper::new(grid);
            let mut values = psi.values().to_vec();
            let mut q = None;
            for i in 0..n {
                let t = t0 + i as f64 * h;
                q = stepper.advance(&mut values, t, h, spec, q).map_err(|e| wrap(t, e))?;
                if (i + 1) % stride == 0 || i + 1 == n {
                    let s = EvolutionState::wave(t0 + (i + 1) as f64 * h, Field::new(grid, values.clone())?);
                    record(&s, &mut history, observers);
                }
            }
        }
        Representation::Polar(pair) => {
            let mut pair = pair.clone();
            for i in 0..n {
                let t = t0 + i as f64 * h;
                pair = rk4_step(&pair, t, h, spec).map_err(|e| wrap(t, e))?;
                if (i + 1) % stride == 0 || i + 1 == n {
                    let s = EvolutionState::polar(t0 + (i + 1) as f64 * h, pair.clone());
                    record(&s, &mut history, observers);
                }
            }
        }
    }
    Ok(history)
}
