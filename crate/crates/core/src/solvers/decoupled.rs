//! RK4 integration of the uncoupled classical pair
//!
//! ```text
//! ∂S/∂t = −[(∇S)²/2m + V]
//! ∂ρ/∂t = −∇·(ρ∇S/m)
//! ```
//!
//! The action equation never reads `ρ`. The action is not periodic in general
//! (a boosted packet has `S = p·x`), so its derivatives go through
//! [`spectral::aperiodic_derivatives`]. The density is carried as the
//! amplitude `A = √ρ` in skew-symmetric form with periodic derivatives.

use super::{EvolutionState, Representation, SolverError, SolverKind, SolverSpec};
use crate::grid::{Field, Grid, C64};
use crate::polar::PolarPair;
use crate::spectral;

struct ActionDerivatives {
    grad: Vec<[f64; 2]>,
    laplacian: Vec<f64>,
}

fn action_derivatives(s: &[f64], grid: &Grid) -> ActionDerivatives {
    let mut grad = vec![[0.0; 2]; s.len()];
    let mut laplacian = vec![0.0; s.len()];
    for a in 0..grid.dims() {
        let (d1, d2) = spectral::aperiodic_derivatives(s, grid, a).expect("action matches grid");
        for i in 0..s.len() {
            grad[i][a] = d1[i];
            laplacian[i] += d2[i];
        }
    }
    ActionDerivatives { grad, laplacian }
}

/// Right-hand sides for `(A, S)`. The amplitude obeys
/// `∂A/∂t = −½[∇·(A v) + v·∇A]` with `v = ∇S/m`, which is the continuity
/// equation for `ρ = A²`. With a skew-symmetric spectral derivative this
/// form conserves `Σ A²` exactly, whatever the velocity does at the
/// periodic seam, and it never takes a square root of rounding noise.
fn rhs(amp: &[f64], s: &[f64], v: &[f64], grid: &Grid, mass: f64) -> (Vec<f64>, Vec<f64>) {
    let d = action_derivatives(s, grid);
    let ds: Vec<f64> = d
        .grad
        .iter()
        .zip(v)
        .map(|(g, v)| -((g[0] * g[0] + g[1] * g[1]) / (2.0 * mass) + v))
        .collect();
    let mut da = vec![0.0; amp.len()];
    let amp_field = Field::new(*grid, amp.iter().map(|&a| C64::new(a, 0.0)).collect()).expect("grid");
    for axis in 0..grid.dims() {
        let flux: Vec<C64> = amp.iter().zip(&d.grad).map(|(a, g)| C64::new(a * g[axis] / mass, 0.0)).collect();
        let div = spectral::gradient(&Field::new(*grid, flux).expect("grid"), axis).expect("axis");
        let grad_a = spectral::gradient(&amp_field, axis).expect("axis");
        for i in 0..amp.len() {
            da[i] -= 0.5 * (div.values()[i].re + d.grad[i][axis] / mass * grad_a.values()[i].re);
        }
    }
    (da, ds)
}

const EDGE_NODES: usize = 3;

/// Overwrites the outermost [`EDGE_NODES`] action samples at each end of every
/// line by quadratic extrapolation from the adjacent interior. Characteristics
/// entering through the edge carry data from outside the domain; without this
/// the one-sided derivative closure feeds back on itself and grows.
fn slave_edges(s: &mut [f64], grid: &Grid) {
    let (n0, n1) = grid.shape();
    let fix = |line: &mut [f64]| {
        let n = line.len();
        let b = EDGE_NODES;
        let inner: Vec<f64> = (b..b + 3).map(|i| i as f64).collect();
        for i in 0..b {
            let w = &spectral::fornberg_weights(&inner, i as f64, 0)[0];
            line[i] = (0..3).map(|j| w[j] * line[b + j]).sum();
            let w = &spectral::fornberg_weights(&inner, (2 * b + 2 - i) as f64, 0)[0];
            line[n - 1 - i] = (0..3).map(|j| w[j] * line[n - b - 3 + j]).sum();
        }
    };
    for a in 0..grid.dims() {
        if a == grid.dims() - 1 {
            let len = grid.axes()[a].n;
            s.chunks_mut(len).for_each(fix);
        } else {
            for col in 0..n1 {
                let mut line: Vec<f64> = (0..n0).map(|r| s[r * n1 + col]).collect();
                fix(&mut line);
                for r in 0..n0 {
                    s[r * n1 + col] = line[r];
                }
            }
        }
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

/// Largest number of RK4 substeps taken inside one step.
pub const MAX_SUBSTEPS: usize = 1024;

/// Advances `(ρ, S)` by `h`. Fails with [`SolverError::Caustic`] when
/// `min(1 + h·∇²S/m) ≤ 0`. Focusing flows speed up near the edges long
/// before the caustic, so the step is split into RK4 substeps that keep
/// `h·max|∇S|/m·k_max ≤ 2`.
pub(crate) fn rk4_step(pair: &PolarPair, t: f64, h: f64, spec: &SolverSpec) -> Result<PolarPair, SolverError> {
    let grid = pair.grid;
    let m = spec.mass;
    let d = action_derivatives(&pair.action, &grid);
    let min_jacobian = d.laplacian.iter().map(|l| 1.0 + h * l / m).fold(f64::INFINITY, f64::min);
    if min_jacobian <= 0.0 {
        return Err(SolverError::Caustic { t, min_jacobian });
    }
    let kmax = grid.axes().iter().map(|a| std::f64::consts::PI / a.spacing()).fold(0.0, f64::max);
    let mut out = pair.clone();
    let mut done = 0.0;
    loop {
        let remaining = h - done;
        let grad = if done == 0.0 { d.grad.clone() } else { action_derivatives(&out.action, &grid).grad };
        let speed = grad.iter().map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt() / m).fold(0.0, f64::max);
        let needed = (remaining * speed * kmax / 2.0).ceil().max(1.0);
        if needed > MAX_SUBSTEPS as f64 {
            return Err(SolverError::RaySpeed { t: t + done, speed, substeps: MAX_SUBSTEPS });
        }
        if needed == 1.0 {
            out = rk4_substep(&out, t + done, remaining, spec);
            break;
        }
        let sub = remaining / needed;
        out = rk4_substep(&out, t + done, sub, spec);
        done += sub;
    }
    Ok(out)
}

fn rk4_substep(pair: &PolarPair, t: f64, h: f64, spec: &SolverSpec) -> PolarPair {
    let grid = pair.grid;
    let m = spec.mass;
    let a0 = &pair.amplitude;
    let s0 = &pair.action;
    let v0 = spec.potential.sample(&grid, m, t);
    let vh = spec.potential.sample(&grid, m, t + 0.5 * h);
    let v1 = spec.potential.sample(&grid, m, t + h);

    let (ka1, ks1) = rhs(a0, s0, &v0, &grid, m);
    let (ka2, ks2) = rhs(&axpy(a0, 0.5 * h, &ka1), &axpy(s0, 0.5 * h, &ks1), &vh, &grid, m);
    let (ka3, ks3) = rhs(&axpy(a0, 0.5 * h, &ka2), &axpy(s0, 0.5 * h, &ks2), &vh, &grid, m);
    let (ka4, ks4) = rhs(&axpy(a0, h, &ka3), &axpy(s0, h, &ks3), &v1, &grid, m);

    let combine = |y: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
        (0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
    };
    let amplitude = combine(a0, &ka1, &ka2, &ka3, &ka4);
    let mut action = combine(s0, &ks1, &ks2, &ks3, &ks4);
    slave_edges(&mut action, &grid);
    PolarPair { grid, amplitude, action }
}

/// One RK4 step of the uncoupled Hamilton–Jacobi/continuity pair.
pub fn step_classical_decoupled(state: &EvolutionState, spec: &SolverSpec) -> Result<EvolutionState, SolverError> {
    if spec.kind != SolverKind::ClassicalDecoupled {
        return Err(SolverError::WrongKind { expected: SolverKind::ClassicalDecoupled.name(), found: spec.kind.name() });
    }
    let pair = match &state.repr {
        Representation::Polar(p) => p,
        Representation::Wave(_) => {
            return Err(SolverError::WrongKind { expected: SolverKind::ClassicalDecoupled.name(), found: "wave" })
        }
    };
    spec.check(&pair.grid)?;
    let next = rk4_step(pair, state.t, spec.dt, spec)?;
    Ok(EvolutionState::polar(state.t + spec.dt, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Potential;
    use std::f64::consts::PI;

    fn gauss(x: f64) -> f64 {
        (2.0 * PI).powf(-0.25) * (-x * x / 4.0).exp()
    }

    #[test]
    fn linear_action_translates() {
        let g = Grid::line(256, -15.0, 15.0).unwrap();
        let p0 = 1.3;
        let spec = SolverSpec::classical_decoupled(1e-3);
        let mut st = EvolutionState::polar(0.0, PolarPair::from_fns(g, |p| gauss(p[0]), |p| p0 * p[0]));
        for _ in 0..500 {
            st = step_classical_decoupled(&st, &spec).unwrap();
        }
        let t = st.t;
        let pair = st.as_polar().unwrap();
        for (i, p) in g.points().enumerate() {
            assert!((pair.action[i] - (p0 * p[0] - 0.5 * p0 * p0 * t)).abs() < 1e-9, "{} {} {}", p[0], pair.action[i], p0 * p[0] - 0.5 * p0 * p0 * t);
            assert!((pair.amplitude[i].powi(2) - gauss(p[0] - p0 * t).powi(2)).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_density_mass_conserved() {
        let l = 10.0;
        let g = Grid::line(128, 0.0, l).unwrap();
        let spec = SolverSpec::classical_decoupled(1e-3);
        let amp = (1.0 / l).sqrt();
        let mut st = EvolutionState::polar(
            0.0,
            PolarPair::from_fns(g, |_| amp, |p| 0.2 * (2.0 * PI * p[0] / l).sin() + 0.05 * (6.0 * PI * p[0] / l).cos()),
        );
        for _ in 0..200 {
            st = step_classical_decoupled(&st, &spec).unwrap();
        }
        assert!((st.norm_sqr() - 1.0).abs() < 1e-10, "{}", st.norm_sqr() - 1.0);
    }

    #[test]
    fn outgoing_flow_stays_bounded_at_the_seam() {
        // v = x/2 leaves through both edges, so the periodic seam is a sink
        let g = Grid::line(512, -20.0, 20.0).unwrap();
        let spec = SolverSpec::classical_decoupled(1e-3);
        let mut st = EvolutionState::polar(0.0, PolarPair::from_fns(g, |p| gauss(p[0]), |p| 0.25 * p[0] * p[0]));
        for _ in 0..1000 {
            st = step_classical_decoupled(&st, &spec).unwrap();
        }
        let pair = st.as_polar().unwrap();
        assert!((pair.mass() - 1.0).abs() < 1e-12);
        for (i, p) in g.points().enumerate() {
            let a_exact = gauss(p[0] / 1.5) / 1.5f64.sqrt();
            assert!((pair.amplitude[i] - a_exact).abs() < 1e-10, "A at {}", p[0]);
        }
    }

    #[test]
    fn harmonic_focusing_matches_characteristics() {
        let g = Grid::line(256, -15.0, 15.0).unwrap();
        let w = 1.0;
        let spec = SolverSpec::classical_decoupled(1e-3).with_potential(Potential::harmonic(w));
        let mut st = EvolutionState::polar(0.0, PolarPair::from_fns(g, |p| gauss(p[0]), |_| 0.0));
        for _ in 0..500 {
            st = step_classical_decoupled(&st, &spec).unwrap();
        }
        let t = st.t;
        let pair = st.as_polar().unwrap();
        let c = (w * t).cos();
        for (i, p) in g.points().enumerate() {
            let s_exact = -0.5 * w * p[0] * p[0] * (w * t).tan();
            let a_exact = gauss(p[0] / c) / c.sqrt();
            assert!((pair.action[i] - s_exact).abs() < 1e-8, "S at {}", p[0]);
            assert!((pair.amplitude[i] - a_exact).abs() < 1e-7, "A at {} err {}", p[0], pair.amplitude[i] - a_exact);
        }
    }

    #[test]
    fn caustic_detected() {
        let g = Grid::line(64, -8.0, 8.0).unwrap();
        let spec = SolverSpec::classical_decoupled(0.1);
        // v = −x/t_c with t_c = 0.05 < dt
        let pair = PolarPair::from_fns(g, |p| gauss(p[0]), |p| -p[0] * p[0] / (2.0 * 0.05));
        let err = step_classical_decoupled(&EvolutionState::polar(0.0, pair), &spec).unwrap_err();
        assert!(err.is_caustic());
    }
}
