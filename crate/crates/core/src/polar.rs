//! Polar (amplitude/action) form of a wavefunction, the quantum potential, and
//! residuals of the hydrodynamic equation pairs.

use crate::grid::{Field, Grid, GridError, C64};
use crate::solvers::SolverSpec;
use crate::spectral;
use std::f64::consts::PI;
use thiserror::Error;

/// Relative amplitude floor used when none is supplied.
pub const DEFAULT_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarError {
    #[error("amplitude is below the floor on {fraction:.3} of the nodes; phase is meaningless")]
    MostlyEmpty { fraction: f64 },
    #[error("residuals need at least 3 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error("snapshots are not uniformly spaced in time")]
    NonUniformHistory,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Amplitude `√ρ` and action `S` of one wavefunction, both real arrays on
/// `grid`. The action carries units of ℏ·radian.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarPair {
    pub grid: Grid,
    pub amplitude: Vec<f64>,
    pub action: Vec<f64>,
}

impl PolarPair {
    pub fn new(grid: Grid, amplitude: Vec<f64>, action: Vec<f64>) -> Result<Self, GridError> {
        for v in [&amplitude, &action] {
            if v.len() != grid.len() {
                return Err(GridError::LengthMismatch { expected: grid.len(), got: v.len() });
            }
        }
        Ok(PolarPair { grid, amplitude, action })
    }

    pub fn from_fns(grid: Grid, amplitude: impl Fn([f64; 2]) -> f64, action: impl Fn([f64; 2]) -> f64) -> Self {
        PolarPair {
            grid,
            amplitude: grid.points().map(&amplitude).collect(),
            action: grid.points().map(&action).collect(),
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a * a).collect()
    }

    /// `∫ρ dx` by Riemann sum.
    pub fn mass(&self) -> f64 {
        self.amplitude.iter().map(|a| a * a).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn amplitude_field(&self) -> Field {
        Field::from_real(self.grid, &self.amplitude).expect("amplitude matches grid")
    }
}

fn wrap(mut d: f64) -> f64 {
    while d > PI {
        d -= 2.0 * PI;
    }
    while d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Sequential unwrap of `arg` starting from `start`; nodes with `valid == false`
/// take the value of their already-unwrapped neighbour.
fn unwrap_line(arg: &[f64], valid: &[bool], start: usize, start_value: f64) -> Vec<f64> {
    let n = arg.len();
    let mut out = vec![0.0; n];
    out[start] = start_value;
    let step = |from: usize, to: usize, out: &mut Vec<f64>| {
        out[to] = if valid[to] { out[from] + wrap(arg[to] - out[from]) } else { out[from] };
    };
    for i in start + 1..n {
        step(i - 1, i, &mut out);
    }
    for i in (0..start).rev() {
        step(i + 1, i, &mut out);
    }
    out
}

/// Splits `psi` into amplitude and unwrapped action. `eps` is an absolute
/// amplitude floor; phase below it is continued from the nearest unwrapped
/// neighbour.
pub fn decompose(psi: &Field, eps: f64, hbar: f64) -> Result<PolarPair, PolarError> {
    let grid = *psi.grid();
    let amplitude: Vec<f64> = psi.values().iter().map(|v| v.norm()).collect();
    let valid: Vec<bool> = amplitude.iter().map(|&a| a > eps).collect();
    let empty = valid.iter().filter(|v| !**v).count() as f64 / valid.len() as f64;
    if empty > 0.5 {
        return Err(PolarError::MostlyEmpty { fraction: empty });
    }
    let arg: Vec<f64> = psi.values().iter().map(|v| v.arg()).collect();
    let (n0, n1) = grid.shape();
    let phase = if grid.dims() == 1 {
        let c = n0 / 2;
        unwrap_line(&arg, &valid, c, arg[c])
    } else {
        let (r, c) = (n0 / 2, n1 / 2);
        let row = &arg[r * n1..(r + 1) * n1];
        let row_valid = &valid[r * n1..(r + 1) * n1];
        let centre_row = unwrap_line(row, row_valid, c, row[c]);
        let mut phase = vec![0.0; grid.len()];
        for col in 0..n1 {
            let line: Vec<f64> = (0..n0).map(|i| arg[i * n1 + col]).collect();
            let lv: Vec<bool> = (0..n0).map(|i| valid[i * n1 + col]).collect();
            let un = unwrap_line(&line, &lv, r, centre_row[col]);
            for i in 0..n0 {
                phase[i * n1 + col] = un[i];
            }
        }
        phase
    };
    Ok(PolarPair { grid, amplitude, action: phase.into_iter().map(|p| hbar * p).collect() })
}

/// `√ρ · exp(iS/ℏ)`.
pub fn recompose(pair: &PolarPair, hbar: f64) -> Field {
    let values = pair.amplitude.iter().zip(&pair.action).map(|(&a, &s)| C64::from_polar(a, s / hbar)).collect();
    Field::new(pair.grid, values).expect("pair arrays match grid")
}

/// Absolute floor `rel · max(amplitude)`.
pub fn amplitude_floor(amplitude: &[f64], rel: f64) -> f64 {
    rel * amplitude.iter().copied().fold(0.0, f64::max)
}

/// Quantum potential values with a flag for nodes that were regularised.
#[derive(Clone, Debug)]
pub struct QuantumPotential {
    pub values: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl QuantumPotential {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|q| q.abs()).fold(0.0, f64::max)
    }
}

/// `Q = −(ℏ²/2m) ∇²A / max(A, eps)` for a real amplitude field `A`.
pub fn quantum_potential(amplitude: &Field, mass: f64, hbar: f64, eps: f64) -> QuantumPotential {
    let lap = spectral::laplacian(amplitude);
    let c = -hbar * hbar / (2.0 * mass);
    let mut values = Vec::with_capacity(lap.values().len());
    let mut flagged = Vec::with_capacity(lap.values().len());
    for (l, a) in lap.values().iter().zip(amplitude.values()) {
        let low = a.re <= eps;
        flagged.push(low);
        let denom = if low { eps } else { a.re };
        values.push(if denom > 0.0 { c * l.re / denom } else { 0.0 });
    }
    QuantumPotential { values, flagged }
}

/// `−(ℏ²/2m) ∇²A·A/(A² + eps²)`: agrees with [`quantum_potential`] to
/// relative order `(eps/A)²` on the support and fades to zero below the
/// floor instead of switching abruptly. Used as the dynamical coupling.
pub fn quantum_potential_tapered(amplitude: &Field, mass: f64, hbar: f64, eps: f64) -> Vec<f64> {
    let lap = spectral::laplacian(amplitude);
    let c = -hbar * hbar / (2.0 * mass);
    let e2 = eps * eps;
    lap.values()
        .iter()
        .zip(amplitude.values())
        .map(|(l, a)| {
            let d = a.re * a.re + e2;
            if d > 0.0 { c * l.re * a.re / d } else { 0.0 }
        })
        .collect()
}

/// `Ĥ₀ψ = −(ℏ²/2m)∇²ψ`.
pub fn free_hamiltonian(psi: &Field, mass: f64, hbar: f64) -> Field {
    spectral::laplacian(psi).scaled(C64::new(-hbar * hbar / (2.0 * mass), 0.0))
}

/// Grid L2 norm of `Q·A − Ĥ₀A`, the statement that the quantum potential is
/// the kinetic operator acting on the amplitude.
pub fn kinetic_identity_residual(amplitude: &Field, mass: f64, hbar: f64, eps: f64) -> f64 {
    let q = quantum_potential(amplitude, mass, hbar, eps);
    let h0a = free_hamiltonian(amplitude, mass, hbar);
    let diff: Vec<C64> = q
        .values
        .iter()
        .zip(amplitude.values())
        .zip(h0a.values())
        .map(|((q, a), h)| C64::new(q * a.re, 0.0) - h)
        .collect();
    Field::new(*amplitude.grid(), diff).expect("same grid").norm()
}

/// Pieces of `(Ĥ₀ − Q)ψ` for `ψ = A·φ`, `φ = exp(iS/ℏ)`.
pub struct CancellationTerms {
    /// `(Ĥ₀ − Q)ψ`.
    pub classical_free: Field,
    /// `A · Ĥ₀φ`.
    pub amplitude_times_h0_phase: Field,
    /// `−(ℏ²/m) ∇A·∇φ`.
    pub cross: Field,
}

/// Evaluates both sides of the amplitude/phase cancellation for a pair whose
/// phase factor is periodic and smooth on the grid.
pub fn cancellation_terms(pair: &PolarPair, mass: f64, hbar: f64, eps: f64) -> CancellationTerms {
    let grid = pair.grid;
    let psi = recompose(pair, hbar);
    let amp = pair.amplitude_field();
    let phase = Field::new(grid, pair.action.iter().map(|&s| C64::from_polar(1.0, s / hbar)).collect())
        .expect("same grid");
    let q = quantum_potential(&amp, mass, hbar, eps);
    let h0psi = free_hamiltonian(&psi, mass, hbar);
    let classical_free = Field::new(
        grid,
        h0psi.values().iter().zip(psi.values()).zip(&q.values).map(|((h, p), q)| h - p * q).collect(),
    )
    .expect("same grid");
    let h0phase = free_hamiltonian(&phase, mass, hbar);
    let amplitude_times_h0_phase =
        Field::new(grid, h0phase.values().iter().zip(&pair.amplitude).map(|(h, a)| h * a).collect())
            .expect("same grid");
    let mut cross = vec![C64::new(0.0, 0.0); grid.len()];
    for axis in 0..grid.dims() {
        let da = spectral::gradient(&amp, axis).expect("axis in range");
        let dphi = spectral::gradient(&phase, axis).expect("axis in range");
        for ((c, a), p) in cross.iter_mut().zip(da.values()).zip(dphi.values()) {
            *c += -hbar * hbar / mass * a.re * p;
        }
    }
    CancellationTerms { classical_free, amplitude_times_h0_phase, cross: Field::new(grid, cross).expect("same grid") }
}

/// `‖(Ĥ₀ − Q)ψ − A·Ĥ₀ exp(iS/ℏ)‖`.
pub fn cancellation_residual(pair: &PolarPair, mass: f64, hbar: f64, eps: f64) -> f64 {
    let t = cancellation_terms(pair, mass, hbar, eps);
    t.classical_free.l2_distance(&t.amplitude_times_h0_phase).expect("same grid")
}

/// `‖(Ĥ₀ − Q)ψ − [A·Ĥ₀ exp(iS/ℏ) − (ℏ²/m)∇A·∇exp(iS/ℏ)]‖`, the full product
/// rule including the amplitude–phase cross term.
pub fn cancellation_residual_with_cross_term(pair: &PolarPair, mass: f64, hbar: f64, eps: f64) -> f64 {
    let t = cancellation_terms(pair, mass, hbar, eps);
    let rhs = t.amplitude_times_h0_phase.zip_with(&t.cross, |a, b| a + b).expect("same grid");
    t.classical_free.l2_distance(&rhs).expect("same grid")
}

/// `∂ψ/∂axis` of a smooth field that need not be periodic, differentiating
/// the real and imaginary parts separately.
fn aperiodic_gradient(psi: &Field, axis: usize) -> Result<Field, GridError> {
    let grid = *psi.grid();
    let re: Vec<f64> = psi.values().iter().map(|v| v.re).collect();
    let im: Vec<f64> = psi.values().iter().map(|v| v.im).collect();
    let (dre, _) = spectral::aperiodic_derivatives(&re, &grid, axis)?;
    let (dim, _) = spectral::aperiodic_derivatives(&im, &grid, axis)?;
    Field::new(grid, dre.into_iter().zip(dim).map(|(a, b)| C64::new(a, b)).collect())
}

/// Residual norms of the phase and density equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    pub phase: f64,
    pub density: f64,
}

/// Central-difference weights for the first derivative at the middle node.
fn time_stencil(len: usize) -> (usize, &'static [f64]) {
    if len >= 5 {
        (2, &[1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0])
    } else {
        (1, &[-0.5, 0.0, 0.5])
    }
}

/// Residuals of the hydrodynamic pair evaluated at the middle snapshot of
/// `history`.
///
/// With `coupled` the phase equation includes the quantum potential (the
/// Schrödinger pair); without it the phase equation is the classical
/// Hamilton–Jacobi equation. The phase residual is masked to nodes with
/// amplitude above `10·eps`, where `eps = spec.eps · max|ψ|`.
pub fn madelung_residuals(history: &[(f64, Field)], spec: &SolverSpec, coupled: bool) -> Result<Residuals, PolarError> {
    if history.len() < 3 {
        return Err(PolarError::TooFewSnapshots(history.len()));
    }
    let h = history[1].0 - history[0].0;
    if !(h > 0.0) || history.windows(2).any(|w| ((w[1].0 - w[0].0) - h).abs() > 1e-9 * h.abs().max(1.0)) {
        return Err(PolarError::NonUniformHistory);
    }
    let mid = history.len() / 2;
    let (half, weights) = time_stencil(history.len());
    let (t_mid, psi) = (&history[mid].0, &history[mid].1);
    let grid = *psi.grid();
    for (_, f) in history {
        if *f.grid() != grid {
            return Err(GridError::GridMismatch.into());
        }
    }
    let hbar = spec.hbar;
    let m = spec.mass;
    let amp: Vec<f64> = psi.values().iter().map(|v| v.norm()).collect();
    let eps = amplitude_floor(&amp, spec.eps);
    let window = &history[mid - half..=mid + half];

    let mut dsdt = vec![0.0; grid.len()];
    let mut drhodt = vec![0.0; grid.len()];
    for ((_, f), w) in window.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        for (i, (v, c)) in f.values().iter().zip(psi.values()).enumerate() {
            dsdt[i] += w * hbar * (v * c.conj()).arg() / h;
            drhodt[i] += w * v.norm_sqr() / h;
        }
    }

    let mut grad_s_sq = vec![0.0; grid.len()];
    let mut div_flux = vec![0.0; grid.len()];
    for axis in 0..grid.dims() {
        let dpsi = aperiodic_gradient(psi, axis)?;
        let flux: Vec<C64> = psi
            .values()
            .iter()
            .zip(dpsi.values())
            .map(|(p, d)| C64::new(hbar / m * (p.conj() * d).im, 0.0))
            .collect();
        for (i, (p, d)) in psi.values().iter().zip(dpsi.values()).enumerate() {
            let r2 = p.norm_sqr();
            if r2 > 0.0 {
                let gs = hbar * (p.conj() * d).im / r2;
                grad_s_sq[i] += gs * gs;
            }
        }
        let dflux = spectral::gradient(&Field::new(grid, flux)?, axis)?;
        for (acc, d) in div_flux.iter_mut().zip(dflux.values()) {
            *acc += d.re;
        }
    }

    let v = spec.potential.sample(&grid, m, *t_mid);
    let q = if coupled {
        Some(quantum_potential(&Field::from_real(grid, &amp)?, m, hbar, eps))
    } else {
        None
    };
    let dv = grid.cell_volume();
    let mut phase_sq = 0.0;
    let mut density_sq = 0.0;
    for i in 0..grid.len() {
        if amp[i] > 10.0 * eps {
            let mut r = dsdt[i] + grad_s_sq[i] / (2.0 * m) + v[i];
            if let Some(q) = &q {
                r += q.values[i];
            }
            phase_sq += r * r;
        }
        let rd = drhodt[i] + div_flux[i];
        density_sq += rd * rd;
    }
    Ok(Residuals { phase: (phase_sq * dv).sqrt(), density: (density_sq * dv).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(x: f64, s: f64) -> f64 {
        (2.0 * PI * s * s).powf(-0.25) * (-x * x / (4.0 * s * s)).exp()
    }

    #[test]
    fn plane_wave_decomposition() {
        let l = 8.0;
        let g = Grid::line(64, 0.0, l).unwrap();
        let k = 2.0 * PI * 3.0 / l;
        let hbar = 0.7;
        let psi = Field::from_fn(g, |p| C64::from_polar(1.0 / l.sqrt(), k * p[0]));
        let pair = decompose(&psi, 1e-12, hbar).unwrap();
        let s0 = pair.action[0];
        for (i, p) in g.points().enumerate() {
            assert!((pair.amplitude[i] - 1.0 / l.sqrt()).abs() < 1e-14);
            assert!((pair.action[i] - s0 - hbar * k * p[0]).abs() < 1e-11);
        }
        let back = recompose(&pair, hbar);
        assert!(back.l2_distance(&psi).unwrap() < 1e-12);
    }

    #[test]
    fn boosted_gaussian_decomposition() {
        let g = Grid::line(256, -12.0, 12.0).unwrap();
        let p0 = 2.3;
        let psi = Field::from_fn(g, |p| C64::from_polar(gauss(p[0], 1.0), p0 * p[0]));
        let pair = decompose(&psi, 1e-8 * gauss(0.0, 1.0), 1.0).unwrap();
        let c = g.axes()[0].nearest_index(0.0);
        for (i, p) in g.points().enumerate() {
            assert!((pair.amplitude[i] - gauss(p[0], 1.0)).abs() < 1e-15);
            if pair.amplitude[i] > 1e-8 {
                assert!((pair.action[i] - pair.action[c] - p0 * p[0]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn real_positive_has_zero_action() {
        let g = Grid::plane((16, -1.0, 1.0), (16, -1.0, 1.0)).unwrap();
        let psi = Field::from_real_fn(g, |p| 1.0 + 0.2 * p[0] * p[1]);
        let pair = decompose(&psi, 1e-10, 1.0).unwrap();
        assert!(pair.action.iter().all(|s| s.abs() < 1e-15));
    }

    #[test]
    fn mostly_empty_field_rejected() {
        let g = Grid::line(64, -40.0, 40.0).unwrap();
        let psi = Field::from_real_fn(g, |p| gauss(p[0], 0.5));
        assert!(matches!(decompose(&psi, 1e-6, 1.0), Err(PolarError::MostlyEmpty { .. })));
    }

    #[test]
    fn quantum_potential_constant_amplitude() {
        let g = Grid::line(32, 0.0, 1.0).unwrap();
        let a = Field::from_real_fn(g, |_| 2.0);
        let q = quantum_potential(&a, 1.0, 1.0, 1e-8);
        assert!(q.sup_norm() < 1e-12);
    }

    #[test]
    fn quantum_potential_of_gaussian() {
        let g = Grid::line(256, -16.0, 16.0).unwrap();
        let (s, m, hbar) = (1.0, 1.3, 0.8);
        let a = Field::from_real_fn(g, |p| (-p[0] * p[0] / (4.0 * s * s)).exp());
        let q = quantum_potential(&a, m, hbar, 1e-300);
        let mut worst: f64 = 0.0;
        for (i, p) in g.points().enumerate() {
            if a.values()[i].re > 1e-6 {
                let exact = hbar * hbar / (2.0 * m) * (1.0 / (2.0 * s * s) - p[0] * p[0] / (4.0 * s.powi(4)));
                worst = worst.max((q.values[i] - exact).abs());
            }
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn quantum_potential_of_cosine_mode() {
        let l = 10.0;
        let g = Grid::line(128, -l / 2.0, l / 2.0).unwrap();
        let a = Field::from_real_fn(g, |p| (PI * p[0] / l).cos().abs());
        let q = quantum_potential(&a, 1.0, 1.0, 1e-12);
        let exact = 0.5 * (PI / l).powi(2);
        // |cos| has a kink at the edges; check the interior only
        for (i, p) in g.points().enumerate() {
            if p[0].abs() < 0.25 * l {
                assert!((q.values[i] - exact).abs() < 1e-2, "{} vs {exact}", q.values[i]);
            }
        }
    }

    #[test]
    fn flags_low_amplitude_nodes() {
        let g = Grid::line(64, -20.0, 20.0).unwrap();
        let a = Field::from_real_fn(g, |p| gauss(p[0], 1.0));
        let q = quantum_potential(&a, 1.0, 1.0, 1e-6);
        let n_flag = q.flagged.iter().filter(|f| **f).count();
        assert!(n_flag > 0 && n_flag < 64);
        assert!(q.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn kinetic_identity() {
        let g = Grid::line(128, -10.0, 10.0).unwrap();
        let a = Field::from_real_fn(g, |p| 0.5 + gauss(p[0], 1.5));
        assert!(kinetic_identity_residual(&a, 1.0, 1.0, 1e-8) < 1e-10);
    }

    #[test]
    fn cross_term_completes_product_rule() {
        let l = 20.0;
        let g = Grid::line(256, -l / 2.0, l / 2.0).unwrap();
        let k = 2.0 * PI * 4.0 / l;
        let pair = PolarPair::from_fns(g, |p| 0.3 + gauss(p[0], 1.0), |p| k * p[0] + 0.4 * (2.0 * PI * p[0] / l).sin());
        assert!(cancellation_residual_with_cross_term(&pair, 1.0, 1.0, 1e-10) < 1e-8);
        // without the cross term the two sides differ whenever ∇A·∇S ≠ 0
        assert!(cancellation_residual(&pair, 1.0, 1.0, 1e-10) > 1e-2);
    }

    #[test]
    fn too_few_snapshots() {
        let g = Grid::line(16, 0.0, 1.0).unwrap();
        let f = Field::zeros(g);
        let spec = SolverSpec::quantum(1e-3);
        let h = vec![(0.0, f.clone()), (0.1, f)];
        assert_eq!(madelung_residuals(&h, &spec, true), Err(PolarError::TooFewSnapshots(2)));
    }
}
