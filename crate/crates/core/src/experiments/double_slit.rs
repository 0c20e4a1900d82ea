use super::{edge_mass, ExperimentError, EDGE_BAND, EDGE_TOLERANCE};
use crate::grid::{Axis, Field, Grid, C64};
use crate::observables::{fringe_visibility, FringeReport, ObservableRow};
use crate::polar::PolarPair;
use crate::solvers::{evolve, superpose_classical_scaled, EvolutionState, EvolveOptions, SolverSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlitKind {
    Quantum,
    Classical,
}

/// Two-slit geometry on a 2D grid; axis 0 is the propagation direction `x`,
/// axis 1 the transverse direction `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlitConfig {
    /// Slit separation `d = y₂ − y₁`.
    pub d: f64,
    /// Midpoint of the two slits.
    pub y_center: f64,
    /// Transverse width (density standard deviation) of each slit packet.
    pub sigma_s: f64,
    /// Longitudinal width of the packet.
    pub sigma_x: f64,
    /// Slit plane.
    pub x_slit: f64,
    /// Distance from the slit plane to the screen.
    pub x_s: f64,
    pub k_x: f64,
    /// Transverse wavenumber of the monochromatic mode used for the
    /// classical relative phase `φ_cl = k̄_y·d`.
    pub k_y: f64,
    /// Transverse standard deviation of the intensity of the amplitude shared
    /// by the two classical packets.
    pub sigma_envelope: f64,
    pub hbar: f64,
    pub mass: f64,
    pub grid: Grid,
    pub dt_quantum: f64,
    pub dt_classical: f64,
    /// Relative amplitude floor of the classical coupling.
    pub coupling_floor: f64,
    /// Steps between recorded observables and boundary checks.
    pub stride: usize,
}

impl SlitConfig {
    /// 512² grid on `[0, 60) × [−15, 15)`, `k_x = 20`, `d = 4`, `x_s = 30`.
    pub fn standard() -> Self {
        SlitConfig {
            d: 4.0,
            y_center: 0.0,
            sigma_s: 0.3,
            sigma_x: 1.0,
            x_slit: 7.5,
            x_s: 30.0,
            k_x: 20.0,
            k_y: PI / 2.0,
            sigma_envelope: 2.0,
            hbar: 1.0,
            mass: 1.0,
            grid: Grid::plane((512, 0.0, 60.0), (512, -15.0, 15.0)).expect("valid grid"),
            dt_quantum: 1e-2,
            dt_classical: 5e-3,
            coupling_floor: 1e-3,
            stride: 25,
        }
    }

    pub fn with_d(&self, d: f64) -> Self {
        SlitConfig { d, ..self.clone() }
    }

    pub fn slits(&self) -> (f64, f64) {
        (self.y_center - 0.5 * self.d, self.y_center + 0.5 * self.d)
    }

    pub fn screen_x(&self) -> f64 {
        self.x_slit + self.x_s
    }

    /// Time for the packet centre to travel from the slits to the screen.
    pub fn flight_time(&self) -> f64 {
        self.mass * self.x_s / (self.hbar * self.k_x)
    }

    pub fn phi_cl(&self) -> f64 {
        self.k_y * self.d
    }

    /// Far-field fringe spacing `2π x_s/(k_x d)`.
    pub fn fraunhofer_spacing(&self) -> f64 {
        2.0 * PI * self.x_s / (self.k_x * self.d)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.grid.dims() != 2 {
            return bad("double slit needs a 2D grid");
        }
        for (name, v) in [
            ("sigma_s", self.sigma_s),
            ("sigma_x", self.sigma_x),
            ("sigma_envelope", self.sigma_envelope),
            ("x_s", self.x_s),
            ("k_x", self.k_x),
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("dt_quantum", self.dt_quantum),
            ("dt_classical", self.dt_classical),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.d > 4.0 * self.sigma_s) {
            return bad(&format!("slit packets overlap: d = {} ≤ 4σ_s = {}", self.d, 4.0 * self.sigma_s));
        }
        let (x, y) = (self.grid.axes()[0], self.grid.axes()[1]);
        let sx = self.screen_x();
        if !(sx > x.min && sx < x.max) {
            return bad(&format!("screen x = {sx} outside [{}, {})", x.min, x.max));
        }
        let (y1, y2) = self.slits();
        if y1 - 4.0 * self.sigma_s < y.min || y2 + 4.0 * self.sigma_s > y.max {
            return bad("slits too close to the transverse boundary");
        }
        let drift = 0.5 * self.hbar * self.k_y.abs() * self.flight_time() / self.mass;
        if self.y_center - drift - 6.0 * self.sigma_envelope < y.min || self.y_center + drift + 6.0 * self.sigma_envelope > y.max {
            return bad("classical envelope too wide for the transverse domain");
        }
        if self.x_slit - 4.0 * self.sigma_x < x.min {
            return bad("packet starts too close to the boundary");
        }
        Ok(())
    }

    fn spec(&self, kind: SlitKind) -> SolverSpec {
        let s = match kind {
            SlitKind::Quantum => SolverSpec::quantum(self.dt_quantum),
            SlitKind::Classical => {
                SolverSpec::classical_nonlinear(self.dt_classical).with_coupling_floor(self.coupling_floor)
            }
        };
        s.with_units(self.hbar, self.mass)
    }

    fn longitudinal(&self, x: f64) -> f64 {
        (-(x - self.x_slit).powi(2) / (4.0 * self.sigma_x * self.sigma_x)).exp()
    }

    /// Two disjoint slit packets moving along `x`.
    pub fn quantum_initial(&self) -> Field {
        let (y1, y2) = self.slits();
        let g = |y: f64, c: f64| (-(y - c).powi(2) / (4.0 * self.sigma_s * self.sigma_s)).exp();
        Field::from_fn(self.grid, |p| {
            C64::from_polar(self.longitudinal(p[0]) * (g(p[1], y1) + g(p[1], y2)), self.k_x * p[0])
        })
        .normalized()
    }

    /// Amplitude shared by the two classical packets: one Gaussian of width
    /// `sigma_envelope` spanning both slits. It starts half a drift `ℏk̄_yT/m`
    /// below the slit midpoint so the transverse motion stays symmetric about
    /// it.
    fn classical_envelope(&self) -> impl Fn([f64; 2]) -> f64 + '_ {
        let var = self.sigma_envelope * self.sigma_envelope;
        let y0 = self.y_center - 0.5 * self.hbar * self.k_y * self.flight_time() / self.mass;
        move |p| self.longitudinal(p[0]) * (-(p[1] - y0).powi(2) / (4.0 * var)).exp()
    }

    /// `(ψ₁ + ψ₂)/√2` with a common amplitude and phases
    /// `k_x x + k̄_y (y − y_j)`. With `in_phase` both packets use `y₁`, which
    /// gives the `φ_cl = 0` reference.
    pub fn classical_initial(&self, in_phase: bool) -> Result<Field, ExperimentError> {
        let (y1, y2) = self.slits();
        let y2 = if in_phase { y1 } else { y2 };
        let env = self.classical_envelope();
        let norm = Field::from_real_fn(self.grid, &env).norm();
        let hbar = self.hbar;
        let pair = |yj: f64| {
            PolarPair::from_fns(self.grid, |p| env(p) / norm, |p| hbar * (self.k_x * p[0] + self.k_y * (p[1] - yj)))
        };
        Ok(superpose_classical_scaled(&pair(y1), &pair(y2), 1e-12, hbar, std::f64::consts::FRAC_1_SQRT_2)?)
    }
}

#[derive(Clone, Debug)]
pub struct DoubleSlitResult {
    pub kind: SlitKind,
    pub config: SlitConfig,
    /// `|ψ(x_s, y, T)|²` on the transverse axis.
    pub screen: Field,
    pub screen_x: f64,
    pub t_final: f64,
    /// Relative phase of the two classical packets.
    pub phi_cl: Option<f64>,
    /// `None` when the screen intensity vanishes.
    pub fringes: Option<FringeReport>,
    pub fringe_spacing: Option<f64>,
    pub expected_spacing: f64,
    pub total_intensity: f64,
    pub observables: Vec<ObservableRow>,
    /// Initial and final states.
    pub snapshots: Vec<(f64, Field)>,
}

/// Local maxima above 5% of the peak, refined by parabolic interpolation;
/// returns the mean distance from the strongest maximum to its neighbours.
pub fn fringe_spacing(screen: &Field) -> Option<f64> {
    let axis = screen.grid().axes()[0];
    let v: Vec<f64> = screen.values().iter().map(|c| c.re).collect();
    let peak = v.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return None;
    }
    let h = axis.spacing();
    let maxima: Vec<(f64, f64)> = (1..v.len() - 1)
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > 0.05 * peak)
        .map(|i| {
            let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
            let den = a - 2.0 * b + c;
            let off = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            (axis.coord(i) + off * h, b)
        })
        .collect();
    let center = maxima.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?.0;
    if center == 0 || center + 1 >= maxima.len() {
        return None;
    }
    Some(0.5 * (maxima[center + 1].0 - maxima[center - 1].0))
}

fn screen_of(psi: &Field, x: f64) -> Result<Field, ExperimentError> {
    let g = psi.grid();
    let (ax, ay) = (g.axes()[0], g.axes()[1]);
    let i = ax.nearest_index(x);
    let n1 = ay.n;
    let line = Grid::from_axes(&[Axis::new(ay.n, ay.min, ay.max)?])?;
    let vals: Vec<f64> = psi.values()[i * n1..(i + 1) * n1].iter().map(|v| v.norm_sqr()).collect();
    Ok(Field::from_real(line, &vals)?)
}

/// Evolves the two-slit state of the given kind to the screen and analyses
/// the transverse intensity there.
pub fn run_double_slit(config: &SlitConfig, kind: SlitKind) -> Result<DoubleSlitResult, ExperimentError> {
    run_inner(config, kind, false)
}

fn run_inner(config: &SlitConfig, kind: SlitKind, in_phase: bool) -> Result<DoubleSlitResult, ExperimentError> {
    config.validate()?;
    let spec = config.spec(kind);
    let psi0 = match kind {
        SlitKind::Quantum => config.quantum_initial(),
        SlitKind::Classical => config.classical_initial(in_phase)?,
    };
    let t_final = config.flight_time();
    if kind == SlitKind::Classical && psi0.norm_sqr() < VANISHING_NORM {
        return Ok(vanishing_run(config, in_phase, psi0, t_final)?);
    }
    let mut worst = (0.0, 0.0);
    let mut last: Option<(f64, Field)> = None;
    let mut watch = |s: &EvolutionState, sp: &SolverSpec| {
        let f = s.to_field(sp.hbar);
        let m = edge_mass(&f, EDGE_BAND);
        if m > worst.1 {
            worst = (s.t, m);
        }
        last = Some((s.t, f));
    };
    let opts = EvolveOptions { stride: config.stride.max(1), keep_snapshots: false, record_observables: true };
    let history = evolve(&EvolutionState::wave(0.0, psi0.clone()), &spec, t_final, opts, &mut [&mut watch])?;
    if worst.1 > EDGE_TOLERANCE {
        return Err(ExperimentError::DomainBreach { t: worst.0, mass: worst.1 });
    }
    let (tf, psi) = last.expect("final state observed");
    let screen = screen_of(&psi, config.screen_x())?;
    let screen_x = config.grid.axes()[0].coord(config.grid.axes()[0].nearest_index(config.screen_x()));
    let total_intensity = screen.integrate().re;
    let expected_spacing = config.fraunhofer_spacing();
    let fringes = if total_intensity > 0.0 {
        Some(fringe_visibility(&screen, 2.0 * PI / expected_spacing)?)
    } else {
        None
    };
    Ok(DoubleSlitResult {
        kind,
        config: config.clone(),
        fringe_spacing: fringe_spacing(&screen),
        screen,
        screen_x,
        t_final: tf,
        phi_cl: (kind == SlitKind::Classical).then(|| if in_phase { 0.0 } else { config.phi_cl() }),
        fringes,
        expected_spacing,
        total_intensity,
        observables: history.observables,
        snapshots: vec![(0.0, psi0), (tf, psi)],
    })
}

/// Classical superpositions with `∫|ψ|² <` this are destructive to rounding:
/// what remains is noise rather than a scaled copy of the packet.
const VANISHING_NORM: f64 = 1e-20;

/// The classical flow is homogeneous in `ψ`, so the zero state stays zero.
fn vanishing_run(config: &SlitConfig, in_phase: bool, psi0: Field, t_final: f64) -> Result<DoubleSlitResult, ExperimentError> {
    let zero = Field::zeros(config.grid);
    let screen = screen_of(&zero, config.screen_x())?;
    let ax = config.grid.axes()[0];
    Ok(DoubleSlitResult {
        kind: SlitKind::Classical,
        config: config.clone(),
        fringe_spacing: None,
        screen,
        screen_x: ax.coord(ax.nearest_index(config.screen_x())),
        t_final,
        phi_cl: Some(if in_phase { 0.0 } else { config.phi_cl() }),
        fringes: None,
        expected_spacing: config.fraunhofer_spacing(),
        total_intensity: 0.0,
        observables: Vec::new(),
        snapshots: vec![(0.0, psi0), (t_final, zero)],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub d: f64,
    pub phi_cl: f64,
    /// Screen intensity relative to the in-phase run with the same envelope.
    pub total_intensity: f64,
    pub spectral_peak: f64,
}

/// Classical runs over slit separations; each is normalised by an in-phase
/// run sharing its envelope. Rows come back in the order of `d_values`.
pub fn scan_slit_distance(config: &SlitConfig, d_values: &[f64]) -> Result<Vec<ScanRow>, ExperimentError> {
    let jobs: Vec<(usize, bool)> = (0..d_values.len()).flat_map(|i| [(i, false), (i, true)]).collect();
    let runs: Vec<DoubleSlitResult> = jobs
        .par_iter()
        .map(|&(i, in_phase)| run_inner(&config.with_d(d_values[i]), SlitKind::Classical, in_phase))
        .collect::<Result<_, _>>()?;
    Ok(runs
        .chunks(2)
        .zip(d_values)
        .map(|(pair, &d)| {
            let (run, reference) = (&pair[0], &pair[1]);
            ScanRow {
                d,
                phi_cl: run.phi_cl.unwrap_or(0.0),
                total_intensity: run.total_intensity / reference.total_intensity,
                spectral_peak: run.fringes.map_or(0.0, |f| f.spectral_peak),
            }
        })
        .collect())
}
