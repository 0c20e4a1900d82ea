//! Rays and Bohmian paths `dx/dt = ∇S/m` integrated through a stored field
//! history, with force-law, transport and non-crossing checks.

use crate::grid::{Field, Grid};
use crate::io::fmt_f64;
use crate::polar::{amplitude_floor, quantum_potential};
use crate::solvers::SolverSpec;
use crate::spectral;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("seed {seed} reaches amplitude {amplitude:.3e} (floor {floor:.3e}) at t = {t}")]
    PathThroughNode { seed: usize, t: f64, amplitude: f64, floor: f64 },
    #[error("need at least {needed} seeds, got {got}")]
    TooFewSeeds { needed: usize, got: usize },
    #[error("need at least 2 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error("snapshots are not on a common grid")]
    GridMismatch,
    #[error("density has no mass")]
    EmptyDensity,
    #[error("operation needs a 1D grid")]
    NotOneDimensional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    ClassicalRay,
    Bohmian,
}

/// Paths sampled on the history's time grid. A path that leaves the central
/// 90% of the domain stops; it then has fewer samples than `times`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    pub seeds: Vec<[f64; 2]>,
    pub paths: Vec<Vec<[f64; 2]>>,
}

impl TrajectorySet {
    /// Paths that reached the last sample time.
    pub fn complete(&self) -> impl Iterator<Item = &Vec<[f64; 2]>> {
        self.paths.iter().filter(move |p| p.len() == self.times.len())
    }

    /// CSV with columns `seed_id,t,x[,y]`.
    pub fn write_csv<W: Write>(&self, mut w: W, dims: usize) -> io::Result<()> {
        writeln!(w, "{}", if dims == 2 { "seed_id,t,x,y" } else { "seed_id,t,x" })?;
        for (id, path) in self.paths.iter().enumerate() {
            for (t, x) in self.times.iter().zip(path) {
                if dims == 2 {
                    writeln!(w, "{id},{},{},{}", fmt_f64(*t), fmt_f64(x[0]), fmt_f64(x[1]))?;
                } else {
                    writeln!(w, "{id},{},{}", fmt_f64(*t), fmt_f64(x[0]))?;
                }
            }
        }
        Ok(())
    }
}

/// Four-point Lagrange stencil on a periodic axis: base index and weights.
fn stencil(axis: &crate::grid::Axis, x: f64) -> ([usize; 4], [f64; 4]) {
    let h = axis.spacing();
    let u = (x - axis.min) / h;
    let i = u.floor();
    let s = u - i;
    let n = axis.n as isize;
    let i = i as isize;
    let idx = [-1isize, 0, 1, 2].map(|o| (i + o).rem_euclid(n) as usize);
    let w = [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ];
    (idx, w)
}

/// Cubic interpolation of several real grid channels at one point.
fn interpolate<const C: usize>(grid: &Grid, data: &[[f64; C]], x: [f64; 2]) -> [f64; C] {
    let mut out = [0.0; C];
    let (i0, w0) = stencil(&grid.axes()[0], x[0]);
    if grid.dims() == 1 {
        for (i, w) in i0.iter().zip(w0) {
            for c in 0..C {
                out[c] += w * data[*i][c];
            }
        }
        return out;
    }
    let (i1, w1) = stencil(&grid.axes()[1], x[1]);
    let n1 = grid.axes()[1].n;
    for (a, wa) in i0.iter().zip(w0) {
        for (b, wb) in i1.iter().zip(w1) {
            let v = &data[a * n1 + b];
            for c in 0..C {
                out[c] += wa * wb * v[c];
            }
        }
    }
    out
}

/// Per-node `[v_0, v_1, |ψ|]` with `v = (ℏ/m) Im(ψ*∇ψ)/|ψ|²`, i.e. `∇S/m`.
fn velocity_channels(psi: &Field, spec: &SolverSpec) -> Vec<[f64; 3]> {
    let grid = psi.grid();
    let grads: Vec<Field> = (0..grid.dims()).map(|a| spectral::gradient(psi, a).expect("axis")).collect();
    psi.values()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let r = p.norm_sqr();
            let mut out = [0.0, 0.0, p.norm()];
            if r > 0.0 {
                for (a, g) in grads.iter().enumerate() {
                    out[a] = spec.hbar / spec.mass * (p.conj() * g.values()[i]).im / r;
                }
            }
            out
        })
        .collect()
}

fn lagrange_weights(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            nodes.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &tk)| (t - tk) / (nodes[j] - tk)).product()
        })
        .collect()
}

fn inside(grid: &Grid, x: [f64; 2]) -> bool {
    grid.axes().iter().enumerate().all(|(a, ax)| {
        let margin = 0.05 * ax.length();
        x[a] >= ax.min + margin && x[a] <= ax.max - margin
    })
}

struct VelocityHistory<'a> {
    grid: Grid,
    times: &'a [f64],
    channels: Vec<Vec<[f64; 3]>>,
}

impl VelocityHistory<'_> {
    fn at_snapshot(&self, j: usize, x: [f64; 2]) -> [f64; 3] {
        interpolate(&self.grid, &self.channels[j], x)
    }

    /// Velocity at a time inside `[t_j, t_{j+1}]` by four-point Lagrange
    /// interpolation over the neighbouring snapshots.
    fn between(&self, j: usize, t: f64, x: [f64; 2]) -> [f64; 2] {
        let n = self.times.len();
        let lo = j.saturating_sub(1).min(n.saturating_sub(4));
        let hi = (lo + 4).min(n);
        let w = lagrange_weights(&self.times[lo..hi], t);
        let mut v = [0.0; 2];
        for (k, wk) in (lo..hi).zip(w) {
            let c = self.at_snapshot(k, x);
            v[0] += wk * c[0];
            v[1] += wk * c[1];
        }
        v
    }
}

fn axpy2(x: [f64; 2], a: f64, v: [f64; 2]) -> [f64; 2] {
    [x[0] + a * v[0], x[1] + a * v[1]]
}

/// Integrates `dx/dt = ∇S/m` from each seed through the history with RK4 on
/// the snapshot times. `kind` only labels the set; the velocity always comes
/// from the phase of the stored fields.
pub fn integrate_rays(
    history: &[(f64, Field)],
    seeds: &[[f64; 2]],
    spec: &SolverSpec,
    kind: TrajectoryKind,
) -> Result<TrajectorySet, TrajectoryError> {
    if history.len() < 2 {
        return Err(TrajectoryError::TooFewSnapshots(history.len()));
    }
    let grid = *history[0].1.grid();
    if history.iter().any(|(_, f)| *f.grid() != grid) {
        return Err(TrajectoryError::GridMismatch);
    }
    let times: Vec<f64> = history.iter().map(|(t, _)| *t).collect();
    let channels: Vec<Vec<[f64; 3]>> = history.par_iter().map(|(_, f)| velocity_channels(f, spec)).collect();
    let floors: Vec<f64> = channels
        .iter()
        .map(|c| {
            let a: Vec<f64> = c.iter().map(|v| v[2]).collect();
            10.0 * amplitude_floor(&a, spec.eps)
        })
        .collect();
    let vh = VelocityHistory { grid, times: &times, channels };

    let paths: Result<Vec<Vec<[f64; 2]>>, TrajectoryError> = seeds
        .par_iter()
        .enumerate()
        .map(|(id, &seed)| {
            let mut path = vec![seed];
            let mut x = seed;
            for j in 0..times.len() - 1 {
                let amp = vh.at_snapshot(j, x)[2];
                if amp <= floors[j] {
                    return Err(TrajectoryError::PathThroughNode { seed: id, t: times[j], amplitude: amp, floor: floors[j] });
                }
                let (t0, t1) = (times[j], times[j + 1]);
                let h = t1 - t0;
                let c1 = vh.at_snapshot(j, x);
                let k1 = [c1[0], c1[1]];
                let tm = t0 + 0.5 * h;
                let k2 = vh.between(j, tm, axpy2(x, 0.5 * h, k1));
                let k3 = vh.between(j, tm, axpy2(x, 0.5 * h, k2));
                let c4 = vh.at_snapshot(j + 1, axpy2(x, h, k3));
                let k4 = [c4[0], c4[1]];
                for a in 0..2 {
                    x[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
                }
                if grid.dims() == 1 {
                    x[1] = 0.0;
                }
                if !inside(&grid, x) {
                    break;
                }
                path.push(x);
            }
            Ok(path)
        })
        .collect();
    Ok(TrajectorySet { kind, times, seeds: seeds.to_vec(), paths: paths? })
}

/// `∇S/m` interpolated along every path at its sample times.
pub fn velocities_along(traj: &TrajectorySet, history: &[(f64, Field)], spec: &SolverSpec) -> Vec<Vec<[f64; 2]>> {
    let channels: Vec<Vec<[f64; 3]>> = history.par_iter().map(|(_, f)| velocity_channels(f, spec)).collect();
    let grid = *history[0].1.grid();
    traj.paths
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(j, x)| {
                    let c = interpolate(&grid, &channels[j], *x);
                    [c[0], c[1]]
                })
                .collect()
        })
        .collect()
}

/// Fourth-order central differences of a real grid function along `axis`.
/// Local, so it stays accurate for non-periodic profiles such as `Q`.
fn fd_gradient(values: &[f64], grid: &Grid, axis: usize) -> Vec<f64> {
    let n1 = grid.shape().1;
    let h = grid.axes()[axis].spacing();
    let n = grid.axes()[axis].n as isize;
    let at = |i: usize, o: isize| -> f64 {
        let (r, c) = if grid.dims() == 1 { (i, 0) } else { (i / n1, i % n1) };
        if axis == 0 {
            let r = (r as isize + o).rem_euclid(n) as usize;
            if grid.dims() == 1 { values[r] } else { values[r * n1 + c] }
        } else {
            let c = (c as isize + o).rem_euclid(n) as usize;
            values[r * n1 + c]
        }
    };
    (0..values.len())
        .map(|i| (at(i, -2) - 8.0 * at(i, -1) + 8.0 * at(i, 1) - at(i, 2)) / (12.0 * h))
        .collect()
}

/// Force field `−∇V` (plus `−∇Q` for Bohmian paths) at one snapshot.
fn force_channels(psi: &Field, t: f64, spec: &SolverSpec, kind: TrajectoryKind) -> Vec<[f64; 2]> {
    let grid = *psi.grid();
    let mut force: Vec<[f64; 2]> = spec.potential.gradient(&grid, spec.mass, t).into_iter().map(|g| [-g[0], -g[1]]).collect();
    if kind == TrajectoryKind::Bohmian {
        let amp = psi.modulus();
        let a: Vec<f64> = amp.values().iter().map(|v| v.re).collect();
        let q = quantum_potential(&amp, spec.mass, spec.hbar, amplitude_floor(&a, spec.eps)).values;
        for ax in 0..grid.dims() {
            for (f, g) in force.iter_mut().zip(fd_gradient(&q, &grid, ax)) {
                f[ax] -= g;
            }
        }
    }
    force
}

/// Largest `|m·ẍ − F|` over all interior path samples, with `ẍ` from central
/// differences on the time grid and `F = −∇V` (classical rays) or
/// `−∇(V + Q)` (Bohmian paths).
pub fn verify_force_law(traj: &TrajectorySet, history: &[(f64, Field)], spec: &SolverSpec) -> f64 {
    let grid = *history[0].1.grid();
    let forces: Vec<Vec<[f64; 2]>> =
        history.par_iter().map(|(t, f)| force_channels(f, *t, spec, traj.kind)).collect();
    let t = &traj.times;
    traj.paths
        .par_iter()
        .map(|p| {
            let mut worst: f64 = 0.0;
            for j in 1..p.len().saturating_sub(1) {
                let (h0, h1) = (t[j] - t[j - 1], t[j + 1] - t[j]);
                let f = interpolate(&grid, &forces[j], p[j]);
                for a in 0..grid.dims() {
                    let acc = 2.0 * (h0 * p[j + 1][a] - (h0 + h1) * p[j][a] + h1 * p[j - 1][a]) / (h0 * h1 * (h0 + h1));
                    worst = worst.max((spec.mass * acc - f[a]).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Inverse-CDF sampling of `|ψ|²` treated as piecewise constant on the grid
/// cells; deterministic in `seed`.
pub fn sample_seeds(psi: &Field, count: usize, seed: u64) -> Result<Vec<[f64; 2]>, TrajectoryError> {
    let grid = *psi.grid();
    let rho = psi.density();
    let mut cdf = Vec::with_capacity(rho.len());
    let mut acc = 0.0;
    for r in &rho {
        acc += r;
        cdf.push(acc);
    }
    if acc <= 0.0 {
        return Err(TrajectoryError::EmptyDensity);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dx: Vec<f64> = grid.axes().iter().map(|a| a.spacing()).collect();
    Ok((0..count)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            let i = cdf.partition_point(|&c| c < u).min(rho.len() - 1);
            let below = if i == 0 { 0.0 } else { cdf[i - 1] };
            let frac = if rho[i] > 0.0 { (u - below) / rho[i] } else { 0.5 };
            let p = grid.point(i);
            let mut x = [p[0] + (frac - 0.5) * dx[0], 0.0];
            if grid.dims() == 2 {
                x[1] = p[1] + (rng.random::<f64>() - 0.5) * dx[1];
            }
            x
        })
        .collect())
}

/// Kolmogorov–Smirnov distance between the endpoints of the complete paths
/// and the final density of the history, along axis 0.
pub fn verify_transport(traj: &TrajectorySet, history: &[(f64, Field)]) -> Result<f64, TrajectoryError> {
    const MIN_SEEDS: usize = 100;
    let mut ends: Vec<f64> = traj.complete().map(|p| p[p.len() - 1][0]).collect();
    if ends.len() < MIN_SEEDS {
        return Err(TrajectoryError::TooFewSeeds { needed: MIN_SEEDS, got: ends.len() });
    }
    let last = &history.last().ok_or(TrajectoryError::TooFewSnapshots(0))?.1;
    let grid = *last.grid();
    let ax = grid.axes()[0];
    let (n0, n1) = grid.shape();
    let rho = last.density();
    let marginal: Vec<f64> = (0..n0).map(|i| rho[i * n1..(i + 1) * n1].iter().sum()).collect();
    let total: f64 = marginal.iter().sum();
    if total <= 0.0 {
        return Err(TrajectoryError::EmptyDensity);
    }
    let mut cdf = vec![0.0; n0 + 1];
    for i in 0..n0 {
        cdf[i + 1] = cdf[i] + marginal[i] / total;
    }
    let h = ax.spacing();
    let model = |x: f64| -> f64 {
        let u = (x - ax.min) / h + 0.5;
        if u <= 0.0 {
            return 0.0;
        }
        if u >= n0 as f64 {
            return 1.0;
        }
        let i = u.floor() as usize;
        cdf[i] + (u - i as f64) * (cdf[i + 1] - cdf[i])
    };
    ends.sort_by(f64::total_cmp);
    let n = ends.len() as f64;
    Ok(ends
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = model(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max))
}

/// Outcome of the 1D non-crossing check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingReport {
    /// Smallest adjacent separation seen at any common time.
    pub min_separation: f64,
    /// Smallest ratio of separation to its threshold; above 1 means pass.
    pub min_margin: f64,
    pub order_preserved: bool,
}

impl CrossingReport {
    pub fn passed(&self) -> bool {
        self.order_preserved && self.min_margin > 1.0
    }
}

/// Checks that paths keep their initial order along axis 0 and that each
/// adjacent pair stays farther apart than `min(dx, initial gap)/10`.
pub fn check_non_crossing(traj: &TrajectorySet, dx: f64) -> Result<CrossingReport, TrajectoryError> {
    let mut order: Vec<usize> = (0..traj.paths.len()).collect();
    order.sort_by(|&a, &b| traj.seeds[a][0].total_cmp(&traj.seeds[b][0]));
    let mut report = CrossingReport { min_separation: f64::INFINITY, min_margin: f64::INFINITY, order_preserved: true };
    for w in order.windows(2) {
        let (a, b) = (&traj.paths[w[0]], &traj.paths[w[1]]);
        let gap0 = b[0][0] - a[0][0];
        let threshold = gap0.min(dx) / 10.0;
        for j in 0..a.len().min(b.len()) {
            let gap = b[j][0] - a[j][0];
            if gap <= 0.0 {
                report.order_preserved = false;
            }
            report.min_separation = report.min_separation.min(gap);
            if threshold > 0.0 {
                report.min_margin = report.min_margin.min(gap / threshold);
            }
        }
    }
    Ok(report)
}

/// Seeds at the given positions along axis 0.
pub fn line_seeds(xs: &[f64]) -> Vec<[f64; 2]> {
    xs.iter().map(|&x| [x, 0.0]).collect()
}
