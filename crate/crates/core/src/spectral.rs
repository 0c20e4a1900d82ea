//! Fourier calculus on periodic grids.
//!
//! Forward transforms are unnormalised; inverse transforms divide by the node
//! count, so `inverse(forward(f)) == f` up to rounding.

use crate::grid::{Field, Grid, GridError, C64};
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

fn transform(grid: &Grid, data: &mut [C64], inverse: bool) {
    let (n0, n1) = grid.shape();
    debug_assert_eq!(data.len(), n0 * n1);
    if grid.dims() == 1 {
        plan(n0, inverse).process(data);
    } else {
        // rows are contiguous; columns go through a transpose
        plan(n1, inverse).process(data);
        let mut t = vec![C64::new(0.0, 0.0); data.len()];
        transpose(data, &mut t, n0, n1);
        plan(n0, inverse).process(&mut t);
        transpose(&t, data, n1, n0);
    }
    if inverse {
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    const B: usize = 32;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Unnormalised forward DFT in place.
pub fn forward(grid: &Grid, data: &mut [C64]) {
    transform(grid, data, false);
}

/// Normalised inverse DFT in place.
pub fn inverse(grid: &Grid, data: &mut [C64]) {
    transform(grid, data, true);
}

/// Applies the Fourier multiplier `symbol(k)` to `f`.
pub fn apply_symbol(f: &Field, symbol: impl Fn([f64; 2]) -> C64) -> Field {
    let grid = *f.grid();
    let mut data = f.values().to_vec();
    forward(&grid, &mut data);
    for (v, k) in data.iter_mut().zip(grid.wavevectors()) {
        *v *= symbol(k);
    }
    inverse(&grid, &mut data);
    Field::new(grid, data).expect("length preserved")
}

fn nyquist(grid: &Grid, axis: usize) -> f64 {
    let a = grid.axes()[axis];
    if a.n % 2 == 0 {
        -std::f64::consts::PI * a.n as f64 / a.length()
    } else {
        f64::NAN
    }
}

/// Spectral first derivative along `axis`. The Nyquist mode is dropped so
/// real input gives real output.
pub fn gradient(f: &Field, axis: usize) -> Result<Field, GridError> {
    f.grid().axis(axis)?;
    let kn = nyquist(f.grid(), axis);
    Ok(apply_symbol(f, |k| if k[axis] == kn { C64::new(0.0, 0.0) } else { C64::new(0.0, k[axis]) }))
}

/// Spectral Laplacian `Σ_axes ∂²f/∂axis²`.
pub fn laplacian(f: &Field) -> Field {
    apply_symbol(f, |k| C64::new(-(k[0] * k[0] + k[1] * k[1]), 0.0))
}

/// Periodic translation `f(x) → f(x − shift)` along `axis`, exact for
/// band-limited fields.
pub fn translate(f: &Field, axis: usize, shift: f64) -> Result<Field, GridError> {
    f.grid().axis(axis)?;
    Ok(apply_symbol(f, |k| C64::from_polar(1.0, -k[axis] * shift)))
}

/// Finite-difference weights for derivatives of order `0..=m` at `at`, using
/// the given nodes (Fornberg's recursion). Returns `weights[order][node]`.
pub fn fornberg_weights(nodes: &[f64], at: f64, m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - at;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - at;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

const EDGE_STENCIL: usize = 6;

/// First and second derivatives of one line of real samples that need not be
/// periodic. A cubic with the boundary jumps of `f`, `f'`, `f''` (estimated by
/// one-sided extrapolation) is removed first; the remainder is differentiated
/// spectrally and the cubic is differentiated exactly.
fn aperiodic_line(line: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = line.len();
    let l = n as f64 * h;
    let k = EDGE_STENCIL.min(n);
    let head: Vec<f64> = (0..k).map(|i| i as f64).collect();
    let tail: Vec<f64> = ((n - k)..n).map(|i| i as f64).collect();
    let wl = fornberg_weights(&head, 0.0, 2);
    let wr = fornberg_weights(&tail, n as f64, 2);
    let dot = |w: &[f64], vals: &[f64]| w.iter().zip(vals).map(|(a, b)| a * b).sum::<f64>();
    let left = &line[..k];
    let right = &line[n - k..];
    let j0 = dot(&wr[0], right) - dot(&wl[0], left);
    let j1 = (dot(&wr[1], right) - dot(&wl[1], left)) / h;
    let j2 = (dot(&wr[2], right) - dot(&wl[2], left)) / (h * h);

    let c3 = j2 / (6.0 * l);
    let c2 = (j1 - 3.0 * c3 * l * l) / (2.0 * l);
    let c1 = (j0 - c2 * l * l - c3 * l * l * l) / l;

    let mut rem: Vec<C64> = (0..n)
        .map(|i| {
            let s = i as f64 * h;
            C64::new(line[i] - (c1 * s + c2 * s * s + c3 * s * s * s), 0.0)
        })
        .collect();
    let fwd = plan(n, false);
    let inv = plan(n, true);
    fwd.process(&mut rem);
    let scale = 2.0 * std::f64::consts::PI / l;
    let mut d1 = rem.clone();
    let mut d2 = rem;
    for j in 0..n {
        let m = if j < n.div_ceil(2) { j as f64 } else { j as f64 - n as f64 };
        let kk = scale * m;
        let nyq = n % 2 == 0 && j == n / 2;
        d1[j] *= if nyq { C64::new(0.0, 0.0) } else { C64::new(0.0, kk) };
        d2[j] *= -kk * kk;
    }
    inv.process(&mut d1);
    inv.process(&mut d2);
    let norm = 1.0 / n as f64;
    let first = (0..n)
        .map(|i| {
            let s = i as f64 * h;
            d1[i].re * norm + c1 + 2.0 * c2 * s + 3.0 * c3 * s * s
        })
        .collect();
    let second = (0..n)
        .map(|i| {
            let s = i as f64 * h;
            d2[i].re * norm + 2.0 * c2 + 6.0 * c3 * s
        })
        .collect();
    (first, second)
}

/// First and second derivatives along `axis` of a real, possibly
/// non-periodic field such as an unwrapped action.
pub fn aperiodic_derivatives(values: &[f64], grid: &Grid, axis: usize) -> Result<(Vec<f64>, Vec<f64>), GridError> {
    let a = *grid.axis(axis)?;
    if values.len() != grid.len() {
        return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
    }
    let h = a.spacing();
    let (n0, n1) = grid.shape();
    let mut d1 = vec![0.0; values.len()];
    let mut d2 = vec![0.0; values.len()];
    if axis == grid.dims() - 1 {
        for (row, chunk) in values.chunks(a.n).enumerate() {
            let (f, s) = aperiodic_line(chunk, h);
            let off = row * chunk.len();
            d1[off..off + chunk.len()].copy_from_slice(&f);
            d2[off..off + chunk.len()].copy_from_slice(&s);
        }
    } else {
        for col in 0..n1 {
            let line: Vec<f64> = (0..n0).map(|r| values[r * n1 + col]).collect();
            let (f, s) = aperiodic_line(&line, h);
            for r in 0..n0 {
                d1[r * n1 + col] = f[r];
                d2[r * n1 + col] = s[r];
            }
        }
    }
    Ok((d1, d2))
}
