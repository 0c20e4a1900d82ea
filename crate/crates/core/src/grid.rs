//! Uniform periodic grids in one or two dimensions and the complex fields
//! sampled on them.
//!
//! Storage is row-major: for a 2D grid the linear index of node `(i0, i1)` is
//! `i0 * n1 + i1`, so axis 1 is contiguous in memory.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub type C64 = Complex64;

/// Smallest admissible number of nodes along an axis.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid must have 1 or 2 dimensions, got {0}")]
    BadDims(usize),
    #[error("axis {axis}: need at least {MIN_POINTS} points, got {n}")]
    TooFewPoints { axis: usize, n: usize },
    #[error("axis {axis}: extent [{min}, {max}) is empty or not finite")]
    BadExtent { axis: usize, min: f64, max: f64 },
    #[error("axis {axis} out of range for a {dims}D grid")]
    AxisOutOfRange { axis: usize, dims: usize },
    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// One periodic axis covering `[min, max)` with `n` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

impl Axis {
    pub fn new(n: usize, min: f64, max: f64) -> Result<Self, GridError> {
        let axis = Axis { n, min, max };
        axis.check(0)?;
        Ok(axis)
    }

    fn check(&self, index: usize) -> Result<(), GridError> {
        if self.n < MIN_POINTS {
            return Err(GridError::TooFewPoints { axis: index, n: self.n });
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(GridError::BadExtent { axis: index, min: self.min, max: self.max });
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.max - self.min
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Angular wavenumbers in FFT order: `2π/L · [0, 1, …, n/2−1, −n/2, …, −1]`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let scale = 2.0 * PI / self.length();
        (0..self.n)
            .map(|j| {
                let m = if j < self.n.div_ceil(2) { j as isize } else { j as isize - self.n as isize };
                scale * m as f64
            })
            .collect()
    }

    /// Index of the node nearest to `x`, clamped to the axis.
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = ((x - self.min) / self.spacing()).round();
        i.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

#[derive(Serialize, Deserialize)]
struct GridDescriptor {
    axes: Vec<Axis>,
}

/// A uniform periodic grid of dimension 1 or 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridDescriptor", into = "GridDescriptor")]
pub struct Grid {
    dims: usize,
    axes: [Axis; 2],
}

impl TryFrom<GridDescriptor> for Grid {
    type Error = GridError;
    fn try_from(d: GridDescriptor) -> Result<Self, GridError> {
        Grid::from_axes(&d.axes)
    }
}

impl From<Grid> for GridDescriptor {
    fn from(g: Grid) -> Self {
        GridDescriptor { axes: g.axes().to_vec() }
    }
}

impl Grid {
    pub fn line(n: usize, min: f64, max: f64) -> Result<Self, GridError> {
        Grid::from_axes(&[Axis { n, min, max }])
    }

    pub fn plane(x: (usize, f64, f64), y: (usize, f64, f64)) -> Result<Self, GridError> {
        Grid::from_axes(&[Axis { n: x.0, min: x.1, max: x.2 }, Axis { n: y.0, min: y.1, max: y.2 }])
    }

    pub fn from_axes(axes: &[Axis]) -> Result<Self, GridError> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(GridError::BadDims(axes.len()));
        }
        for (i, a) in axes.iter().enumerate() {
            a.check(i)?;
        }
        let second = axes.get(1).copied().unwrap_or(Axis { n: 1, min: 0.0, max: 1.0 });
        Ok(Grid { dims: axes.len(), axes: [axes[0], second] })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes[..self.dims]
    }

    pub fn axis(&self, axis: usize) -> Result<&Axis, GridError> {
        self.axes().get(axis).ok_or(GridError::AxisOutOfRange { axis, dims: self.dims })
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.axes().iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `dx^dims`.
    pub fn cell_volume(&self) -> f64 {
        self.axes().iter().map(Axis::spacing).product()
    }

    /// Node counts as `(n0, n1)`, with `n1 = 1` on a line.
    pub fn shape(&self) -> (usize, usize) {
        if self.dims == 1 {
            (self.axes[0].n, 1)
        } else {
            (self.axes[0].n, self.axes[1].n)
        }
    }

    /// Coordinates of node `index`; the unused component is zero on a line.
    pub fn point(&self, index: usize) -> [f64; 2] {
        let (_, n1) = self.shape();
        if self.dims == 1 {
            [self.axes[0].coord(index), 0.0]
        } else {
            [self.axes[0].coord(index / n1), self.axes[1].coord(index % n1)]
        }
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Wavenumber vectors in the same storage order as the field values.
    pub fn wavevectors(&self) -> Vec<[f64; 2]> {
        let k0 = self.axes[0].wavenumbers();
        if self.dims == 1 {
            return k0.into_iter().map(|k| [k, 0.0]).collect();
        }
        let k1 = self.axes[1].wavenumbers();
        let mut out = Vec::with_capacity(self.len());
        for &a in &k0 {
            for &b in &k1 {
                out.push([a, b]);
            }
        }
        out
    }

    /// Centre of the domain along each axis.
    pub fn center(&self) -> [f64; 2] {
        let mut c = [0.0; 2];
        for (i, a) in self.axes().iter().enumerate() {
            c[i] = 0.5 * (a.min + a.max);
        }
        c
    }
}

/// Complex samples on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<C64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field { grid, values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> C64) -> Self {
        let values = grid.points().map(f).collect();
        Field { grid, values }
    }

    /// Real-valued field stored with zero imaginary part.
    pub fn from_real_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Field::from_fn(grid, |p| C64::new(f(p), 0.0))
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self, GridError> {
        Field::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `|f|` as a real field.
    pub fn modulus(&self) -> Field {
        self.map(|v| C64::new(v.norm(), 0.0))
    }

    /// `|f|²` as a plain vector.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Riemann sum `Σ f · dx^dims`.
    pub fn integrate(&self) -> C64 {
        self.values.iter().sum::<C64>() * self.grid.cell_volume()
    }

    /// `Σ |f|² · dx^dims`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, s: C64) -> Field {
        self.map(|v| v * s)
    }

    /// Returns a copy rescaled to unit norm; a zero field is returned unchanged.
    pub fn normalized(&self) -> Field {
        let n = self.norm();
        if n > 0.0 {
            self.scaled(C64::new(1.0 / n, 0.0))
        } else {
            self.clone()
        }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Result<Field, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid, values })
    }

    /// Grid L2 norm of `self − other`.
    pub fn l2_distance(&self, other: &Field) -> Result<f64, GridError> {
        Ok(self.zip_with(other, |a, b| a - b)?.norm())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
