//! Periodic grid on the unit cube, component-major fields and the
//! differential operators used throughout the crate.
//!
//! Storage order is fixed: component index slowest, then x3, x2, and x1
//! fastest. Grid values sit at x = i*h, i = 0..n-1.

pub(crate) mod ops;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ops::{
    curl_rowwise, div_tensor_rowwise, div_vector, grad_scalar, gradient, laplacian,
    leray_project, row_divergence,
};

/// Derivative backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Fourier collocation; exact for band-limited data below Nyquist.
    #[default]
    Spectral,
    /// Second-order central differences.
    Fd2,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Spectral => f.write_str("spectral"),
            Backend::Fd2 => f.write_str("fd2"),
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Backend::Spectral),
            "fd2" => Ok(Backend::Fd2),
            other => Err(Error::InvalidArgument(format!("unknown backend '{other}'"))),
        }
    }
}

/// Uniform periodic grid on (0,1)^3 with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub const MIN_POINTS: usize = 4;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_POINTS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} points per axis, got {n}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Quadrature weight of one grid point, h^3.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        let h = self.h();
        h * h * h
    }

    /// Number of grid points, n^3.
    #[inline]
    pub fn points(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        let n = self.n;
        (i3 % n * n + i2 % n) * n + i1 % n
    }

    /// Integer coordinates (i1, i2, i3) of a flat point index.
    #[inline]
    pub fn unflatten(&self, p: usize) -> [usize; 3] {
        let n = self.n;
        [p % n, (p / n) % n, p / (n * n)]
    }

    /// Physical coordinates of a flat point index.
    #[inline]
    pub fn coords(&self, p: usize) -> [f64; 3] {
        let [i1, i2, i3] = self.unflatten(p);
        let h = self.h();
        [i1 as f64 * h, i2 as f64 * h, i3 as f64 * h]
    }
}

/// Real field with `components` values per grid point, stored component-major.
///
/// Scalars have one component, vectors three, tensors nine (row-major,
/// component `3*i + j` holds entry `(i, j)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: PeriodicGrid,
    components: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: PeriodicGrid, components: usize) -> Self {
        Self {
            grid,
            components,
            data: vec![0.0; components * grid.points()],
        }
    }

    /// Builds a field from `f(component, x)`.
    pub fn from_fn(
        grid: PeriodicGrid,
        components: usize,
        mut f: impl FnMut(usize, [f64; 3]) -> f64,
    ) -> Self {
        let np = grid.points();
        let mut data = Vec::with_capacity(components * np);
        for c in 0..components {
            for p in 0..np {
                data.push(f(c, grid.coords(p)));
            }
        }
        Self {
            grid,
            components,
            data,
        }
    }

    pub fn constant(grid: PeriodicGrid, values: &[f64]) -> Self {
        Self::from_fn(grid, values.len(), |c, _| values[c])
    }

    pub fn from_vec(grid: PeriodicGrid, components: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != components * grid.points() {
            return Err(Error::InvalidField(format!(
                "expected {} values for {components} components on {}^3, got {}",
                components * grid.points(),
                grid.n(),
                data.len()
            )));
        }
        Ok(Self {
            grid,
            components,
            data,
        })
    }

    /// Stacks several fields of the same grid into one multi-component field.
    pub fn stack(parts: &[&Field]) -> Result<Self> {
        let grid = parts
            .first()
            .map(|f| f.grid)
            .ok_or_else(|| Error::InvalidArgument("nothing to stack".into()))?;
        let mut data = Vec::new();
        let mut components = 0;
        for f in parts {
            if f.grid != grid {
                return Err(Error::InvalidArgument("grid mismatch in stack".into()));
            }
            data.extend_from_slice(&f.data);
            components += f.components;
        }
        Ok(Self {
            grid,
            components,
            data,
        })
    }

    /// Copies components `range` into a new field.
    pub fn extract(&self, range: std::ops::Range<usize>) -> Field {
        let np = self.grid.points();
        Field {
            grid: self.grid,
            components: range.len(),
            data: self.data[range.start * np..range.end * np].to_vec(),
        }
    }

    #[inline]
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.components
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn comp(&self, c: usize) -> &[f64] {
        let np = self.grid.points();
        &self.data[c * np..(c + 1) * np]
    }

    #[inline]
    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let np = self.grid.points();
        &mut self.data[c * np..(c + 1) * np]
    }

    #[inline]
    pub fn at(&self, c: usize, p: usize) -> f64 {
        self.data[c * self.grid.points() + p]
    }

    #[inline]
    pub fn set(&mut self, c: usize, p: usize, value: f64) {
        let np = self.grid.points();
        self.data[c * np + p] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidField(format!("{what} contains non-finite values")))
        }
    }

    pub(crate) fn expect_components(&self, expected: usize, what: &str) -> Result<()> {
        if self.components == expected {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{what} needs {expected} components, got {}",
                self.components
            )))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Grid mean of one component.
    pub fn mean(&self, c: usize) -> f64 {
        self.comp(c).iter().sum::<f64>() / self.grid.points() as f64
    }

    /// Uniform-weight quadrature h^3 * sum of one component.
    pub fn integrate(&self, c: usize) -> f64 {
        self.comp(c).iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Largest pointwise Euclidean norm over all components.
    pub fn max_pointwise_norm(&self) -> f64 {
        let np = self.grid.points();
        (0..np)
            .map(|p| {
                (0..self.components)
                    .map(|c| self.data[c * np + p].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        assert_eq!(self.data.len(), other.data.len(), "field shape mismatch");
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.data {
            *x *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `a * self + b * other` as a new field.
    pub fn lincomb(&self, a: f64, other: &Field, b: f64) -> Field {
        assert_eq!(self.data.len(), other.data.len(), "field shape mismatch");
        Field {
            grid: self.grid,
            components: self.components,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// Max-norm of `self - other`.
    pub fn max_diff(&self, other: &Field) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "field shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}
