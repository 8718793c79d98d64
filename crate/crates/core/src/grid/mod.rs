//! Uniform vertex-centred rectangular grid and node-collocated fields.
//!
//! Nodes are stored row-major with `x` varying fastest: node `(i, j)` has
//! index `j * (nx + 1) + i` and sits at `(i * hx, j * hy)`.

mod bmo;
mod norms;
mod ops;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bmo::{bmo_norm, bmo_seminorm, default_radii};
pub use norms::{inner, norm, sobolev_norm, NormKind, Normed};
pub use ops::{d2_dx2, d2_dxdy, d2_dy2, d_dx, d_dy, div, grad, laplacian, vector_laplacian};

/// Uniform grid over `[0, lx] x [0, ly]` with `nx x ny` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells per direction, got {nx} x {ny}"
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// `n x n` cells on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Largest spacing.
    pub fn h(&self) -> f64 {
        self.hx().max(self.hy())
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Nodes per row.
    pub fn row_len(&self) -> usize {
        self.nx + 1
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn ij(&self, index: usize) -> (usize, usize) {
        (index % (self.nx + 1), index / (self.nx + 1))
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx {
            self.lx
        } else {
            i as f64 * self.hx()
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny {
            self.ly
        } else {
            j as f64 * self.hy()
        }
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    pub fn is_boundary_index(&self, index: usize) -> bool {
        let (i, j) = self.ij(index);
        self.is_boundary(i, j)
    }

    /// Trapezoid quadrature weight of a node (cell area scaled by 1/2 on
    /// edges and 1/4 in corners).
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let cx = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
        let cy = if j == 0 || j == self.ny { 0.5 } else { 1.0 };
        cx * cy * self.hx() * self.hy()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|k| {
                let (i, j) = self.ij(k);
                self.weight(i, j)
            })
            .collect()
    }

    /// Interior nodes in row-major order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.ny).flat_map(move |j| (1..self.nx).map(move |i| (i, j)))
    }

    pub fn interior_count(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    /// Coarsens or refines the cell counts by an integer factor.
    pub fn with_cells(&self, nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, self.lx, self.ly)
    }

    /// Clamps a point into the closed domain; returns whether it moved.
    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64, bool) {
        let cx = x.clamp(0.0, self.lx);
        let cy = y.clamp(0.0, self.ly);
        (cx, cy, cx != x || cy != y)
    }

    /// Locates the cell containing `(x, y)` (clamped) with local coordinates
    /// in `[0, 1]`.
    #[inline]
    pub(crate) fn locate(&self, x: f64, y: f64) -> (usize, usize, f64, f64) {
        let sx = (x / self.hx()).clamp(0.0, self.nx as f64);
        let sy = (y / self.hy()).clamp(0.0, self.ny as f64);
        let i = (sx.floor() as usize).min(self.nx - 1);
        let j = (sy.floor() as usize).min(self.ny - 1);
        (i, j, sx - i as f64, sy - j as f64)
    }
}

/// A real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at node {k}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.node_count()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|k| {
                let (i, j) = grid.ij(k);
                f(grid.x(i), grid.y(j))
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self::from_vec(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoid-rule integral over the domain.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let (i, j) = self.grid.ij(k);
                self.grid.weight(i, j) * v
            })
            .sum()
    }

    /// Largest absolute value over boundary nodes.
    pub fn max_abs_boundary(&self) -> (usize, f64) {
        let g = self.grid;
        (0..g.node_count())
            .filter(|&k| g.is_boundary_index(k))
            .map(|k| (k, self.values[k].abs()))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
    }

    pub fn mask_boundary(&mut self) {
        let g = self.grid;
        for k in 0..g.node_count() {
            if g.is_boundary_index(k) {
                self.values[k] = 0.0;
            }
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|a| a * rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|a| -a)
    }
}

/// Two node-collocated components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let sx = ScalarField::new(grid, x)?;
        let sy = ScalarField::new(grid, y)?;
        Ok(Self::from_components(sx, sy))
    }

    pub(crate) fn from_vecs(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), grid.node_count());
        debug_assert_eq!(y.len(), grid.node_count());
        Self { grid, x, y }
    }

    pub fn from_components(x: ScalarField, y: ScalarField) -> Self {
        assert_eq!(x.grid, y.grid, "components on different grids");
        Self {
            grid: x.grid,
            x: x.values,
            y: y.values,
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0, 0.0)
    }

    pub fn constant(grid: Grid, cx: f64, cy: f64) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            x: vec![cx; n],
            y: vec![cy; n],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let n = grid.node_count();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for k in 0..n {
            let (i, j) = grid.ij(k);
            let (a, b) = f(grid.x(i), grid.y(j));
            x.push(a);
            y.push(b);
        }
        Self { grid, x, y }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn xs_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn ys_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn component_x(&self) -> ScalarField {
        ScalarField::from_vec(self.grid, self.x.clone())
    }

    pub fn component_y(&self) -> ScalarField {
        ScalarField::from_vec(self.grid, self.y.clone())
    }

    pub fn into_components(self) -> (ScalarField, ScalarField) {
        (
            ScalarField::from_vec(self.grid, self.x),
            ScalarField::from_vec(self.grid, self.y),
        )
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = self.grid.index(i, j);
        (self.x[k], self.y[k])
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        ScalarField::from_vec(
            self.grid,
            self.x
                .iter()
                .zip(&self.y)
                .map(|(a, b)| a.hypot(*b))
                .collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            x: self.x.iter().map(|&v| f(v)).collect(),
            y: self.y.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            x: self.x.iter().zip(&other.x).map(|(&a, &b)| f(a, b)).collect(),
            y: self.y.iter().zip(&other.y).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Multiplies both components nodewise by a scalar field.
    pub fn scale_by(&self, s: &ScalarField) -> Self {
        debug_assert_eq!(self.grid, s.grid);
        Self {
            grid: self.grid,
            x: self.x.iter().zip(&s.values).map(|(a, b)| a * b).collect(),
            y: self.y.iter().zip(&s.values).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> ScalarField {
        ScalarField::from_vec(
            self.grid,
            (0..self.grid.node_count())
                .map(|k| self.x[k] * other.x[k] + self.y[k] * other.y[k])
                .collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    /// Zeroes both components on boundary nodes.
    pub fn mask_boundary(&mut self) {
        let g = self.grid;
        for k in 0..g.node_count() {
            if g.is_boundary_index(k) {
                self.x[k] = 0.0;
                self.y[k] = 0.0;
            }
        }
    }

    pub fn masked(mut self) -> Self {
        self.mask_boundary();
        self
    }

    /// True when both components are exactly zero on every boundary node.
    pub fn is_no_slip(&self) -> bool {
        let g = self.grid;
        (0..g.node_count())
            .filter(|&k| g.is_boundary_index(k))
            .all(|k| self.x[k] == 0.0 && self.y[k] == 0.0)
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: Self) -> VectorField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: Self) -> VectorField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &VectorField {
    type Output = VectorField;
    fn mul(self, rhs: f64) -> VectorField {
        self.map(|a| a * rhs)
    }
}

impl Neg for &VectorField {
    type Output = VectorField;
    fn neg(self) -> VectorField {
        self.map(|a| -a)
    }
}

/// Clamped bilinear interpolation of nodal values at `(x, y)`.
#[inline]
pub(crate) fn bilinear(grid: &Grid, values: &[f64], x: f64, y: f64) -> f64 {
    let (i, j, sx, sy) = grid.locate(x, y);
    let k = grid.index(i, j);
    let r = grid.row_len();
    let (f00, f10, f01, f11) = (values[k], values[k + 1], values[k + r], values[k + r + 1]);
    (1.0 - sy) * ((1.0 - sx) * f00 + sx * f10) + sy * ((1.0 - sx) * f01 + sx * f11)
}

/// Bilinear interpolation clipped to the min/max of the containing cell.
#[inline]
pub(crate) fn bilinear_clipped(grid: &Grid, values: &[f64], x: f64, y: f64) -> f64 {
    let (i, j, sx, sy) = grid.locate(x, y);
    let k = grid.index(i, j);
    let r = grid.row_len();
    let (f00, f10, f01, f11) = (values[k], values[k + 1], values[k + r], values[k + r + 1]);
    let v = (1.0 - sy) * ((1.0 - sx) * f00 + sx * f10) + sy * ((1.0 - sx) * f01 + sx * f11);
    let lo = f00.min(f10).min(f01).min(f11);
    let hi = f00.max(f10).max(f01).max(f11);
    v.clamp(lo, hi)
}
