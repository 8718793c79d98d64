//! Second-order finite differences: central in the interior, one-sided
//! second-order on boundary nodes.

use super::{Grid, ScalarField, VectorField};

#[inline]
fn first(f: &[f64], k: usize, stride: usize, idx: usize, n: usize, h: f64) -> f64 {
    if idx == 0 {
        (-3.0 * f[k] + 4.0 * f[k + stride] - f[k + 2 * stride]) / (2.0 * h)
    } else if idx == n {
        (3.0 * f[k] - 4.0 * f[k - stride] + f[k - 2 * stride]) / (2.0 * h)
    } else {
        (f[k + stride] - f[k - stride]) / (2.0 * h)
    }
}

#[inline]
fn second(f: &[f64], k: usize, stride: usize, idx: usize, n: usize, h: f64) -> f64 {
    let h2 = h * h;
    if idx == 0 {
        (2.0 * f[k] - 5.0 * f[k + stride] + 4.0 * f[k + 2 * stride] - f[k + 3 * stride]) / h2
    } else if idx == n {
        (2.0 * f[k] - 5.0 * f[k - stride] + 4.0 * f[k - 2 * stride] - f[k - 3 * stride]) / h2
    } else {
        (f[k - stride] - 2.0 * f[k] + f[k + stride]) / h2
    }
}

pub(crate) fn dx_raw(g: &Grid, f: &[f64]) -> Vec<f64> {
    let (nx, h) = (g.nx(), g.hx());
    (0..g.node_count())
        .map(|k| first(f, k, 1, k % (nx + 1), nx, h))
        .collect()
}

pub(crate) fn dy_raw(g: &Grid, f: &[f64]) -> Vec<f64> {
    let (ny, h, r) = (g.ny(), g.hy(), g.row_len());
    (0..g.node_count())
        .map(|k| first(f, k, r, k / r, ny, h))
        .collect()
}

pub(crate) fn dxx_raw(g: &Grid, f: &[f64]) -> Vec<f64> {
    let (nx, h) = (g.nx(), g.hx());
    (0..g.node_count())
        .map(|k| second(f, k, 1, k % (nx + 1), nx, h))
        .collect()
}

pub(crate) fn dyy_raw(g: &Grid, f: &[f64]) -> Vec<f64> {
    let (ny, h, r) = (g.ny(), g.hy(), g.row_len());
    (0..g.node_count())
        .map(|k| second(f, k, r, k / r, ny, h))
        .collect()
}

/// Mixed derivative as `d/dy (d/dx f)`; in the interior this is the
/// four-corner stencil.
pub(crate) fn dxy_raw(g: &Grid, f: &[f64]) -> Vec<f64> {
    dy_raw(g, &dx_raw(g, f))
}

pub fn d_dx(f: &ScalarField) -> ScalarField {
    ScalarField::from_vec(*f.grid(), dx_raw(f.grid(), f.values()))
}

pub fn d_dy(f: &ScalarField) -> ScalarField {
    ScalarField::from_vec(*f.grid(), dy_raw(f.grid(), f.values()))
}

pub fn d2_dx2(f: &ScalarField) -> ScalarField {
    ScalarField::from_vec(*f.grid(), dxx_raw(f.grid(), f.values()))
}

pub fn d2_dy2(f: &ScalarField) -> ScalarField {
    ScalarField::from_vec(*f.grid(), dyy_raw(f.grid(), f.values()))
}

pub fn d2_dxdy(f: &ScalarField) -> ScalarField {
    ScalarField::from_vec(*f.grid(), dxy_raw(f.grid(), f.values()))
}

pub fn grad(f: &ScalarField) -> VectorField {
    let g = f.grid();
    VectorField::from_vecs(*g, dx_raw(g, f.values()), dy_raw(g, f.values()))
}

pub fn div(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let mut out = dx_raw(g, v.xs());
    for (o, d) in out.iter_mut().zip(dy_raw(g, v.ys())) {
        *o += d;
    }
    ScalarField::from_vec(*g, out)
}

/// Five-point Laplacian in the interior.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = f.grid();
    let mut out = dxx_raw(g, f.values());
    for (o, d) in out.iter_mut().zip(dyy_raw(g, f.values())) {
        *o += d;
    }
    ScalarField::from_vec(*g, out)
}

pub fn vector_laplacian(v: &VectorField) -> VectorField {
    let (x, y) = v.clone().into_components();
    VectorField::from_components(laplacian(&x), laplacian(&y))
}
