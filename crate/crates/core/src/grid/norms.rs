use super::ops::{dx_raw, dxx_raw, dxy_raw, dy_raw, dyy_raw};
use super::{Grid, ScalarField, VectorField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// Trapezoid-weighted `L^q`, `q >= 1`.
    Lq(f64),
    /// Discrete `H^k`, `k <= 2`.
    Hk(u32),
    Linf,
}

/// Fields that the norm library accepts.
pub trait Normed {
    fn grid(&self) -> &Grid;
    /// Component arrays; the pointwise value is the Euclidean length.
    fn components(&self) -> Vec<&[f64]>;
}

impl Normed for ScalarField {
    fn grid(&self) -> &Grid {
        ScalarField::grid(self)
    }
    fn components(&self) -> Vec<&[f64]> {
        vec![self.values()]
    }
}

impl Normed for VectorField {
    fn grid(&self) -> &Grid {
        VectorField::grid(self)
    }
    fn components(&self) -> Vec<&[f64]> {
        vec![self.xs(), self.ys()]
    }
}

fn lq_pointwise(g: &Grid, comps: &[&[f64]], q: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..g.node_count() {
        let (i, j) = g.ij(k);
        let m = if comps.len() == 1 {
            comps[0][k].abs()
        } else {
            comps.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt()
        };
        if m > 0.0 {
            sum += g.weight(i, j) * m.powf(q);
        }
    }
    sum.powf(1.0 / q)
}

fn linf(comps: &[&[f64]]) -> f64 {
    let n = comps[0].len();
    (0..n)
        .map(|k| comps.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// All partial derivatives of order `<= k` of one component.
fn derivatives(g: &Grid, f: &[f64], k: u32) -> Vec<Vec<f64>> {
    let mut out = vec![f.to_vec()];
    if k >= 1 {
        out.push(dx_raw(g, f));
        out.push(dy_raw(g, f));
    }
    if k >= 2 {
        out.push(dxx_raw(g, f));
        out.push(dxy_raw(g, f));
        out.push(dyy_raw(g, f));
    }
    out
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0) || q.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "L^q norm needs 1 <= q < inf, got {q}"
        )));
    }
    Ok(())
}

pub fn norm<F: Normed + ?Sized>(f: &F, kind: NormKind) -> Result<f64> {
    let g = f.grid();
    let comps = f.components();
    match kind {
        NormKind::Lq(q) => {
            check_q(q)?;
            Ok(lq_pointwise(g, &comps, q))
        }
        NormKind::Linf => Ok(linf(&comps)),
        NormKind::Hk(k) => sobolev_norm(f, k, 2.0),
    }
}

/// Discrete `W^{k,q}` norm: `(sum over |alpha| <= k of ||D^alpha f||_q^q)^(1/q)`
/// summed over components.
pub fn sobolev_norm<F: Normed + ?Sized>(f: &F, k: u32, q: f64) -> Result<f64> {
    check_q(q)?;
    if k > 2 {
        return Err(Error::InvalidArgument(format!(
            "grid supports derivatives up to order 2, got {k}"
        )));
    }
    let g = f.grid();
    let mut sum = 0.0;
    for c in f.components() {
        for d in derivatives(g, c, k) {
            sum += lq_pointwise(g, &[&d], q).powf(q);
        }
    }
    Ok(sum.powf(1.0 / q))
}

/// Trapezoid `L^2` inner product.
pub fn inner(a: &VectorField, b: &VectorField) -> f64 {
    a.dot(b).integral()
}
