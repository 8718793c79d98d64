//! Discrete Lamé operator `L u = mu * lap(u) + (lambda + mu) * grad(div u)`
//! with homogeneous Dirichlet (no-slip) data.
//!
//! Unknowns are the two velocity components at interior nodes, ordered
//! `2 * k + c` with `k` the row-major interior node index. The assembled
//! matrix stores `-L`, which is symmetric positive definite whenever
//! `mu > 0` and `lambda + mu >= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::grid::{d2_dx2, d2_dxdy, d2_dy2};
use crate::linalg::{self, CsrMatrix, SolveStats};

/// Constant viscosity coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viscosity {
    pub mu: f64,
    pub lambda: f64,
}

impl Viscosity {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        let v = Self { mu, lambda };
        v.validate()?;
        Ok(v)
    }

    /// `mu > 0` and `d * lambda + 2 * mu >= 0` with `d = 2`.
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParams(format!("mu must be positive, got {}", self.mu)));
        }
        if !self.lambda.is_finite() || 2.0 * self.lambda + 2.0 * self.mu < 0.0 {
            return Err(Error::InvalidParams(format!(
                "2 lambda + 2 mu must be nonnegative, got lambda = {}, mu = {}",
                self.lambda, self.mu
            )));
        }
        Ok(())
    }
}

/// Applies `L` at every node. Interior values use the same compact stencil
/// as the assembled matrix; boundary values come from one-sided stencils and
/// are extrapolations only.
pub fn apply_lame(u: &VectorField, visc: Viscosity) -> Result<VectorField> {
    visc.validate()?;
    let (ux, uy) = u.clone().into_components();
    let (mu, lm) = (visc.mu, visc.lambda + visc.mu);
    let (uxx, uyy, uxy) = (d2_dx2(&ux), d2_dy2(&ux), d2_dxdy(&ux));
    let (vxx, vyy, vxy) = (d2_dx2(&uy), d2_dy2(&uy), d2_dxdy(&uy));
    let n = u.grid().node_count();
    let mut lx = Vec::with_capacity(n);
    let mut ly = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b, c) = (uxx.values()[k], uyy.values()[k], vxy.values()[k]);
        lx.push(mu * (a + b) + lm * (a + c));
        let (a, b, c) = (vxx.values()[k], vyy.values()[k], uxy.values()[k]);
        ly.push(mu * (a + b) + lm * (c + b));
    }
    Ok(VectorField::from_vecs(*u.grid(), lx, ly))
}

#[derive(Debug, Clone)]
pub struct LameOperator {
    grid: Grid,
    visc: Viscosity,
    /// `-L` on interior unknowns.
    neg: CsrMatrix,
}

impl LameOperator {
    pub fn new(grid: Grid, visc: Viscosity) -> Result<Self> {
        visc.validate()?;
        Ok(Self {
            grid,
            visc,
            neg: assemble_negative(&grid, visc),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn viscosity(&self) -> Viscosity {
        self.visc
    }

    /// The SPD matrix `-L`.
    pub fn negative_matrix(&self) -> &CsrMatrix {
        &self.neg
    }

    pub fn unknowns(&self) -> usize {
        2 * self.grid.interior_count()
    }

    /// Interior values of a vector field as a solver vector.
    pub fn pack(&self, v: &VectorField) -> Vec<f64> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(self.unknowns());
        for (i, j) in g.interior_nodes() {
            let (a, b) = v.at(i, j);
            out.push(a);
            out.push(b);
        }
        out
    }

    /// Solver vector back to a field that vanishes on the boundary.
    pub fn unpack(&self, x: &[f64]) -> VectorField {
        let g = &self.grid;
        let mut vx = vec![0.0; g.node_count()];
        let mut vy = vec![0.0; g.node_count()];
        for (k, (i, j)) in g.interior_nodes().enumerate() {
            let idx = g.index(i, j);
            vx[idx] = x[2 * k];
            vy[idx] = x[2 * k + 1];
        }
        VectorField::from_vecs(*g, vx, vy)
    }

    /// Matrix form of `L` on the interior of a no-slip field.
    pub fn apply_interior(&self, u: &VectorField) -> VectorField {
        let y = self.neg.mul_vec(&self.pack(u));
        self.unpack(&y.iter().map(|v| -v).collect::<Vec<_>>())
    }

    /// Solves `L u = f` in the interior with `u = 0` on the boundary.
    pub fn solve(&self, f: &VectorField, tol: f64) -> Result<VectorField> {
        self.solve_with_stats(f, tol).map(|(u, _)| u)
    }

    pub fn solve_with_stats(&self, f: &VectorField, tol: f64) -> Result<(VectorField, SolveStats)> {
        if !(tol > 0.0 && tol <= 1e-4) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must lie in (0, 1e-4], got {tol}"
            )));
        }
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let b: Vec<f64> = self.pack(f).into_iter().map(|v| -v).collect();
        if b.iter().all(|&v| v == 0.0) {
            return Ok((
                VectorField::zeros(self.grid),
                SolveStats {
                    iterations: 0,
                    relative_residual: 0.0,
                },
            ));
        }
        let (x, stats) = linalg::solve_spd(&self.neg, &b, None, tol)?;
        Ok((self.unpack(&x), stats))
    }

    /// `diag(d) - L` on interior unknowns; `d` holds one entry per unknown.
    pub fn shifted_system(&self, d: &[f64]) -> CsrMatrix {
        self.neg.scaled_plus_diagonal(1.0, d)
    }
}

/// One-shot `L^{-1}`.
pub fn solve_lame(f: &VectorField, visc: Viscosity, tol: f64) -> Result<VectorField> {
    LameOperator::new(*f.grid(), visc)?.solve(f, tol)
}

fn assemble_negative(g: &Grid, visc: Viscosity) -> CsrMatrix {
    let (nx, ny) = (g.nx(), g.ny());
    let (hx2, hy2, hxy4) = (g.hx() * g.hx(), g.hy() * g.hy(), 4.0 * g.hx() * g.hy());
    let mu = visc.mu;
    let lm = visc.lambda + visc.mu;
    let unknown = |i: usize, j: usize| -> Option<usize> {
        if i == 0 || j == 0 || i >= nx || j >= ny {
            None
        } else {
            Some((j - 1) * (nx - 1) + (i - 1))
        }
    };
    let n = 2 * g.interior_count();
    let mut t = Vec::with_capacity(n * 13);
    for (i, j) in g.interior_nodes() {
        let k = unknown(i, j).expect("interior node");
        // (component, coefficient of d_xx, coefficient of d_yy)
        for (c, cxx, cyy) in [(0usize, mu + lm, mu), (1usize, mu, mu + lm)] {
            let row = 2 * k + c;
            t.push((row, row, 2.0 * cxx / hx2 + 2.0 * cyy / hy2));
            for (di, dj, coeff) in [(-1isize, 0isize, cxx / hx2), (1, 0, cxx / hx2), (0, -1, cyy / hy2), (0, 1, cyy / hy2)] {
                let (ii, jj) = ((i as isize + di) as usize, (j as isize + dj) as usize);
                if let Some(kk) = unknown(ii, jj) {
                    t.push((row, 2 * kk + c, -coeff));
                }
            }
            let other = 1 - c;
            for (di, dj, sign) in [(1isize, 1isize, 1.0), (-1, 1, -1.0), (1, -1, -1.0), (-1, -1, 1.0)] {
                let (ii, jj) = ((i as isize + di) as usize, (j as isize + dj) as usize);
                if let Some(kk) = unknown(ii, jj) {
                    t.push((row, 2 * kk + other, -sign * lm / hxy4));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, t)
}
