//! Linearised momentum equation `rho~ u_t - L u = F` with no-slip data and
//! the forcing `F = rho~ b - rho~ (u~ . grad) u~ - grad p(Z~)` of the
//! fixed-point map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{d_dx, d_dy, grad, ScalarField, VectorField};
use crate::lame::{apply_lame, LameOperator, Viscosity};
use crate::linalg;

/// Physical parameters of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub mu: f64,
    pub lambda: f64,
    /// Pressure law `p(Z) = a Z^gamma`.
    pub a: f64,
    pub gamma: f64,
    /// Lower admissibility bound `m` of the initial density and `Z`.
    pub m: f64,
    /// Upper admissibility bound `M`.
    pub big_m: f64,
    /// Spatially uniform, time-independent body force.
    pub body_force: [f64; 2],
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 0.0,
            a: 1.0,
            gamma: 1.4,
            m: 0.5,
            big_m: 2.0,
            body_force: [0.0, 0.0],
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        self.viscosity().validate()?;
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParams(format!("a must be positive, got {}", self.a)));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.m > 0.0 && self.m < self.big_m && self.big_m.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "need 0 < m < M, got m = {}, M = {}",
                self.m, self.big_m
            )));
        }
        if !self.body_force.iter().all(|b| b.is_finite()) {
            return Err(Error::InvalidParams("body force must be finite".into()));
        }
        Ok(())
    }

    pub fn viscosity(&self) -> Viscosity {
        Viscosity {
            mu: self.mu,
            lambda: self.lambda,
        }
    }

    /// Density band `[m/2, 2M]` required of linearisation data.
    pub fn band(&self) -> (f64, f64) {
        (0.5 * self.m, 2.0 * self.big_m)
    }

    pub fn body_force_field(&self, grid: crate::grid::Grid) -> VectorField {
        VectorField::constant(grid, self.body_force[0], self.body_force[1])
    }

    #[inline]
    pub fn pressure_of(&self, z: f64) -> f64 {
        self.a * z.powf(self.gamma)
    }
}

/// Nodewise `a Z^gamma`.
pub fn pressure(z: &ScalarField, params: &PhysParams) -> Result<ScalarField> {
    if let Some((node, &value)) = z.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeArgument { node, value });
    }
    Ok(z.map(|v| params.pressure_of(v)))
}

pub(crate) fn check_band(field: &'static str, f: &ScalarField, params: &PhysParams) -> Result<()> {
    let (lower, upper) = params.band();
    match f
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= lower && **v <= upper))
    {
        Some((node, &value)) => Err(Error::DensityOutOfBand {
            field,
            node,
            value,
            lower,
            upper,
        }),
        None => Ok(()),
    }
}

/// `(u . grad) u`.
pub fn convective_term(u: &VectorField) -> VectorField {
    let (ux, uy) = u.clone().into_components();
    let (ax, ay) = (d_dx(&ux), d_dy(&ux));
    let (bx, by) = (d_dx(&uy), d_dy(&uy));
    let n = u.grid().node_count();
    let mut cx = Vec::with_capacity(n);
    let mut cy = Vec::with_capacity(n);
    for k in 0..n {
        let (p, q) = (ux.values()[k], uy.values()[k]);
        cx.push(p * ax.values()[k] + q * ay.values()[k]);
        cy.push(p * bx.values()[k] + q * by.values()[k]);
    }
    VectorField::from_vecs(*u.grid(), cx, cy)
}

/// `F = rho b - rho (u . grad) u - grad p(Z)`; `rho` must lie in the band
/// `[m/2, 2M]`.
pub fn build_forcing(
    u: &VectorField,
    rho: &ScalarField,
    z: &ScalarField,
    b: &VectorField,
    params: &PhysParams,
) -> Result<VectorField> {
    check_band("rho", rho, params)?;
    let gp = grad(&pressure(z, params)?);
    let conv = convective_term(u);
    let n = u.grid().node_count();
    let mut fx = Vec::with_capacity(n);
    let mut fy = Vec::with_capacity(n);
    for k in 0..n {
        let r = rho.values()[k];
        fx.push(r * (b.xs()[k] - conv.xs()[k]) - gp.xs()[k]);
        fy.push(r * (b.ys()[k] - conv.ys()[k]) - gp.ys()[k]);
    }
    Ok(VectorField::from_vecs(*u.grid(), fx, fy))
}

/// Backward Euler step
/// `(rho/dt) u_new - L u_new = (rho/dt) u_prev + F` in the interior,
/// `u_new = 0` on the boundary. `rho` is frozen nodewise.
pub fn momentum_step_with(
    op: &LameOperator,
    u_prev: &VectorField,
    rho: &ScalarField,
    forcing: &VectorField,
    dt: f64,
    tol: f64,
) -> Result<VectorField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::InvalidArgument(format!(
            "solver tolerance must lie in (0, 1e-4], got {tol}"
        )));
    }
    let g = op.grid();
    if u_prev.grid() != g || rho.grid() != g || forcing.grid() != g {
        return Err(Error::GridMismatch);
    }
    if let Some((node, &value)) = rho.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::VacuumDensity { node, value });
    }
    let mut diag = Vec::with_capacity(op.unknowns());
    for (i, j) in g.interior_nodes() {
        let d = rho.at(i, j) / dt;
        diag.push(d);
        diag.push(d);
    }
    let matrix = op.shifted_system(&diag);
    let prev = op.pack(u_prev);
    let f = op.pack(forcing);
    let rhs: Vec<f64> = (0..prev.len()).map(|k| diag[k] * prev[k] + f[k]).collect();
    let (x, _) = linalg::solve_spd(&matrix, &rhs, Some(&prev), tol)?;
    Ok(op.unpack(&x))
}

pub fn momentum_step(
    u_prev: &VectorField,
    rho: &ScalarField,
    forcing: &VectorField,
    dt: f64,
    params: &PhysParams,
    tol: f64,
) -> Result<VectorField> {
    let op = LameOperator::new(*u_prev.grid(), params.viscosity())?;
    momentum_step_with(&op, u_prev, rho, forcing, dt, tol)
}

/// Largest boundary mismatch of `grad p(Z0) = rho0 b + L u0`. The continuum
/// theory requires it to vanish; on the grid it is only reported.
pub fn compatibility_residual(
    u0: &VectorField,
    rho0: &ScalarField,
    z0: &ScalarField,
    params: &PhysParams,
) -> Result<f64> {
    let g = *u0.grid();
    let gp = grad(&pressure(z0, params)?);
    let lu = apply_lame(u0, params.viscosity())?;
    let b = params.body_force;
    let mut worst: f64 = 0.0;
    for k in 0..g.node_count() {
        if !g.is_boundary_index(k) {
            continue;
        }
        let r = rho0.values()[k];
        let dx = gp.xs()[k] - (r * b[0] + lu.xs()[k]);
        let dy = gp.ys()[k] - (r * b[1] + lu.ys()[k]);
        worst = worst.max(dx.hypot(dy));
    }
    Ok(worst)
}
