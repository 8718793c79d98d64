//! Linearised continuity / `Z` transport along a prescribed velocity:
//! `f_t + u . grad f + f div u = 0`.
//!
//! Two routes are provided. The semi-Lagrangian route traces characteristics
//! backward from every node and applies the exponential solution formula
//! `f(t, x) = f0(X^{-1}(t, x)) * exp(-int_0^t div u ds)`. The finite-volume
//! route is a first-order upwind scheme on the dual cells of the vertex grid
//! and conserves the trapezoid mass exactly.

use crate::error::{Error, Result};
use crate::grid::{bilinear, bilinear_clipped, div, Grid, ScalarField, VectorField};

/// CFL ceiling for [`transport_step_fv`].
pub const CFL_LIMIT: f64 = 0.9;

/// Velocity fields at uniformly spaced time stamps.
#[derive(Debug, Clone)]
pub struct VelocityTrajectory {
    t0: f64,
    dt: f64,
    fields: Vec<VectorField>,
    divergence: Vec<ScalarField>,
}

impl VelocityTrajectory {
    /// Stamps are `t0 + k * dt`. Fields need not vanish on the boundary;
    /// see [`VelocityTrajectory::is_no_slip`].
    pub fn new(t0: f64, dt: f64, fields: Vec<VectorField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidArgument("empty velocity trajectory".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let grid = *fields[0].grid();
        if fields.iter().any(|f| f.grid() != &grid) {
            return Err(Error::GridMismatch);
        }
        let divergence = fields.iter().map(div).collect();
        Ok(Self {
            t0,
            dt,
            fields,
            divergence,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn stamp(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn field(&self, k: usize) -> &VectorField {
        &self.fields[k]
    }

    pub fn is_no_slip(&self) -> bool {
        self.fields.iter().all(VectorField::is_no_slip)
    }

    /// Index of the stamp equal to `t` (to a relative 1e-9 of the step).
    pub fn stamp_index(&self, t: f64) -> Result<usize> {
        let s = (t - self.t0) / self.dt;
        let k = s.round();
        if k < 0.0 || k as usize >= self.fields.len() || (s - k).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("{t} is not a trajectory stamp")));
        }
        Ok(k as usize)
    }

    #[inline]
    fn velocity(&self, k: usize, w: f64, x: f64, y: f64) -> (f64, f64) {
        // linear in time between stamps k-1 (weight w) and k (weight 1-w)
        let g = self.grid();
        let a = &self.fields[k];
        let ax = bilinear(g, a.xs(), x, y);
        let ay = bilinear(g, a.ys(), x, y);
        if w == 0.0 {
            return (ax, ay);
        }
        let b = &self.fields[k - 1];
        let bx = bilinear(g, b.xs(), x, y);
        let by = bilinear(g, b.ys(), x, y);
        ((1.0 - w) * ax + w * bx, (1.0 - w) * ay + w * by)
    }

    #[inline]
    fn divergence_at(&self, k: usize, w: f64, x: f64, y: f64) -> f64 {
        let g = self.grid();
        let a = bilinear(g, self.divergence[k].values(), x, y);
        if w == 0.0 {
            return a;
        }
        let b = bilinear(g, self.divergence[k - 1].values(), x, y);
        (1.0 - w) * a + w * b
    }
}

/// Backward-traced foot points and accumulated divergence for one stamp.
#[derive(Debug, Clone)]
pub struct CharacteristicMap {
    grid: Grid,
    pub t: f64,
    pub foot_x: Vec<f64>,
    pub foot_y: Vec<f64>,
    /// `int_0^t div u` along the characteristic through each node.
    pub divergence_integral: Vec<f64>,
    /// Number of RK4 steps whose end point had to be clamped into the domain.
    pub clamped: usize,
}

impl CharacteristicMap {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// Traces every node from the stamp `t` back to the first stamp with one
/// RK4 step per trajectory step, accumulating the divergence integral by
/// Simpson's rule on the same steps.
pub fn trace_characteristics(traj: &VelocityTrajectory, t: f64) -> Result<CharacteristicMap> {
    let k = traj.stamp_index(t)?;
    Ok(trace_to_stamp(traj, k))
}

pub fn trace_to_stamp(traj: &VelocityTrajectory, k: usize) -> CharacteristicMap {
    let g = *traj.grid();
    let n = g.node_count();
    let dt = traj.dt;
    let mut foot_x = Vec::with_capacity(n);
    let mut foot_y = Vec::with_capacity(n);
    let mut integral = Vec::with_capacity(n);
    let mut clamped = 0;
    for node in 0..n {
        let (i, j) = g.ij(node);
        let (mut x, mut y) = (g.x(i), g.y(j));
        let mut acc = 0.0;
        for s in (1..=k).rev() {
            let (u1x, u1y) = traj.velocity(s, 0.0, x, y);
            let (k1x, k1y) = (-u1x, -u1y);
            let (u2x, u2y) = traj.velocity(s, 0.5, x + 0.5 * dt * k1x, y + 0.5 * dt * k1y);
            let (k2x, k2y) = (-u2x, -u2y);
            let (u3x, u3y) = traj.velocity(s, 0.5, x + 0.5 * dt * k2x, y + 0.5 * dt * k2y);
            let (k3x, k3y) = (-u3x, -u3y);
            let (u4x, u4y) = traj.velocity(s, 1.0, x + dt * k3x, y + dt * k3y);
            let (k4x, k4y) = (-u4x, -u4y);
            let nx = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            let ny = y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            let (nx, ny, moved) = g.clamp(nx, ny);
            if moved {
                clamped += 1;
            }
            // cubic Hermite midpoint of the step
            let (e1x, e1y) = traj.velocity(s, 1.0, nx, ny);
            let mx = 0.5 * (x + nx) + dt / 8.0 * (k1x + e1x);
            let my = 0.5 * (y + ny) + dt / 8.0 * (k1y + e1y);
            let (mx, my, _) = g.clamp(mx, my);
            acc += dt / 6.0
                * (traj.divergence_at(s, 0.0, x, y)
                    + 4.0 * traj.divergence_at(s, 0.5, mx, my)
                    + traj.divergence_at(s, 1.0, nx, ny));
            x = nx;
            y = ny;
        }
        foot_x.push(x);
        foot_y.push(y);
        integral.push(acc);
    }
    CharacteristicMap {
        grid: g,
        t: traj.stamp(k),
        foot_x,
        foot_y,
        divergence_integral: integral,
        clamped,
    }
}

/// Samples `f0` at the foot points (clipped bilinear) and multiplies by
/// `exp(-divergence integral)`.
pub fn transport_exact_formula(f0: &ScalarField, cmap: &CharacteristicMap) -> Result<ScalarField> {
    if f0.grid() != &cmap.grid {
        return Err(Error::GridMismatch);
    }
    let g = cmap.grid;
    let values = (0..g.node_count())
        .map(|k| {
            bilinear_clipped(&g, f0.values(), cmap.foot_x[k], cmap.foot_y[k])
                * (-cmap.divergence_integral[k]).exp()
        })
        .collect();
    Ok(ScalarField::from_vec(g, values))
}

/// `dt * max|u| / min(hx, hy)`.
pub fn cfl_number(u: &VectorField, dt: f64) -> f64 {
    let g = u.grid();
    dt * u.max_abs() / g.hx().min(g.hy())
}

/// One upwind finite-volume step of `f_t + div(f u) = 0` on the dual cells.
///
/// The step is split into equal sub-steps when needed so that no cell sheds
/// more than 90% of its content per sub-step, which keeps the update
/// positivity preserving for any velocity within the CFL limit.
pub fn transport_step_fv(f: &ScalarField, u: &VectorField, dt: f64) -> Result<ScalarField> {
    if f.grid() != u.grid() {
        return Err(Error::GridMismatch);
    }
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative time step {dt}")));
    }
    let cfl = cfl_number(u, dt);
    if !(cfl <= CFL_LIMIT) {
        return Err(Error::CflViolation {
            cfl,
            limit: CFL_LIMIT,
        });
    }
    let g = *f.grid();
    let faces = dual_faces(&g, u);
    let volumes = g.weights();
    let mut outflow = vec![0.0; g.node_count()];
    for &(a, b, flux_rate) in &faces {
        if flux_rate > 0.0 {
            outflow[a] += flux_rate;
        } else {
            outflow[b] -= flux_rate;
        }
    }
    let shed = outflow
        .iter()
        .zip(&volumes)
        .map(|(o, v)| dt * o / v)
        .fold(0.0, f64::max);
    let substeps = ((shed / 0.9).ceil() as usize).max(1);
    let h = dt / substeps as f64;
    let mut cur = f.values().to_vec();
    let mut delta = vec![0.0; g.node_count()];
    for _ in 0..substeps {
        delta.iter_mut().for_each(|d| *d = 0.0);
        for &(a, b, rate) in &faces {
            let flux = if rate > 0.0 { rate * cur[a] } else { rate * cur[b] };
            delta[a] -= flux;
            delta[b] += flux;
        }
        for k in 0..cur.len() {
            cur[k] += h * delta[k] / volumes[k];
        }
    }
    Ok(ScalarField::from_vec(g, cur))
}

/// Interior dual-cell faces `(from, to, normal velocity * face length)`
/// with the normal pointing from `from` to `to`.
fn dual_faces(g: &Grid, u: &VectorField) -> Vec<(usize, usize, f64)> {
    let (nx, ny) = (g.nx(), g.ny());
    let mut faces = Vec::with_capacity(2 * g.node_count());
    let half = |idx: usize, n: usize| if idx == 0 || idx == n { 0.5 } else { 1.0 };
    for j in 0..=ny {
        for i in 0..nx {
            let (a, b) = (g.index(i, j), g.index(i + 1, j));
            let vel = 0.5 * (u.xs()[a] + u.xs()[b]);
            faces.push((a, b, vel * g.hy() * half(j, ny)));
        }
    }
    for j in 0..ny {
        for i in 0..=nx {
            let (a, b) = (g.index(i, j), g.index(i, j + 1));
            let vel = 0.5 * (u.ys()[a] + u.ys()[b]);
            faces.push((a, b, vel * g.hx() * half(i, nx)));
        }
    }
    faces
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_traj(u: VectorField, dt: f64, steps: usize) -> VelocityTrajectory {
        VelocityTrajectory::new(0.0, dt, vec![u; steps + 1]).unwrap()
    }

    #[test]
    fn still_flow_is_identity() {
        let g = Grid::unit_square(8).unwrap();
        let traj = constant_traj(VectorField::zeros(g), 0.1, 4);
        let cmap = trace_characteristics(&traj, 0.4).unwrap();
        for k in 0..g.node_count() {
            let (i, j) = g.ij(k);
            assert_eq!(cmap.foot_x[k], g.x(i));
            assert_eq!(cmap.foot_y[k], g.y(j));
            assert_eq!(cmap.divergence_integral[k], 0.0);
        }
        let f0 = ScalarField::from_fn(g, |x, y| 1.0 + x * y);
        assert_eq!(transport_exact_formula(&f0, &cmap).unwrap(), f0);
    }

    #[test]
    fn expansion_flow_matches_closed_form() {
        let alpha = 0.7;
        let g = Grid::unit_square(16).unwrap();
        let u = VectorField::from_fn(g, |x, y| (alpha * (x - 0.5), alpha * (y - 0.5)));
        let traj = constant_traj(u, 0.05, 10);
        let t = 0.5;
        let cmap = trace_characteristics(&traj, t).unwrap();
        let decay = (-alpha * t).exp();
        for k in 0..g.node_count() {
            let (i, j) = g.ij(k);
            assert!((cmap.foot_x[k] - (0.5 + (g.x(i) - 0.5) * decay)).abs() < 1e-7);
            assert!((cmap.foot_y[k] - (0.5 + (g.y(j) - 0.5) * decay)).abs() < 1e-7);
            assert!((cmap.divergence_integral[k] - 2.0 * alpha * t).abs() < 1e-12);
        }
        assert_eq!(cmap.clamped, 0);
        let out = transport_exact_formula(&ScalarField::constant(g, 3.0), &cmap).unwrap();
        let expected = 3.0 * (-2.0 * alpha * t).exp();
        assert!(out.values().iter().all(|v| (v - expected).abs() < 1e-12));
    }

    #[test]
    fn non_stamp_time_is_rejected() {
        let g = Grid::unit_square(8).unwrap();
        let traj = constant_traj(VectorField::zeros(g), 0.1, 4);
        assert!(trace_characteristics(&traj, 0.25).is_err());
        assert!(trace_characteristics(&traj, 0.6).is_err());
    }

    #[test]
    fn fv_still_flow_is_identity() {
        let g = Grid::unit_square(8).unwrap();
        let f = ScalarField::from_fn(g, |x, y| 1.0 + x + y * y);
        let out = transport_step_fv(&f, &VectorField::zeros(g), 0.1).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn fv_rejects_cfl_violation() {
        let g = Grid::unit_square(10).unwrap();
        let u = VectorField::constant(g, 1.0, 0.0).masked();
        let f = ScalarField::constant(g, 1.0);
        assert!(transport_step_fv(&f, &u, 0.05).is_ok());
        assert!(matches!(
            transport_step_fv(&f, &u, 0.1),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn fv_conserves_mass_and_positivity_for_divergent_flow() {
        let g = Grid::unit_square(12).unwrap();
        let u = VectorField::from_fn(g, |x, y| (x - 0.5, y - 0.5)).masked();
        let f = ScalarField::from_fn(g, |x, y| 0.01 + (-(x - 0.5).powi(2) * 30.0 - (y - 0.5).powi(2) * 30.0).exp());
        let dt = 0.85 * g.hx() / u.max_abs();
        let out = transport_step_fv(&f, &u, dt).unwrap();
        assert!(out.min() > 0.0);
        let (m0, m1) = (f.integral(), out.integral());
        assert!(((m1 - m0) / m0).abs() < 1e-13);
    }
}
