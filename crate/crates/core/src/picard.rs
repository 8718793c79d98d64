//! Picard iteration of the linearised-solve map over a time window.
//!
//! Given a guess `(u~, rho~, Z~)` on the window, the map transports
//! `rho` and `Z` along `u~`, builds the forcing from the guess and advances
//! the linear momentum equation with `rho~` frozen. Iterates are compared in
//! the trajectory distance
//! `max over stamps of ||du||_{H^1} + ||drho||_{L^2} + ||dZ||_{L^2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{div, grad, norm, sobolev_norm, Grid, NormKind, ScalarField, VectorField};
use crate::lame::{apply_lame, LameOperator};
use crate::momentum::{build_forcing, check_band, convective_term, momentum_step_with, pressure, PhysParams};
use crate::transport::{trace_to_stamp, transport_exact_formula, VelocityTrajectory};

/// Attempts after the first before giving up on a window.
pub const MAX_SHRINKS: usize = 8;

/// Velocity, density and `Z = rho * theta` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: VectorField,
    pub rho: ScalarField,
    pub z: ScalarField,
}

impl State {
    pub fn new(u: VectorField, rho: ScalarField, z: ScalarField) -> Result<Self> {
        if u.grid() != rho.grid() || u.grid() != z.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { u, rho, z })
    }

    /// `u = 0`, `rho = Z = 1`.
    pub fn equilibrium(grid: Grid) -> Self {
        Self {
            u: VectorField::zeros(grid),
            rho: ScalarField::constant(grid, 1.0),
            z: ScalarField::constant(grid, 1.0),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.rho.is_finite() && self.z.is_finite()
    }

    /// `||u||_{H^1} + ||rho||_{L^2} + ||Z||_{L^2}`.
    pub fn size(&self) -> f64 {
        norm(&self.u, NormKind::Hk(1)).unwrap_or(f64::NAN)
            + norm(&self.rho, NormKind::Lq(2.0)).unwrap_or(f64::NAN)
            + norm(&self.z, NormKind::Lq(2.0)).unwrap_or(f64::NAN)
    }

    pub fn distance(&self, other: &State) -> f64 {
        State {
            u: &self.u - &other.u,
            rho: &self.rho - &other.rho,
            z: &self.z - &other.z,
        }
        .size()
    }
}

/// States at the uniform stamps `t0 + k * dt`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<State>,
}

impl Trajectory {
    /// The initial state held for `n_steps` steps.
    pub fn constant(initial: &State, t0: f64, dt: f64, n_steps: usize) -> Self {
        Self {
            t0,
            dt,
            states: vec![initial.clone(); n_steps + 1],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.states[0].grid()
    }

    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn stamp(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.stamp(self.n_steps())
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("nonempty trajectory")
    }

    pub fn size(&self) -> f64 {
        self.states.iter().map(State::size).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.states.len() < 2 {
            return Err(Error::InvalidArgument("trajectory needs at least one step".into()));
        }
        for (k, s) in self.states.iter().enumerate() {
            if !s.u.is_no_slip() {
                return Err(Error::InvalidArgument(format!("velocity at stamp {k} violates no-slip")));
            }
            for (name, f) in [("rho", &s.rho), ("Z", &s.z)] {
                if let Some((node, &value)) = f.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                    return Err(Error::InvalidArgument(format!(
                        "{name} = {value} at node {node}, stamp {k} is not strictly positive"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub t_window: f64,
    pub n_steps: usize,
    pub max_picard: usize,
    /// Relative tolerance on the trajectory distance of successive iterates.
    pub tol_fix: f64,
    pub shrink_factor: f64,
    /// Ceilings for the discrete admissible-set surrogates.
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// Relative residual for the inner linear solves.
    pub solver_tol: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            t_window: 0.1,
            n_steps: 10,
            max_picard: 30,
            tol_fix: 1e-8,
            shrink_factor: 0.5,
            b1: f64::INFINITY,
            b2: f64::INFINITY,
            b3: f64::INFINITY,
            solver_tol: 1e-10,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidParams(s));
        if !(self.t_window > 0.0 && self.t_window.is_finite()) {
            return bad(format!("window length must be positive, got {}", self.t_window));
        }
        if self.n_steps < 2 {
            return bad(format!("need at least 2 steps per window, got {}", self.n_steps));
        }
        if self.max_picard == 0 {
            return bad("max_picard must be positive".into());
        }
        if !(self.tol_fix > 0.0 && self.tol_fix <= 1e-2) {
            return bad(format!("tol_fix must lie in (0, 1e-2], got {}", self.tol_fix));
        }
        if !(0.25..=0.9).contains(&self.shrink_factor) {
            return bad(format!("shrink factor must lie in [0.25, 0.9], got {}", self.shrink_factor));
        }
        if [self.b1, self.b2, self.b3].iter().any(|b| !(*b > 0.0)) {
            return bad("admissibility ceilings must be positive".into());
        }
        if !(self.solver_tol > 0.0 && self.solver_tol <= 1e-4) {
            return bad(format!("solver tolerance must lie in (0, 1e-4], got {}", self.solver_tol));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_window / self.n_steps as f64
    }
}

/// One application of the linearised-solve map. The state at the first
/// stamp is copied unchanged.
pub fn phi_map(guess: &Trajectory, params: &PhysParams, cfg: &WindowConfig) -> Result<Trajectory> {
    let op = LameOperator::new(*guess.grid(), params.viscosity())?;
    phi_map_with(&op, guess, params, cfg)
}

pub(crate) fn phi_map_with(
    op: &LameOperator,
    guess: &Trajectory,
    params: &PhysParams,
    cfg: &WindowConfig,
) -> Result<Trajectory> {
    guess.check_invariants()?;
    for s in &guess.states {
        check_band("rho", &s.rho, params)?;
        check_band("Z", &s.z, params)?;
    }
    let n = guess.n_steps();
    let grid = *guess.grid();
    let velocities = VelocityTrajectory::new(
        guess.t0,
        guess.dt,
        guess.states.iter().map(|s| s.u.clone()).collect(),
    )?;
    let first = &guess.states[0];
    let body = params.body_force_field(grid);
    let mut states = Vec::with_capacity(n + 1);
    states.push(first.clone());
    let mut u_prev = first.u.clone();
    for k in 1..=n {
        let cmap = trace_to_stamp(&velocities, k);
        let rho = transport_exact_formula(&first.rho, &cmap)?;
        let z = transport_exact_formula(&first.z, &cmap)?;
        let g = &guess.states[k];
        let forcing = build_forcing(&g.u, &g.rho, &g.z, &body, params)?;
        let u = momentum_step_with(op, &u_prev, &g.rho, &forcing, guess.dt, cfg.solver_tol)?;
        u_prev = u.clone();
        states.push(State { u, rho, z });
    }
    Ok(Trajectory {
        t0: guess.t0,
        dt: guess.dt,
        states,
    })
}

/// A surrogate value checked against its ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(value: f64, limit: f64) -> Self {
        Self {
            value,
            limit,
            pass: value <= limit,
        }
    }
}

/// Discrete admissible-set membership. `H^2` stands in for `H^3`/`H^4`;
/// sup over stamps replaces `L^inf` in time and step-weighted sums replace
/// `L^2` in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RFlags {
    /// `sup (||rho||_{H2} + ||Z||_{H2})`.
    pub b1: BoundCheck,
    /// `sup ||u||_{H2}^2 + sum dt ||u||_{H2}^2 + sup ||u_t||_{H1}^2 + sum dt ||u_t||_{H2}^2`.
    pub b2: BoundCheck,
    /// `sup (||rho_t||_{H2} + ||Z_t||_{H2})`.
    pub b3: BoundCheck,
    /// `m/2 <= rho, Z <= 2M` everywhere.
    pub band: bool,
}

impl RFlags {
    pub fn all_pass(&self) -> bool {
        self.b1.pass && self.b2.pass && self.b3.pass && self.band
    }
}

pub fn check_r_membership(traj: &Trajectory, params: &PhysParams, cfg: &WindowConfig) -> RFlags {
    let h2 = |f: &dyn crate::grid::Normed| sobolev_norm(f, 2, 2.0).unwrap_or(f64::NAN);
    let h1 = |f: &dyn crate::grid::Normed| sobolev_norm(f, 1, 2.0).unwrap_or(f64::NAN);
    let dt = traj.dt;
    let mut b1: f64 = 0.0;
    let mut u_sup: f64 = 0.0;
    let mut u_sum = 0.0;
    let mut ut_sup: f64 = 0.0;
    let mut ut_sum = 0.0;
    let mut b3: f64 = 0.0;
    for (k, s) in traj.states.iter().enumerate() {
        b1 = b1.max(h2(&s.rho) + h2(&s.z));
        let uh2 = h2(&s.u).powi(2);
        u_sup = u_sup.max(uh2);
        if k > 0 {
            u_sum += dt * uh2;
            let p = &traj.states[k - 1];
            let ut = &(&s.u - &p.u) * (1.0 / dt);
            ut_sup = ut_sup.max(h1(&ut).powi(2));
            ut_sum += dt * h2(&ut).powi(2);
            let rt = &(&s.rho - &p.rho) * (1.0 / dt);
            let zt = &(&s.z - &p.z) * (1.0 / dt);
            b3 = b3.max(h2(&rt) + h2(&zt));
        }
    }
    let band = traj
        .states
        .iter()
        .all(|s| check_band("rho", &s.rho, params).is_ok() && check_band("Z", &s.z, params).is_ok());
    RFlags {
        b1: BoundCheck::new(b1, cfg.b1),
        b2: BoundCheck::new(u_sup + u_sum + ut_sup + ut_sum, cfg.b2),
        b3: BoundCheck::new(b3, cfg.b3),
        band,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    /// Iterations used by the accepted attempt.
    pub iterations: usize,
    /// Trajectory distance between successive iterates.
    pub distances: Vec<f64>,
    /// `d_{k+1} / d_k`.
    pub ratios: Vec<f64>,
    pub shrink_count: usize,
    pub r_flags: Vec<RFlags>,
    pub converged: bool,
    /// Length and step count of the accepted window.
    pub t_window: f64,
    pub n_steps: usize,
    /// Why earlier attempts were abandoned.
    pub shrink_reasons: Vec<String>,
}

enum Attempt {
    Converged(Trajectory, Vec<f64>, Vec<RFlags>),
    Failed(String),
}

fn attempt(
    op: &LameOperator,
    initial: &State,
    t0: f64,
    t_window: f64,
    n_steps: usize,
    params: &PhysParams,
    cfg: &WindowConfig,
) -> Result<Attempt> {
    let dt = t_window / n_steps as f64;
    let mut guess = Trajectory::constant(initial, t0, dt, n_steps);
    let mut distances = Vec::new();
    let mut flags = Vec::new();
    for _ in 0..cfg.max_picard {
        let next = match phi_map_with(op, &guess, params, cfg) {
            Ok(t) => t,
            Err(e @ (Error::DensityOutOfBand { .. } | Error::SolverDiverged { .. } | Error::InvalidArgument(_))) => {
                return Ok(Attempt::Failed(e.to_string()))
            }
            Err(e) => return Err(e),
        };
        if !next.states.iter().all(State::is_finite) {
            return Ok(Attempt::Failed("non-finite iterate".into()));
        }
        let r = check_r_membership(&next, params, cfg);
        flags.push(r);
        let d = next.distance(&guess);
        let scale = next.size();
        distances.push(d);
        guess = next;
        if !d.is_finite() {
            return Ok(Attempt::Failed("non-finite distance".into()));
        }
        if !r.band {
            return Ok(Attempt::Failed("iterate left the density band".into()));
        }
        if d <= cfg.tol_fix * scale {
            return Ok(Attempt::Converged(guess, distances, flags));
        }
    }
    Ok(Attempt::Failed(format!(
        "no convergence in {} iterations (last distance {:e})",
        cfg.max_picard,
        distances.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Iterates [`phi_map`] from the constant-in-time extension of `initial`
/// until successive iterates agree, shrinking the window on failure.
pub fn solve_window(initial: &State, params: &PhysParams, cfg: &WindowConfig) -> Result<(Trajectory, PicardReport)> {
    solve_window_at(initial, 0.0, params, cfg)
}

pub fn solve_window_at(
    initial: &State,
    t0: f64,
    params: &PhysParams,
    cfg: &WindowConfig,
) -> Result<(Trajectory, PicardReport)> {
    params.validate()?;
    cfg.validate()?;
    if !initial.u.is_no_slip() {
        return Err(Error::InvalidArgument("initial velocity violates no-slip".into()));
    }
    for (name, f) in [("rho", &initial.rho), ("Z", &initial.z)] {
        if let Some((node, &value)) = f
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= params.m && **v <= params.big_m))
        {
            return Err(Error::InvalidArgument(format!(
                "initial {name} = {value} at node {node} outside [m, M] = [{}, {}]",
                params.m, params.big_m
            )));
        }
    }
    let op = LameOperator::new(*initial.grid(), params.viscosity())?;
    let mut t_window = cfg.t_window;
    let mut n_steps = cfg.n_steps;
    let mut reasons = Vec::new();
    for shrinks in 0..=MAX_SHRINKS {
        match attempt(&op, initial, t0, t_window, n_steps, params, cfg)? {
            Attempt::Converged(traj, distances, r_flags) => {
                let ratios = distances.windows(2).map(|w| w[1] / w[0]).collect();
                let report = PicardReport {
                    iterations: distances.len(),
                    distances,
                    ratios,
                    shrink_count: shrinks,
                    r_flags,
                    converged: true,
                    t_window,
                    n_steps,
                    shrink_reasons: reasons,
                };
                return Ok((traj, report));
            }
            Attempt::Failed(reason) => reasons.push(reason),
        }
        t_window *= cfg.shrink_factor;
        n_steps = ((n_steps as f64 * cfg.shrink_factor).round() as usize).max(2);
    }
    Err(Error::WindowCollapse { shrinks: MAX_SHRINKS })
}

/// `L^2` norms of the discrete residuals of the continuity, momentum and
/// `Z` equations, maxed over stamps `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemResidual {
    pub continuity: f64,
    pub momentum: f64,
    pub z: f64,
}

impl SystemResidual {
    pub fn max(&self) -> f64 {
        self.continuity.max(self.momentum).max(self.z)
    }
}

/// Evaluates the nonlinear equations on a trajectory with backward
/// differences in time and the grid operators in space. Momentum residuals
/// are taken at interior nodes only.
pub fn system_residual(traj: &Trajectory, params: &PhysParams) -> Result<SystemResidual> {
    let grid = *traj.grid();
    let body = params.body_force_field(grid);
    let inv_dt = 1.0 / traj.dt;
    let mut out = SystemResidual {
        continuity: 0.0,
        momentum: 0.0,
        z: 0.0,
    };
    let scalar_residual = |now: &ScalarField, prev: &ScalarField, u: &VectorField, divu: &ScalarField| {
        let g = grad(now);
        let adv = u.dot(&g);
        let vals = (0..grid.node_count())
            .map(|k| {
                (now.values()[k] - prev.values()[k]) * inv_dt + adv.values()[k] + now.values()[k] * divu.values()[k]
            })
            .collect();
        ScalarField::from_vec(grid, vals)
    };
    for k in 1..traj.states.len() {
        let (s, p) = (&traj.states[k], &traj.states[k - 1]);
        let divu = div(&s.u);
        let r1 = scalar_residual(&s.rho, &p.rho, &s.u, &divu);
        let r3 = scalar_residual(&s.z, &p.z, &s.u, &divu);
        let ut = &(&s.u - &p.u) * inv_dt;
        let inertia = (&ut + &convective_term(&s.u)).scale_by(&s.rho);
        let lu = apply_lame(&s.u, params.viscosity())?;
        let gp = grad(&pressure(&s.z, params)?);
        let rb = body.scale_by(&s.rho);
        let mut r2 = (&(&(&inertia - &lu) + &gp) - &rb).clone();
        r2.mask_boundary();
        out.continuity = out.continuity.max(norm(&r1, NormKind::Lq(2.0))?);
        out.z = out.z.max(norm(&r3, NormKind::Lq(2.0))?);
        out.momentum = out.momentum.max(norm(&r2, NormKind::Lq(2.0))?);
    }
    Ok(out)
}
