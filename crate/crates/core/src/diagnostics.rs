//! Per-stamp observables of a run: the blow-up quantity
//! `sup rho + sup |u|`, the kinetic energy balance, conservation totals,
//! the comparison function `r = (2M/m) rho - Z`, the logarithmic endpoint
//! probe, and the twin-run stability experiment.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{bmo_norm, d_dx, d_dy, default_radii, div, grad, norm, sobolev_norm, NormKind, ScalarField};
use crate::lame::LameOperator;
use crate::march::{simulate_observed, velocity_split_with, RunResult};
use crate::momentum::{pressure, PhysParams};
use crate::picard::{State, Trajectory};

/// Column order of the diagnostics CSV.
pub const CSV_HEADER: &str = "t,sup_rho,sup_u,blowup_q,kinetic,dissipation,pressure_work,energy_residual,\
mass,z_total,min_r,min_rho,min_z,grad_u_l2,u_h2,rho_h2,z_h2,bmo_gradv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub sup_rho: f64,
    pub sup_u: f64,
    /// `sup_rho + sup_u`.
    pub blowup_q: f64,
    /// `int rho |u|^2 / 2`.
    pub kinetic: f64,
    /// `int mu |grad u|^2 + (lambda + mu) |div u|^2`.
    pub dissipation: f64,
    /// `int p(Z) div u`.
    pub pressure_work: f64,
    /// `(kinetic - previous kinetic) / dt + dissipation - pressure_work`,
    /// zero for the first record of a run.
    pub energy_residual: f64,
    pub mass: f64,
    pub z_total: f64,
    pub min_r: f64,
    pub min_rho: f64,
    pub min_z: f64,
    pub grad_u_l2: f64,
    pub u_h2: f64,
    pub rho_h2: f64,
    pub z_h2: f64,
    /// Largest BMO norm over the four entries of `grad v`, where `v` is the
    /// pressure part of the velocity splitting.
    pub bmo_gradv: f64,
}

impl DiagnosticsRecord {
    pub fn values(&self) -> [f64; 18] {
        [
            self.t,
            self.sup_rho,
            self.sup_u,
            self.blowup_q,
            self.kinetic,
            self.dissipation,
            self.pressure_work,
            self.energy_residual,
            self.mass,
            self.z_total,
            self.min_r,
            self.min_rho,
            self.min_z,
            self.grad_u_l2,
            self.u_h2,
            self.rho_h2,
            self.z_h2,
            self.bmo_gradv,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    /// Values in [`CSV_HEADER`] order, printed so that they parse back to the
    /// same bits.
    pub fn csv_row(&self) -> String {
        self.values().iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad diagnostics row: {e}")))?;
        if v.len() != 18 {
            return Err(Error::Config(format!("diagnostics row has {} columns, expected 18", v.len())));
        }
        Ok(Self {
            t: v[0],
            sup_rho: v[1],
            sup_u: v[2],
            blowup_q: v[3],
            kinetic: v[4],
            dissipation: v[5],
            pressure_work: v[6],
            energy_residual: v[7],
            mass: v[8],
            z_total: v[9],
            min_r: v[10],
            min_rho: v[11],
            min_z: v[12],
            grad_u_l2: v[13],
            u_h2: v[14],
            rho_h2: v[15],
            z_h2: v[16],
            bmo_gradv: v[17],
        })
    }
}

pub fn kinetic_energy(state: &State) -> f64 {
    0.5 * state.u.dot(&state.u).zip_map(&state.rho, |uu, r| uu * r).integral()
}

pub fn blowup_quantity(state: &State) -> f64 {
    norm(&state.rho, NormKind::Linf).unwrap_or(f64::NAN) + state.u.max_abs()
}

fn dissipation(state: &State, params: &PhysParams) -> f64 {
    let u = &state.u;
    let (ux, uy) = (u.component_x(), u.component_y());
    let grads = [d_dx(&ux), d_dy(&ux), d_dx(&uy), d_dy(&uy)];
    let g = *u.grid();
    let divu = div(u);
    let vals = (0..g.node_count())
        .map(|k| {
            let gg: f64 = grads.iter().map(|d| d.values()[k].powi(2)).sum();
            params.mu * gg + (params.lambda + params.mu) * divu.values()[k].powi(2)
        })
        .collect();
    ScalarField::new(g, vals).map(|f| f.integral()).unwrap_or(f64::NAN)
}

/// `min over nodes of (2M/m) rho - Z`.
pub fn comparison_min(state: &State, params: &PhysParams) -> f64 {
    let c = 2.0 * params.big_m / params.m;
    state
        .rho
        .values()
        .iter()
        .zip(state.z.values())
        .map(|(r, z)| c * r - z)
        .fold(f64::INFINITY, f64::min)
}

/// Full record for `state` at time `t`. `prev` carries the kinetic energy
/// of the previous record and the time elapsed since it.
pub fn compute_record(
    t: f64,
    state: &State,
    prev: Option<(f64, f64)>,
    params: &PhysParams,
    op: &LameOperator,
    solver_tol: f64,
) -> Result<DiagnosticsRecord> {
    let kinetic = kinetic_energy(state);
    let dissipation = dissipation(state, params);
    let pressure_work = pressure(&state.z, params)?.zip_map(&div(&state.u), |p, d| p * d).integral();
    let energy_residual = match prev {
        Some((k_prev, dt)) if dt > 0.0 => (kinetic - k_prev) / dt + dissipation - pressure_work,
        _ => 0.0,
    };
    let sup_rho = norm(&state.rho, NormKind::Linf)?;
    let sup_u = state.u.max_abs();
    let (v, _) = velocity_split_with(op, state, params, solver_tol)?;
    let radii = default_radii(state.grid());
    let (vx, vy) = (v.component_x(), v.component_y());
    let mut bmo_gradv: f64 = 0.0;
    for comp in [&vx, &vy] {
        let g = grad(comp);
        for d in [g.component_x(), g.component_y()] {
            bmo_gradv = bmo_gradv.max(bmo_norm(&d, &radii)?);
        }
    }
    let u = &state.u;
    let grad_u_l2 = {
        let (ux, uy) = (u.component_x(), u.component_y());
        let sq: f64 = [grad(&ux), grad(&uy)]
            .iter()
            .map(|g| norm(g, NormKind::Lq(2.0)).map(|n| n * n))
            .sum::<Result<f64>>()?;
        sq.sqrt()
    };
    Ok(DiagnosticsRecord {
        t,
        sup_rho,
        sup_u,
        blowup_q: sup_rho + sup_u,
        kinetic,
        dissipation,
        pressure_work,
        energy_residual,
        mass: state.rho.integral(),
        z_total: state.z.integral(),
        min_r: comparison_min(state, params),
        min_rho: state.rho.min(),
        min_z: state.z.min(),
        grad_u_l2,
        u_h2: sobolev_norm(u, 2, 2.0)?,
        rho_h2: sobolev_norm(&state.rho, 2, 2.0)?,
        z_h2: sobolev_norm(&state.z, 2, 2.0)?,
        bmo_gradv,
    })
}

/// Records for every stamp of a trajectory; the energy residual of stamp
/// `k >= 1` is the balance over `[t_{k-1}, t_k]`.
pub fn energy_report(traj: &Trajectory, params: &PhysParams) -> Result<Vec<DiagnosticsRecord>> {
    let op = LameOperator::new(*traj.grid(), params.viscosity())?;
    let mut out: Vec<DiagnosticsRecord> = Vec::with_capacity(traj.states.len());
    for (k, s) in traj.states.iter().enumerate() {
        let prev = out.last().map(|r| (r.kinetic, traj.dt));
        out.push(compute_record(traj.stamp(k), s, prev, params, &op, 1e-10)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorStatus {
    Ok,
    Tripped,
}

/// Tripped iff `blowup_q > k`.
pub fn blowup_monitor(record: &DiagnosticsRecord, k: f64) -> MonitorStatus {
    if record.blowup_q > k {
        MonitorStatus::Tripped
    } else {
        MonitorStatus::Ok
    }
}

/// Stateful monitor that remembers the running maximum of the blow-up
/// quantity and whether it ever exceeded the ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupMonitor {
    k: f64,
    running_max: f64,
    tripped: bool,
}

impl BlowupMonitor {
    pub fn new(k: f64) -> Self {
        Self {
            k,
            running_max: f64::NEG_INFINITY,
            tripped: false,
        }
    }

    pub fn observe(&mut self, record: &DiagnosticsRecord) -> MonitorStatus {
        self.observe_value(record.blowup_q)
    }

    pub fn observe_value(&mut self, q: f64) -> MonitorStatus {
        // NaN never lowers the maximum but does trip the monitor
        if q.is_nan() || q > self.k {
            self.tripped = true;
        }
        if q > self.running_max {
            self.running_max = q;
        }
        if q.is_nan() || q > self.k {
            MonitorStatus::Tripped
        } else {
            MonitorStatus::Ok
        }
    }

    pub fn running_max(&self) -> f64 {
        self.running_max
    }

    pub fn tripped(&self) -> bool {
        self.tripped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZBoundSeries {
    pub t: Vec<f64>,
    pub min_r: Vec<f64>,
    pub tol_r: f64,
    /// Stamps with `min_r < -tol_r`.
    pub violations: Vec<usize>,
}

/// `min r` per stamp with the default tolerance `10 h^2`.
pub fn zbound_series(traj: &Trajectory, params: &PhysParams) -> ZBoundSeries {
    let h = traj.grid().h();
    let tol_r = 10.0 * h * h;
    let min_r: Vec<f64> = traj.states.iter().map(|s| comparison_min(s, params)).collect();
    let violations = min_r
        .iter()
        .enumerate()
        .filter(|(_, r)| !(**r >= -tol_r))
        .map(|(k, _)| k)
        .collect();
    ZBoundSeries {
        t: (0..traj.states.len()).map(|k| traj.stamp(k)).collect(),
        min_r,
        tol_r,
        violations,
    }
}

/// `||f||_inf` and `1 + ||f||_BMO ln(e + ||grad f||_q)` for `f` vanishing
/// on the boundary.
pub fn log_endpoint_probe(f: &ScalarField, q: f64) -> Result<(f64, f64)> {
    let (node, value) = f.max_abs_boundary();
    if value != 0.0 {
        return Err(Error::NotZeroTrace { node, value });
    }
    if !(q > 2.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("endpoint probe needs 2 < q < inf, got {q}")));
    }
    let lhs = norm(f, NormKind::Linf)?;
    let b = bmo_norm(f, &default_radii(f.grid()))?;
    let gq = norm(&grad(f), NormKind::Lq(q))?;
    Ok((lhs, 1.0 + b * (std::f64::consts::E + gq).ln()))
}

/// Outcome of two runs whose initial data differ by `eps * s` on every
/// field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinReport {
    pub eps: f64,
    pub t: Vec<f64>,
    /// `int rho1 |u1 - u2|^2 + rho1 |rho1 - rho2|^2 + Z1 |Z1 - Z2|^2`.
    pub d: Vec<f64>,
    pub d0: f64,
    /// `max_t D(t) / D(0)`; zero when `D(0) = 0`.
    pub sup_ratio: f64,
    /// Smallest `Lambda >= 0` with `ln D(t) <= ln D(0) + Lambda t` at every
    /// stamp.
    pub lambda: f64,
    pub envelope_holds: bool,
    pub nonincreasing: bool,
    pub termination: [String; 2],
}

pub fn twin_distance(a: &State, b: &State) -> f64 {
    let g = *a.grid();
    let du = &a.u - &b.u;
    let vals = (0..g.node_count())
        .map(|k| {
            let (r1, z1) = (a.rho.values()[k], a.z.values()[k]);
            let dr = r1 - b.rho.values()[k];
            let dz = z1 - b.z.values()[k];
            r1 * (du.xs()[k].powi(2) + du.ys()[k].powi(2)) + r1 * dr * dr + z1 * dz * dz
        })
        .collect();
    ScalarField::from_vec(g, vals).integral()
}

/// Runs `cfg` and a copy perturbed by `eps` side by side and compares them
/// stamp by stamp. Output directories are ignored.
pub fn twin_run_stability(cfg: &RunConfig, eps: f64) -> Result<TwinReport> {
    if !(0.0..=1e-2).contains(&eps) {
        return Err(Error::InvalidArgument(format!("twin-run perturbation must lie in [0, 1e-2], got {eps}")));
    }
    let base = RunConfig {
        output_dir: None,
        ..cfg.clone()
    };
    let twin = RunConfig {
        perturbation: base.perturbation + eps,
        ..base.clone()
    };
    let run = |c: &RunConfig| -> Result<(RunResult, Vec<(f64, State)>)> {
        let mut states = Vec::new();
        let res = simulate_observed(c, |_, t, s| states.push((t, s.clone())))?;
        Ok((res, states))
    };
    let (first, second) = std::thread::scope(|scope| {
        let h = scope.spawn(|| run(&twin));
        let a = run(&base);
        let b = h.join().expect("twin run panicked");
        (a, b)
    });
    let (ra, sa) = first?;
    let (rb, sb) = second?;
    let n = sa.len().min(sb.len());
    let mut t = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for k in 0..n {
        if sa[k].0 != sb[k].0 {
            // the runs took different window shrinks; stamps no longer align
            break;
        }
        t.push(sa[k].0);
        d.push(twin_distance(&sa[k].1, &sb[k].1));
    }
    let d0 = d.first().copied().unwrap_or(0.0);
    let (sup_ratio, lambda) = if d0 > 0.0 {
        let sup = d.iter().fold(0.0f64, |m, v| m.max(*v)) / d0;
        let lam = t
            .iter()
            .zip(&d)
            .skip(1)
            .filter(|(tk, _)| **tk > t[0])
            .map(|(tk, dk)| (dk.ln() - d0.ln()) / (tk - t[0]))
            .fold(0.0f64, f64::max);
        (sup, lam)
    } else {
        (0.0, 0.0)
    };
    let envelope_holds = lambda.is_finite()
        && t.iter().zip(&d).all(|(tk, dk)| *dk == 0.0 || dk.ln() <= d0.ln() + lambda * (tk - t[0]) + 1e-12);
    let nonincreasing = d.windows(2).all(|w| w[1] <= w[0]);
    Ok(TwinReport {
        eps,
        t,
        d,
        d0,
        sup_ratio,
        lambda,
        envelope_holds,
        nonincreasing,
        termination: [ra.termination.as_str().into(), rb.termination.as_str().into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, VectorField};

    fn record_with(sup_rho: f64, sup_u: f64) -> DiagnosticsRecord {
        let mut r = DiagnosticsRecord::from_csv_row(&["0"; 18].join(",")).unwrap();
        r.sup_rho = sup_rho;
        r.sup_u = sup_u;
        r.blowup_q = sup_rho + sup_u;
        r
    }

    #[test]
    fn monitor_examples() {
        assert_eq!(blowup_monitor(&record_with(1.0, 0.0), 2.0), MonitorStatus::Ok);
        assert_eq!(blowup_monitor(&record_with(1.0, 3.0), 2.0), MonitorStatus::Tripped);
        let mut m = BlowupMonitor::new(2.0);
        let mut last = f64::NEG_INFINITY;
        for q in [1.0, 0.5, 1.5, 0.2, 3.0, 1.0] {
            m.observe_value(q);
            assert!(m.running_max() >= last);
            last = m.running_max();
        }
        assert_eq!(m.running_max(), 3.0);
        assert!(m.tripped());
    }

    #[test]
    fn csv_row_round_trips_bits() {
        let g = Grid::unit_square(8).unwrap();
        let mut s = State::equilibrium(g);
        s.u = VectorField::from_fn(g, |x, y| (0.1 * x * y, x - y)).masked();
        s.rho = ScalarField::from_fn(g, |x, _| 1.0 + 0.1 * x);
        let p = PhysParams::default();
        let op = LameOperator::new(g, p.viscosity()).unwrap();
        let r = compute_record(0.3, &s, Some((0.01, 0.1)), &p, &op, 1e-10).unwrap();
        assert_eq!(DiagnosticsRecord::from_csv_row(&r.csv_row()).unwrap(), r);
        assert_eq!(CSV_HEADER.split(',').count(), 18);
        assert_eq!(r.blowup_q, r.sup_rho + r.sup_u);
    }

    #[test]
    fn equilibrium_record_is_quiet() {
        let g = Grid::unit_square(8).unwrap();
        let s = State::equilibrium(g);
        let p = PhysParams::default();
        let op = LameOperator::new(g, p.viscosity()).unwrap();
        let r = compute_record(0.0, &s, Some((0.0, 0.1)), &p, &op, 1e-10).unwrap();
        assert_eq!(r.kinetic, 0.0);
        assert_eq!(r.dissipation, 0.0);
        assert_eq!(r.energy_residual, 0.0);
        assert_eq!(r.bmo_gradv, 0.0);
        assert!((r.mass - 1.0).abs() < 1e-14);
        // (2 * 2 / 0.5) * 1 - 1
        assert_eq!(r.min_r, 7.0);
    }

    #[test]
    fn probe_examples() {
        let g = Grid::unit_square(16).unwrap();
        assert_eq!(log_endpoint_probe(&ScalarField::zeros(g), 6.0).unwrap(), (0.0, 1.0));
        let bump = ScalarField::from_fn(g, |x, y| (16.0 * x * (1.0 - x) * y * (1.0 - y)).powi(2));
        let (lhs, rhs) = log_endpoint_probe(&bump, 6.0).unwrap();
        assert!((lhs - 1.0).abs() < 1e-12);
        assert!(rhs >= 1.0);
        assert!(matches!(
            log_endpoint_probe(&ScalarField::constant(g, 1.0), 6.0),
            Err(Error::NotZeroTrace { .. })
        ));
        assert!(log_endpoint_probe(&bump, 2.0).is_err());
    }
}
