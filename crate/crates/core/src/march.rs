//! Run driver: chains fixed-point windows (or single-iteration steps) over
//! `[0, t_final]`, emits diagnostics and snapshots, and hosts the variable
//! maps `theta = Z / rho` and the velocity splitting `u = v + w`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::{compute_record, BlowupMonitor, DiagnosticsRecord, CSV_HEADER};
use crate::error::{Error, Result};
use crate::grid::{grad, Grid, ScalarField, VectorField};
use crate::io::Snapshot;
use crate::lame::LameOperator;
use crate::momentum::{compatibility_residual, pressure, PhysParams};
use crate::picard::{phi_map_with, solve_window_at, PicardReport, State, Trajectory, WindowConfig};

/// `theta = Z / rho`.
pub fn theta_transform(rho: &ScalarField, z: &ScalarField) -> Result<ScalarField> {
    check_density(rho)?;
    if rho.grid() != z.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(z.zip_map(rho, |z, r| z / r))
}

/// `Z = rho * theta`.
pub fn z_transform(rho: &ScalarField, theta: &ScalarField) -> Result<ScalarField> {
    check_density(rho)?;
    if rho.grid() != theta.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(rho.zip_map(theta, |r, t| r * t))
}

fn check_density(rho: &ScalarField) -> Result<()> {
    match rho.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        Some((node, &value)) => Err(Error::VacuumDensity { node, value }),
        None => Ok(()),
    }
}

/// `v = L^{-1}[grad p(Z)]` with no-slip data and `w = u - v`.
pub fn velocity_split(state: &State, params: &PhysParams, tol: f64) -> Result<(VectorField, VectorField)> {
    let op = LameOperator::new(*state.grid(), params.viscosity())?;
    velocity_split_with(&op, state, params, tol)
}

pub(crate) fn velocity_split_with(
    op: &LameOperator,
    state: &State,
    params: &PhysParams,
    tol: f64,
) -> Result<(VectorField, VectorField)> {
    let gp = grad(&pressure(&state.z, params)?);
    let v = op.solve(&gp, tol)?;
    let w = &state.u - &v;
    Ok((v, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PicardWindows,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    MonitorTripped,
    WindowCollapse,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::MonitorTripped => "monitor_tripped",
            Termination::WindowCollapse => "window_collapse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityProfile {
    Zero,
    /// `amp * s * (1, -1)` with `s = sin(pi x / lx) sin(pi y / ly)`.
    Sine,
    /// `amp * s^3 * (1, -1)`; `L u0` vanishes on the boundary.
    Cubic,
}

/// Parametrised initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialPreset {
    pub velocity: VelocityProfile,
    pub velocity_amplitude: f64,
    pub rho0: f64,
    pub z0: f64,
    /// Amplitude of an added `s` bump.
    pub rho_bump: f64,
    pub z_bump: f64,
    /// Amplitude of seeded band-limited noise added to `rho` and `Z`.
    pub noise: f64,
}

impl Default for InitialPreset {
    fn default() -> Self {
        Self {
            velocity: VelocityProfile::Zero,
            velocity_amplitude: 0.0,
            rho0: 1.0,
            z0: 1.0,
            rho_bump: 0.0,
            z_bump: 0.0,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Preset(InitialPreset),
    /// Restart from a run snapshot; time and step come from the snapshot
    /// index next to the file.
    Snapshot(PathBuf),
}

fn bump(grid: &Grid) -> ScalarField {
    let (lx, ly) = (grid.lx(), grid.ly());
    ScalarField::from_fn(*grid, |x, y| {
        (std::f64::consts::PI * x / lx).sin() * (std::f64::consts::PI * y / ly).sin()
    })
}

/// Sum of sine modes up to wavenumber 3 with seeded coefficients, scaled to
/// unit sup norm. Vanishes on the boundary.
pub fn seeded_noise(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let mut coeffs = [[0.0; 3]; 3];
    for row in &mut coeffs {
        for c in row.iter_mut() {
            *c = rng.random_range(-1.0..1.0);
        }
    }
    let (lx, ly) = (grid.lx(), grid.ly());
    let f = ScalarField::from_fn(*grid, |x, y| {
        let mut s = 0.0;
        for (k, row) in coeffs.iter().enumerate() {
            for (l, c) in row.iter().enumerate() {
                s += c
                    * ((k + 1) as f64 * std::f64::consts::PI * x / lx).sin()
                    * ((l + 1) as f64 * std::f64::consts::PI * y / ly).sin();
            }
        }
        s
    });
    let sup = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup > 0.0 {
        f.map(|v| v / sup)
    } else {
        f
    }
}

/// Builds the initial state of a preset, plus `perturbation * s` added to
/// every field (velocity along `(1, 1)`).
pub fn preset_state(grid: &Grid, preset: &InitialPreset, seed: u64, perturbation: f64) -> State {
    let s = bump(grid);
    let amp = preset.velocity_amplitude;
    let profile = |v: f64| match preset.velocity {
        VelocityProfile::Zero => 0.0,
        VelocityProfile::Sine => amp * v,
        VelocityProfile::Cubic => amp * v * v * v,
    };
    let mut u = VectorField::new(
        *grid,
        s.values().iter().map(|&v| profile(v) + perturbation * v).collect(),
        s.values().iter().map(|&v| -profile(v) + perturbation * v).collect(),
    )
    .unwrap_or_else(|_| VectorField::zeros(*grid));
    u.mask_boundary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_rho = seeded_noise(grid, &mut rng);
    let n_z = seeded_noise(grid, &mut rng);
    let field = |base: f64, bump_amp: f64, noise: &ScalarField| {
        ScalarField::from_vec(
            *grid,
            (0..grid.node_count())
                .map(|k| base + (bump_amp + perturbation) * s.values()[k] + preset.noise * noise.values()[k])
                .collect(),
        )
    };
    State {
        rho: field(preset.rho0, preset.rho_bump, &n_rho),
        z: field(preset.z0, preset.z_bump, &n_z),
        u,
    }
}

/// A snapshot written at a window end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub step: usize,
    pub t: f64,
}

pub const SNAPSHOT_DIR: &str = "snapshots";
pub const SNAPSHOT_INDEX: &str = "index.csv";

pub fn state_snapshot(state: &State) -> Snapshot {
    Snapshot {
        grid: *state.grid(),
        components: vec![
            state.u.xs().to_vec(),
            state.u.ys().to_vec(),
            state.rho.values().to_vec(),
            state.z.values().to_vec(),
        ],
    }
}

pub fn state_from_snapshot(snap: &Snapshot) -> Result<State> {
    if snap.components.len() != 4 {
        return Err(Error::InvalidArgument(format!(
            "state snapshot needs 4 components, found {}",
            snap.components.len()
        )));
    }
    let g = snap.grid;
    let c = &snap.components;
    State::new(
        VectorField::new(g, c[0].clone(), c[1].clone())?,
        ScalarField::new(g, c[2].clone())?,
        ScalarField::new(g, c[3].clone())?,
    )
}

/// Reads the snapshot index of a run directory (or of its `snapshots`
/// subdirectory).
pub fn read_snapshot_index(dir: &Path) -> Result<Vec<SnapshotEntry>> {
    let path = if dir.join(SNAPSHOT_INDEX).exists() {
        dir.join(SNAPSHOT_INDEX)
    } else {
        dir.join(SNAPSHOT_DIR).join(SNAPSHOT_INDEX)
    };
    let text = fs::read_to_string(&path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        let bad = || Error::Config(format!("{}:{}: malformed index line", path.display(), n + 1));
        if parts.len() != 3 {
            return Err(bad());
        }
        out.push(SnapshotEntry {
            file: parts[0].to_string(),
            step: parts[1].parse().map_err(|_| bad())?,
            t: parts[2].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Loads a snapshot together with its time and step from the sibling index.
pub fn load_restart(path: &Path) -> Result<(State, f64, usize)> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Config(format!("bad snapshot path {}", path.display())))?;
    let entry = read_snapshot_index(dir)?
        .into_iter()
        .find(|e| e.file == name)
        .ok_or_else(|| Error::Config(format!("{name} not listed in the snapshot index")))?;
    let state = state_from_snapshot(&Snapshot::read(path)?)?;
    Ok((state, entry.t, entry.step))
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    pub final_t: f64,
    pub final_step: usize,
    pub final_state: State,
    pub reports: Vec<PicardReport>,
    pub snapshots: Vec<SnapshotEntry>,
    pub monitor_max: f64,
    /// Boundary mismatch of the initial data; see
    /// [`compatibility_residual`].
    pub compatibility_residual: f64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    termination: &'a str,
    final_t: f64,
    final_step: usize,
    records: usize,
    windows: usize,
    total_shrinks: usize,
    monitor_max: f64,
    blowup_k: f64,
    compatibility_residual: f64,
    snapshots: &'a [SnapshotEntry],
}

struct Output {
    dir: PathBuf,
    csv: BufWriter<File>,
    index: BufWriter<File>,
}

impl Output {
    fn create(dir: &Path, cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir.join(SNAPSHOT_DIR))?;
        fs::write(dir.join("config.txt"), cfg.to_text())?;
        let mut csv = BufWriter::new(File::create(dir.join("diagnostics.csv"))?);
        writeln!(csv, "{CSV_HEADER}")?;
        let mut index = BufWriter::new(File::create(dir.join(SNAPSHOT_DIR).join(SNAPSHOT_INDEX))?);
        writeln!(index, "file,step,t")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
            index,
        })
    }

    fn record(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.csv, "{}", r.csv_row())?;
        Ok(())
    }

    fn snapshot(&mut self, n: usize, step: usize, t: f64, state: &State) -> Result<SnapshotEntry> {
        let file = format!("snap_{n:06}.ptns");
        state_snapshot(state).write(self.dir.join(SNAPSHOT_DIR).join(&file))?;
        writeln!(self.index, "{file},{step},{t}")?;
        self.index.flush()?;
        Ok(SnapshotEntry { file, step, t })
    }
}

/// Widens `[m, M]` to contain the current `rho` and `Z` so that a window
/// starting from an evolved state has a valid band.
fn window_params(params: &PhysParams, state: &State) -> PhysParams {
    let lo = params.m.min(state.rho.min()).min(state.z.min());
    let hi = params.big_m.max(state.rho.max()).max(state.z.max());
    PhysParams {
        m: lo,
        big_m: hi,
        ..*params
    }
}

/// Window actually used from time `t`: the configured length clipped to the
/// remaining interval with the configured step kept where possible.
fn window_for(cfg: &WindowConfig, remaining: f64) -> WindowConfig {
    if remaining >= cfg.t_window {
        return *cfg;
    }
    let n = ((remaining / cfg.dt() - 1e-9).ceil() as usize).max(2);
    WindowConfig {
        t_window: remaining,
        n_steps: n,
        ..*cfg
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<RunResult> {
    simulate_observed(cfg, |_, _, _| {})
}

/// Runs the configured simulation, calling `observer(step, t, state)` for
/// the initial state and every computed stamp.
pub fn simulate_observed(cfg: &RunConfig, mut observer: impl FnMut(usize, f64, &State)) -> Result<RunResult> {
    cfg.validate()?;
    let params = cfg.params;
    let (mut state, mut t, mut step) = match &cfg.initial {
        InitialData::Preset(p) => (preset_state(&cfg.grid, p, cfg.seed, cfg.perturbation), 0.0, 0),
        InitialData::Snapshot(path) => load_restart(path)?,
    };
    if state.grid() != &cfg.grid {
        return Err(Error::Config("initial data grid differs from the configured grid".into()));
    }
    let fresh = step == 0 && matches!(cfg.initial, InitialData::Preset(_));
    if fresh {
        for (name, f) in [("rho0", &state.rho), ("Z0", &state.z)] {
            if f.min() < params.m || f.max() > params.big_m {
                return Err(Error::Config(format!(
                    "{name} range [{}, {}] outside [m, M] = [{}, {}]",
                    f.min(),
                    f.max(),
                    params.m,
                    params.big_m
                )));
            }
        }
    }
    let compat = compatibility_residual(&state.u, &state.rho, &state.z, &params)?;
    let op = LameOperator::new(cfg.grid, params.viscosity())?;
    let mut out = match &cfg.output_dir {
        Some(dir) => Some(Output::create(dir, cfg)?),
        None => None,
    };
    let mut monitor = BlowupMonitor::new(cfg.blowup_k);
    let mut records = Vec::new();
    let mut reports = Vec::new();
    let mut snapshots = Vec::new();
    let solver_tol = cfg.window.solver_tol;

    let mut prev_kinetic = crate::diagnostics::kinetic_energy(&state);
    observer(step, t, &state);
    if fresh {
        let r = compute_record(t, &state, None, &params, &op, solver_tol).map_err(|e| e.at(t))?;
        monitor.observe(&r);
        if let Some(o) = out.as_mut() {
            o.record(&r)?;
        }
        records.push(r);
        if let Some(o) = out.as_mut() {
            snapshots.push(o.snapshot(0, step, t, &state)?);
        }
    }

    let t_scale = cfg.t_final.abs().max(1.0);
    let mut termination = Termination::Completed;
    let mut window_index = snapshots.len();
    if monitor.tripped() {
        termination = Termination::MonitorTripped;
    }
    'windows: while termination == Termination::Completed && cfg.t_final - t > 1e-12 * t_scale {
        let wcfg = window_for(&cfg.window, cfg.t_final - t);
        let wparams = window_params(&params, &state);
        let traj = match cfg.mode {
            Mode::PicardWindows => match solve_window_at(&state, t, &wparams, &wcfg) {
                Ok((traj, report)) => {
                    reports.push(report);
                    traj
                }
                Err(Error::WindowCollapse { .. }) => {
                    termination = Termination::WindowCollapse;
                    break 'windows;
                }
                Err(e) => return Err(e.at(t)),
            },
            Mode::Sequential => sequential_window(&op, &state, t, &wparams, &wcfg).map_err(|e| e.at(t))?,
        };
        for k in 1..traj.states.len() {
            let s = &traj.states[k];
            let tk = traj.stamp(k);
            step += 1;
            let kin = crate::diagnostics::kinetic_energy(s);
            let quick = crate::diagnostics::blowup_quantity(s);
            let tripped = quick > cfg.blowup_k;
            observer(step, tk, s);
            if step % cfg.cadence == 0 || tripped {
                let r = compute_record(tk, s, Some((prev_kinetic, traj.dt)), &params, &op, solver_tol)
                    .map_err(|e| e.at(tk))?;
                if let Some(o) = out.as_mut() {
                    o.record(&r)?;
                }
                records.push(r);
            }
            monitor.observe_value(quick);
            prev_kinetic = kin;
            if tripped {
                termination = Termination::MonitorTripped;
                state = s.clone();
                t = tk;
                break 'windows;
            }
        }
        t = traj.t_end();
        state = traj.states.last().expect("window has states").clone();
        if let Some(o) = out.as_mut() {
            snapshots.push(o.snapshot(window_index, step, t, &state)?);
        }
        window_index += 1;
    }

    if let Some(mut o) = out {
        o.csv.flush()?;
        let summary = Summary {
            termination: termination.as_str(),
            final_t: t,
            final_step: step,
            records: records.len(),
            windows: reports.len(),
            total_shrinks: reports.iter().map(|r| r.shrink_count).sum(),
            monitor_max: monitor.running_max(),
            blowup_k: cfg.blowup_k,
            compatibility_residual: compat,
            snapshots: &snapshots,
        };
        fs::write(o.dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        fs::write(o.dir.join("picard_reports.json"), serde_json::to_string_pretty(&reports)?)?;
    }

    Ok(RunResult {
        records,
        termination,
        final_t: t,
        final_step: step,
        final_state: state,
        reports,
        snapshots,
        monitor_max: monitor.running_max(),
        compatibility_residual: compat,
    })
}

/// One map application per step with the previous state as guess.
fn sequential_window(
    op: &LameOperator,
    initial: &State,
    t0: f64,
    params: &PhysParams,
    cfg: &WindowConfig,
) -> Result<Trajectory> {
    let dt = cfg.dt();
    let mut states = vec![initial.clone()];
    let mut cur = initial.clone();
    for k in 0..cfg.n_steps {
        let guess = Trajectory::constant(&cur, t0 + k as f64 * dt, dt, 1);
        let next = phi_map_with(op, &guess, params, cfg)?;
        cur = next.states[1].clone();
        if !cur.is_finite() {
            return Err(Error::InvalidArgument("non-finite state".into()));
        }
        states.push(cur.clone());
    }
    Ok(Trajectory { t0, dt, states })
}

/// Recomputes diagnostics for every snapshot of a run directory. Energy
/// residuals use the spacing between consecutive snapshots.
pub fn diagnose_run_dir(dir: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let cfg = RunConfig::from_file(&dir.join("config.txt"))?;
    let entries = read_snapshot_index(dir)?;
    let op = LameOperator::new(cfg.grid, cfg.params.viscosity())?;
    let mut out = Vec::with_capacity(entries.len());
    let mut prev: Option<(f64, f64)> = None;
    for e in &entries {
        let state = state_from_snapshot(&Snapshot::read(dir.join(SNAPSHOT_DIR).join(&e.file))?)?;
        let prev_arg = prev.map(|(k, t)| (k, e.t - t));
        let r = compute_record(e.t, &state, prev_arg, &cfg.params, &op, cfg.window.solver_tol)?;
        prev = Some((r.kinetic, e.t));
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_of_known_fields() {
        let g = Grid::unit_square(4).unwrap();
        let th = theta_transform(&ScalarField::constant(g, 2.0), &ScalarField::constant(g, 6.0)).unwrap();
        assert!(th.values().iter().all(|&v| v == 3.0));
        let rho = ScalarField::from_fn(g, |x, y| 1.0 + x + y);
        let th = theta_transform(&rho, &rho).unwrap();
        assert!(th.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn vacuum_is_rejected() {
        let g = Grid::unit_square(4).unwrap();
        let mut rho = ScalarField::constant(g, 1.0);
        rho.values_mut()[3] = 0.0;
        assert!(matches!(
            theta_transform(&rho, &rho),
            Err(Error::VacuumDensity { node: 3, .. })
        ));
        assert!(z_transform(&rho, &rho).is_err());
    }

    #[test]
    fn uniform_z_gives_trivial_split() {
        let g = Grid::unit_square(8).unwrap();
        let mut s = State::equilibrium(g);
        s.u = VectorField::from_fn(g, |x, y| (x * y, x - y)).masked();
        let (v, w) = velocity_split(&s, &PhysParams::default(), 1e-10).unwrap();
        assert_eq!(v.max_abs(), 0.0);
        assert_eq!(w, s.u);
    }

    #[test]
    fn split_of_resting_fluid() {
        let g = Grid::unit_square(8).unwrap();
        let mut s = State::equilibrium(g);
        s.z = ScalarField::from_fn(g, |x, y| 1.0 + 0.2 * x * y);
        let (v, w) = velocity_split(&s, &PhysParams::default(), 1e-10).unwrap();
        assert!(v.max_abs() > 0.0 && v.is_no_slip());
        assert_eq!(w, -&v);
    }

    #[test]
    fn preset_is_no_slip_and_seeded() {
        let g = Grid::unit_square(8).unwrap();
        let p = InitialPreset {
            velocity: VelocityProfile::Sine,
            velocity_amplitude: 0.01,
            noise: 0.1,
            ..Default::default()
        };
        let a = preset_state(&g, &p, 7, 0.0);
        let b = preset_state(&g, &p, 7, 0.0);
        let c = preset_state(&g, &p, 8, 0.0);
        assert_eq!(a, b);
        assert_ne!(a.rho, c.rho);
        assert!(a.u.is_no_slip());
        assert!((a.rho.max() - 1.0).abs() <= 0.1 + 1e-12);
    }
}
