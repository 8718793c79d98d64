use std::f64::consts::PI;

use ptns_core::config::RunConfig;
use ptns_core::diagnostics::{energy_report, twin_run_stability, zbound_series, DiagnosticsRecord, CSV_HEADER};
use ptns_core::grid::{grad, Grid, ScalarField, VectorField};
use ptns_core::io::Snapshot;
use ptns_core::lame::solve_lame;
use ptns_core::march::{
    diagnose_run_dir, simulate, velocity_split, InitialData, InitialPreset, Mode, Termination, VelocityProfile,
};
use ptns_core::momentum::{pressure, PhysParams};
use ptns_core::picard::{check_r_membership, phi_map, solve_window, State, Trajectory, WindowConfig};
use ptns_core::Error;

fn small_data(n: usize, amp: f64) -> State {
    let g = Grid::unit_square(n).unwrap();
    let u = VectorField::from_fn(g, |x, y| {
        let s = (PI * x).sin() * (PI * y).sin();
        (amp * s, -amp * s)
    })
    .masked();
    State::new(u, ScalarField::constant(g, 1.0), ScalarField::constant(g, 1.0)).unwrap()
}

fn preset(velocity: VelocityProfile, amp: f64) -> InitialData {
    InitialData::Preset(InitialPreset {
        velocity,
        velocity_amplitude: amp,
        ..InitialPreset::default()
    })
}

fn config(n: usize, t_final: f64) -> RunConfig {
    RunConfig {
        grid: Grid::unit_square(n).unwrap(),
        t_final,
        ..RunConfig::default()
    }
}

#[test]
fn one_picard_application_moves_small_data() {
    let init = small_data(32, 0.01);
    let cfg = WindowConfig {
        t_window: 0.08,
        n_steps: 8,
        ..WindowConfig::default()
    };
    let guess = Trajectory::constant(&init, 0.0, cfg.dt(), cfg.n_steps);
    let next = phi_map(&guess, &PhysParams::default(), &cfg).unwrap();
    let d = next.distance(&guess);
    assert!(d.is_finite() && d > 0.0);
    assert_eq!(next.states[0], init);
}

#[test]
fn large_data_forces_a_window_shrink() {
    let init = small_data(16, 100.0);
    let params = PhysParams::default();
    match solve_window(&init, &params, &WindowConfig::default()) {
        Ok((_, report)) => assert!(report.shrink_count >= 1, "{report:?}"),
        Err(e) => assert!(matches!(e, Error::WindowCollapse { .. }), "{e}"),
    }
}

#[test]
fn r_flags_pass_with_ceilings_from_equilibrium_norms() {
    let params = PhysParams::default();
    let base = WindowConfig::default();
    let g = Grid::unit_square(16).unwrap();
    let eq = Trajectory::constant(&State::equilibrium(g), 0.0, base.dt(), base.n_steps);
    let eq_flags = check_r_membership(&eq, &params, &base);
    assert!(eq_flags.all_pass());
    let cfg = WindowConfig {
        b1: 10.0 * eq_flags.b1.value,
        b2: 10.0 * eq_flags.b2.value.max(1.0),
        b3: 10.0 * eq_flags.b3.value.max(1.0),
        ..base
    };
    let (traj, report) = solve_window(&small_data(16, 0.01), &params, &cfg).unwrap();
    assert!(report.converged);
    assert!(check_r_membership(&traj, &params, &cfg).all_pass());
}

#[test]
fn equilibrium_run_is_flat() {
    let res = simulate(&config(8, 1.0)).unwrap();
    assert_eq!(res.termination, Termination::Completed);
    let first = res.records[0];
    for r in &res.records {
        assert_eq!(r.kinetic, 0.0);
        assert_eq!(r.energy_residual, 0.0);
        assert_eq!(r.min_r, first.min_r);
        assert!((r.mass - first.mass).abs() < 1e-14);
    }
    assert!((res.final_t - 1.0).abs() < 1e-12);
}

#[test]
fn small_data_kinetic_energy_decays() {
    let cfg = RunConfig {
        initial: preset(VelocityProfile::Sine, 0.01),
        ..config(16, 0.5)
    };
    let res = simulate(&cfg).unwrap();
    assert_eq!(res.termination, Termination::Completed);
    // kinetic energy trades with the acoustic part, so only the envelope decays
    let k0 = res.records[0].kinetic;
    assert!(res.records.iter().all(|r| r.kinetic <= k0));
    assert!(res.records.last().unwrap().kinetic < 1e-3 * k0);
    for r in &res.records {
        assert!(r.min_rho > 0.0 && r.min_z > 0.0 && r.is_finite());
    }
}

#[test]
fn monitor_trips_on_a_low_ceiling() {
    let cfg = RunConfig {
        initial: preset(VelocityProfile::Sine, 0.5),
        blowup_k: 1.2,
        ..config(8, 0.5)
    };
    let res = simulate(&cfg).unwrap();
    assert_eq!(res.termination, Termination::MonitorTripped);
    assert!(res.records.last().unwrap().blowup_q > 1.2);
}

#[test]
fn sequential_mode_tracks_windowed_mode() {
    let base = RunConfig {
        initial: preset(VelocityProfile::Cubic, 0.01),
        ..config(8, 0.1)
    };
    let win = simulate(&base).unwrap();
    let seq = simulate(&RunConfig {
        mode: Mode::Sequential,
        ..base.clone()
    })
    .unwrap();
    assert_eq!(seq.termination, Termination::Completed);
    assert_eq!(seq.records.len(), win.records.len());
    let (a, b) = (win.records.last().unwrap(), seq.records.last().unwrap());
    assert!((a.kinetic - b.kinetic).abs() < 0.1 * a.kinetic.max(1e-12));
}

#[test]
fn energy_identity_telescopes() {
    let cfg = WindowConfig {
        t_window: 0.02,
        n_steps: 20,
        ..WindowConfig::default()
    };
    let p = PhysParams::default();
    let g = Grid::unit_square(16).unwrap();
    let u = VectorField::from_fn(g, |x, y| {
        let s = ((PI * x).sin() * (PI * y).sin()).powi(3);
        (0.05 * s, -0.05 * s)
    })
    .masked();
    let init = State::new(u, ScalarField::constant(g, 1.0), ScalarField::constant(g, 1.0)).unwrap();
    let (traj, _) = solve_window(&init, &p, &cfg).unwrap();
    let recs = energy_report(&traj, &p).unwrap();
    let dt = traj.dt;
    let sum = |f: &dyn Fn(&DiagnosticsRecord) -> f64| recs[1..].iter().map(|r| dt * f(r)).sum::<f64>();
    let change = recs.last().unwrap().kinetic - recs[0].kinetic;
    let telescoped = sum(&|r| r.energy_residual - r.dissipation + r.pressure_work);
    assert!((change - telescoped).abs() < 1e-14);
    // the accumulated residual is a small part of the dissipated energy
    let dissipated = sum(&|r| r.dissipation);
    assert!(sum(&|r| r.energy_residual).abs() < 0.2 * dissipated);
}

#[test]
fn zbound_examples() {
    let p = PhysParams::default();
    let g = Grid::unit_square(8).unwrap();
    let eq = Trajectory::constant(&State::equilibrium(g), 0.0, 0.01, 4);
    let z = zbound_series(&eq, &p);
    assert!(z.min_r.iter().all(|r| *r == 7.0));
    assert!(z.violations.is_empty());
    let mut bad = State::equilibrium(g);
    bad.z = ScalarField::constant(g, 9.0);
    let z = zbound_series(&Trajectory::constant(&bad, 0.0, 0.01, 1), &p);
    assert_eq!(z.violations, vec![0, 1]);
}

#[test]
fn velocity_split_matches_lame_oracle() {
    let p = PhysParams::default();
    let g = Grid::unit_square(16).unwrap();
    let mut s = small_data(16, 0.01);
    s.z = ScalarField::from_fn(g, |x, y| 1.0 + 0.1 * (PI * x).cos() * y * y);
    let (v, w) = velocity_split(&s, &p, 1e-12).unwrap();
    let oracle = solve_lame(&grad(&pressure(&s.z, &p).unwrap()), p.viscosity(), 1e-12).unwrap();
    assert!((&v - &oracle).max_abs() < 1e-10);
    assert!((&(&v + &w) - &s.u).max_abs() < 1e-15);
    assert!(v.is_no_slip() && w.is_no_slip());
}

#[test]
fn twin_run_scaling_on_small_data() {
    let cfg = RunConfig {
        initial: preset(VelocityProfile::Sine, 0.01),
        ..config(8, 0.2)
    };
    let a = twin_run_stability(&cfg, 1e-5).unwrap();
    let b = twin_run_stability(&cfg, 1e-4).unwrap();
    let end = |r: &ptns_core::diagnostics::TwinReport| *r.d.last().unwrap();
    let ratio = end(&b) / end(&a);
    assert!((10.0..=1000.0).contains(&ratio), "D(T) ratio {ratio}");
    assert!(a.envelope_holds && b.envelope_holds);
    assert!(twin_run_stability(&cfg, 0.1).is_err());
}

#[test]
fn run_directory_layout_and_diag_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = RunConfig {
        initial: preset(VelocityProfile::Sine, 0.01),
        output_dir: Some(out.clone()),
        cadence: 2,
        window: WindowConfig {
            t_window: 0.04,
            n_steps: 4,
            ..WindowConfig::default()
        },
        ..config(8, 0.12)
    };
    let res = simulate(&cfg).unwrap();
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let rows: Vec<DiagnosticsRecord> = lines.map(|l| DiagnosticsRecord::from_csv_row(l).unwrap()).collect();
    assert_eq!(rows, res.records);
    // steps 0, 2, 4, ..., 12
    assert_eq!(rows.len(), 7);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["termination"], "completed");
    assert_eq!(RunConfig::from_file(&out.join("config.txt")).unwrap().grid, cfg.grid);
    // one snapshot per window end plus the initial state
    assert_eq!(res.snapshots.len(), 4);
    let snap = Snapshot::read(out.join("snapshots").join(&res.snapshots[3].file)).unwrap();
    assert_eq!(snap.components.len(), 4);
    assert_eq!(snap.components[2], res.final_state.rho.values());

    let recomputed = diagnose_run_dir(&out).unwrap();
    assert_eq!(recomputed.len(), 4);
    assert_eq!(recomputed[0], res.records[0]);
    assert_eq!(recomputed[3].kinetic, res.records.last().unwrap().kinetic);
}

#[test]
fn config_file_paths_are_relative_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "nx = 8\nny = 8\noutput_dir = out\nt_final = 0.02\n").unwrap();
    let cfg = RunConfig::from_file(&path).unwrap();
    assert_eq!(cfg.output_dir.unwrap(), dir.path().join("out"));
    std::fs::write(&path, "nx = 8\nbogus = 1\n").unwrap();
    assert!(matches!(RunConfig::from_file(&path), Err(Error::Config(_))));
}
