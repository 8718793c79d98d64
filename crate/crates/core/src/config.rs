//! Run configuration and its flat `key = value` text form.
//!
//! Blank lines and `#` comments are ignored. Every key is optional and
//! falls back to [`RunConfig::default`]; unknown or repeated keys are
//! errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::march::{InitialData, InitialPreset, Mode, VelocityProfile};
use crate::momentum::PhysParams;
use crate::picard::WindowConfig;

/// Documented configuration keys with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("nx", "cells along x (>= 4)"),
    ("ny", "cells along y (>= 4)"),
    ("lx", "domain length along x"),
    ("ly", "domain length along y"),
    ("mu", "shear viscosity (> 0)"),
    ("lambda", "second viscosity coefficient (lambda + mu >= 0)"),
    ("a", "pressure law coefficient in p = a Z^gamma"),
    ("gamma", "pressure law exponent (> 1)"),
    ("m", "lower admissibility bound for rho and Z"),
    ("M", "upper admissibility bound for rho and Z"),
    ("body_force_x", "uniform body force, x component"),
    ("body_force_y", "uniform body force, y component"),
    ("t_final", "end time (> 0)"),
    ("mode", "picard_windows or sequential"),
    ("t_window", "window length"),
    ("window_steps", "time steps per window (>= 2)"),
    ("max_picard", "fixed-point iteration cap per window"),
    ("tol_fix", "relative fixed-point tolerance"),
    ("shrink_factor", "window shrink factor in [0.25, 0.9]"),
    ("b1", "ceiling for the density/Z H2 surrogate"),
    ("b2", "ceiling for the velocity surrogate"),
    ("b3", "ceiling for the time-derivative surrogate"),
    ("solver_tol", "relative residual for linear solves"),
    ("cadence", "record diagnostics every this many steps (>= 1)"),
    ("output_dir", "run directory; omit for in-memory runs"),
    ("blowup_k", "monitor ceiling K on sup rho + sup |u|"),
    ("seed", "seed for noise in the initial data"),
    ("initial", "preset or snapshot"),
    ("snapshot", "snapshot file when initial = snapshot"),
    ("velocity", "zero, sine or cubic initial velocity profile"),
    ("velocity_amplitude", "amplitude of the velocity profile"),
    ("rho0", "base density"),
    ("z0", "base Z"),
    ("rho_bump", "amplitude of a sine bump added to rho"),
    ("z_bump", "amplitude of a sine bump added to Z"),
    ("noise", "amplitude of seeded smooth noise added to rho and Z"),
    ("perturbation", "amplitude of a sine bump added to every field"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub params: PhysParams,
    pub initial: InitialData,
    pub t_final: f64,
    pub mode: Mode,
    pub window: WindowConfig,
    pub cadence: usize,
    pub output_dir: Option<PathBuf>,
    pub blowup_k: f64,
    pub seed: u64,
    /// Added to the initial data as `perturbation * s` on every field; used
    /// by the twin-run experiment.
    pub perturbation: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: Grid::unit_square(16).expect("valid default grid"),
            params: PhysParams::default(),
            initial: InitialData::Preset(InitialPreset::default()),
            t_final: 0.1,
            mode: Mode::PicardWindows,
            window: WindowConfig::default(),
            cadence: 1,
            output_dir: None,
            blowup_k: 1e6,
            seed: 0,
            perturbation: 0.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("cannot parse value {v:?} for key {key}")))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.window.validate()?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be at least 1".into()));
        }
        if !(self.blowup_k > 0.0) {
            return Err(Error::Config(format!("blowup_k must be positive, got {}", self.blowup_k)));
        }
        if !self.perturbation.is_finite() {
            return Err(Error::Config("perturbation must be finite".into()));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        // relative paths in a config file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        if let InitialData::Snapshot(p) = &mut cfg.initial {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = &mut cfg.output_dir {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.iter().any(|(name, _)| *name == k) {
                return Err(Error::Config(format!("line {}: unknown key {k:?}", n + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: key {k:?} given twice", n + 1)));
            }
        }
        let mut cfg = Self::default();
        let get = |k: &str| map.get(k).map(String::as_str);

        let (mut nx, mut ny, mut lx, mut ly) = (cfg.grid.nx(), cfg.grid.ny(), cfg.grid.lx(), cfg.grid.ly());
        if let Some(v) = get("nx") {
            nx = parse("nx", v)?;
        }
        if let Some(v) = get("ny") {
            ny = parse("ny", v)?;
        }
        if let Some(v) = get("lx") {
            lx = parse("lx", v)?;
        }
        if let Some(v) = get("ly") {
            ly = parse("ly", v)?;
        }
        cfg.grid = Grid::new(nx, ny, lx, ly)?;

        let p = &mut cfg.params;
        let [bx, by] = &mut p.body_force;
        for (key, slot) in [
            ("mu", &mut p.mu),
            ("lambda", &mut p.lambda),
            ("a", &mut p.a),
            ("gamma", &mut p.gamma),
            ("m", &mut p.m),
            ("M", &mut p.big_m),
            ("body_force_x", bx),
            ("body_force_y", by),
        ] {
            if let Some(v) = get(key) {
                *slot = parse(key, v)?;
            }
        }

        let w = &mut cfg.window;
        for (key, slot) in [
            ("t_window", &mut w.t_window),
            ("tol_fix", &mut w.tol_fix),
            ("shrink_factor", &mut w.shrink_factor),
            ("b1", &mut w.b1),
            ("b2", &mut w.b2),
            ("b3", &mut w.b3),
            ("solver_tol", &mut w.solver_tol),
        ] {
            if let Some(v) = get(key) {
                *slot = parse(key, v)?;
            }
        }
        if let Some(v) = get("window_steps") {
            w.n_steps = parse("window_steps", v)?;
        }
        if let Some(v) = get("max_picard") {
            w.max_picard = parse("max_picard", v)?;
        }

        if let Some(v) = get("t_final") {
            cfg.t_final = parse("t_final", v)?;
        }
        if let Some(v) = get("mode") {
            cfg.mode = match v {
                "picard_windows" => Mode::PicardWindows,
                "sequential" => Mode::Sequential,
                _ => return Err(Error::Config(format!("unknown mode {v:?}"))),
            };
        }
        if let Some(v) = get("cadence") {
            cfg.cadence = parse("cadence", v)?;
        }
        if let Some(v) = get("output_dir") {
            cfg.output_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = get("blowup_k") {
            cfg.blowup_k = parse("blowup_k", v)?;
        }
        if let Some(v) = get("seed") {
            cfg.seed = parse("seed", v)?;
        }
        if let Some(v) = get("perturbation") {
            cfg.perturbation = parse("perturbation", v)?;
        }

        let preset_keys = ["velocity", "velocity_amplitude", "rho0", "z0", "rho_bump", "z_bump", "noise"];
        match get("initial").unwrap_or("preset") {
            "preset" => {
                if map.contains_key("snapshot") {
                    return Err(Error::Config("snapshot given but initial is not snapshot".into()));
                }
                let mut pr = InitialPreset::default();
                if let Some(v) = get("velocity") {
                    pr.velocity = match v {
                        "zero" => VelocityProfile::Zero,
                        "sine" => VelocityProfile::Sine,
                        "cubic" => VelocityProfile::Cubic,
                        _ => return Err(Error::Config(format!("unknown velocity profile {v:?}"))),
                    };
                }
                for (key, slot) in [
                    ("velocity_amplitude", &mut pr.velocity_amplitude),
                    ("rho0", &mut pr.rho0),
                    ("z0", &mut pr.z0),
                    ("rho_bump", &mut pr.rho_bump),
                    ("z_bump", &mut pr.z_bump),
                    ("noise", &mut pr.noise),
                ] {
                    if let Some(v) = get(key) {
                        *slot = parse(key, v)?;
                    }
                }
                cfg.initial = InitialData::Preset(pr);
            }
            "snapshot" => {
                if let Some(k) = preset_keys.iter().find(|k| map.contains_key(**k)) {
                    return Err(Error::Config(format!("{k} has no effect with initial = snapshot")));
                }
                let path = get("snapshot").ok_or_else(|| Error::Config("initial = snapshot needs a snapshot key".into()))?;
                cfg.initial = InitialData::Snapshot(PathBuf::from(path));
            }
            other => return Err(Error::Config(format!("unknown initial data kind {other:?}"))),
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Text form that [`RunConfig::parse`] reads back to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let p = &self.params;
        let w = &self.window;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("nx", g.nx().to_string());
        kv("ny", g.ny().to_string());
        kv("lx", format!("{:?}", g.lx()));
        kv("ly", format!("{:?}", g.ly()));
        kv("mu", format!("{:?}", p.mu));
        kv("lambda", format!("{:?}", p.lambda));
        kv("a", format!("{:?}", p.a));
        kv("gamma", format!("{:?}", p.gamma));
        kv("m", format!("{:?}", p.m));
        kv("M", format!("{:?}", p.big_m));
        kv("body_force_x", format!("{:?}", p.body_force[0]));
        kv("body_force_y", format!("{:?}", p.body_force[1]));
        kv("t_final", format!("{:?}", self.t_final));
        kv(
            "mode",
            match self.mode {
                Mode::PicardWindows => "picard_windows",
                Mode::Sequential => "sequential",
            }
            .into(),
        );
        kv("t_window", format!("{:?}", w.t_window));
        kv("window_steps", w.n_steps.to_string());
        kv("max_picard", w.max_picard.to_string());
        kv("tol_fix", format!("{:?}", w.tol_fix));
        kv("shrink_factor", format!("{:?}", w.shrink_factor));
        kv("b1", format!("{:?}", w.b1));
        kv("b2", format!("{:?}", w.b2));
        kv("b3", format!("{:?}", w.b3));
        kv("solver_tol", format!("{:?}", w.solver_tol));
        kv("cadence", self.cadence.to_string());
        if let Some(d) = &self.output_dir {
            kv("output_dir", d.display().to_string());
        }
        kv("blowup_k", format!("{:?}", self.blowup_k));
        kv("seed", self.seed.to_string());
        kv("perturbation", format!("{:?}", self.perturbation));
        match &self.initial {
            InitialData::Preset(pr) => {
                kv("initial", "preset".into());
                kv(
                    "velocity",
                    match pr.velocity {
                        VelocityProfile::Zero => "zero",
                        VelocityProfile::Sine => "sine",
                        VelocityProfile::Cubic => "cubic",
                    }
                    .into(),
                );
                kv("velocity_amplitude", format!("{:?}", pr.velocity_amplitude));
                kv("rho0", format!("{:?}", pr.rho0));
                kv("z0", format!("{:?}", pr.z0));
                kv("rho_bump", format!("{:?}", pr.rho_bump));
                kv("z_bump", format!("{:?}", pr.z_bump));
                kv("noise", format!("{:?}", pr.noise));
            }
            InitialData::Snapshot(path) => {
                kv("initial", "snapshot".into());
                kv("snapshot", path.display().to_string());
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn text_round_trip() {
        let cfg = RunConfig::parse(
            "nx = 8\nny = 12\nlx = 2\nmu = 0.5\nlambda = 0.25\nM = 3 # upper\nmode = sequential\n\
             velocity = cubic\nvelocity_amplitude = 0.01\nnoise = 0.05\nseed = 9\nbody_force_y = -1\n",
        )
        .unwrap();
        assert_eq!(cfg.grid.ny(), 12);
        assert_eq!(cfg.params.big_m, 3.0);
        assert_eq!(cfg.mode, Mode::Sequential);
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "nq = 3",
            "nx = 3",
            "nx = four",
            "nx 4",
            "nx = 8\nnx = 8",
            "mode = fast",
            "cadence = 0",
            "t_final = -1",
            "initial = snapshot",
            "initial = snapshot\nsnapshot = a.ptns\nrho0 = 2",
            "snapshot = a.ptns",
            "velocity = swirl",
            "mu = 0",
        ] {
            assert!(RunConfig::parse(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn every_documented_key_parses() {
        let text: String = KEYS
            .iter()
            .filter(|(k, _)| *k != "snapshot" && *k != "output_dir")
            .map(|(k, _)| {
                let v = match *k {
                    "mode" => "picard_windows",
                    "initial" => "preset",
                    "velocity" => "sine",
                    "nx" | "ny" | "window_steps" | "max_picard" | "cadence" | "seed" => "8",
                    "M" => "2",
                    "m" | "rho0" | "z0" | "shrink_factor" => "0.5",
                    "gamma" => "1.4",
                    "tol_fix" => "1e-8",
                    "solver_tol" => "1e-10",
                    _ => "1",
                };
                format!("{k} = {v}\n")
            })
            .collect();
        RunConfig::parse(&text).unwrap();
    }
}
