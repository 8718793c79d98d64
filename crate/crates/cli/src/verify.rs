use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ptns_core::estimates::scan_elliptic_estimates;
use ptns_core::grid::{div, grad, laplacian, Grid, ScalarField, VectorField};
use ptns_core::lame::{apply_lame, LameOperator, Viscosity};
use ptns_core::momentum::{momentum_step, PhysParams};
use ptns_core::Result;
use serde::Serialize;

#[derive(Debug, Serialize)]
struct Study {
    name: String,
    levels: Vec<usize>,
    errors: Vec<f64>,
    orders: Vec<f64>,
    /// Accepted band for every observed order.
    band: (f64, f64),
    pass: bool,
}

impl Study {
    fn new(name: impl Into<String>, levels: &[usize], errors: Vec<f64>, band: (f64, f64)) -> Self {
        let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let pass = orders.iter().all(|p| (band.0..=band.1).contains(p));
        Study {
            name: name.into(),
            levels: levels.to_vec(),
            errors,
            orders,
            band,
            pass,
        }
    }
}

#[derive(Debug, Serialize)]
struct Ceiling {
    estimate: String,
    q: f64,
    ceilings: Vec<(usize, f64)>,
    spread: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    studies: Vec<Study>,
    estimates: Vec<Ceiling>,
    pass: bool,
}

const LEVELS: [usize; 3] = [32, 64, 128];

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Scalar with its first derivatives, second derivatives and Laplacian:
/// `[f, fx, fy, fxx, fxy, lap]`.
type Jet = fn(f64, f64) -> [f64; 6];

const JETS: [(&str, Jet); 2] = [
    ("sin(pi x) sin(pi y)", |x, y| {
        let (sx, cx, sy, cy) = ((PI * x).sin(), (PI * x).cos(), (PI * y).sin(), (PI * y).cos());
        let p2 = PI * PI;
        [sx * sy, PI * cx * sy, PI * sx * cy, -p2 * sx * sy, p2 * cx * cy, -2.0 * p2 * sx * sy]
    }),
    ("exp(x + y/2)", |x, y| {
        let e = (x + 0.5 * y).exp();
        [e, e, 0.5 * e, e, 0.5 * e, 1.25 * e]
    }),
];

fn operator_studies() -> Result<Vec<Study>> {
    let visc = Viscosity::new(1.0, 0.5)?;
    let mut out = vec![];
    for (name, jet) in JETS {
        let mut errs = [vec![], vec![], vec![], vec![]];
        for &n in &LEVELS {
            let g = Grid::unit_square(n)?;
            let exact = |c: usize| ScalarField::from_fn(g, |x, y| jet(x, y)[c]);
            let f = exact(0);
            let (fx, fy, fxx, fxy, lap) = (exact(1), exact(2), exact(3), exact(4), exact(5));
            let gr = grad(&f);
            errs[0].push(max_err(gr.xs(), fx.values()).max(max_err(gr.ys(), fy.values())));
            let v = VectorField::from_components(f.clone(), f.clone());
            errs[1].push(max_err(div(&v).values(), (&fx + &fy).values()));
            errs[2].push(max_err(laplacian(&f).values(), lap.values()));
            // (f, 0) maps to (mu lap f + (lambda + mu) fxx, (lambda + mu) fxy)
            let lu = apply_lame(&VectorField::from_components(f, ScalarField::zeros(g)), visc)?;
            let c = visc.lambda + visc.mu;
            let ex = &(&lap * visc.mu) + &(&fxx * c);
            errs[3].push(max_err(lu.xs(), ex.values()).max(max_err(lu.ys(), (&fxy * c).values())));
        }
        for (op, e) in ["grad", "div", "laplacian", "lame"].iter().zip(errs) {
            out.push(Study::new(format!("{op} of {name}"), &LEVELS, e, (1.8, 2.2)));
        }
    }
    Ok(out)
}

fn lame_solve_study() -> Result<Study> {
    let visc = Viscosity::new(1.0, 0.0)?;
    let p2 = PI * PI;
    let mut errs = vec![];
    for &n in &LEVELS {
        let g = Grid::unit_square(n)?;
        let exact = VectorField::from_fn(g, |x, y| ((PI * x).sin() * (PI * y).sin(), (2.0 * PI * x).sin() * (PI * y).sin()));
        let f = VectorField::from_fn(g, |x, y| {
            let (s1, s2) = ((PI * x).sin() * (PI * y).sin(), (2.0 * PI * x).sin() * (PI * y).sin());
            (
                -3.0 * p2 * s1 + 2.0 * p2 * (2.0 * PI * x).cos() * (PI * y).cos(),
                -6.0 * p2 * s2 + p2 * (PI * x).cos() * (PI * y).cos(),
            )
        });
        let u = LameOperator::new(g, visc)?.solve(&f, 1e-10)?;
        errs.push((&u - &exact.masked()).max_abs());
    }
    Ok(Study::new("lame solve round trip", &LEVELS, errs, (1.8, 2.2)))
}

/// One backward Euler step against `u*(t) = exp(-t) (s, -s)`. The step
/// error divided by `dt` is the truncation error, `O(dt + h^2)`; with `dt`
/// tied to `h` it falls at least at first order.
fn momentum_study() -> Result<Study> {
    let p = PhysParams::default();
    let p2 = PI * PI;
    let levels = [16, 32, 64];
    let mut errs = vec![];
    for &n in &levels {
        let g = Grid::unit_square(n)?;
        let dt = 0.16 / n as f64;
        let s = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let u0 = VectorField::from_fn(g, |x, y| (s(x, y), -s(x, y))).masked();
        let e = (-dt).exp();
        let f = VectorField::from_fn(g, |x, y| {
            let cc = (PI * x).cos() * (PI * y).cos();
            let lx = -3.0 * p2 * s(x, y) - p2 * cc;
            (-e * s(x, y) - e * lx, e * s(x, y) + e * lx)
        });
        let u1 = momentum_step(&u0, &ScalarField::constant(g, 1.0), &f, dt, &p, 1e-12)?;
        errs.push((&u1 - &(&u0 * e)).max_abs() / dt);
    }
    Ok(Study::new("momentum step truncation", &levels, errs, (0.8, 2.2)))
}

pub fn run(samples: usize, seed: u64, json: Option<&Path>) -> Result<bool, Box<dyn std::error::Error>> {
    let mut studies = operator_studies()?;
    studies.push(lame_solve_study()?);
    studies.push(momentum_study()?);
    println!("{:<36} {:>12} {:>12} {:>12}  orders", "study", "err 0", "err 1", "err 2");
    for s in &studies {
        let orders: Vec<String> = s.orders.iter().map(|p| format!("{p:.3}")).collect();
        println!(
            "{:<36} {:>12.4e} {:>12.4e} {:>12.4e}  {} {}",
            s.name,
            s.errors[0],
            s.errors[1],
            s.errors[2],
            orders.join(" "),
            if s.pass { "ok" } else { "FAIL" }
        );
    }

    let scan = scan_elliptic_estimates(&[2.0, 4.0, 6.0], &[16, 32, 64], samples, seed)?;
    let estimates: Vec<Ceiling> = scan
        .summary
        .iter()
        .map(|c| Ceiling {
            estimate: c.estimate_id.id().to_string(),
            q: c.q,
            ceilings: c.ceilings.clone(),
            spread: c.spread,
            pass: c.stable,
        })
        .collect();
    println!();
    println!("{:<20} {:>4} {:>10}  ceilings", "estimate", "q", "spread");
    for c in &estimates {
        let ceil: Vec<String> = c.ceilings.iter().map(|(l, v)| format!("{l}:{v:.4}")).collect();
        println!(
            "{:<20} {:>4} {:>10.3}  {} {}",
            c.estimate,
            c.q,
            c.spread,
            ceil.join(" "),
            if c.pass { "ok" } else { "FAIL" }
        );
    }

    let pass = studies.iter().all(|s| s.pass) && estimates.iter().all(|c| c.pass);
    let report = VerifyReport { studies, estimates, pass };
    if let Some(path) = json {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    println!();
    println!("verify: {}", if pass { "all checks passed" } else { "some checks FAILED" });
    Ok(pass)
}
