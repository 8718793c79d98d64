use std::f64::consts::PI;

use approx::assert_relative_eq;
use ptns_core::grid::{norm, Grid, NormKind, ScalarField, VectorField};
use ptns_core::lame::{apply_lame, solve_lame, Viscosity};
use ptns_core::momentum::{momentum_step, PhysParams};
use ptns_core::transport::{
    cfl_number, trace_characteristics, transport_exact_formula, transport_step_fv, VelocityTrajectory,
};

fn s(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

#[test]
fn steady_limit_of_momentum_step_is_lame_solve() {
    let g = Grid::unit_square(16).unwrap();
    let p = PhysParams::default();
    let f = VectorField::from_fn(g, |x, y| (x * y, 1.0 - x));
    let rho = ScalarField::constant(g, 1.0);
    let u = momentum_step(&VectorField::zeros(g), &rho, &f, 1e6, &p, 1e-12).unwrap();
    let steady = solve_lame(&-&f, p.viscosity(), 1e-12).unwrap();
    let rel = (&u - &steady).max_abs() / steady.max_abs();
    assert!(rel < 1e-5, "relative gap {rel}");
}

/// `u*(t) = exp(-t) U0` with `U0 = (s, -s)`; the forcing uses the symbolic
/// Lame operator so the step error contains both time and space parts.
fn manufactured_step_error(n: usize, dt: f64) -> f64 {
    let g = Grid::unit_square(n).unwrap();
    let p = PhysParams::default();
    let u0 = VectorField::from_fn(g, |x, y| (s(x, y), -s(x, y))).masked();
    let e = (-dt).exp();
    let p2 = PI * PI;
    // L U0 = (-3 pi^2 s - pi^2 cc, 3 pi^2 s + pi^2 cc), cc = cos(pi x) cos(pi y)
    let f = VectorField::from_fn(g, |x, y| {
        let cc = (PI * x).cos() * (PI * y).cos();
        let lx = -3.0 * p2 * s(x, y) - p2 * cc;
        let ly = 3.0 * p2 * s(x, y) + p2 * cc;
        (-e * s(x, y) - e * lx, e * s(x, y) - e * ly)
    });
    let u1 = momentum_step(&u0, &ScalarField::constant(g, 1.0), &f, dt, &p, 1e-12).unwrap();
    (&u1 - &(&u0 * e)).max_abs()
}

#[test]
fn manufactured_momentum_step_is_consistent() {
    let coarse = manufactured_step_error(16, 1e-2);
    let fine = manufactured_step_error(32, 5e-3);
    let h2 = (1.0f64 / 16.0).powi(2);
    assert!(coarse < 1e-2 + h2, "coarse error {coarse}");
    assert!(fine < coarse / 1.9, "errors {coarse} -> {fine}");
}

#[test]
fn lame_sine_example() {
    // U = (s, 0), mu = 1, lambda = 0: L U = (-3 pi^2 s, pi^2 cos cos)
    let err = |n| {
        let g = Grid::unit_square(n).unwrap();
        let u = VectorField::from_fn(g, |x, y| (s(x, y), 0.0));
        let lu = apply_lame(&u, Viscosity::new(1.0, 0.0).unwrap()).unwrap();
        let exact = VectorField::from_fn(g, |x, y| (-3.0 * PI * PI * s(x, y), PI * PI * (PI * x).cos() * (PI * y).cos()));
        (&lu - &exact).max_abs()
    };
    let (a, b) = (err(32), err(64));
    assert!((a / b).log2() > 1.8, "{a} -> {b}");
}

#[test]
fn translated_bump_converges() {
    let err = |n: usize| {
        let g = Grid::unit_square(n).unwrap();
        let bump = |x: f64, y: f64| {
            let r2 = (x - 0.4).powi(2) + (y - 0.5).powi(2);
            if r2 < 0.04 {
                (1.0 - r2 / 0.04).powi(3)
            } else {
                0.0
            }
        };
        let f0 = ScalarField::from_fn(g, bump);
        let (dt, steps) = (0.01, 10);
        let u = VectorField::constant(g, 1.0, 0.0);
        let traj = VelocityTrajectory::new(0.0, dt, vec![u; steps + 1]).unwrap();
        let t = dt * steps as f64;
        let out = transport_exact_formula(&f0, &trace_characteristics(&traj, t).unwrap()).unwrap();
        let exact = ScalarField::from_fn(g, |x, y| bump(x - t, y));
        norm(&(&out - &exact), NormKind::Linf).unwrap()
    };
    let (a, b) = (err(32), err(64));
    assert!(a < 0.05 && b < a / 2.5, "{a} -> {b}");
}

#[test]
fn sup_norm_growth_law_under_compression() {
    let g = Grid::unit_square(32).unwrap();
    let alpha = 0.8;
    let u = VectorField::from_fn(g, |x, y| (-alpha * (x - 0.5), -alpha * (y - 0.5)));
    let (dt, steps) = (0.01, 20);
    let traj = VelocityTrajectory::new(0.0, dt, vec![u; steps + 1]).unwrap();
    let t = dt * steps as f64;
    let f0 = ScalarField::from_fn(g, |x, y| 1.0 + 0.5 * s(x, y));
    let out = transport_exact_formula(&f0, &trace_characteristics(&traj, t).unwrap()).unwrap();
    let bound = f0.max() * (2.0 * alpha * t).exp();
    assert!(out.max() <= bound * (1.0 + 1e-12));
    assert!(out.min() > 0.0);
}

/// Swirl `b(r) (-(y - 1/2), x - 1/2)` with a radial cutoff is
/// divergence-free and vanishes near the boundary.
fn swirl(g: Grid) -> VectorField {
    VectorField::from_fn(g, |x, y| {
        let r2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
        let b = if r2 < 0.16 { (1.0 - r2 / 0.16).powi(3) } else { 0.0 };
        (-b * (y - 0.5), b * (x - 0.5))
    })
}

fn method_gap(n: usize) -> f64 {
    let g = Grid::unit_square(n).unwrap();
    let u = swirl(g);
    let f0 = ScalarField::from_fn(g, |x, y| 1.0 + (-((x - 0.6).powi(2) + (y - 0.5).powi(2)) / 0.04).exp());
    let t_end = 0.4;
    let steps = 2 * n;
    let dt = t_end / steps as f64;
    assert!(cfl_number(&u, dt) < 0.9);
    let mut fv = f0.clone();
    for _ in 0..steps {
        fv = transport_step_fv(&fv, &u, dt).unwrap();
    }
    let traj = VelocityTrajectory::new(0.0, dt, vec![u; steps + 1]).unwrap();
    let sl = transport_exact_formula(&f0, &trace_characteristics(&traj, t_end).unwrap()).unwrap();
    norm(&(&fv - &sl), NormKind::Lq(2.0)).unwrap()
}

#[test]
fn semi_lagrangian_and_finite_volume_agree_under_refinement() {
    // upwind FV is first order and still pre-asymptotic at 16 cells
    let gaps: Vec<f64> = [32, 64, 128].iter().map(|&n| method_gap(n)).collect();
    for w in gaps.windows(2) {
        assert!((w[0] / w[1]).log2() >= 0.7, "gaps {gaps:?}");
    }
}

#[test]
fn fv_mass_is_conserved_over_many_steps() {
    let g = Grid::unit_square(24).unwrap();
    let u = swirl(g);
    let mut f = ScalarField::from_fn(g, |x, y| 1.0 + x * y);
    let m0 = f.integral();
    for _ in 0..200 {
        f = transport_step_fv(&f, &u, 0.01).unwrap();
        assert_relative_eq!(f.integral(), m0, max_relative = 1e-12);
    }
    assert!(f.min() > 0.0);
}
