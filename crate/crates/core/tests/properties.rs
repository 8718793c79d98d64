use proptest::prelude::*;
use ptns_core::grid::{bmo_seminorm, default_radii, div, grad, norm, Grid, NormKind, ScalarField, VectorField};
use ptns_core::lame::{apply_lame, Viscosity};
use ptns_core::march::{theta_transform, z_transform};
use ptns_core::transport::transport_step_fv;

const N: usize = 8;

fn grid() -> Grid {
    Grid::unit_square(N).unwrap()
}

fn values(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, (N + 1) * (N + 1))
}

fn field(v: Vec<f64>) -> ScalarField {
    ScalarField::new(grid(), v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grad_and_div_are_linear(a in values(-1.0, 1.0), b in values(-1.0, 1.0), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let (fa, fb) = (field(a), field(b));
        let combo = &(&fa * s) + &(&fb * t);
        let lhs = grad(&combo);
        let rhs = &(&grad(&fa) * s) + &(&grad(&fb) * t);
        prop_assert!((&lhs - &rhs).max_abs() < 1e-11);
        let v = VectorField::from_components(fa.clone(), fb.clone());
        let w = VectorField::from_components(fb, fa);
        let dl = div(&(&(&v * s) + &(&w * t)));
        let dr = &(&div(&v) * s) + &(&div(&w) * t);
        prop_assert!(norm(&(&dl - &dr), NormKind::Linf).unwrap() < 1e-11);
    }

    #[test]
    fn lame_is_linear(a in values(-1.0, 1.0), b in values(-1.0, 1.0), s in -2.0..2.0f64) {
        let visc = Viscosity::new(1.0, 0.3).unwrap();
        let u = VectorField::from_components(field(a.clone()), field(b.clone()));
        let w = VectorField::from_components(field(b), field(a));
        let lhs = apply_lame(&(&(&u * s) + &w), visc).unwrap();
        let rhs = &(&apply_lame(&u, visc).unwrap() * s) + &apply_lame(&w, visc).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() < 1e-9);
    }

    #[test]
    fn bmo_is_bounded_by_twice_the_sup(a in values(-5.0, 5.0)) {
        let f = field(a);
        let b = bmo_seminorm(&f, &default_radii(&grid())).unwrap();
        prop_assert!(b <= 2.0 * norm(&f, NormKind::Linf).unwrap() + 1e-12);
    }

    #[test]
    fn norms_obey_holder_on_the_quadrature(a in values(-2.0, 2.0), q in 1.0..8.0f64) {
        // the unit square has area 1
        let f = field(a);
        let l1 = norm(&f, NormKind::Lq(1.0)).unwrap();
        let lq = norm(&f, NormKind::Lq(q)).unwrap();
        let linf = norm(&f, NormKind::Linf).unwrap();
        prop_assert!(l1 <= lq * (1.0 + 1e-12));
        prop_assert!(lq <= linf * (1.0 + 1e-12));
    }

    #[test]
    fn theta_round_trip(r in values(1e-3, 1e3), z in values(1e-3, 1e3)) {
        let (rho, z) = (field(r), field(z));
        let back = z_transform(&rho, &theta_transform(&rho, &z).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(z.values()) {
            prop_assert!((a - b).abs() <= 1e-15 * b.abs());
        }
    }

    #[test]
    fn fv_step_keeps_positivity_and_mass(f in values(1e-3, 2.0), ux in values(-1.0, 1.0), uy in values(-1.0, 1.0)) {
        let g = grid();
        let u = VectorField::new(g, ux, uy).unwrap().masked();
        let f = field(f);
        let dt = 0.5 * g.h() / u.max_abs().max(1e-9);
        let out = transport_step_fv(&f, &u, dt).unwrap();
        prop_assert!(out.min() > 0.0);
        prop_assert!((out.integral() - f.integral()).abs() <= 1e-13 * f.integral());
    }
}
