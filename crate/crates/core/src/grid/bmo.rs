//! Discrete bounded-mean-oscillation seminorm over a finite radius set.
//!
//! The sup over all balls is replaced by a max over every node centre and
//! the supplied radii, which bounds the continuum seminorm from below.

use super::{norm, Grid, NormKind, ScalarField};
use crate::error::{Error, Result};

/// `{2h, 4h, lx/8, lx/4}` with `h = hx`.
pub fn default_radii(grid: &Grid) -> Vec<f64> {
    let h = grid.hx();
    vec![2.0 * h, 4.0 * h, grid.lx() / 8.0, grid.lx() / 4.0]
}

/// Half-widths (in nodes along x) of the ball for each row offset `dj`.
fn spans(grid: &Grid, r: f64) -> Vec<(isize, isize)> {
    let (hx, hy) = (grid.hx(), grid.hy());
    let r2 = r * r * (1.0 + 1e-12);
    let jmax = (r / hy + 1e-9).floor() as isize;
    (-jmax..=jmax)
        .filter_map(|dj| {
            let rem = r2 - (dj as f64 * hy).powi(2);
            if rem < 0.0 {
                return None;
            }
            let w = (rem.sqrt() / hx + 1e-9).floor() as isize;
            Some((dj, w))
        })
        .collect()
}

fn oscillation_at(grid: &Grid, f: &[f64], i: usize, j: usize, spans: &[(isize, isize)]) -> f64 {
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    let (ci, cj) = (i as isize, j as isize);
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut rows = Vec::with_capacity(spans.len());
    for &(dj, w) in spans {
        let jj = cj + dj;
        if jj < 0 || jj > ny {
            continue;
        }
        let lo = (ci - w).max(0) as usize;
        let hi = (ci + w).min(nx) as usize;
        let base = grid.index(0, jj as usize);
        let row = &f[base + lo..=base + hi];
        sum += row.iter().sum::<f64>();
        count += row.len();
        rows.push(row);
    }
    let mean = sum / count as f64;
    let dev: f64 = rows
        .iter()
        .map(|row| row.iter().map(|v| (v - mean).abs()).sum::<f64>())
        .sum();
    dev / count as f64
}

/// Max over node centres and radii of the mean of `|f - mean_ball(f)|`,
/// with balls intersected with the domain.
pub fn bmo_seminorm(f: &ScalarField, radii: &[f64]) -> Result<f64> {
    let g = f.grid();
    if radii.is_empty() {
        return Err(Error::InvalidArgument("empty radius list".into()));
    }
    let rmax = g.lx().max(g.ly());
    if let Some(r) = radii.iter().find(|&&r| !(r > 0.0 && r <= rmax)) {
        return Err(Error::InvalidArgument(format!(
            "radius {r} outside (0, {rmax}]"
        )));
    }
    let mut best: f64 = 0.0;
    for &r in radii {
        let sp = spans(g, r);
        for j in 0..=g.ny() {
            for i in 0..=g.nx() {
                best = best.max(oscillation_at(g, f.values(), i, j, &sp));
            }
        }
    }
    Ok(best)
}

/// Full norm `||f||_{L^2} + [f]_BMO`.
pub fn bmo_norm(f: &ScalarField, radii: &[f64]) -> Result<f64> {
    Ok(norm(f, NormKind::Lq(2.0))? + bmo_seminorm(f, radii)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive oracle: scans every node for ball membership.
    fn brute_force(f: &ScalarField, radii: &[f64]) -> f64 {
        let g = f.grid();
        let mut best: f64 = 0.0;
        for &r in radii {
            for c in 0..g.node_count() {
                let (ci, cj) = g.ij(c);
                let (cx, cy) = (g.x(ci), g.y(cj));
                let members: Vec<f64> = (0..g.node_count())
                    .filter(|&k| {
                        let (i, j) = g.ij(k);
                        let d2 = (g.x(i) - cx).powi(2) + (g.y(j) - cy).powi(2);
                        d2 <= r * r * (1.0 + 1e-12)
                    })
                    .map(|k| f.values()[k])
                    .collect();
                let mean = members.iter().sum::<f64>() / members.len() as f64;
                let osc = members.iter().map(|v| (v - mean).abs()).sum::<f64>()
                    / members.len() as f64;
                best = best.max(osc);
            }
        }
        best
    }

    #[test]
    fn constant_has_zero_oscillation() {
        let g = Grid::unit_square(8).unwrap();
        let f = ScalarField::constant(g, 3.5);
        assert_eq!(bmo_seminorm(&f, &default_radii(&g)).unwrap(), 0.0);
    }

    #[test]
    fn linear_field_matches_enumeration() {
        let g = Grid::unit_square(16).unwrap();
        let f = ScalarField::from_fn(g, |x, _| x);
        let fast = bmo_seminorm(&f, &[0.25]).unwrap();
        let slow = brute_force(&f, &[0.25]);
        assert!((fast - slow).abs() < 1e-14, "{fast} vs {slow}");
        // interior ball of radius 0.25 holds the 4 nodes along each axis
        assert!(fast > 0.05 && fast < 0.25);
    }

    #[test]
    fn smoothed_step_is_bounded_by_twice_sup() {
        let g = Grid::unit_square(24).unwrap();
        let f = ScalarField::from_fn(g, |x, _| 0.5 * (1.0 + ((x - 0.5) * 40.0).tanh()));
        let s = bmo_seminorm(&f, &default_radii(&g)).unwrap();
        assert!(s <= 2.0 * norm(&f, NormKind::Linf).unwrap());
        assert!(s > 0.2);
        let slow = brute_force(&f, &default_radii(&g));
        assert!((s - slow).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_radii() {
        let g = Grid::unit_square(8).unwrap();
        let f = ScalarField::zeros(g);
        assert!(bmo_seminorm(&f, &[]).is_err());
        assert!(bmo_seminorm(&f, &[0.0]).is_err());
        assert!(bmo_seminorm(&f, &[2.0]).is_err());
    }
}
