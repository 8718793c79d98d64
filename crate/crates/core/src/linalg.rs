//! Compressed sparse row storage and Jacobi-preconditioned conjugate
//! gradients for the symmetric positive definite systems of the solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Systems at or below this many unknowns are solved by dense Cholesky.
pub const DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `alpha * self + diag(d)`.
    pub fn scaled_plus_diagonal(&self, alpha: f64, d: &[f64]) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        for r in 0..self.n {
            let span = out.indptr[r]..out.indptr[r + 1];
            let pos = out.indices[span.clone()]
                .iter()
                .position(|&c| c == r)
                .expect("structural diagonal");
            out.values[span.start + pos] += d[r];
        }
        out
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `||b - A x|| / ||b||`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `50 * sqrt(n)`.
pub fn iteration_cap(n: usize) -> usize {
    (50.0 * (n as f64).sqrt()).ceil() as usize
}

/// Jacobi-preconditioned CG on an SPD matrix starting from `x`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.dim();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while rel > tol {
        if it >= max_iter || !rel.is_finite() {
            return Err(Error::SolverDiverged {
                iterations: it,
                residual: rel,
            });
        }
        a.mul_vec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        it += 1;
    }
    // recompute the true residual to guard against drift in the recurrence
    let ax = a.mul_vec(x);
    let true_rel = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (q - p) * (q - p))
        .sum::<f64>()
        .sqrt()
        / bnorm;
    if true_rel > tol * 10.0 {
        return Err(Error::SolverDiverged {
            iterations: it,
            residual: true_rel,
        });
    }
    Ok(SolveStats {
        iterations: it,
        relative_residual: true_rel,
    })
}

/// Dense Cholesky solve of an SPD system.
pub fn dense_spd_solve(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
    let chol = a.to_dense().cholesky().ok_or_else(|| {
        Error::InvalidArgument("system matrix is not positive definite".into())
    })?;
    let x = chol.solve(&DVector::from_column_slice(b));
    let x: Vec<f64> = x.iter().copied().collect();
    let ax = a.mul_vec(&x);
    let bnorm = dot(b, b).sqrt();
    let res = ax.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt();
    Ok((
        x,
        SolveStats {
            iterations: 0,
            relative_residual: if bnorm > 0.0 { res / bnorm } else { 0.0 },
        },
    ))
}

/// Dense Cholesky for small systems, PCG with the default cap otherwise.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    if a.dim() <= DENSE_LIMIT {
        return dense_spd_solve(a, b);
    }
    let mut x = x0.map_or_else(|| vec![0.0; a.dim()], <[f64]>::to_vec);
    let stats = pcg(a, b, &mut x, tol, iteration_cap(a.dim()))?;
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0), (0, 1, 1.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![5.0, 2.0]);
    }

    #[test]
    fn cg_matches_dense_cholesky() {
        let a = laplace_1d(40);
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; 40];
        let stats = pcg(&a, &b, &mut x, 1e-12, 1000).unwrap();
        assert!(stats.iterations <= 40);
        let (xd, _) = dense_spd_solve(&a, &b).unwrap();
        for (p, q) in x.iter().zip(&xd) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn cg_reports_cap_exhaustion() {
        let a = laplace_1d(200);
        let b = vec![1.0; 200];
        let mut x = vec![0.0; 200];
        assert!(matches!(
            pcg(&a, &b, &mut x, 1e-12, 3),
            Err(Error::SolverDiverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let a = laplace_1d(10);
        let mut x = vec![1.0; 10];
        let s = pcg(&a, &[0.0; 10], &mut x, 1e-10, 5).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shifted_matrix_adds_diagonal() {
        let a = laplace_1d(3).scaled_plus_diagonal(-1.0, &[10.0, 10.0, 10.0]);
        assert_eq!(a.get(0, 0), 8.0);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.asymmetry(), 0.0);
    }
}
