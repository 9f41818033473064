//! Sparse LU and the bordered (kernel-constrained) solve.
//!
//! The bordered system is
//!
//! ```text
//! [ A   V ] [x]   [r]
//! [ Cᵀ  0 ] [μ] = [0]
//! ```
//!
//! with `V` the kernel fields and `C = D·V` their quadrature-weighted
//! versions. The dense border is kept out of the sparse factorization: we
//! factor `Â = A + s·P·Pᵀ` for a few pinned nodes `P`, which is nonsingular
//! when `A` has the kernel `V`, and recover the exact bordered solution from
//! a small dense system.

use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};
use std::sync::Once;

static SEQUENTIAL: Once = Once::new();

/// Square sparse matrix in coordinate form.
#[derive(Debug, Clone)]
pub(crate) struct Coo {
    pub(crate) n: usize,
    pub(crate) entries: Vec<(usize, usize, f64)>,
}

impl Coo {
    pub(crate) fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub(crate) fn push(&mut self, row: usize, col: usize, v: f64) {
        self.entries.push((row, col, v));
    }

    /// Sorts column-major and sums duplicates.
    pub(crate) fn compress(&mut self) {
        self.entries.sort_unstable_by_key(|e| (e.1, e.0));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match out.last_mut() {
                Some(l) if l.0 == r && l.1 == c => l.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        self.entries = out;
    }

    pub(crate) fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    #[cfg(test)]
    pub(crate) fn mul_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[c] += v * x[r];
        }
        y
    }

    pub(crate) fn max_abs_diagonal(&self) -> f64 {
        self.entries.iter().filter(|e| e.0 == e.1).fold(0.0, |m, e| m.max(e.2.abs()))
    }
}

pub(crate) struct Factorization {
    n: usize,
    lu: Lu<usize, f64>,
}

impl Factorization {
    /// `m` must already be compressed.
    pub(crate) fn new(m: &Coo) -> Result<Self> {
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
        let triplets: Vec<Triplet<usize, usize, f64>> =
            m.entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(m.n, m.n, &triplets)
            .map_err(|e| Error::LinearSolve(format!("matrix assembly: {e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::LinearSolve(format!("sparse LU: {e:?}")))?;
        Ok(Self { n: m.n, lu })
    }

    pub(crate) fn solve_columns(&self, cols: &[&[f64]]) -> Vec<Vec<f64>> {
        let mut rhs = Mat::<f64>::from_fn(self.n, cols.len(), |i, j| cols[j][i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..cols.len()).map(|j| (0..self.n).map(|i| rhs[(i, j)]).collect()).collect()
    }

    pub(crate) fn solve(&self, r: &[f64]) -> Vec<f64> {
        self.solve_columns(&[r]).pop().expect("one column")
    }
}

/// Solver for the bordered system, or a plain one when there is no kernel.
pub(crate) struct BorderedSolver {
    fact: Factorization,
    pins: Vec<usize>,
    shift: f64,
    kernel: Vec<Vec<f64>>,
    weighted: Vec<Vec<f64>>,
    /// `Â⁻¹P` then `Â⁻¹V`.
    basis: Vec<Vec<f64>>,
}

impl BorderedSolver {
    /// `kernel[α]` are the fields `v_α`, `weighted[α] = D·v_α`, `pins` the
    /// regularized nodes (one per kernel field).
    pub(crate) fn new(mut a: Coo, kernel: Vec<Vec<f64>>, weighted: Vec<Vec<f64>>, pins: Vec<usize>) -> Result<Self> {
        assert_eq!(kernel.len(), weighted.len());
        assert_eq!(pins.len(), kernel.len());
        a.compress();
        let shift = a.max_abs_diagonal().max(1.0);
        if !pins.is_empty() {
            for &p in &pins {
                a.push(p, p, shift);
            }
            a.compress();
        }
        let fact = Factorization::new(&a)?;
        let mut cols: Vec<Vec<f64>> = pins
            .iter()
            .map(|&p| {
                let mut e = vec![0.0; a.n];
                e[p] = 1.0;
                e
            })
            .collect();
        cols.extend(kernel.iter().cloned());
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let basis = if refs.is_empty() { Vec::new() } else { fact.solve_columns(&refs) };
        Ok(Self { fact, pins, shift, kernel, weighted, basis })
    }

    /// Returns `(x, μ)`.
    pub(crate) fn solve(&self, r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let y = self.fact.solve(r);
        let m = self.kernel.len();
        if m == 0 {
            check_finite(&y)?;
            return Ok((y, Vec::new()));
        }
        // x = y + s·Y_P z − Y_V μ with z = Pᵀx and Cᵀx = 0
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let dim = 2 * m;
        let mut mat = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for a in 0..m {
            let p = self.pins[a];
            rhs[a] = -y[p];
            rhs[m + a] = -dot(&self.weighted[a], &y);
            for b in 0..m {
                let yp = &self.basis[b];
                let yv = &self.basis[m + b];
                mat[(a, b)] = self.shift * yp[p] - if a == b { 1.0 } else { 0.0 };
                mat[(a, m + b)] = -yv[p];
                mat[(m + a, b)] = self.shift * dot(&self.weighted[a], yp);
                mat[(m + a, m + b)] = -dot(&self.weighted[a], yv);
            }
        }
        let sol = mat
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolve("singular kernel border".into()))?;
        let mut x = y;
        for b in 0..m {
            let z = sol[b];
            let mu = sol[m + b];
            for (xi, (yp, yv)) in x.iter_mut().zip(self.basis[b].iter().zip(&self.basis[m + b])) {
                *xi += self.shift * z * yp - mu * yv;
            }
        }
        check_finite(&x)?;
        Ok((x, (0..m).map(|b| sol[m + b]).collect()))
    }
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::LinearSolve("non-finite solution".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Periodic 1D Laplacian has kernel span{1}; bordering with it must
    /// return the mean-free solution.
    #[test]
    fn bordered_solve_on_singular_laplacian() {
        let n = 40;
        let mut a = Coo::new(n);
        for i in 0..n {
            a.push(i, i, -2.0);
            a.push(i, (i + 1) % n, 1.0);
            a.push(i, (i + n - 1) % n, 1.0);
        }
        let exact: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()).collect();
        a.compress();
        let r = a.mul(&exact);
        let s = BorderedSolver::new(a, vec![vec![1.0; n]], vec![vec![1.0; n]], vec![3]).unwrap();
        let (x, mu) = s.solve(&r).unwrap();
        for (u, v) in x.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!(mu[0].abs() < 1e-12);
        // an incompatible rhs is absorbed by the multiplier
        let shifted: Vec<f64> = r.iter().map(|v| v + 0.25).collect();
        let (x2, mu2) = s.solve(&shifted).unwrap();
        assert!((mu2[0] - 0.25).abs() < 1e-10);
        assert!(x2.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn compress_sums_duplicates() {
        let mut a = Coo::new(2);
        a.push(0, 0, 1.0);
        a.push(1, 0, 2.0);
        a.push(0, 0, 3.0);
        a.compress();
        assert_eq!(a.entries, vec![(0, 0, 4.0), (1, 0, 2.0)]);
        assert_eq!(a.mul_transpose(&[1.0, 1.0]), vec![6.0, 0.0]);
    }
}
