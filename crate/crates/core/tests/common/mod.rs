#![allow(dead_code)]

use capcmk::{CapDomain, CapGrid, GridMode, ScalarField};
use rand::Rng;
use std::sync::Arc;

pub fn full_grid(theta: f64, n_rho: usize, n_phi: usize) -> Arc<CapGrid> {
    CapGrid::build(CapDomain::new(2, theta).unwrap(), n_rho, n_phi, GridMode::Full2d).unwrap()
}

pub fn axi_grid(n: usize, theta: f64, n_rho: usize) -> Arc<CapGrid> {
    CapGrid::build(CapDomain::new(n, theta).unwrap(), n_rho, 1, GridMode::Axisymmetric).unwrap()
}

/// Quadratic polynomial in the coordinates of `N = (sin ρ cos φ, sin ρ sin φ, cos ρ)`.
#[derive(Debug, Clone)]
pub struct QuadraticPolynomial {
    pub c0: f64,
    pub lin: [f64; 3],
    pub quad: [[f64; 3]; 3],
}

impl QuadraticPolynomial {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut u = || rng.random_range(-1.0..1.0);
        Self { c0: u(), lin: [u(), u(), u()], quad: [[u(), u(), u()], [u(), u(), u()], [u(), u(), u()]] }
    }

    fn frames(rho: f64, phi: f64) -> ([f64; 3], [f64; 3]) {
        let (sr, cr) = rho.sin_cos();
        let (sp, cp) = phi.sin_cos();
        ([sr * cp, sr * sp, cr], [cr * cp, cr * sp, -sr])
    }

    /// Value and `∂_ρ`.
    pub fn eval(&self, rho: f64, phi: f64) -> (f64, f64) {
        let (n, e) = Self::frames(rho, phi);
        let mut v = self.c0;
        let mut d = 0.0;
        for a in 0..3 {
            v += self.lin[a] * n[a];
            d += self.lin[a] * e[a];
            for b in 0..3 {
                v += self.quad[a][b] * n[a] * n[b];
                d += self.quad[a][b] * (e[a] * n[b] + n[a] * e[b]);
            }
        }
        (v, d)
    }
}

/// `u0 − ψ(ρ)·(∂_ρu0 − cot θ·u0)(θ, φ)` with `ψ(θ) = 0`, `ψ'(θ) = 1`, so that
/// `∂_ρu = cot θ·u` on the boundary.
pub fn robin_compatible(grid: &Arc<CapGrid>, p: &QuadraticPolynomial) -> ScalarField {
    let th = grid.theta();
    let cot = th.cos() / th.sin();
    ScalarField::from_fn(grid, |rho, phi| {
        let (u0, _) = p.eval(rho, phi);
        let (b0, b1) = p.eval(th, phi);
        let psi = (rho * rho - th * th) / (2.0 * th) * (rho / th).powi(6);
        u0 - psi * (b1 - cot * b0)
    })
}

/// Least-squares slope of `log e` against `log(1/Δ)`.
pub fn fitted_order(deltas: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = deltas.iter().map(|d| -d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -num / den
}
