//! Closed-form data: the manufactured support function and radial datums.

use crate::cap::{CapGrid, ScalarField};
use crate::error::{Error, Result};
use crate::symfunc::binomial;
use std::f64::consts::PI;
use std::sync::Arc;

/// Values and first two derivatives of `h*(ρ) = ℓ(ρ)·(1 + ε·cos²(πρ/2θ))`.
pub fn manufactured_profile(theta: f64, eps: f64, rho: f64) -> [f64; 3] {
    let c = theta.cos();
    let a = PI / (2.0 * theta);
    let (l, l1, l2) = (1.0 - c * rho.cos(), c * rho.sin(), c * rho.cos());
    let p = (a * rho).cos().powi(2);
    let p1 = -a * (2.0 * a * rho).sin();
    let p2 = -2.0 * a * a * (2.0 * a * rho).cos();
    let h = l * (1.0 + eps * p);
    let h1 = l1 * (1.0 + eps * p) + l * eps * p1;
    let h2 = l2 * (1.0 + eps * p) + 2.0 * l1 * eps * p1 + l * eps * p2;
    [h, h1, h2]
}

pub fn manufactured_support(grid: &Arc<CapGrid>, eps: f64) -> ScalarField {
    let th = grid.theta();
    ScalarField::from_fn(grid, |r, _| manufactured_profile(th, eps, r)[0])
}

/// `σ_k(W(h*))` evaluated exactly: `W = diag(h″ + h, (cot ρ·h′ + h)·I_{n−1})`.
pub fn manufactured_datum(grid: &Arc<CapGrid>, eps: f64, k: usize) -> Result<ScalarField> {
    let n = grid.n();
    if k < 1 || k > n {
        return Err(Error::invalid_argument(format!("k={k} outside 1..={n}")));
    }
    let th = grid.theta();
    let f = ScalarField::from_fn(grid, |r, _| {
        let [h, h1, h2] = manufactured_profile(th, eps, r);
        let radial = h2 + h;
        let angular = r.cos() / r.sin() * h1 + h;
        binomial(n - 1, k) * angular.powi(k as i32) + radial * binomial(n - 1, k - 1) * angular.powi(k as i32 - 1)
    });
    Ok(f)
}

/// `f(ρ) = Σ_i c_i·cos^i ρ`.
pub fn radial_datum(grid: &Arc<CapGrid>, coeffs: &[f64]) -> Result<ScalarField> {
    if coeffs.is_empty() {
        return Err(Error::invalid_argument("radial datum needs at least one coefficient"));
    }
    let f = ScalarField::from_fn(grid, |r, _| coeffs.iter().rev().fold(0.0, |acc, c| acc * r.cos() + c));
    ScalarField::new(grid.clone(), f.into_values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cap::{CapDomain, GridMode};
    use crate::operator::{build_W, robin_defect, sigma_field, SupportField};

    #[test]
    fn profile_derivatives_match_differences() {
        let (th, eps) = (1.1, 0.05);
        let d = 1e-5;
        for r in [0.1, 0.5, 1.0] {
            let m = manufactured_profile(th, eps, r);
            let p = manufactured_profile(th, eps, r + d);
            let q = manufactured_profile(th, eps, r - d);
            assert!(((p[0] - q[0]) / (2.0 * d) - m[1]).abs() < 1e-8);
            assert!(((p[1] - q[1]) / (2.0 * d) - m[2]).abs() < 1e-8);
        }
        let b = manufactured_profile(th, eps, th);
        assert!((b[1] - th.cos() / th.sin() * b[0]).abs() < 1e-14);
    }

    #[test]
    fn discrete_forward_approaches_exact_datum() {
        let mut prev = f64::INFINITY;
        for n in [16, 32, 64] {
            let g = CapGrid::build(CapDomain::new(3, 1.0).unwrap(), n, 1, GridMode::Axisymmetric).unwrap();
            let h = manufactured_support(&g, 0.05);
            assert!(robin_defect(&h) < 1e-2);
            let exact = manufactured_datum(&g, 0.05, 2).unwrap();
            let discrete = sigma_field(&build_W(&SupportField::new(h)), 2);
            let e = discrete.max_diff(&exact).unwrap();
            assert!(e < prev / 3.5, "{e}");
            prev = e;
        }
    }

    #[test]
    fn radial_polynomial() {
        let g = CapGrid::build(CapDomain::new(2, 1.0).unwrap(), 8, 8, GridMode::Full2d).unwrap();
        let f = radial_datum(&g, &[2.0, 0.0, 1.0]).unwrap();
        for i in 0..g.node_count() {
            assert!((f.values()[i] - 2.0 - g.rho_at(i).cos().powi(2)).abs() < 1e-15);
        }
        assert!(radial_datum(&g, &[]).is_err());
    }
}
