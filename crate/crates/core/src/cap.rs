//! The spherical cap `C_θ` in geodesic polar coordinates about its pole.
//!
//! Nodes are staggered in `ρ`: `ρ_i = (i + ½)·θ/n_rho`, so neither the pole
//! nor the boundary circle carries a node. The boundary `ρ = θ` is the outer
//! face of the last ring. In full-2D mode (`n = 2`) nodes form a tensor grid
//! in `(ρ, φ)` with `φ_j = j·2π/n_phi`; in axisymmetric mode (any `n`) there
//! is one node per ring and fields are functions of `ρ` alone.
//!
//! Node index is `i·n_phi + j`.

use crate::error::{Error, Result};
use crate::stencil::{self, BoundaryClosure, Stencil};
use crate::symfunc::SymMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

/// Hard cap on node count; protects against absurd sizes from input files.
pub const MAX_NODES: usize = 1 << 22;

/// Largest supported cap dimension `n`.
pub const MAX_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapDomain {
    n: usize,
    theta: f64,
}

impl CapDomain {
    pub fn new(n: usize, theta: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::invalid_argument(format!("cap dimension n={n} outside 1..={MAX_DIM}")));
        }
        if !(theta > 0.0 && theta < PI) {
            return Err(Error::invalid_argument(format!("contact angle theta={theta} outside (0, π)")));
        }
        Ok(Self { n, theta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn cot_theta(&self) -> f64 {
        self.theta.cos() / self.theta.sin()
    }

    /// Set when `θ > π/2`, beyond the range where existence is established.
    pub fn beyond_half_space_angle(&self) -> bool {
        self.theta > PI / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    #[serde(rename = "full-2d", alias = "full")]
    Full2d,
    Axisymmetric,
}

impl GridMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GridMode::Full2d => "full-2d",
            GridMode::Axisymmetric => "axisymmetric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full-2d" | "full" => Some(GridMode::Full2d),
            "axisymmetric" | "axi" => Some(GridMode::Axisymmetric),
            _ => None,
        }
    }
}

impl fmt::Display for GridMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Area of the unit sphere `S^m ⊂ R^{m+1}`.
pub fn sphere_area(m: usize) -> f64 {
    let mut a = if m.is_multiple_of(2) { 2.0 } else { 2.0 * PI };
    let mut j = 2 + m % 2;
    while j <= m {
        a *= 2.0 * PI / (j as f64 - 1.0);
        j += 2;
    }
    a
}

pub struct CapGrid {
    domain: CapDomain,
    mode: GridMode,
    n_rho: usize,
    n_phi: usize,
    d_rho: f64,
    d_phi: f64,
    rho: Vec<f64>,
    phi: Vec<f64>,
    weights: Vec<f64>,
    boundary_weights: Vec<f64>,
    hessian_robin: OnceLock<Stencil>,
    hessian_extrapolated: OnceLock<Stencil>,
    gradient_robin: OnceLock<Stencil>,
    gradient_extrapolated: OnceLock<Stencil>,
}

impl fmt::Debug for CapGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CapGrid")
            .field("domain", &self.domain)
            .field("mode", &self.mode)
            .field("n_rho", &self.n_rho)
            .field("n_phi", &self.n_phi)
            .finish()
    }
}

impl CapGrid {
    /// Builds a staggered grid. `n_phi` is ignored (taken as 1) in
    /// axisymmetric mode.
    pub fn build(domain: CapDomain, n_rho: usize, n_phi: usize, mode: GridMode) -> Result<Arc<CapGrid>> {
        if n_rho < 4 {
            return Err(Error::invalid_argument(format!("n_rho={n_rho} is below the minimum of 4")));
        }
        let n_phi = match mode {
            GridMode::Full2d => {
                if domain.n() != 2 {
                    return Err(Error::UnsupportedMode(format!(
                        "full-2d grids require n = 2, got n = {}; use axisymmetric mode",
                        domain.n()
                    )));
                }
                if n_phi < 8 || !n_phi.is_multiple_of(2) {
                    return Err(Error::invalid_argument(format!(
                        "n_phi={n_phi} must be even and at least 8"
                    )));
                }
                n_phi
            }
            GridMode::Axisymmetric => 1,
        };
        if n_rho.saturating_mul(n_phi) > MAX_NODES {
            return Err(Error::invalid_argument(format!(
                "grid {n_rho}x{n_phi} exceeds the node limit {MAX_NODES}"
            )));
        }
        let theta = domain.theta();
        let n = domain.n();
        let d_rho = theta / n_rho as f64;
        let d_phi = 2.0 * PI / n_phi as f64;
        let rho: Vec<f64> = (0..n_rho).map(|i| (i as f64 + 0.5) * d_rho).collect();
        let phi: Vec<f64> = (0..n_phi).map(|j| j as f64 * d_phi).collect();
        let angular = match mode {
            GridMode::Full2d => d_phi,
            GridMode::Axisymmetric => sphere_area(n - 1),
        };
        let mut weights = Vec::with_capacity(n_rho * n_phi);
        for &r in &rho {
            let w = r.sin().powi(n as i32 - 1) * d_rho * angular;
            weights.extend(std::iter::repeat_n(w, n_phi));
        }
        let boundary_weights = vec![theta.sin().powi(n as i32 - 1) * angular; n_phi];
        Ok(Arc::new(CapGrid {
            domain,
            mode,
            n_rho,
            n_phi,
            d_rho,
            d_phi,
            rho,
            phi,
            weights,
            boundary_weights,
            hessian_robin: OnceLock::new(),
            hessian_extrapolated: OnceLock::new(),
            gradient_robin: OnceLock::new(),
            gradient_extrapolated: OnceLock::new(),
        }))
    }

    pub fn domain(&self) -> &CapDomain {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.domain.n
    }

    pub fn theta(&self) -> f64 {
        self.domain.theta
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn d_rho(&self) -> f64 {
        self.d_rho
    }

    pub fn d_phi(&self) -> f64 {
        self.d_phi
    }

    pub fn node_count(&self) -> usize {
        self.n_rho * self.n_phi
    }

    #[inline]
    pub fn index(&self, ring: usize, col: usize) -> usize {
        ring * self.n_phi + col
    }

    #[inline]
    pub fn ring_of(&self, node: usize) -> usize {
        node / self.n_phi
    }

    #[inline]
    pub fn col_of(&self, node: usize) -> usize {
        node % self.n_phi
    }

    pub fn rho_rings(&self) -> &[f64] {
        &self.rho
    }

    pub fn phi_cols(&self) -> &[f64] {
        &self.phi
    }

    #[inline]
    pub fn rho_at(&self, node: usize) -> f64 {
        self.rho[self.ring_of(node)]
    }

    #[inline]
    pub fn phi_at(&self, node: usize) -> f64 {
        self.phi[self.col_of(node)]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary_weights
    }

    /// Node indices of ring `i`.
    pub fn ring_nodes(&self, ring: usize) -> std::ops::Range<usize> {
        ring * self.n_phi..(ring + 1) * self.n_phi
    }

    /// Nodes of the outermost ring, adjacent to `ρ = θ`.
    pub fn boundary_ring(&self) -> std::ops::Range<usize> {
        self.ring_nodes(self.n_rho - 1)
    }

    /// Dimension of the in-process frame representation: the kernel
    /// fields exist only on full-2D grids.
    pub fn kernel_dim(&self) -> usize {
        match self.mode {
            GridMode::Full2d => self.n(),
            GridMode::Axisymmetric => 0,
        }
    }

    /// Same discretization parameters (bitwise angle comparison).
    pub fn is_compatible(&self, other: &CapGrid) -> bool {
        self.mode == other.mode
            && self.n_rho == other.n_rho
            && self.n_phi == other.n_phi
            && self.domain.n == other.domain.n
            && self.domain.theta.to_bits() == other.domain.theta.to_bits()
    }

    pub fn total_area(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub(crate) fn hessian_stencil(&self, closure: BoundaryClosure) -> &Stencil {
        match closure {
            BoundaryClosure::Robin => self.hessian_robin.get_or_init(|| stencil::hessian(self, closure)),
            BoundaryClosure::Extrapolate => {
                self.hessian_extrapolated.get_or_init(|| stencil::hessian(self, closure))
            }
        }
    }

    pub(crate) fn gradient_stencil(&self, closure: BoundaryClosure) -> &Stencil {
        match closure {
            BoundaryClosure::Robin => self.gradient_robin.get_or_init(|| stencil::gradient(self, closure)),
            BoundaryClosure::Extrapolate => {
                self.gradient_extrapolated.get_or_init(|| stencil::gradient(self, closure))
            }
        }
    }

    /// Point of `C_θ` at `node`; the axisymmetric meridian uses `ω = E_1`.
    pub fn embed_node(&self, node: usize) -> Vec<f64> {
        embed(&self.domain, self.rho_at(node), &self.omega(node))
    }

    /// Direction `ω ∈ S^{n−1}` of `node`.
    pub fn omega(&self, node: usize) -> Vec<f64> {
        match self.mode {
            GridMode::Full2d => {
                let p = self.phi_at(node);
                vec![p.cos(), p.sin()]
            }
            GridMode::Axisymmetric => {
                let mut w = vec![0.0; self.n()];
                w[0] = 1.0;
                w
            }
        }
    }

    pub fn integrate(&self, field: &ScalarField) -> Result<f64> {
        self.check(field)?;
        Ok(quadrature(&self.weights, &field.values))
    }

    /// Integral over `∂C_θ` of the field's trace, extrapolated to `ρ = θ`.
    pub fn integrate_boundary(&self, field: &ScalarField) -> Result<f64> {
        self.check(field)?;
        let trace = boundary_trace(field);
        Ok(quadrature(&self.boundary_weights, &trace))
    }

    /// Quadrature inner product `Σ w_i a_i b_i`.
    pub fn inner(&self, a: &ScalarField, b: &ScalarField) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.weights.iter().zip(a.values.iter().zip(&b.values)).map(|(w, (x, y))| w * x * y).sum())
    }

    fn check(&self, field: &ScalarField) -> Result<()> {
        if !self.is_compatible(&field.grid) {
            return Err(Error::invalid_argument("field lives on a different grid"));
        }
        Ok(())
    }
}

fn quadrature(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Quadratic extrapolation weights from the last three rings to `ρ = θ`.
pub(crate) const FACE_VALUE: [f64; 3] = [15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0];
/// One-sided derivative weights at `ρ = θ` (divide by `Δρ`).
pub(crate) const FACE_SLOPE: [f64; 3] = [2.0, -3.0, 1.0];

/// Values extrapolated to the boundary face, one per boundary column.
pub fn boundary_trace(field: &ScalarField) -> Vec<f64> {
    face_combination(field, &FACE_VALUE, 1.0)
}

/// One-sided radial derivative at the boundary face, per boundary column.
pub fn boundary_slope(field: &ScalarField) -> Vec<f64> {
    let g = field.grid();
    face_combination(field, &FACE_SLOPE, 1.0 / g.d_rho())
}

fn face_combination(field: &ScalarField, w: &[f64; 3], scale: f64) -> Vec<f64> {
    let g = field.grid();
    let b = g.n_rho() - 1;
    (0..g.n_phi())
        .map(|j| {
            let v = &field.values;
            scale
                * (w[0] * v[g.index(b, j)] + w[1] * v[g.index(b - 1, j)] + w[2] * v[g.index(b - 2, j)])
        })
        .collect()
}

/// `ξ = (sin ρ·ω, cos ρ − cos θ)`, the point of `C_θ` at geodesic distance
/// `ρ` from the pole in direction `ω`.
pub fn embed(domain: &CapDomain, rho: f64, omega: &[f64]) -> Vec<f64> {
    let s = rho.sin();
    let mut x: Vec<f64> = omega.iter().map(|w| s * w).collect();
    x.push(rho.cos() - domain.theta().cos());
    x
}

/// One value per grid node.
#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<CapGrid>,
    values: Vec<f64>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField").field("grid", &self.grid).field("len", &self.values.len()).finish()
    }
}

impl ScalarField {
    pub fn new(grid: Arc<CapGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::invalid_argument(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid_data(format!("non-finite field value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Arc<CapGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    /// Field sampled from a function of `(ρ, φ)`; `φ = 0` in axisymmetric mode.
    pub fn from_fn(grid: &Arc<CapGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(grid.rho_at(i), grid.phi_at(i))).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn constant(grid: &Arc<CapGrid>, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.node_count()] }
    }

    pub fn grid(&self) -> &Arc<CapGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.is_compatible(&other.grid) {
            return Err(Error::invalid_argument("fields live on different grids"));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |x, y| x + a * y)
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |self − other|`.
    pub fn max_diff(&self, other: &ScalarField) -> Result<f64> {
        Ok(self.zip_with(other, |a, b| a - b)?.max_abs())
    }
}

/// Per-node symmetric matrices in the orthonormal frame `{e_ρ, e_φ̂, …}`.
#[derive(Debug, Clone)]
pub struct SymMatrixField {
    grid: Arc<CapGrid>,
    mats: Vec<SymMatrix>,
}

impl SymMatrixField {
    pub(crate) fn new(grid: Arc<CapGrid>, mats: Vec<SymMatrix>) -> Self {
        debug_assert_eq!(mats.len(), grid.node_count());
        Self { grid, mats }
    }

    pub fn grid(&self) -> &Arc<CapGrid> {
        &self.grid
    }

    pub fn at(&self, node: usize) -> &SymMatrix {
        &self.mats[node]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SymMatrix> {
        self.mats.iter()
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// Largest entry-wise deviation from `c·I` over all nodes.
    pub fn max_deviation_from_scalar(&self, c: f64) -> f64 {
        let n = self.grid.n();
        self.mats
            .iter()
            .map(|m| {
                let mut d: f64 = 0.0;
                for i in 0..n {
                    for j in i..n {
                        let target = if i == j { c } else { 0.0 };
                        d = d.max((m.get(i, j) - target).abs());
                    }
                }
                d
            })
            .fold(0.0, f64::max)
    }
}

/// Support function of the cap itself, `ℓ = 1 − cos θ·cos ρ`.
pub fn ell_field(grid: &Arc<CapGrid>) -> ScalarField {
    let c = grid.theta().cos();
    ScalarField::from_fn(grid, |rho, _| 1.0 - c * rho.cos())
}

/// The horizontal coordinate functions `⟨ξ, E_α⟩ = sin ρ·ω_α`, `α = 1..n`.
/// Empty in axisymmetric mode.
pub fn kernel_fields(grid: &Arc<CapGrid>) -> Vec<ScalarField> {
    match grid.mode() {
        GridMode::Axisymmetric => Vec::new(),
        GridMode::Full2d => vec![
            ScalarField::from_fn(grid, |rho, phi| rho.sin() * phi.cos()),
            ScalarField::from_fn(grid, |rho, phi| rho.sin() * phi.sin()),
        ],
    }
}

/// Covariant Hessian of `h` with respect to the round metric, in the
/// orthonormal frame.
pub fn covariant_hessian(h: &ScalarField, closure: BoundaryClosure) -> SymMatrixField {
    frame_matrices(h, closure, 0.0)
}

/// `∇²h + c·h·σ` assembled from the cached stencil.
pub(crate) fn frame_matrices(h: &ScalarField, closure: BoundaryClosure, shift: f64) -> SymMatrixField {
    use rayon::prelude::*;
    let grid = h.grid();
    let st = grid.hessian_stencil(closure);
    let n = grid.n();
    let mats: Vec<SymMatrix> = (0..grid.node_count())
        .into_par_iter()
        .map(|node| {
            let comps: Vec<f64> = (0..st.comps()).map(|c| st.apply(node, c, &h.values)).collect();
            let mut m = stencil::assemble_frame(grid.mode(), n, &comps);
            if shift != 0.0 {
                for i in 0..n {
                    m.set(i, i, m.get(i, i) + shift * h.values[node]);
                }
            }
            m
        })
        .collect();
    SymMatrixField::new(grid.clone(), mats)
}

/// Frame components of `∇h`: `(∂_ρh, ∂_φh / sin ρ)` in full-2D mode, `(∂_ρh)`
/// in axisymmetric mode.
pub fn covariant_gradient(h: &ScalarField, closure: BoundaryClosure) -> Vec<Vec<f64>> {
    let grid = h.grid();
    let st = grid.gradient_stencil(closure);
    (0..grid.node_count())
        .map(|node| (0..st.comps()).map(|c| st.apply(node, c, &h.values)).collect())
        .collect()
}
