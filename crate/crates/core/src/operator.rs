//! `W = ∇²h + hσ`, the residual of `σ_k(W) = f`, the linearized operator
//! and the defect functionals.

use crate::cap::{boundary_slope, boundary_trace, frame_matrices, kernel_fields, CapGrid, GridMode, ScalarField, SymMatrixField};
use crate::error::{Error, Result};
use crate::linsolve::{BorderedSolver, Coo};
use crate::stencil::{component_weights, BoundaryClosure};
use crate::symfunc::{gamma_cone_member_with_margin, gradient_unchecked, sigma_matrix_all, sigma_matrix_unchecked, CONE_MARGIN};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::sync::Arc;

/// A candidate support function with its measured Robin defect.
#[derive(Debug, Clone)]
pub struct SupportField {
    h: ScalarField,
    robin_defect: f64,
}

impl SupportField {
    pub fn new(h: ScalarField) -> Self {
        let robin_defect = robin_defect(&h);
        Self { h, robin_defect }
    }

    pub fn field(&self) -> &ScalarField {
        &self.h
    }

    pub fn grid(&self) -> &Arc<CapGrid> {
        self.h.grid()
    }

    pub fn robin_defect(&self) -> f64 {
        self.robin_defect
    }

    pub fn into_field(self) -> ScalarField {
        self.h
    }
}

/// `W(h)` with the Robin ghost closure.
#[allow(non_snake_case)]
pub fn build_W(h: &SupportField) -> SymMatrixField {
    frame_matrices(&h.h, BoundaryClosure::Robin, 1.0)
}

/// `W` of an arbitrary field with the chosen closure.
pub fn w_matrices(h: &ScalarField, closure: BoundaryClosure) -> SymMatrixField {
    frame_matrices(h, closure, 1.0)
}

/// Which equation Newton iterates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualForm {
    /// `σ_k(W) − f`.
    Raw,
    /// `σ_k(W)^{1/k} − f^{1/k}`.
    #[default]
    Normalized,
}

fn check_order(grid: &CapGrid, k: usize) -> Result<()> {
    if k < 1 || k > grid.n() {
        return Err(Error::invalid_argument(format!("k={k} outside 1..={}", grid.n())));
    }
    Ok(())
}

pub(crate) fn check_positive(f: &ScalarField) -> Result<()> {
    if let Some((i, &v)) = f.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::invalid_data(format!("f must be positive; f = {v:e} at node {i}")));
    }
    Ok(())
}

/// `σ_k(W)` node-wise.
pub fn sigma_field(w: &SymMatrixField, k: usize) -> ScalarField {
    let vals: Vec<f64> = (0..w.len()).into_par_iter().map(|i| sigma_matrix_unchecked(w.at(i), k)).collect();
    ScalarField::from_vec_unchecked(w.grid().clone(), vals)
}

fn signed_root(x: f64, k: usize) -> f64 {
    if k == 1 {
        x
    } else {
        x.signum() * x.abs().powf(1.0 / k as f64)
    }
}

/// `σ_k(W(h)) − f`.
pub fn residual(h: &SupportField, f: &ScalarField, k: usize) -> Result<ScalarField> {
    residual_with(h, f, k, ResidualForm::Raw)
}

/// `σ_k(W(h))^{1/k} − f^{1/k}`; negative `σ_k` uses the signed root.
pub fn residual_normalized(h: &SupportField, f: &ScalarField, k: usize) -> Result<ScalarField> {
    residual_with(h, f, k, ResidualForm::Normalized)
}

pub fn residual_with(h: &SupportField, f: &ScalarField, k: usize, form: ResidualForm) -> Result<ScalarField> {
    check_order(h.grid(), k)?;
    if !h.grid().is_compatible(f.grid()) {
        return Err(Error::invalid_argument("h and f live on different grids"));
    }
    check_positive(f)?;
    let s = sigma_field(&build_W(h), k);
    Ok(match form {
        ResidualForm::Raw => s.zip_with(f, |a, b| a - b)?,
        ResidualForm::Normalized => s.zip_with(f, |a, b| signed_root(a, k) - signed_root(b, k))?,
    })
}

/// First node whose `W` spectrum leaves `Γ_k` (with margin), choosing the
/// node with the smallest normalized `σ_i`, `i ≤ k`.
pub fn cone_violation(w: &SymMatrixField, k: usize) -> Option<(usize, Vec<f64>)> {
    let worst = (0..w.len())
        .into_par_iter()
        .filter_map(|i| {
            let spec = w.at(i).eigenvalues();
            if gamma_cone_member_with_margin(&spec, k, CONE_MARGIN) {
                return None;
            }
            let scale = spec.values().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let s = sigma_matrix_all(w.at(i), k);
            let score = (1..=k).map(|j| s[j] / scale.powi(j as i32)).fold(f64::INFINITY, f64::min);
            Some((score, i, spec.into_inner()))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    worst.map(|(_, i, s)| (i, s))
}

pub(crate) fn ellipticity_error(grid: &CapGrid, k: usize, node: usize, spectrum: Vec<f64>) -> Error {
    Error::EllipticityLost { node, rho: grid.rho_at(node), phi: grid.phi_at(node), k, spectrum }
}

/// The linearized operator `L_h v = σ_k^{ij}(W)(v_ij + v·δ_ij)` with its
/// kernel border.
pub struct LinearSystem {
    grid: Arc<CapGrid>,
    matrix: Coo,
    kernel: Vec<Vec<f64>>,
    weighted: Vec<Vec<f64>>,
    pins: Vec<usize>,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn grid(&self) -> &Arc<CapGrid> {
        &self.grid
    }

    /// Nodes plus multiplier slots.
    pub fn dim(&self) -> usize {
        self.matrix.n + self.kernel.len()
    }

    pub fn node_count(&self) -> usize {
        self.matrix.n
    }

    pub fn multiplier_count(&self) -> usize {
        self.kernel.len()
    }

    /// PDE block applied to node values.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.mul(v)
    }

    /// PDE block as triplets `(row, col, value)`; rows and columns are nodes.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.matrix.entries
    }

    /// Full bordered operator applied to `(v, μ)`.
    pub fn apply_bordered(&self, x: &[f64]) -> Vec<f64> {
        let n = self.matrix.n;
        let mut y = self.matrix.mul(&x[..n]);
        for (a, col) in self.kernel.iter().enumerate() {
            for (yi, c) in y.iter_mut().zip(col) {
                *yi += x[n + a] * c;
            }
        }
        for c in &self.weighted {
            y.push(c.iter().zip(&x[..n]).map(|(a, b)| a * b).sum());
        }
        y
    }

    /// `⟨w, L v⟩ − ⟨v, L w⟩` in the quadrature inner product.
    pub fn weighted_asymmetry(&self, v: &[f64], w: &[f64]) -> f64 {
        let wt = self.grid.weights();
        let lv = self.apply(v);
        let lw = self.apply(w);
        let a: f64 = wt.iter().zip(w.iter().zip(&lv)).map(|(d, (x, y))| d * x * y).sum();
        let b: f64 = wt.iter().zip(v.iter().zip(&lw)).map(|(d, (x, y))| d * x * y).sum();
        a - b
    }

    /// `‖DM − (DM)ᵀ‖_max` for the PDE block, `D` the quadrature weights.
    pub fn weighted_symmetry_defect(&self) -> f64 {
        let wt = self.grid.weights();
        let mut sym: Vec<(usize, usize, f64)> = Vec::with_capacity(self.matrix.entries.len() * 2);
        for &(r, c, v) in &self.matrix.entries {
            sym.push((r.min(c), r.max(c), if r <= c { wt[r] * v } else { -wt[r] * v }));
            if r == c {
                sym.pop();
            }
        }
        sym.sort_unstable_by_key(|e| (e.0, e.1));
        let mut best: f64 = 0.0;
        let mut i = 0;
        while i < sym.len() {
            let mut acc = 0.0;
            let key = (sym[i].0, sym[i].1);
            while i < sym.len() && (sym[i].0, sym[i].1) == key {
                acc += sym[i].2;
                i += 1;
            }
            best = best.max(acc.abs());
        }
        best
    }

    pub(crate) fn solver(&self) -> Result<BorderedSolver> {
        BorderedSolver::new(self.matrix.clone(), self.kernel.clone(), self.weighted.clone(), self.pins.clone())
    }

    /// Solves `L v + Σ μ_α v_α = r`, `∫ v·v_α = 0`. Returns `(v, μ)`.
    pub fn solve(&self, r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.solver()?.solve(r)
    }
}

/// Boundary pins used to regularize the factorization, one per kernel field.
fn pin_nodes(grid: &CapGrid) -> Vec<usize> {
    match grid.mode() {
        GridMode::Axisymmetric => Vec::new(),
        GridMode::Full2d => {
            let b = grid.n_rho() - 1;
            let quarter = (grid.n_phi() + 2) / 4;
            vec![grid.index(b, 0), grid.index(b, quarter)]
        }
    }
}

/// Linearized operator of the raw residual at `h`.
pub fn linearize(h: &SupportField, k: usize) -> Result<LinearSystem> {
    linearize_with(h, k, ResidualForm::Raw)
}

/// Jacobian of the chosen residual form.
pub fn linearize_with(h: &SupportField, k: usize, form: ResidualForm) -> Result<LinearSystem> {
    let grid = h.grid().clone();
    check_order(&grid, k)?;
    let w = build_W(h);
    if let Some((node, spectrum)) = cone_violation(&w, k) {
        return Err(ellipticity_error(&grid, k, node, spectrum));
    }
    let st = grid.hessian_stencil(BoundaryClosure::Robin);
    let mode = grid.mode();
    let rows: Vec<Vec<(usize, f64)>> = (0..grid.node_count())
        .into_par_iter()
        .map(|i| {
            let wi = w.at(i);
            let mut g = gradient_unchecked(wi, k);
            if form == ResidualForm::Normalized && k > 1 {
                let s = sigma_matrix_unchecked(wi, k);
                g = g.scaled(s.powf(1.0 / k as f64 - 1.0) / k as f64);
            }
            let c = component_weights(mode, &g);
            let mut row: Vec<(usize, f64)> = vec![(i, g.trace())];
            for (q, cq) in c.iter().enumerate() {
                let (cols, vals) = st.row(i, q);
                row.extend(cols.iter().zip(vals).map(|(&m, &v)| (m as usize, cq * v)));
            }
            row.sort_unstable_by_key(|e| e.0);
            row
        })
        .collect();
    let mut m = Coo::new(grid.node_count());
    for (i, row) in rows.into_iter().enumerate() {
        for (c, v) in row {
            m.push(i, c, v);
        }
    }
    m.compress();
    let kernel: Vec<Vec<f64>> = kernel_fields(&grid).into_iter().map(|f| f.into_values()).collect();
    let weighted: Vec<Vec<f64>> =
        kernel.iter().map(|v| v.iter().zip(grid.weights()).map(|(a, b)| a * b).collect()).collect();
    let pins = pin_nodes(&grid);
    Ok(LinearSystem { grid, matrix: m, kernel, weighted, pins, rhs: Vec::new() })
}

/// `∫ g·⟨ξ, E_α⟩`, `α = 1..n`; zeros in axisymmetric mode.
pub fn orthogonality_defect(g: &ScalarField) -> Vec<f64> {
    let grid = g.grid();
    let ks = kernel_fields(grid);
    if ks.is_empty() {
        return vec![0.0; grid.n()];
    }
    ks.iter().map(|v| grid.inner(g, v).expect("same grid")).collect()
}

/// `max |∂_ρh − cot θ·h|` at `ρ = θ`, from one-sided face values.
pub fn robin_defect(h: &ScalarField) -> f64 {
    let cot = h.grid().domain().cot_theta();
    boundary_slope(h)
        .iter()
        .zip(boundary_trace(h))
        .map(|(s, t)| (s - cot * t).abs())
        .fold(0.0, f64::max)
}

/// `max |W_ρφ̂|` over the boundary ring.
pub fn boundary_cross_term(h: &SupportField) -> f64 {
    let g = h.grid();
    if g.mode() == GridMode::Axisymmetric {
        return 0.0;
    }
    let w = build_W(h);
    g.boundary_ring().map(|i| w.at(i).get(0, 1).abs()).fold(0.0, f64::max)
}

/// Coefficients of the quadrature-orthogonal projection onto the kernel.
pub fn kernel_coefficients(g: &ScalarField) -> Vec<f64> {
    let grid = g.grid();
    let ks = kernel_fields(grid);
    if ks.is_empty() {
        return Vec::new();
    }
    let m = ks.len();
    let gram = DMatrix::from_fn(m, m, |a, b| grid.inner(&ks[a], &ks[b]).expect("same grid"));
    let rhs = DVector::from_fn(m, |a, _| grid.inner(g, &ks[a]).expect("same grid"));
    let c = gram.lu().solve(&rhs).expect("kernel Gram matrix is nonsingular");
    c.iter().copied().collect()
}

/// `g − Π_V g`.
pub fn remove_kernel(g: &ScalarField) -> ScalarField {
    let c = kernel_coefficients(g);
    let mut out = g.clone();
    for (a, v) in kernel_fields(g.grid()).iter().enumerate() {
        out = out.axpy(-c[a], v).expect("same grid");
    }
    out
}
