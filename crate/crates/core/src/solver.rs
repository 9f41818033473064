//! Homotopy continuation from `f ≡ 1` to the target datum, with damped
//! Newton at each step.

use crate::body::{reconstruct_surface, CapillaryBody};
use crate::cap::{boundary_slope, ell_field, kernel_fields, CapGrid, ScalarField, SymMatrixField};
use crate::error::{Error, Result};
use crate::operator::{
    build_W, cone_violation, ellipticity_error, linearize_with, orthogonality_defect, remove_kernel, residual,
    residual_with, w_matrices, ResidualForm, SupportField,
};
use crate::stencil::BoundaryClosure;
use crate::symfunc::{binomial, gamma_cone_member, sigma_matrix_all};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub form: ResidualForm,
    /// Newton tolerance relative to `max f_t` (raw) or `max f_t^{1/k}`.
    pub tol_factor: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    pub armijo_c: f64,
    pub initial_step: f64,
    pub step_growth: f64,
    pub min_step: f64,
    /// Newton counts at or below this grow the homotopy step.
    pub fast_iterations: usize,
    /// Orthogonality tolerance relative to `‖f‖_∞·area`.
    pub ortho_tol_factor: f64,
    /// Strict convexity threshold relative to the largest eigenvalue.
    pub convexity_eps: f64,
    /// Accept residuals at the floating-point floor of the discrete operator.
    pub roundoff_guard: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            form: ResidualForm::Normalized,
            tol_factor: 1e-10,
            max_newton: 30,
            max_halvings: 30,
            armijo_c: 1e-4,
            initial_step: 0.1,
            step_growth: 1.5,
            min_step: 1e-4,
            fast_iterations: 3,
            ortho_tol_factor: 1e-8,
            convexity_eps: 1e-8,
            roundoff_guard: true,
        }
    }
}

impl SolverSettings {
    pub fn check(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid_argument(format!("solver setting {name} must be positive, got {v}")))
            }
        };
        pos(self.tol_factor, "tol_factor")?;
        pos(self.initial_step, "initial_step")?;
        pos(self.min_step, "min_step")?;
        pos(self.ortho_tol_factor, "ortho_tol_factor")?;
        pos(self.convexity_eps, "convexity_eps")?;
        if !(self.step_growth >= 1.0) {
            return Err(Error::invalid_argument("step_growth must be at least 1"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::invalid_argument("armijo_c must lie in (0, 1)"));
        }
        if self.max_newton == 0 {
            return Err(Error::invalid_argument("max_newton must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub k: usize,
    pub f: ScalarField,
    pub settings: SolverSettings,
}

impl ProblemSpec {
    pub fn new(f: ScalarField, k: usize, settings: SolverSettings) -> Result<Self> {
        let n = f.grid().n();
        if k < 1 || k > n {
            return Err(Error::invalid_argument(format!("k={k} outside 1..={n}")));
        }
        settings.check()?;
        Ok(Self { k, f, settings })
    }

    pub fn grid(&self) -> &Arc<CapGrid> {
        self.f.grid()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub min_f: f64,
    pub max_f: f64,
    pub ortho_defect: Vec<f64>,
    pub ortho_tolerance: f64,
    /// Smallest eigenvalue of `W(f^{−1/k})`.
    pub convexity_min_eigenvalue: f64,
    /// Smallest boundary value of `∂_μf`.
    pub boundary_min_slope: f64,
    pub warnings: Vec<String>,
}

/// Checks the hypotheses on `f`; (a) positivity and (b) orthogonality are
/// errors, (c) convexity of `f^{−1/k}` and (d) `∂_μf ≥ 0` are warnings.
pub fn validate_data(spec: &ProblemSpec) -> Result<ValidationReport> {
    let f = &spec.f;
    let grid = f.grid();
    let (min_f, max_f) = (f.min(), f.max());
    crate::operator::check_positive(f)?;
    if min_f < 1e-12 * max_f {
        return Err(Error::invalid_data(format!(
            "f is degenerate: min f = {min_f:e} is below 1e-12·max f = {:e}",
            1e-12 * max_f
        )));
    }
    let ortho_defect = orthogonality_defect(f);
    let ortho_tolerance = spec.settings.ortho_tol_factor * f.max_abs() * grid.total_area();
    for (a, &d) in ortho_defect.iter().enumerate() {
        if d.abs() > ortho_tolerance {
            return Err(Error::InconsistentData { alpha: a + 1, defect: d, tolerance: ortho_tolerance });
        }
    }
    let mut warnings = Vec::new();
    let g = inverse_root(f, spec.k)?;
    let w = w_matrices(&g, BoundaryClosure::Extrapolate);
    let (mut lo, mut hi, mut worst) = (f64::INFINITY, 0.0_f64, 0);
    for (i, m) in w.iter().enumerate() {
        let e = m.eigenvalues();
        if e.min() < lo {
            lo = e.min();
            worst = i;
        }
        hi = hi.max(e.max().abs());
    }
    if lo < -1e-8 * hi {
        warnings.push(format!(
            "f^(-1/k) is not convex: W(f^(-1/k)) has eigenvalue {lo:.3e} at node {worst} (rho={:.6}, phi={:.6})",
            grid.rho_at(worst),
            grid.phi_at(worst)
        ));
    }
    let slope = boundary_slope(f);
    let boundary_min_slope = slope.iter().copied().fold(f64::INFINITY, f64::min);
    if boundary_min_slope < -1e-8 * f.max_abs() / grid.theta() {
        warnings.push(format!("boundary monotonicity fails: min d_mu f = {boundary_min_slope:.3e}"));
    }
    if grid.domain().beyond_half_space_angle() {
        warnings.push(format!("theta = {} exceeds pi/2; existence is not guaranteed there", grid.theta()));
    }
    Ok(ValidationReport {
        min_f,
        max_f,
        ortho_defect,
        ortho_tolerance,
        convexity_min_eigenvalue: lo,
        boundary_min_slope,
        warnings,
    })
}

fn inverse_root(f: &ScalarField, k: usize) -> Result<ScalarField> {
    let g = f.map(|v| v.powf(-1.0 / k as f64));
    if g.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_data("f^(-1/k) overflows"));
    }
    Ok(g)
}

/// Admissibility of `q(t)` at one sampled `t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub min_q: f64,
    /// Smallest eigenvalue of `W(q(t)^{−1/k})`.
    pub convexity_min_eigenvalue: f64,
    pub boundary_min_slope: f64,
    pub admissible: bool,
}

/// `q(t) = ((1−t) + t·f^{−1/k})^{−k}`.
#[derive(Debug, Clone)]
pub struct HomotopyPath {
    f: ScalarField,
    g: ScalarField,
    k: usize,
    samples: Vec<PathSample>,
}

pub fn default_path(f: &ScalarField, k: usize) -> Result<HomotopyPath> {
    crate::operator::check_positive(f)?;
    let g = inverse_root(f, k)?;
    Ok(HomotopyPath { f: f.clone(), g, k, samples: Vec::new() })
}

impl HomotopyPath {
    pub fn eval(&self, t: f64) -> ScalarField {
        if t <= 0.0 {
            return ScalarField::constant(self.f.grid(), 1.0);
        }
        if t >= 1.0 {
            return self.f.clone();
        }
        let k = self.k as i32;
        self.g.map(|g| ((1.0 - t) + t * g).powi(-k))
    }

    /// Evaluates admissibility at `t` and records it.
    pub fn sample(&mut self, t: f64) -> &PathSample {
        let q = self.eval(t);
        let groot = q.map(|v| v.powf(-1.0 / self.k as f64));
        let w = w_matrices(&groot, BoundaryClosure::Extrapolate);
        let (lo, hi) = w
            .iter()
            .map(|m| {
                let e = m.eigenvalues();
                (e.min(), e.max().abs())
            })
            .fold((f64::INFINITY, 0.0_f64), |a, b| (a.0.min(b.0), a.1.max(b.1)));
        let slope = boundary_slope(&q).into_iter().fold(f64::INFINITY, f64::min);
        let min_q = q.min();
        let admissible = min_q > 0.0 && lo >= -1e-8 * hi && slope >= -1e-8 * q.max_abs() / q.grid().theta();
        self.samples.push(PathSample { t, min_q, convexity_min_eigenvalue: lo, boundary_min_slope: slope, admissible });
        self.samples.last().expect("just pushed")
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }
}

/// Translation with zero inner product against every kernel field.
pub fn normalize_translation(h: &ScalarField) -> ScalarField {
    let grid = h.grid();
    let ks = kernel_fields(grid);
    let mut out = h.clone();
    for v in &ks {
        let a = grid.inner(h, v).expect("same grid") / grid.inner(v, v).expect("same grid");
        out = out.axpy(-a, v).expect("same grid");
    }
    out
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NewtonTrace {
    pub iterations: usize,
    /// Merit (kernel-projected residual) before each step and at the end.
    pub residuals: Vec<f64>,
    pub halvings: Vec<usize>,
    pub tolerance: f64,
    /// Tolerance actually applied after the roundoff guard.
    pub effective_tolerance: f64,
    pub converged: bool,
}

/// Newton failure with the best iterate seen.
#[derive(Debug)]
pub struct NewtonFailure {
    pub error: Error,
    pub best: Option<SupportField>,
    pub trace: NewtonTrace,
}

impl From<NewtonFailure> for Error {
    fn from(f: NewtonFailure) -> Self {
        f.error
    }
}

fn merit(r: &ScalarField) -> f64 {
    remove_kernel(r).max_abs()
}

struct Evaluated {
    h: SupportField,
    w: SymMatrixField,
    merit: f64,
}

fn evaluate(h: ScalarField, f: &ScalarField, k: usize, form: ResidualForm) -> Result<std::result::Result<Evaluated, Error>> {
    let h = SupportField::new(h);
    let w = build_W(&h);
    if let Some((node, spec)) = cone_violation(&w, k) {
        return Ok(Err(ellipticity_error(h.grid(), k, node, spec)));
    }
    let r = residual_with(&h, f, k, form)?;
    Ok(Ok(Evaluated { merit: merit(&r), h, w }))
}

/// Rough size of rounding error in evaluating the residual: the Jacobian
/// magnitudes times `|h|`.
fn roundoff_floor(sys: &crate::operator::LinearSystem, h: &[f64]) -> f64 {
    let mut acc = vec![0.0; sys.node_count()];
    for &(r, c, v) in sys.entries() {
        acc[r] += (v * h[c]).abs();
    }
    10.0 * f64::EPSILON * acc.into_iter().fold(0.0, f64::max)
}

/// Damped Newton for `σ_k(W(h)) = f_t`.
pub fn newton_solve(
    h0: &SupportField,
    f_t: &ScalarField,
    k: usize,
    settings: &SolverSettings,
) -> std::result::Result<(SupportField, NewtonTrace), NewtonFailure> {
    let fail = |error: Error, best: Option<SupportField>, trace: &NewtonTrace| NewtonFailure {
        error,
        best,
        trace: trace.clone(),
    };
    let mut trace = NewtonTrace::default();
    if let Err(e) = settings.check() {
        return Err(fail(e, None, &trace));
    }
    let form = settings.form;
    let scale = match form {
        ResidualForm::Raw => f_t.max(),
        ResidualForm::Normalized => f_t.max().powf(1.0 / k as f64),
    };
    trace.tolerance = settings.tol_factor * scale;
    trace.effective_tolerance = trace.tolerance;
    let mut cur = match evaluate(h0.field().clone(), f_t, k, form) {
        Ok(Ok(e)) => e,
        Ok(Err(e)) | Err(e) => return Err(fail(e, None, &trace)),
    };
    let _ = &cur.w;
    trace.residuals.push(cur.merit);
    loop {
        if cur.merit <= trace.effective_tolerance {
            trace.converged = true;
            return Ok((cur.h, trace));
        }
        if trace.iterations >= settings.max_newton {
            let residual = cur.merit;
            return Err(fail(Error::NoConvergence { iterations: trace.iterations, residual }, Some(cur.h), &trace));
        }
        let sys = match linearize_with(&cur.h, k, form) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, Some(cur.h), &trace)),
        };
        if settings.roundoff_guard {
            let floor = roundoff_floor(&sys, cur.h.field().values());
            trace.effective_tolerance = trace.tolerance.max(floor);
        }
        if cur.merit <= trace.effective_tolerance {
            trace.converged = true;
            return Ok((cur.h, trace));
        }
        let r = match residual_with(&cur.h, f_t, k, form) {
            Ok(r) => r,
            Err(e) => return Err(fail(e, Some(cur.h), &trace)),
        };
        let rhs: Vec<f64> = r.values().iter().map(|v| -v).collect();
        let step = match sys.solve(&rhs) {
            Ok((d, _)) => d,
            Err(e) => return Err(fail(e, Some(cur.h), &trace)),
        };
        let step = ScalarField::from_vec_unchecked(cur.h.grid().clone(), step);
        let mut lambda = 1.0;
        let mut accepted = None;
        let mut last_cone: Option<Error> = None;
        let mut halvings = 0;
        while halvings <= settings.max_halvings {
            let trial = normalize_translation(&cur.h.field().axpy(lambda, &step).expect("same grid"));
            match evaluate(trial, f_t, k, form) {
                Ok(Ok(e)) => {
                    if e.merit <= (1.0 - settings.armijo_c * lambda) * cur.merit {
                        accepted = Some(e);
                        break;
                    }
                    last_cone = None;
                }
                Ok(Err(e)) => last_cone = Some(e),
                Err(e) => return Err(fail(e, Some(cur.h), &trace)),
            }
            lambda *= 0.5;
            halvings += 1;
        }
        trace.iterations += 1;
        trace.halvings.push(halvings.min(settings.max_halvings));
        match accepted {
            Some(e) => {
                cur = e;
                trace.residuals.push(cur.merit);
            }
            None => {
                let residual = cur.merit;
                let error = last_cone.unwrap_or(Error::NoConvergence { iterations: trace.iterations, residual });
                return Err(fail(error, Some(cur.h), &trace));
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub newton_iterations: usize,
    pub residuals: Vec<f64>,
    pub admissible: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub node_min_eigenvalue: Vec<f64>,
    pub node_max_eigenvalue: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub worst_node: usize,
    pub worst_rho: f64,
    pub worst_phi: f64,
    /// `min_ξ σ_j(W)` for `j = 1..n`.
    pub rank_profile: Vec<f64>,
    /// `(l, min_ξ σ_{l+1}(W))` for `l = k..n−1`.
    pub constant_rank: Vec<(usize, f64)>,
    pub epsilon: f64,
    pub strictly_convex: bool,
}

pub fn convexity_certificate(h: &SupportField, k: usize) -> ConvexityCertificate {
    certificate_with(h, k, SolverSettings::default().convexity_eps)
}

pub fn certificate_with(h: &SupportField, k: usize, eps_rel: f64) -> ConvexityCertificate {
    let grid = h.grid();
    let n = grid.n();
    let w = build_W(h);
    let per: Vec<(f64, f64, Vec<f64>, bool)> = (0..w.len())
        .into_par_iter()
        .map(|i| {
            let e = w.at(i).eigenvalues();
            let s = sigma_matrix_all(w.at(i), n);
            (e.min(), e.max(), s, gamma_cone_member(&e, n))
        })
        .collect();
    let (mut lo, mut hi, mut worst) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for (i, p) in per.iter().enumerate() {
        if p.0 < lo {
            lo = p.0;
            worst = i;
        }
        hi = hi.max(p.1);
    }
    let rank_profile: Vec<f64> =
        (1..=n).map(|j| per.iter().map(|p| p.2[j]).fold(f64::INFINITY, f64::min)).collect();
    let constant_rank = (k..n).map(|l| (l, rank_profile[l])).collect();
    let epsilon = eps_rel * hi.abs();
    let strictly_convex = lo > epsilon && per.iter().all(|p| p.3);
    ConvexityCertificate {
        node_min_eigenvalue: per.iter().map(|p| p.0).collect(),
        node_max_eigenvalue: per.iter().map(|p| p.1).collect(),
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        worst_node: worst,
        worst_rho: grid.rho_at(worst),
        worst_phi: grid.phi_at(worst),
        rank_profile,
        constant_rank,
        epsilon,
        strictly_convex,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SolveReport {
    pub final_residual: f64,
    pub projected_residual: f64,
    pub min_eigenvalue_W: f64,
    pub homotopy_steps: usize,
    pub newton_total: usize,
    pub ortho_defect: Vec<f64>,
    pub robin_defect: f64,
    pub t_reached: f64,
    pub steps: Vec<StepRecord>,
    pub rank_profile: Vec<f64>,
    pub strictly_convex: bool,
    pub boundary_cross_term: f64,
    pub validation: ValidationReport,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_error: Option<f64>,
}

/// Result of a successful solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub h: SupportField,
    pub body: CapillaryBody,
    pub report: SolveReport,
    pub certificate: ConvexityCertificate,
    pub path: Vec<PathSample>,
}

/// `C(n,k)^{−1/k}·ℓ`, the exact solution at `t = 0`.
pub fn starting_solution(grid: &Arc<CapGrid>, k: usize) -> ScalarField {
    ell_field(grid).scaled(binomial(grid.n(), k).powf(-1.0 / k as f64))
}

pub fn solve(spec: &ProblemSpec) -> Result<Solution> {
    let clock = Instant::now();
    let validation = validate_data(spec)?;
    let grid = spec.grid().clone();
    let k = spec.k;
    let st = &spec.settings;
    let mut path = default_path(&spec.f, k)?;
    let mut h = SupportField::new(starting_solution(&grid, k));
    let mut t = 0.0;
    let mut step = st.initial_step.min(1.0);
    let mut steps = Vec::new();
    let mut last_failure: Option<Error> = None;
    while t < 1.0 {
        let t_try = if t + step >= 1.0 - 1e-12 { 1.0 } else { t + step };
        let q = path.eval(t_try);
        match newton_solve(&h, &q, k, st) {
            Ok((next, trace)) => {
                let admissible = path.sample(t_try).admissible;
                steps.push(StepRecord {
                    t: t_try,
                    newton_iterations: trace.iterations,
                    residuals: trace.residuals.clone(),
                    admissible,
                });
                if trace.iterations <= st.fast_iterations {
                    step *= st.step_growth;
                }
                t = t_try;
                h = next;
                last_failure = None;
            }
            Err(failure) => {
                step *= 0.5;
                last_failure = Some(failure.error);
                if step < st.min_step {
                    return Err(match last_failure {
                        Some(e @ Error::EllipticityLost { .. }) => e,
                        _ => Error::ContinuationStuck { t },
                    });
                }
            }
        }
    }
    let _ = last_failure;
    let h = SupportField::new(normalize_translation(h.field()));
    let certificate = certificate_with(&h, k, st.convexity_eps);
    let final_residual = residual(&h, &spec.f, k)?.max_abs();
    let projected_residual = merit(&residual_with(&h, &spec.f, k, st.form)?);
    let mut warnings = validation.warnings.clone();
    for s in path.samples() {
        if !s.admissible {
            warnings.push(format!("homotopy path leaves the admissible class at t = {}", s.t));
        }
    }
    if !certificate.strictly_convex {
        warnings.push(format!(
            "solution is not certified strictly convex: min eigenvalue {:.3e} at node {}",
            certificate.min_eigenvalue, certificate.worst_node
        ));
    }
    warnings.dedup();
    let body = reconstruct_surface(&h, Some(&spec.f), k);
    let report = SolveReport {
        final_residual,
        projected_residual,
        min_eigenvalue_W: certificate.min_eigenvalue,
        homotopy_steps: steps.len(),
        newton_total: steps.iter().map(|s| s.newton_iterations).sum(),
        ortho_defect: orthogonality_defect(h.field()),
        robin_defect: h.robin_defect(),
        t_reached: t,
        rank_profile: certificate.rank_profile.clone(),
        strictly_convex: certificate.strictly_convex,
        boundary_cross_term: crate::operator::boundary_cross_term(&h),
        steps,
        validation,
        warnings,
        wall_time_s: clock.elapsed().as_secs_f64(),
        recovery_error: None,
    };
    Ok(Solution { h, body, report, certificate, path: path.samples().to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cap::{CapDomain, GridMode};
    use crate::operator::sigma_field;

    fn grid(th: f64, n: usize) -> Arc<CapGrid> {
        CapGrid::build(CapDomain::new(2, th).unwrap(), n, n, GridMode::Full2d).unwrap()
    }

    #[test]
    fn path_endpoints_and_monotonicity() {
        let g = grid(1.0, 16);
        let f = ScalarField::constant(&g, 4.0);
        let p = default_path(&f, 2).unwrap();
        assert!(p.eval(0.0).values().iter().all(|&v| v == 1.0));
        assert_eq!(p.eval(1.0).values(), f.values());
        let mut prev = 1.0;
        for i in 1..10 {
            let t = i as f64 / 10.0;
            let v = p.eval(t).values()[0];
            let exact = ((1.0 - t) + t * 0.5_f64).powi(-2);
            assert!((v - exact).abs() < 1e-14);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn validation_examples() {
        let g = grid(1.0, 32);
        let ok = |f: ScalarField, k| validate_data(&ProblemSpec::new(f, k, SolverSettings::default()).unwrap());
        let r = ok(ScalarField::constant(&g, 1.0), 2).unwrap();
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        let bad = ScalarField::from_fn(&g, |r, p| 1.0 + 0.5 * r.sin() * p.cos());
        match ok(bad, 2) {
            Err(Error::InconsistentData { alpha, defect, .. }) => {
                assert_eq!(alpha, 1);
                assert!(defect > 0.0);
            }
            other => panic!("expected inconsistent data, got {other:?}"),
        }
        let ell = ell_field(&g);
        let m = ell.max();
        let f = ell.map(|v| (v / m).powi(-2));
        let r = ok(f, 2).unwrap();
        assert!(r.convexity_min_eigenvalue > 0.0, "{r:?}");
        assert!(!r.warnings.iter().any(|w| w.contains("convex")));
        // ℓ grows toward the boundary, so this datum decreases there
        assert!(r.boundary_min_slope < 0.0);
        assert!(matches!(ok(ScalarField::constant(&g, -1.0), 1), Err(Error::InvalidData(_))));
        let mut v = vec![1.0; g.node_count()];
        v[5] = 1e-14;
        assert!(matches!(ok(ScalarField::new(g.clone(), v).unwrap(), 1), Err(Error::InvalidData(_))));
        let wide = grid(2.0, 16);
        let r = ok(ScalarField::constant(&wide, 1.0), 1).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("pi/2")));
    }

    #[test]
    fn normalization_examples() {
        let g = grid(1.0, 32);
        let ell = ell_field(&g);
        let v = &kernel_fields(&g)[0];
        let n1 = normalize_translation(&ell.axpy(3.0, v).unwrap());
        assert!(n1.max_diff(&ell).unwrap() < 1e-13);
        assert!(normalize_translation(&ell).max_diff(&ell).unwrap() < 1e-15);
        let twice = normalize_translation(&n1);
        assert!(twice.max_diff(&n1).unwrap() < 1e-14);
        assert!(orthogonality_defect(&n1).iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn newton_from_scaled_cap() {
        let g = grid(1.0, 32);
        let ell = ell_field(&g);
        let f = ScalarField::constant(&g, 1.0);
        let h0 = SupportField::new(ell.scaled(1.2));
        let (h, trace) = newton_solve(&h0, &f, 2, &SolverSettings::default()).unwrap();
        assert!(trace.iterations <= 8, "{trace:?}");
        assert!(h.field().max_diff(&ell).unwrap() < 1e-8);
        for w in trace.residuals.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn christoffel_newton_is_one_step() {
        let g = grid(1.0, 24);
        let f = ScalarField::from_fn(&g, |r, _| 2.0 + 0.1 * r.cos());
        let h0 = SupportField::new(ell_field(&g).scaled(0.7));
        let (h, trace) = newton_solve(&h0, &f, 1, &SolverSettings::default()).unwrap();
        assert_eq!(trace.iterations, 1, "{trace:?}");
        let s = sigma_field(&build_W(&h), 1);
        assert!(s.max_diff(&f).unwrap() < 1e-9);
    }

    #[test]
    fn solve_constant_datum() {
        let g = grid(1.0, 24);
        let spec = ProblemSpec::new(ScalarField::constant(&g, 1.0), 2, SolverSettings::default()).unwrap();
        let sol = solve(&spec).unwrap();
        let err = sol.h.field().max_diff(&ell_field(&g)).unwrap();
        assert!(err < 1e-8, "error {err}, {:?}", sol.report.steps);
        assert_eq!(sol.report.t_reached, 1.0);
        assert!(sol.certificate.strictly_convex);
        assert!((sol.certificate.min_eigenvalue - 1.0).abs() < 1e-8);
        let again = residual(&sol.h, &spec.f, 2).unwrap().max_abs();
        assert_eq!(again.to_bits(), sol.report.final_residual.to_bits());
        let one = SolverSettings { initial_step: 1.0, ..SolverSettings::default() };
        let sol = solve(&ProblemSpec::new(ScalarField::constant(&g, 1.0), 2, one).unwrap()).unwrap();
        assert_eq!(sol.report.homotopy_steps, 1);
    }

    #[test]
    fn certificate_flags_degenerate_radius() {
        let g = grid(1.0, 16);
        let ell = ell_field(&g);
        let c = convexity_certificate(&SupportField::new(ell.scaled(0.5)), 1);
        assert!(c.strictly_convex && (c.min_eigenvalue - 0.5).abs() < 1e-9);
        for (j, &s) in c.rank_profile.iter().enumerate() {
            assert!((s - binomial(2, j + 1) * 0.5_f64.powi(j as i32 + 1)).abs() < 1e-8);
        }
        // W_ρρ = h″ + h = −ρ²/2 is slightly negative near the pole
        let h = ScalarField::from_fn(&g, |r, _| 1.0 - 0.5 * r * r);
        let c = convexity_certificate(&SupportField::new(h), 1);
        assert!(!c.strictly_convex);
        assert!(c.node_min_eigenvalue[c.worst_node] <= c.epsilon);
    }
}
