use crate::config::{Artifact, RunConfig};
use crate::{Code, Failure};
use capcmk::operator::{cone_violation, remove_kernel, residual_normalized, sigma_field};
use capcmk::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Global flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

impl Context {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn warn(&self, msg: impl AsRef<str>) {
        eprintln!("warning: {}", msg.as_ref());
    }

    fn load_config(&self) -> Result<RunConfig, Failure> {
        let path = self.config.as_ref().ok_or_else(|| Failure::invalid("this command needs --config <path>"))?;
        RunConfig::load(path)
    }

    fn out_dir(&self, fallback: Option<&Path>) -> Result<PathBuf, Failure> {
        let dir = self.out.clone().or_else(|| fallback.map(Path::to_path_buf)).unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| Failure::invalid(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

fn problem_json(grid: &CapGrid, k: usize) -> Value {
    json!({
        "n": grid.n(),
        "k": k,
        "theta": grid.theta(),
        "mode": grid.mode().as_str(),
        "n_rho": grid.n_rho(),
        "n_phi": grid.n_phi(),
        "nodes": grid.node_count(),
    })
}

fn certificate_json(c: &ConvexityCertificate) -> Value {
    json!({
        "strictly_convex": c.strictly_convex,
        "min_eigenvalue": c.min_eigenvalue,
        "max_eigenvalue": c.max_eigenvalue,
        "worst_node": c.worst_node,
        "worst_rho": c.worst_rho,
        "worst_phi": c.worst_phi,
        "epsilon": c.epsilon,
        "constant_rank": c.constant_rank,
    })
}

/// `validate → solve → reconstruct → light verification`, then artifacts.
pub fn solve_cmd(ctx: &Context) -> Result<Code, Failure> {
    let cfg = ctx.load_config()?;
    let out = ctx.out_dir(cfg.output.dir.as_deref())?;
    let grid = cfg.grid()?;
    let k = cfg.problem.k;
    let datum = cfg.datum(&grid)?;
    let spec = ProblemSpec::new(datum.f.clone(), k, cfg.solver.clone())?;
    ctx.say(format!(
        "solving sigma_{k} on C_theta, theta={}, {} grid {}x{} ({} nodes)",
        grid.theta(),
        grid.mode(),
        grid.n_rho(),
        grid.n_phi(),
        grid.node_count()
    ));
    write_text(&out.join("config.toml"), &cfg.to_toml_string())?;
    let sol = match solve(&spec) {
        Ok(s) => s,
        Err(e) => {
            let failure = Failure::from(e);
            write_json(
                &out.join("report.json"),
                &json!({
                    "status": "failed",
                    "exit_code": failure.code as i32,
                    "problem": problem_json(&grid, k),
                    "error": failure.message,
                }),
            )?;
            return Err(failure);
        }
    };
    let mut report = sol.report.clone();
    if let Some(reference) = &datum.reference {
        let a = normalize_translation(sol.h.field());
        let b = normalize_translation(reference);
        report.recovery_error = Some(a.max_diff(&b)?);
    }
    let minkowski = minkowski_identity_check(&sol.h);
    let contact = match grid.mode() {
        GridMode::Full2d => Some(contact_angle_check(&sol.body)),
        GridMode::Axisymmetric => None,
    };
    let warnings = report.warnings.clone();
    let code = if warnings.is_empty() { Code::Ok } else { Code::Warnings };

    write_field(out.join("h.csv"), sol.h.field())?;
    if cfg.wants(Artifact::F) {
        write_field(out.join("f.csv"), &spec.f)?;
    }
    if cfg.wants(Artifact::Obj) && grid.mode() == GridMode::Full2d {
        write_text(&out.join("body.obj"), &obj_string(&sol.body)?)?;
    }
    if cfg.wants(Artifact::VertexCsv) {
        write_text(&out.join("vertex_data.csv"), &vertex_csv(&sol.body))?;
    }
    if cfg.wants(Artifact::WDiag) {
        write_text(&out.join("W_diag.csv"), &w_diag_csv(sol.body.w()))?;
    }
    write_json(
        &out.join("report.json"),
        &json!({
            "status": if code == Code::Ok { "converged" } else { "converged-with-warnings" },
            "exit_code": code as i32,
            "problem": problem_json(&grid, k),
            "settings": cfg.solver,
            "report": report,
            "certificate": certificate_json(&sol.certificate),
            "minkowski_residuals": minkowski,
            "contact_angle": contact,
            "path": sol.path,
            "warnings": warnings,
        }),
    )?;
    for w in &warnings {
        ctx.warn(w);
    }
    ctx.say(format!(
        "converged: {} homotopy steps, {} Newton iterations, residual {:.3e}, min eigenvalue of W {:.4e}{}",
        report.homotopy_steps,
        report.newton_total,
        report.final_residual,
        report.min_eigenvalue_W,
        report.recovery_error.map(|e| format!(", recovery error {e:.3e}")).unwrap_or_default()
    ));
    ctx.say(format!("wrote artifacts to {}", out.display()));
    Ok(code)
}

/// `W` in the orthonormal frame, one row per node, upper triangle.
fn w_diag_csv(w: &SymMatrixField) -> String {
    let g = w.grid();
    let n = g.n();
    let mut out = field_io::GridHeader::of(g).line();
    out.push_str("\nrho,phi");
    for i in 1..=n {
        for j in i..=n {
            let _ = write!(out, ",w{i}{j}");
        }
    }
    out.push('\n');
    for (node, m) in w.iter().enumerate() {
        let _ = write!(out, "{},{}", g.rho_at(node), g.phi_at(node));
        for i in 0..n {
            for j in i..n {
                let _ = write!(out, ",{}", m.get(i, j));
            }
        }
        out.push('\n');
    }
    out
}

/// Tolerance for the one-sided Robin defect of a grid field.
fn robin_tolerance(h: &ScalarField) -> f64 {
    let d = h.grid().d_rho();
    1e-8 + 10.0 * d * d * h.max_abs().max(1.0)
}

/// `σ_k(W(h))` and the frame entries of `W`.
pub fn forward_cmd(ctx: &Context, h_path: &Path, k_arg: Option<usize>) -> Result<Code, Failure> {
    let cfg = match &ctx.config {
        Some(_) => Some(ctx.load_config()?),
        None => None,
    };
    let h = match &cfg {
        Some(c) => field_io::read_field_on(h_path, &c.grid()?)?,
        None => read_field(h_path)?,
    };
    let k = k_arg
        .or(cfg.as_ref().map(|c| c.problem.k))
        .ok_or_else(|| Failure::invalid("forward needs --k or a config with [problem] k"))?;
    let grid = h.grid().clone();
    if !(1..=grid.n()).contains(&k) {
        return Err(Failure::invalid(format!("k={k} outside 1..={}", grid.n())));
    }
    let out = ctx.out_dir(None)?;
    let support = SupportField::new(h);
    let w = build_W(&support);
    let f = sigma_field(&w, k);
    let mut warnings = Vec::new();
    let robin = support.robin_defect();
    let robin_tol = robin_tolerance(support.field());
    if robin > robin_tol {
        warnings.push(format!(
            "h violates the Robin condition d_mu h = cot(theta) h: defect {robin:.3e} exceeds {robin_tol:.3e}"
        ));
    }
    if let Some((node, spec)) = cone_violation(&w, k) {
        warnings.push(format!(
            "W(h) leaves Gamma_{k} at node {node} (rho={:.6}, phi={:.6}), spectrum {spec:?}",
            grid.rho_at(node),
            grid.phi_at(node)
        ));
    }
    write_field(out.join("f.csv"), &f)?;
    write_text(&out.join("W_diag.csv"), &w_diag_csv(&w))?;
    write_json(
        &out.join("forward_report.json"),
        &json!({
            "problem": problem_json(&grid, k),
            "min_f": f.min(),
            "max_f": f.max(),
            "robin_defect": robin,
            "robin_tolerance": robin_tol,
            "orthogonality_defect": orthogonality_defect(&f),
            "warnings": warnings,
        }),
    )?;
    for w in &warnings {
        ctx.warn(w);
    }
    ctx.say(format!("f = sigma_{k}(W(h)) in [{:.6e}, {:.6e}], written to {}", f.min(), f.max(), out.display()));
    Ok(if warnings.is_empty() { Code::Ok } else { Code::Warnings })
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

impl Check {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self { name, value, tolerance, pass: value <= tolerance, note: None }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

fn load_solution(dir: &Path) -> Result<(RunConfig, ScalarField), Failure> {
    let cfg_path = dir.join("config.toml");
    let h_path = dir.join("h.csv");
    for p in [&cfg_path, &h_path] {
        if !p.exists() {
            return Err(Failure::invalid(format!("missing artifact {}", p.display())));
        }
    }
    let cfg = RunConfig::load(&cfg_path)?;
    let h = field_io::read_field_on(&h_path, &cfg.grid()?)?;
    Ok((cfg, h))
}

/// `u − ψ(ρ)·(∂_ρu − cot θ·u)(θ)`, which satisfies the Robin condition.
fn robin_lift(grid: &Arc<CapGrid>, u: impl Fn(f64, f64) -> (f64, f64)) -> ScalarField {
    let th = grid.theta();
    let cot = th.cos() / th.sin();
    ScalarField::from_fn(grid, |r, p| {
        let (v, _) = u(r, p);
        let (b0, b1) = u(th, p);
        let psi = (r * r - th * th) / (2.0 * th) * (r / th).powi(6);
        v - psi * (b1 - cot * b0)
    })
}

/// Runs the invariant suite on a solved directory; exit 0 iff all pass.
pub fn verify_cmd(ctx: &Context, dir: &Path) -> Result<Code, Failure> {
    let (cfg, h) = load_solution(dir)?;
    let grid = h.grid().clone();
    let k = cfg.problem.k;
    let datum = cfg.datum(&grid)?;
    let spec = ProblemSpec::new(datum.f.clone(), k, cfg.solver.clone())?;
    let support = SupportField::new(h.clone());
    let w = build_W(&support);
    let scale_f = datum.f.max().powf(1.0 / k as f64);
    let mut checks = Vec::new();

    let res = residual_normalized(&support, &datum.f, k)?;
    checks.push(Check::at_most("residual", remove_kernel(&res).max_abs(), 1e-8 * scale_f));

    let violation = cone_violation(&w, k);
    checks.push(Check {
        name: "ellipticity",
        value: if violation.is_some() { 1.0 } else { 0.0 },
        tolerance: 0.0,
        pass: violation.is_none(),
        note: violation.map(|(node, s)| format!("W leaves Gamma_{k} at node {node}, spectrum {s:?}")),
    });

    checks.push(Check::at_most("robin_defect", support.robin_defect(), robin_tolerance(&h)));

    match validate_data(&spec) {
        Ok(v) => {
            let worst = v.ortho_defect.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
            checks.push(Check::at_most("orthogonality", worst, v.ortho_tolerance));
        }
        Err(e) => checks.push(Check { name: "orthogonality", value: f64::NAN, tolerance: 0.0, pass: false, note: Some(e.to_string()) }),
    }

    let d = grid.d_rho();
    match linearize(&support, k) {
        Ok(sys) => {
            let a = robin_lift(&grid, |r, _| (r.cos().powi(2), -2.0 * r.sin() * r.cos()));
            let b = robin_lift(&grid, |r, p| (r.sin() * r.cos() * p.cos() + r.cos(), (2.0 * r).cos() * p.cos() - r.sin()));
            let asym = sys.weighted_asymmetry(a.values(), b.values());
            let lb = sys.apply(b.values());
            let scale: f64 = grid.weights().iter().zip(a.values().iter().zip(&lb)).map(|(q, (x, y))| (q * x * y).abs()).sum();
            checks.push(Check::at_most("self_adjointness", asym.abs() / scale.max(f64::MIN_POSITIVE), 50.0 * d * d));
        }
        Err(e) => checks.push(Check { name: "self_adjointness", value: f64::NAN, tolerance: 0.0, pass: false, note: Some(e.to_string()) }),
    }

    if grid.kernel_dim() > 0 {
        let mut worst: f64 = 0.0;
        let mut top: f64 = 1.0;
        for v in kernel_fields(&grid) {
            let moved = build_W(&SupportField::new(h.axpy(0.5, &v)?));
            for (x, y) in w.iter().zip(moved.iter()) {
                for i in 0..grid.n() {
                    for j in 0..grid.n() {
                        worst = worst.max((x.get(i, j) - y.get(i, j)).abs());
                        top = top.max(x.get(i, j).abs());
                    }
                }
            }
        }
        checks.push(Check::at_most("translation_invariance", worst, 1e-8 * top));
    }

    let mink = minkowski_identity_check(&support).into_iter().fold(0.0, f64::max);
    checks.push(Check::at_most("minkowski", mink, 1e-3));

    match steiner_volume_check(&support, &[0.25, 0.5, 1.0]) {
        Ok(s) => checks.push(Check::at_most("steiner", s.max_relative, 1e-4)),
        Err(e) => checks.push(Check { name: "steiner", value: f64::NAN, tolerance: 1e-4, pass: false, note: Some(e.to_string()) }),
    }

    let cert = convexity_certificate(&support, k);
    checks.push(
        Check {
            name: "convexity_certificate",
            value: cert.min_eigenvalue,
            tolerance: cert.epsilon * cert.max_eigenvalue.abs(),
            pass: cert.strictly_convex,
            note: None,
        }
        .with_note(format!("worst node {} (rho={:.6}, phi={:.6})", cert.worst_node, cert.worst_rho, cert.worst_phi)),
    );

    let all_pass = checks.iter().all(|c| c.pass);
    let out = ctx.out_dir(Some(dir))?;
    write_json(
        &out.join("verify.json"),
        &json!({ "problem": problem_json(&grid, k), "checks": checks, "all_pass": all_pass }),
    )?;
    for c in &checks {
        let status = if c.pass { "pass" } else { "FAIL" };
        let line = format!("{status:4} {:24} {:.3e} (tolerance {:.3e})", c.name, c.value, c.tolerance);
        if c.pass {
            ctx.say(line);
        } else {
            eprintln!("{line}{}", c.note.as_ref().map(|n| format!(": {n}")).unwrap_or_default());
        }
    }
    Ok(if all_pass { Code::Ok } else { Code::VerifyFailed })
}

fn read_solution_field(dir: &Path) -> Result<ScalarField, Failure> {
    let p = dir.join("h.csv");
    if !p.exists() {
        return Err(Failure::invalid(format!("missing artifact {}", p.display())));
    }
    Ok(read_field(&p)?)
}

/// Capillary area measures, quermassintegrals and identity residuals.
pub fn measures_cmd(
    ctx: &Context,
    dir: &Path,
    orders: &[usize],
    mask: Option<&Path>,
    steiner: &[f64],
) -> Result<Code, Failure> {
    let h = read_solution_field(dir)?;
    let grid = h.grid().clone();
    let nodes = match mask {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::invalid(format!("cannot read mask {}: {e}", p.display())))?;
            parse_mask(&text, grid.node_count())?
        }
        None => NodeMask::full(grid.node_count()),
    };
    let orders: Vec<usize> = if orders.is_empty() { (0..=grid.n()).collect() } else { orders.to_vec() };
    let report = measure_report(&SupportField::new(h), &orders, &nodes, steiner)?;
    let out = ctx.out_dir(Some(dir))?;
    write_json(&out.join("measures.json"), &report)?;
    for (k, v) in &report.measures {
        ctx.say(format!("S_{k}^c = {v:.10e}"));
    }
    Ok(Code::Ok)
}

/// Supported export formats.
pub const EXPORT_FORMATS: [&str; 2] = ["obj", "csv"];

pub fn export_cmd(ctx: &Context, dir: &Path, format: &str) -> Result<Code, Failure> {
    if !EXPORT_FORMATS.contains(&format) {
        return Err(Failure::invalid(format!(
            "unknown export format '{format}'; supported: {}",
            EXPORT_FORMATS.join(", ")
        )));
    }
    let h = read_solution_field(dir)?;
    let grid = h.grid().clone();
    let cfg_path = dir.join("config.toml");
    let (k, f) = if cfg_path.exists() {
        let cfg = RunConfig::load(&cfg_path)?;
        let f = match dir.join("f.csv") {
            p if p.exists() => Some(field_io::read_field_on(&p, &grid)?),
            _ => None,
        };
        (cfg.problem.k, f)
    } else {
        (grid.n(), None)
    };
    let body = reconstruct_surface(&SupportField::new(h), f.as_ref(), k);
    let out = ctx.out_dir(Some(dir))?;
    let path = match format {
        "obj" => {
            let p = out.join("body.obj");
            write_text(&p, &obj_string(&body)?)?;
            p
        }
        _ => {
            let p = out.join("vertex_data.csv");
            write_text(&p, &vertex_csv(&body))?;
            p
        }
    };
    ctx.say(format!("wrote {}", path.display()));
    Ok(Code::Ok)
}
