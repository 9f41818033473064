//! The capillary hypersurface reconstructed from its support function, its
//! capillary area measures, and the integral identities they satisfy.

use crate::cap::{covariant_gradient, ell_field, CapGrid, GridMode, ScalarField, SymMatrixField, FACE_VALUE};
use crate::error::{Error, Result};
use crate::operator::{build_W, sigma_field, SupportField};
use crate::stencil::BoundaryClosure;
use crate::symfunc::{binomial, sigma_matrix_all, Spectrum};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct CapillaryBody {
    grid: Arc<CapGrid>,
    k: usize,
    h: ScalarField,
    w: SymMatrixField,
    vertices: Vec<Vec<f64>>,
    radii: Vec<Spectrum>,
    ell: Vec<f64>,
    f: Vec<f64>,
}

impl CapillaryBody {
    pub fn grid(&self) -> &Arc<CapGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> f64 {
        self.grid.theta()
    }

    pub fn support(&self) -> &ScalarField {
        &self.h
    }

    pub fn w(&self) -> &SymMatrixField {
        &self.w
    }

    /// `X(ξ)` per node in `R^{n+1}`; in axisymmetric mode the meridian in
    /// the `(E_1, E_{n+1})` plane.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Ascending eigenvalues of `W` per node.
    pub fn radii(&self) -> &[Spectrum] {
        &self.radii
    }

    /// Reciprocal radii; `None` where some radius is not positive.
    pub fn curvatures(&self, node: usize) -> Option<Vec<f64>> {
        let r = self.radii[node].values();
        if r.iter().all(|&v| v > 0.0) {
            Some(r.iter().rev().map(|v| 1.0 / v).collect())
        } else {
            None
        }
    }

    /// Nodes with a non-positive principal radius.
    pub fn nonconvex_nodes(&self) -> Vec<usize> {
        (0..self.radii.len()).filter(|&i| self.radii[i].min() <= 0.0).collect()
    }

    pub fn ell(&self) -> &[f64] {
        &self.ell
    }

    /// Datum per node: the supplied `f`, else `σ_k(W)`.
    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// Triangles (0-based) of the grid plus the pole fan; the pole is the
    /// vertex after the grid nodes.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let g = &self.grid;
        if g.mode() != GridMode::Full2d {
            return Vec::new();
        }
        let np = g.n_phi();
        let pole = g.node_count();
        let mut t = Vec::with_capacity(2 * g.node_count());
        for j in 0..np {
            t.push([pole, g.index(0, j), g.index(0, (j + 1) % np)]);
        }
        for i in 0..g.n_rho() - 1 {
            for j in 0..np {
                let j1 = (j + 1) % np;
                t.push([g.index(i, j), g.index(i + 1, j), g.index(i + 1, j1)]);
                t.push([g.index(i, j), g.index(i + 1, j1), g.index(i, j1)]);
            }
        }
        t
    }

    /// Average of the innermost ring.
    pub fn pole_vertex(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut p = vec![0.0; self.n() + 1];
        for node in g.ring_nodes(0) {
            for (a, b) in p.iter_mut().zip(&self.vertices[node]) {
                *a += b;
            }
        }
        p.iter_mut().for_each(|v| *v /= g.n_phi() as f64);
        p
    }
}

/// `X = ∇h + h·(ξ − cos θ·e)`.
pub fn reconstruct_surface(h: &SupportField, f: Option<&ScalarField>, k: usize) -> CapillaryBody {
    let grid = h.grid().clone();
    let n = grid.n();
    let grad = covariant_gradient(h.field(), BoundaryClosure::Robin);
    let hv = h.field().values();
    let vertices: Vec<Vec<f64>> = (0..grid.node_count())
        .map(|i| {
            let (r, p) = (grid.rho_at(i), grid.phi_at(i));
            let (sr, cr) = r.sin_cos();
            match grid.mode() {
                GridMode::Full2d => {
                    let (sp, cp) = p.sin_cos();
                    let (a, b) = (grad[i][0], grad[i][1]);
                    vec![
                        a * cr * cp - b * sp + hv[i] * sr * cp,
                        a * cr * sp + b * cp + hv[i] * sr * sp,
                        -a * sr + hv[i] * cr,
                    ]
                }
                GridMode::Axisymmetric => {
                    let a = grad[i][0];
                    let mut x = vec![0.0; n + 1];
                    x[0] = a * cr + hv[i] * sr;
                    x[n] = -a * sr + hv[i] * cr;
                    x
                }
            }
        })
        .collect();
    let w = build_W(h);
    let radii = w.iter().map(|m| m.eigenvalues()).collect();
    let k = k.clamp(1, n);
    let f = match f {
        Some(f) if f.grid().is_compatible(&grid) => f.values().to_vec(),
        _ => sigma_field(&w, k).into_values(),
    };
    CapillaryBody { ell: ell_field(&grid).into_values(), grid, k, h: h.field().clone(), w, vertices, radii, f }
}

pub fn principal_radii(h: &SupportField) -> Vec<Spectrum> {
    build_W(h).iter().map(|m| m.eigenvalues()).collect()
}

/// Node subset standing in for a Borel set of the cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMask {
    member: Vec<bool>,
}

impl NodeMask {
    pub fn full(node_count: usize) -> Self {
        Self { member: vec![true; node_count] }
    }

    pub fn from_indices(node_count: usize, indices: &[usize]) -> Result<Self> {
        let mut member = vec![false; node_count];
        for &i in indices {
            if i >= node_count {
                return Err(Error::invalid_argument(format!("mask index {i} out of range (grid has {node_count} nodes)")));
            }
            member[i] = true;
        }
        Ok(Self { member })
    }

    pub fn from_predicate(grid: &CapGrid, pred: impl Fn(f64, f64) -> bool) -> Self {
        Self { member: (0..grid.node_count()).map(|i| pred(grid.rho_at(i), grid.phi_at(i))).collect() }
    }

    pub fn contains(&self, node: usize) -> bool {
        self.member.get(node).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.member.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member.is_empty()
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&b| b).count()
    }
}

/// Parses node indices separated by whitespace or commas; `#` starts a
/// comment.
pub fn parse_mask(text: &str, node_count: usize) -> Result<NodeMask> {
    let mut idx = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let i = tok.parse::<usize>().map_err(|_| Error::parse(ln + 1, format!("bad node index '{tok}'")))?;
            idx.push(i);
        }
    }
    NodeMask::from_indices(node_count, &idx)
}

/// `S_k^c(β) = C(n,k)^{−1} Σ_{β} w·ℓ·σ_k(r)`.
pub fn capillary_area_measure(body: &CapillaryBody, k: usize, mask: &NodeMask) -> Result<f64> {
    let n = body.n();
    if k > n {
        return Err(Error::invalid_argument(format!("measure order k={k} exceeds n={n}")));
    }
    if mask.len() != body.grid.node_count() {
        return Err(Error::invalid_argument("mask does not match the grid"));
    }
    let wts = body.grid.weights();
    let mut acc = 0.0;
    for i in 0..wts.len() {
        if mask.contains(i) {
            acc += wts[i] * body.ell[i] * sigma_matrix_all(body.w.at(i), k)[k];
        }
    }
    Ok(acc / binomial(n, k))
}

/// `S_k^c(C_θ)` for `k = 0..n`.
pub fn quermassintegrals(body: &CapillaryBody) -> Vec<f64> {
    let full = NodeMask::full(body.grid.node_count());
    (0..=body.n()).map(|k| capillary_area_measure(body, k, &full).expect("k in range")).collect()
}

/// Relative residuals of `(n−l)∫hσ_l(W) = (l+1)∫ℓσ_{l+1}(W)`, `l = 0..n−1`.
pub fn minkowski_identity_check(h: &SupportField) -> Vec<f64> {
    let grid = h.grid();
    let n = grid.n();
    let w = build_W(h);
    let ell = ell_field(grid);
    let sig: Vec<Vec<f64>> = w.iter().map(|m| sigma_matrix_all(m, n)).collect();
    let wts = grid.weights();
    let hv = h.field().values();
    (0..n)
        .map(|l| {
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for i in 0..wts.len() {
                lhs += wts[i] * hv[i] * sig[i][l];
                rhs += wts[i] * ell.values()[i] * sig[i][l + 1];
            }
            let lhs = (n - l) as f64 * lhs;
            let rhs = (l + 1) as f64 * rhs;
            let denom = lhs.abs() + rhs.abs();
            if denom == 0.0 {
                0.0
            } else {
                (lhs - rhs).abs() / denom
            }
        })
        .collect()
}

/// `(n+1)^{−1}∫ h·σ_n(W)`, the enclosed volume (the flat bottom carries no
/// flux of the position field).
pub fn enclosed_volume(h: &SupportField) -> f64 {
    let grid = h.grid();
    let n = grid.n();
    let w = build_W(h);
    let s = sigma_field(&w, n);
    grid.inner(h.field(), &s).expect("same grid") / (n as f64 + 1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinerSample {
    pub s: f64,
    pub direct: f64,
    pub polynomial: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinerCheck {
    pub volume: f64,
    pub samples: Vec<SteinerSample>,
    pub max_relative: f64,
}

/// Steiner polynomial versus `Vol(h + s·ℓ) − Vol(h)`.
pub fn steiner_volume_check(h: &SupportField, samples: &[f64]) -> Result<SteinerCheck> {
    let grid = h.grid();
    let n = grid.n();
    if let Some(&s) = samples.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::invalid_argument(format!("Steiner parameter s={s} must be non-negative")));
    }
    let body = reconstruct_surface(h, None, n);
    let bad = body.nonconvex_nodes();
    if !bad.is_empty() {
        return Err(Error::PreconditionViolation(format!(
            "Steiner check needs a strictly convex body; {} nodes have non-positive radii (first {})",
            bad.len(),
            bad[0]
        )));
    }
    let sk = quermassintegrals(&body);
    let volume = enclosed_volume(h);
    let ell = ell_field(grid);
    let out: Vec<SteinerSample> = samples
        .iter()
        .map(|&s| {
            let shifted = SupportField::new(h.field().axpy(s, &ell).expect("same grid"));
            let direct = enclosed_volume(&shifted) - volume;
            let polynomial = (0..=n)
                .map(|k| s.powi((n + 1 - k) as i32) * binomial(n + 1, k) * sk[k])
                .sum::<f64>()
                / (n as f64 + 1.0);
            let scale = direct.abs().max(polynomial.abs());
            let relative = if scale == 0.0 { 0.0 } else { (direct - polynomial).abs() / scale };
            SteinerSample { s, direct, polynomial, relative }
        })
        .collect();
    let max_relative = out.iter().map(|s| s.relative).fold(0.0, f64::max);
    Ok(SteinerCheck { volume, samples: out, max_relative })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContactAngleReport {
    /// `max |⟨ν, e⟩ − cos(π−θ)|` with `ν` the geometric normal at `ρ = θ`.
    pub max_angle_defect: f64,
    /// `max |X_{n+1}|` at `ρ = θ`.
    pub max_boundary_height: f64,
}

/// Unit normal of the reconstructed surface at each node from finite
/// differences of the vertices.
fn geometric_normals(body: &CapillaryBody) -> Vec<Vec<f64>> {
    let g = &body.grid;
    let x = &body.vertices;
    let (nr, np) = (g.n_rho(), g.n_phi());
    let dim = body.n() + 1;
    let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<f64>>();
    let radial = |i: usize, j: usize| -> Vec<f64> {
        if i + 1 == nr {
            // one-sided, second order
            let a = &x[g.index(i, j)];
            let b = &x[g.index(i - 1, j)];
            let c = &x[g.index(i - 2, j)];
            (0..dim).map(|d| 1.5 * a[d] - 2.0 * b[d] + 0.5 * c[d]).collect()
        } else if i == 0 {
            let inner = match g.mode() {
                GridMode::Full2d => g.index(0, (j + np / 2) % np),
                GridMode::Axisymmetric => g.index(0, 0),
            };
            let mut inner_pt = x[inner].clone();
            if g.mode() == GridMode::Axisymmetric {
                // the reflected meridian point
                inner_pt[0] = -inner_pt[0];
            }
            sub(&x[g.index(1, j)], &inner_pt)
        } else {
            sub(&x[g.index(i + 1, j)], &x[g.index(i - 1, j)])
        }
    };
    (0..g.node_count())
        .map(|node| {
            let (i, j) = (g.ring_of(node), g.col_of(node));
            let t = radial(i, j);
            let (r, p) = (g.rho_at(node), g.phi_at(node));
            let mut nu = match g.mode() {
                GridMode::Full2d => {
                    let u = sub(&x[g.index(i, (j + 1) % np)], &x[g.index(i, (j + np - 1) % np)]);
                    vec![t[1] * u[2] - t[2] * u[1], t[2] * u[0] - t[0] * u[2], t[0] * u[1] - t[1] * u[0]]
                }
                GridMode::Axisymmetric => {
                    let mut v = vec![0.0; dim];
                    v[0] = -t[dim - 1];
                    v[dim - 1] = t[0];
                    v
                }
            };
            let norm = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
            let reference = match g.mode() {
                GridMode::Full2d => vec![r.sin() * p.cos(), r.sin() * p.sin(), r.cos()],
                GridMode::Axisymmetric => {
                    let mut v = vec![0.0; dim];
                    v[0] = r.sin();
                    v[dim - 1] = r.cos();
                    v
                }
            };
            let sign = if nu.iter().zip(&reference).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            nu.iter_mut().for_each(|v| *v *= sign / norm);
            nu
        })
        .collect()
}

pub fn contact_angle_check(body: &CapillaryBody) -> ContactAngleReport {
    let g = &body.grid;
    let nu = geometric_normals(body);
    let dim = body.n() + 1;
    let b = g.n_rho() - 1;
    let target = (std::f64::consts::PI - g.theta()).cos();
    let mut defect: f64 = 0.0;
    let mut height: f64 = 0.0;
    for j in 0..g.n_phi() {
        let nodes = [g.index(b, j), g.index(b - 1, j), g.index(b - 2, j)];
        // ⟨ν, e⟩ with e = −E_{n+1}
        let dot: f64 = nodes.iter().zip(FACE_VALUE).map(|(&m, w)| -w * nu[m][dim - 1]).sum();
        let z: f64 = nodes.iter().zip(FACE_VALUE).map(|(&m, w)| w * body.vertices[m][dim - 1]).sum();
        defect = defect.max((dot - target).abs());
        height = height.max(z.abs());
    }
    ContactAngleReport { max_angle_defect: defect, max_boundary_height: height }
}

/// Wavefront OBJ text; full-2D only.
pub fn obj_string(body: &CapillaryBody) -> Result<String> {
    if body.grid.mode() != GridMode::Full2d {
        return Err(Error::UnsupportedMode("mesh export needs a full-2d grid".into()));
    }
    let mut out = String::with_capacity(body.vertices.len() * 64);
    let _ = writeln!(
        out,
        "# capillary surface: n={} k={} theta={} n_rho={} n_phi={}",
        body.n(),
        body.k,
        body.theta(),
        body.grid.n_rho(),
        body.grid.n_phi()
    );
    for v in body.vertices.iter().chain(std::iter::once(&body.pole_vertex())) {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    for t in body.triangles() {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    Ok(out)
}

/// Per-vertex table `index,rho,phi,x,y,z,r1..rn,ell,f`.
pub fn vertex_csv(body: &CapillaryBody) -> String {
    let g = &body.grid;
    let n = body.n();
    let mut out = String::from("index,rho,phi,x,y,z");
    for i in 1..=n {
        let _ = write!(out, ",r{i}");
    }
    out.push_str(",ell,f\n");
    for node in 0..g.node_count() {
        let v = &body.vertices[node];
        let (x, y, z) = match g.mode() {
            GridMode::Full2d => (v[0], v[1], v[2]),
            GridMode::Axisymmetric => (v[0], 0.0, v[n]),
        };
        let _ = write!(out, "{node},{},{},{x},{y},{z}", g.rho_at(node), g.phi_at(node));
        for r in body.radii[node].values().iter().rev() {
            let _ = write!(out, ",{r}");
        }
        let _ = writeln!(out, ",{},{}", body.ell[node], body.f[node]);
    }
    out
}

/// Writes the OBJ mesh and, if given, the per-vertex CSV.
pub fn export_mesh(body: &CapillaryBody, obj_path: impl AsRef<Path>, csv_path: Option<&Path>) -> Result<()> {
    let obj_path = obj_path.as_ref();
    let text = obj_string(body)?;
    std::fs::write(obj_path, text).map_err(|e| Error::io(obj_path, e))?;
    if let Some(p) = csv_path {
        std::fs::write(p, vertex_csv(body)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

/// Vertices and triangles read back from OBJ text (0-based faces).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

/// Reads `v` and triangular `f` records; other record types are skipped.
pub fn parse_obj(text: &str) -> Result<ObjMesh> {
    let mut mesh = ObjMesh::default();
    let mut pending: Vec<(usize, [i64; 3])> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in c.iter_mut() {
                    let tok = it.next().ok_or_else(|| Error::parse(ln, "vertex needs three coordinates"))?;
                    *slot = tok.parse().map_err(|_| Error::parse(ln, format!("bad coordinate '{tok}'")))?;
                }
                mesh.vertices.push(c);
            }
            Some("f") => {
                let mut idx = [0i64; 3];
                for slot in idx.iter_mut() {
                    let tok = it.next().ok_or_else(|| Error::parse(ln, "face needs three vertices"))?;
                    let first = tok.split('/').next().unwrap_or("");
                    *slot = first.parse().map_err(|_| Error::parse(ln, format!("bad face index '{tok}'")))?;
                }
                if it.next().is_some() {
                    return Err(Error::parse(ln, "only triangular faces are supported"));
                }
                pending.push((ln, idx));
            }
            _ => {}
        }
    }
    let nv = mesh.vertices.len() as i64;
    for (ln, idx) in pending {
        let mut f = [0usize; 3];
        for (slot, &i) in f.iter_mut().zip(&idx) {
            let resolved = if i > 0 { i - 1 } else { nv + i };
            if i == 0 || resolved < 0 || resolved >= nv {
                return Err(Error::parse(ln, format!("face index {i} out of range")));
            }
            *slot = resolved as usize;
        }
        mesh.faces.push(f);
    }
    Ok(mesh)
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<ObjMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureReport {
    /// `(k, S_k^c(β))` for the requested orders over the mask.
    pub measures: Vec<(usize, f64)>,
    pub mask_nodes: usize,
    /// `S_k^c(C_θ)`, `k = 0..n`.
    pub quermassintegrals: Vec<f64>,
    pub minkowski_residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steiner_max_relative: Option<f64>,
}

pub fn measure_report(h: &SupportField, orders: &[usize], mask: &NodeMask, steiner: &[f64]) -> Result<MeasureReport> {
    let body = reconstruct_surface(h, None, h.grid().n());
    let measures = orders
        .iter()
        .map(|&k| Ok((k, capillary_area_measure(&body, k, mask)?)))
        .collect::<Result<Vec<_>>>()?;
    let steiner_max_relative = if steiner.is_empty() || !body.nonconvex_nodes().is_empty() {
        None
    } else {
        Some(steiner_volume_check(h, steiner)?.max_relative)
    };
    Ok(MeasureReport {
        measures,
        mask_nodes: mask.count(),
        quermassintegrals: quermassintegrals(&body),
        minkowski_residuals: minkowski_identity_check(h),
        steiner_max_relative,
    })
}
