//! Run configuration.
//!
//! ```toml
//! [problem]
//! n = 2
//! k = 1
//! theta = 1.0471975511965976   # radians
//! mode = "full-2d"
//! n_rho = 64
//! n_phi = 64
//!
//! [data]
//! constant = 2.0
//!
//! [solver]
//! tol_factor = 1e-10
//!
//! [output]
//! dir = "out"
//! artifacts = ["obj", "vertex_csv"]
//! ```
//!
//! `[data]` takes exactly one of `constant`, `manufactured = { eps, profile }`,
//! `radial = [c0, c1, ...]` (coefficients in `cos ρ`), `csv = "f.csv"` or
//! `from_h = "h.csv"` (the datum is `σ_k(W(h))`).

use crate::Failure;
use capcmk::manufactured::{manufactured_datum, manufactured_support, radial_datum};
use capcmk::operator::sigma_field;
use capcmk::{build_W, CapDomain, CapGrid, GridMode, ScalarField, SolverSettings, SupportField};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: usize,
    pub k: usize,
    #[serde(alias = "theta_radians")]
    pub theta: f64,
    /// Defaults to `full-2d` for `n = 2`, `axisymmetric` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<GridMode>,
    pub n_rho: usize,
    /// Defaults to `n_rho` in full-2d mode, 1 in axisymmetric mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_phi: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manufactured: Option<ManufacturedConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_h: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturedConfig {
    pub eps: f64,
    #[serde(default)]
    pub profile: Profile,
}

/// Shape of the manufactured support function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `h* = ℓ·(1 + ε·cos²(πρ/2θ))`.
    #[default]
    Cos2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    F,
    Obj,
    VertexCsv,
    WDiag,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Optional artifacts; `h.csv`, `config.toml` and `report.json` are
    /// always written. All of them by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifacts: Option<Vec<Artifact>>,
}

/// A datum and, when known, the support function that generated it.
#[derive(Debug, Clone)]
pub struct Datum {
    pub f: ScalarField,
    pub reference: Option<ScalarField>,
}

impl RunConfig {
    /// Parses and checks the structure; does not touch the file system.
    pub fn from_toml_str(text: &str) -> Result<Self, Failure> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Failure::invalid(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are resolved against its
    /// directory and must exist.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.csv, &mut cfg.data.from_h].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                return Err(Failure::invalid(format!("data file {} does not exist", p.display())));
            }
        }
        if let Some(d) = cfg.output.dir.as_mut() {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        Ok(cfg)
    }

    fn check(&self) -> Result<(), Failure> {
        let p = &self.problem;
        if !(p.theta > 0.0 && p.theta < std::f64::consts::PI) {
            return Err(Failure::invalid(format!("theta = {} must lie in (0, pi) radians", p.theta)));
        }
        let d = &self.data;
        let sources = [
            d.constant.is_some(),
            d.manufactured.is_some(),
            d.radial.is_some(),
            d.csv.is_some(),
            d.from_h.is_some(),
        ];
        match sources.iter().filter(|&&b| b).count() {
            1 => {}
            0 => return Err(Failure::invalid("[data] needs one of constant, manufactured, radial, csv, from_h")),
            _ => return Err(Failure::invalid("[data] must name exactly one source of f")),
        }
        if let Some(m) = &d.manufactured {
            if !m.eps.is_finite() {
                return Err(Failure::invalid("manufactured eps must be finite"));
            }
        }
        self.solver.check().map_err(Failure::from)
    }

    pub fn mode(&self) -> GridMode {
        self.problem.mode.unwrap_or(if self.problem.n == 2 { GridMode::Full2d } else { GridMode::Axisymmetric })
    }

    pub fn grid(&self) -> Result<Arc<CapGrid>, Failure> {
        let p = &self.problem;
        let mode = self.mode();
        let n_phi = p.n_phi.unwrap_or(match mode {
            GridMode::Full2d => p.n_rho,
            GridMode::Axisymmetric => 1,
        });
        Ok(CapGrid::build(CapDomain::new(p.n, p.theta)?, p.n_rho, n_phi, mode)?)
    }

    pub fn datum(&self, grid: &Arc<CapGrid>) -> Result<Datum, Failure> {
        let d = &self.data;
        let k = self.problem.k;
        if let Some(c) = d.constant {
            return Ok(Datum { f: ScalarField::constant(grid, c), reference: None });
        }
        if let Some(m) = &d.manufactured {
            let Profile::Cos2 = m.profile;
            return Ok(Datum {
                f: manufactured_datum(grid, m.eps, k)?,
                reference: Some(manufactured_support(grid, m.eps)),
            });
        }
        if let Some(c) = &d.radial {
            return Ok(Datum { f: radial_datum(grid, c)?, reference: None });
        }
        if let Some(p) = &d.csv {
            return Ok(Datum { f: capcmk::field_io::read_field_on(p, grid)?, reference: None });
        }
        let p = d.from_h.as_ref().expect("one source is present");
        let h = capcmk::field_io::read_field_on(p, grid)?;
        if !(1..=grid.n()).contains(&k) {
            return Err(Failure::invalid(format!("k={k} outside 1..={}", grid.n())));
        }
        let f = sigma_field(&build_W(&SupportField::new(h.clone())), k);
        Ok(Datum { f, reference: Some(h) })
    }

    pub fn wants(&self, a: Artifact) -> bool {
        self.output.artifacts.as_ref().is_none_or(|list| list.contains(&a))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
