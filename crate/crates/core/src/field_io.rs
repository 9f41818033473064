//! CSV serialization of [`ScalarField`]s.
//!
//! ```text
//! # n=2 theta=1.0471975511965976 n_rho=64 n_phi=64 mode=full-2d
//! rho,phi,value
//! 0.008181230868723419,0,0.5000334...
//! ```
//!
//! Axisymmetric files omit the `phi` column. Rows are in node order.

use crate::cap::{CapDomain, CapGrid, GridMode, ScalarField};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

/// Grid parameters from a field file's comment line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub n: usize,
    pub theta: f64,
    pub n_rho: usize,
    pub n_phi: usize,
    pub mode: GridMode,
}

impl GridHeader {
    pub fn of(grid: &CapGrid) -> Self {
        Self { n: grid.n(), theta: grid.theta(), n_rho: grid.n_rho(), n_phi: grid.n_phi(), mode: grid.mode() }
    }

    pub fn build(&self) -> Result<Arc<CapGrid>> {
        CapGrid::build(CapDomain::new(self.n, self.theta)?, self.n_rho, self.n_phi, self.mode)
    }

    pub fn line(&self) -> String {
        format!(
            "# n={} theta={} n_rho={} n_phi={} mode={}",
            self.n, self.theta, self.n_rho, self.n_phi, self.mode
        )
    }

    pub fn parse(line: &str, lineno: usize) -> Result<Self> {
        let body = line
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(lineno, "expected '# n=... theta=...' grid line"))?;
        let (mut n, mut theta, mut n_rho, mut n_phi, mut mode) = (None, None, None, None, None);
        for tok in body.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::parse(lineno, format!("bad token '{tok}'")))?;
            let bad = |_| Error::parse(lineno, format!("bad value for {k}: '{v}'"));
            match k {
                "n" => n = Some(v.parse::<usize>().map_err(bad)?),
                "theta" => theta = Some(v.parse::<f64>().map_err(|_| Error::parse(lineno, format!("bad theta '{v}'")))?),
                "n_rho" => n_rho = Some(v.parse::<usize>().map_err(bad)?),
                "n_phi" => n_phi = Some(v.parse::<usize>().map_err(bad)?),
                "mode" => {
                    mode = Some(GridMode::parse(v).ok_or_else(|| Error::parse(lineno, format!("unknown mode '{v}'")))?)
                }
                _ => return Err(Error::parse(lineno, format!("unknown key '{k}'"))),
            }
        }
        let missing = |what: &str| Error::parse(lineno, format!("grid line lacks {what}"));
        Ok(Self {
            n: n.ok_or_else(|| missing("n"))?,
            theta: theta.ok_or_else(|| missing("theta"))?,
            n_rho: n_rho.ok_or_else(|| missing("n_rho"))?,
            n_phi: n_phi.ok_or_else(|| missing("n_phi"))?,
            mode: mode.ok_or_else(|| missing("mode"))?,
        })
    }
}

/// Renders a field in the CSV format.
pub fn field_to_csv(field: &ScalarField) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(field.len() * 48 + 128);
    out.push_str(&GridHeader::of(g).line());
    out.push('\n');
    let axi = g.mode() == GridMode::Axisymmetric;
    out.push_str(if axi { "rho,value\n" } else { "rho,phi,value\n" });
    for (i, v) in field.values().iter().enumerate() {
        if axi {
            let _ = writeln!(out, "{},{}", g.rho_at(i), v);
        } else {
            let _ = writeln!(out, "{},{},{}", g.rho_at(i), g.phi_at(i), v);
        }
    }
    out
}

/// Parses a field, building its grid from the header line.
pub fn field_from_csv(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (ln, first) = lines.next().ok_or_else(|| Error::parse(1, "empty field file"))?;
    let header = GridHeader::parse(first, ln)?;
    let grid = header.build()?;
    let axi = grid.mode() == GridMode::Axisymmetric;
    let (ln, cols) = lines.next().ok_or_else(|| Error::parse(ln + 1, "missing column header"))?;
    let want = if axi { "rho,value" } else { "rho,phi,value" };
    if cols.trim() != want {
        return Err(Error::parse(ln, format!("expected column header '{want}', found '{}'", cols.trim())));
    }
    let width = if axi { 2 } else { 3 };
    let mut values = Vec::with_capacity(grid.node_count());
    let tol = 1e-9 * (1.0 + grid.theta());
    for (ln, line) in lines {
        let node = values.len();
        if node >= grid.node_count() {
            return Err(Error::parse(ln, format!("more than {} data rows", grid.node_count())));
        }
        let mut nums = [0.0; 3];
        let mut count = 0;
        for part in line.split(',') {
            if count == width {
                count += 1;
                break;
            }
            nums[count] = part
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(ln, format!("not a number: '{}'", part.trim())))?;
            count += 1;
        }
        if count != width {
            return Err(Error::parse(ln, format!("expected {width} columns")));
        }
        if (nums[0] - grid.rho_at(node)).abs() > tol || (!axi && (nums[1] - grid.phi_at(node)).abs() > tol) {
            return Err(Error::parse(ln, format!("coordinates do not match grid node {node}")));
        }
        let v = nums[width - 1];
        if !v.is_finite() {
            return Err(Error::parse(ln, "non-finite value"));
        }
        values.push(v);
    }
    if values.len() != grid.node_count() {
        return Err(Error::parse(
            text.lines().count(),
            format!("found {} data rows, grid has {} nodes", values.len(), grid.node_count()),
        ));
    }
    ScalarField::new(grid, values)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    field_from_csv(&text)
}

pub fn write_field(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, field_to_csv(field)).map_err(|e| Error::io(path, e))
}

/// Reads a field and requires it to live on `grid`.
pub fn read_field_on(path: impl AsRef<Path>, grid: &Arc<CapGrid>) -> Result<ScalarField> {
    let f = read_field(path)?;
    if !f.grid().is_compatible(grid) {
        return Err(Error::invalid_argument("field file grid does not match the configured grid"));
    }
    ScalarField::new(grid.clone(), f.into_values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cap::ell_field;

    #[test]
    fn round_trip_is_bit_exact() {
        for (n, mode, np) in [(2, GridMode::Full2d, 8), (3, GridMode::Axisymmetric, 1)] {
            let g = CapGrid::build(CapDomain::new(n, 1.0471975511965976).unwrap(), 5, np, mode).unwrap();
            let f = ell_field(&g).map(|v| v.powi(3) / 7.0);
            let text = field_to_csv(&f);
            let back = field_from_csv(&text).unwrap();
            assert!(back.grid().is_compatible(&g));
            assert_eq!(
                back.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            assert_eq!(field_to_csv(&back), text);
        }
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let g = CapGrid::build(CapDomain::new(2, 1.0).unwrap(), 4, 8, GridMode::Full2d).unwrap();
        let good = field_to_csv(&ell_field(&g));
        assert!(field_from_csv("").is_err());
        assert!(field_from_csv(&good.replacen("rho,phi,value", "rho,value", 1)).is_err());
        assert!(field_from_csv(&good.replacen("mode=full-2d", "mode=mesh", 1)).is_err());
        let truncated: String = good.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(field_from_csv(&truncated), Err(Error::Parse { .. })));
        let extra = format!("{good}0,0,1\n");
        assert!(field_from_csv(&extra).is_err());
        let lines: Vec<&str> = good.lines().collect();
        let mut shifted = lines.clone();
        let bad_row = "0.3,0,1".to_string();
        shifted[2] = &bad_row;
        assert!(field_from_csv(&shifted.join("\n")).is_err());
        assert!(field_from_csv(&good.replacen("n_rho=4", "n_rho=99999999", 1)).is_err());
    }
}
