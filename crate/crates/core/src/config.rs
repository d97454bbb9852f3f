//! JSON problem configuration: domain, grid, named coefficient built-ins
//! with parameter maps, Dirichlet data on named boundary regions, source
//! and obstacle value expressions, and the parabolic time grid.
//!
//! Supplying Dirichlet data on a region that touches the degenerate
//! boundary portion is a configuration error: those nodes carry no data.

use crate::coefficients::{CoefficientField, SymMat};
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::geometry::{C2Scalar, Grid, Point, SpatialDomain};
use crate::operator::{classify_boundary, default_tol_zero, BoundaryClassification};
use serde::Deserialize;
use std::collections::BTreeMap;

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval {
        x_lo: f64,
        x_hi: f64,
    },
    Rectangle {
        x_lo: f64,
        x_hi: f64,
        y_lo: f64,
        y_hi: f64,
    },
    HalfGraph {
        x_lo: f64,
        x_hi: f64,
        y_hi: f64,
        gamma: String,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub cells_x: Option<usize>,
    #[serde(default)]
    pub cells_y: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub builtin: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcEntry {
    pub region: String,
    pub value: String,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    #[serde(default)]
    pub dirichlet: Vec<BcEntry>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub steps: usize,
}

fn default_f() -> String {
    "0".into()
}

fn default_mode() -> String {
    "elliptic".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    /// Inward slope of the test profile at the base point (must be < 0).
    pub p: f64,
    /// Profile value at the base point.
    pub r: f64,
    /// Tangential curvature of the test profile u = r + p x_d - (alpha/2)|x'|^2.
    #[serde(default)]
    pub alpha: f64,
    pub ell: f64,
    pub rho0: f64,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub k_lip: Option<f64>,
    #[serde(default)]
    pub lambda0: Option<f64>,
    #[serde(default)]
    pub grid_density: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub bc: BcConfig,
    #[serde(default = "default_f")]
    pub f: String,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub time: Option<TimeConfig>,
    /// Terminal data expression on {T} x closure (parabolic mode).
    #[serde(default)]
    pub terminal: Option<String>,
    /// Obstacle expression (obstacle runs).
    #[serde(default)]
    pub psi: Option<String>,
    #[serde(default)]
    pub tol_zero: Option<f64>,
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default)]
    pub transform: Option<TransformConfig>,
}

impl ProblemConfig {
    pub fn from_str(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(|e| {
            Error::Config(format!(
                "problem config parse failure at line {}, column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read problem file {}: {e}", path.display()))
        })?;
        Self::from_str(&text)
    }

    pub fn is_parabolic(&self) -> bool {
        self.mode == "parabolic"
    }
}

/// Everything assembled from a problem config.
pub struct BuiltProblem {
    pub domain: SpatialDomain,
    pub grid: Grid,
    pub coeffs: CoefficientField,
    pub classification: BoundaryClassification,
    pub f: Expr,
    /// Dirichlet entries as (region membership test, value expression).
    pub bc: Vec<(Region, Expr)>,
    pub psi: Option<Expr>,
    pub terminal: Option<Expr>,
    pub times: Option<Vec<f64>>,
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    XLo,
    XHi,
    YLo,
    YHi,
    All,
    Nondegenerate,
}

impl Region {
    pub fn parse(name: &str) -> Result<Region> {
        Ok(match name {
            "x_lo" => Region::XLo,
            "x_hi" => Region::XHi,
            "y_lo" => Region::YLo,
            "y_hi" => Region::YHi,
            "all" => Region::All,
            "nondegenerate" => Region::Nondegenerate,
            other => {
                return Err(Error::Config(format!(
                    "unknown boundary region '{other}' (expected x_lo, x_hi, y_lo, y_hi, all, nondegenerate)"
                )))
            }
        })
    }

    /// Does the region contain the grid boundary node at p?
    pub fn contains(
        &self,
        domain: &SpatialDomain,
        classification: &BoundaryClassification,
        node: usize,
        p: &Point,
        h: f64,
    ) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 0.5 * h;
        match (self, domain) {
            (Region::All, _) => true,
            (Region::Nondegenerate, _) => classification.is_nondegenerate(node),
            (Region::XLo, SpatialDomain::Interval { x_lo, .. }) => close(p[0], *x_lo),
            (Region::XHi, SpatialDomain::Interval { x_hi, .. }) => close(p[0], *x_hi),
            (Region::XLo, SpatialDomain::Rectangle { x_lo, .. }) => close(p[0], *x_lo),
            (Region::XHi, SpatialDomain::Rectangle { x_hi, .. }) => close(p[0], *x_hi),
            (Region::YLo, SpatialDomain::Rectangle { y_lo, .. }) => close(p[1], *y_lo),
            (Region::YHi, SpatialDomain::Rectangle { y_hi, .. }) => close(p[1], *y_hi),
            (Region::XLo, SpatialDomain::HalfGraph { x_lo, .. }) => close(p[0], *x_lo),
            (Region::XHi, SpatialDomain::HalfGraph { x_hi, .. }) => close(p[0], *x_hi),
            (Region::YHi, SpatialDomain::HalfGraph { y_hi, .. }) => close(p[1], *y_hi),
            (Region::YLo, SpatialDomain::HalfGraph { gamma, .. }) => {
                (p[1] - gamma.eval(p[0])).abs() <= 0.5 * h
            }
            _ => false,
        }
    }
}

fn get_param(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::Config(format!("operator params missing '{key}'")))
}

fn get_param_or(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

/// Instantiate a named coefficient built-in.
pub fn build_coefficients(
    cfg: &OperatorConfig,
    dim: usize,
    parabolic: bool,
) -> Result<CoefficientField> {
    let p = &cfg.params;
    let field = match cfg.builtin.as_str() {
        "kummer" => {
            if dim != 1 {
                return Err(Error::Config("kummer builtin is one-dimensional".into()));
            }
            CoefficientField::kummer(get_param(p, "a")?, get_param(p, "b")?)
        }
        "hypergeometric" => {
            if dim != 1 {
                return Err(Error::Config("hypergeometric builtin is one-dimensional".into()));
            }
            CoefficientField::hypergeometric(
                get_param(p, "a")?,
                get_param(p, "b")?,
                get_param(p, "c")?,
            )
        }
        "constant" => {
            let a = if dim == 1 {
                SymMat::scalar_1d(get_param(p, "a")?)
            } else {
                SymMat::from_entries_2d(
                    get_param(p, "a11")?,
                    get_param_or(p, "a12", 0.0),
                    get_param(p, "a22")?,
                )
            };
            let b = [get_param_or(p, "b1", 0.0), get_param_or(p, "b2", 0.0)];
            CoefficientField::constant(dim, a, b, get_param_or(p, "c", 0.0))
        }
        "linear_in_distance" => {
            let a0 = if dim == 1 {
                SymMat::scalar_1d(get_param(p, "a0")?)
            } else {
                SymMat::from_entries_2d(
                    get_param(p, "a011")?,
                    get_param_or(p, "a012", 0.0),
                    get_param(p, "a022")?,
                )
            };
            let axis = get_param_or(p, "axis", (dim - 1) as f64) as usize;
            if axis >= dim {
                return Err(Error::Config(format!("axis {axis} out of range for dim {dim}")));
            }
            let b = [get_param_or(p, "b1", 0.0), get_param_or(p, "b2", 0.0)];
            CoefficientField::linear_in_distance(dim, a0, axis, b, get_param_or(p, "c", 0.0))
        }
        "heston_like" => {
            if dim != 2 {
                return Err(Error::Config("heston_like builtin is two-dimensional".into()));
            }
            CoefficientField::heston_like(
                get_param(p, "kappa")?,
                get_param(p, "theta")?,
                get_param(p, "sigma")?,
                get_param(p, "rho")?,
                get_param(p, "r")?,
            )
        }
        other => {
            return Err(Error::Config(format!(
                "unknown builtin '{other}' (expected kummer, hypergeometric, constant, linear_in_distance, heston_like)"
            )))
        }
    };
    Ok(field.with_parabolic(parabolic))
}

/// Build domain, grid, coefficients, classification, and parsed expressions
/// from a config, validating the partial-boundary rule for Dirichlet data.
pub fn build_problem(cfg: &ProblemConfig) -> Result<BuiltProblem> {
    let domain = match &cfg.domain {
        DomainConfig::Interval { x_lo, x_hi } => SpatialDomain::interval(*x_lo, *x_hi)?,
        DomainConfig::Rectangle {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        } => SpatialDomain::rectangle(*x_lo, *x_hi, *y_lo, *y_hi)?,
        DomainConfig::HalfGraph {
            x_lo,
            x_hi,
            y_hi,
            gamma,
        } => {
            let g = expr::parse(gamma)?;
            let gamma_fn = C2Scalar::from_values(move |x| g.eval(x, 0.0, 0.0));
            SpatialDomain::half_graph(*x_lo, *x_hi, *y_hi, gamma_fn)?
        }
    };
    let dim = domain.dim();
    let cells =
        if dim == 1 {
            let c = cfg
                .grid
                .cells
                .or(cfg.grid.cells_x)
                .ok_or_else(|| Error::Config("grid.cells required in one dimension".into()))?;
            [c, 0]
        } else {
            let cx =
                cfg.grid.cells_x.or(cfg.grid.cells).ok_or_else(|| {
                    Error::Config("grid.cells_x required in two dimensions".into())
                })?;
            let cy =
                cfg.grid.cells_y.or(cfg.grid.cells).ok_or_else(|| {
                    Error::Config("grid.cells_y required in two dimensions".into())
                })?;
            [cx, cy]
        };
    let grid = Grid::on_domain(&domain, cells)?;
    let parabolic = cfg.is_parabolic();
    if parabolic && cfg.time.is_none() {
        return Err(Error::Config(
            "parabolic mode requires a time section".into(),
        ));
    }
    if parabolic && cfg.terminal.is_none() {
        return Err(Error::Config(
            "parabolic mode requires terminal data".into(),
        ));
    }
    let coeffs = build_coefficients(&cfg.operator, dim, parabolic)?;
    let tol_zero = match cfg.tol_zero {
        Some(t) => t,
        None => default_tol_zero(&coeffs, &grid)?,
    };
    let classification = classify_boundary(&domain, &grid, &coeffs, tol_zero)?;

    let mut bc = Vec::new();
    for entry in &cfg.bc.dirichlet {
        let region = Region::parse(&entry.region)?;
        let value = expr::parse(&entry.value)?;
        // Data only ever attaches to the non-degenerate portion; a region
        // lying entirely inside the degenerate portion is data supplied on
        // nodes that carry none, which is a config error.  (A wall region
        // may geometrically touch a closure-overlap corner that the
        // tie-break assigns to the degenerate side; the corner is simply
        // not a data node.)
        let hits_nondegenerate = classification.nondegenerate.iter().any(|&id| {
            region.contains(
                &domain,
                &classification,
                id,
                &grid.node(id),
                grid.min_spacing(),
            )
        });
        let degenerate_hit = classification.degenerate.iter().find(|&&id| {
            region.contains(
                &domain,
                &classification,
                id,
                &grid.node(id),
                grid.min_spacing(),
            )
        });
        if let (false, Some(&id)) = (hits_nondegenerate, degenerate_hit) {
            let p = grid.node(id);
            return Err(Error::Config(format!(
                "Dirichlet region '{}' lies on the degenerate boundary portion (node {id} at ({}, {})); that portion carries no data",
                entry.region, p[0], p[1]
            )));
        }
        bc.push((region, value));
    }
    let times = match (&cfg.time, parabolic) {
        (Some(tc), true) => {
            if tc.steps == 0 || tc.horizon <= 0.0 {
                return Err(Error::Config(
                    "time.T and time.steps must be positive".into(),
                ));
            }
            Some(
                (0..=tc.steps)
                    .map(|k| tc.horizon * (1.0 - k as f64 / tc.steps as f64))
                    .collect(),
            )
        }
        _ => None,
    };

    Ok(BuiltProblem {
        domain,
        grid,
        coeffs,
        classification,
        f: expr::parse(&cfg.f)?,
        bc,
        psi: cfg.psi.as_deref().map(expr::parse).transpose()?,
        terminal: cfg.terminal.as_deref().map(expr::parse).transpose()?,
        times,
        omega: cfg.omega.unwrap_or(1.5),
        tol: cfg.tol.unwrap_or(1e-10),
        max_iter: cfg.max_iter.unwrap_or(200_000),
    })
}

impl BuiltProblem {
    /// Solving requires data on every non-degenerate boundary node;
    /// classification and transform runs do not.
    pub fn require_complete_bc(&self) -> Result<()> {
        for &id in &self.classification.nondegenerate {
            let p = self.grid.node(id);
            let covered = self.bc.iter().any(|(r, _)| {
                r.contains(
                    &self.domain,
                    &self.classification,
                    id,
                    &p,
                    self.grid.min_spacing(),
                )
            });
            if !covered {
                return Err(Error::Config(format!(
                    "non-degenerate boundary node {id} at ({}, {}) has no Dirichlet data",
                    p[0], p[1]
                )));
            }
        }
        Ok(())
    }

    /// Dirichlet evaluator over the configured regions (first match wins).
    pub fn g(&self, t: f64, node: usize, p: &Point) -> f64 {
        for (region, value) in &self.bc {
            if region.contains(
                &self.domain,
                &self.classification,
                node,
                p,
                self.grid.min_spacing(),
            ) {
                return value.eval(p[0], p[1], t);
            }
        }
        f64::NAN
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KUMMER_JSON: &str = r#"{
        "domain": {"kind": "interval", "x_lo": 0.0, "x_hi": 1.0},
        "grid": {"cells": 128},
        "operator": {"builtin": "kummer", "params": {"a": 1.0, "b": 1.0}},
        "bc": {"dirichlet": [{"region": "x_hi", "value": "0"}]},
        "f": "0"
    }"#;

    #[test]
    fn kummer_config_builds() {
        let cfg = ProblemConfig::from_str(KUMMER_JSON).unwrap();
        let built = build_problem(&cfg).unwrap();
        assert_eq!(built.grid.len(), 129);
        assert_eq!(built.classification.degenerate, vec![0]);
        assert_eq!(built.g(0.0, 128, &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn data_on_degenerate_portion_rejected() {
        let bad = KUMMER_JSON.replace(r#""region": "x_hi""#, r#""region": "x_lo""#);
        let cfg = ProblemConfig::from_str(&bad).unwrap();
        match build_problem(&cfg).map(|_| ()) {
            Err(Error::Config(msg)) => assert!(msg.contains("degenerate"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn missing_data_on_nondegenerate_rejected() {
        let bad = KUMMER_JSON.replace(
            r#"{"dirichlet": [{"region": "x_hi", "value": "0"}]}"#,
            r#"{"dirichlet": []}"#,
        );
        let cfg = ProblemConfig::from_str(&bad).unwrap();
        let built = build_problem(&cfg).unwrap();
        assert!(matches!(built.require_complete_bc(), Err(Error::Config(_))));
    }

    #[test]
    fn parse_errors_carry_position() {
        match ProblemConfig::from_str("{ not json") {
            Err(Error::Config(msg)) => {
                assert!(msg.contains("line") && msg.contains("column"), "{msg}")
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parabolic_requires_time_and_terminal() {
        let cfg_text = KUMMER_JSON.replace(r#""f": "0""#, r#""f": "0", "mode": "parabolic""#);
        let cfg = ProblemConfig::from_str(&cfg_text).unwrap();
        assert!(matches!(
            build_problem(&cfg).map(|_| ()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn heston_like_config() {
        let text = r#"{
            "domain": {"kind": "rectangle", "x_lo": -1.0, "x_hi": 1.0, "y_lo": 0.0, "y_hi": 0.5},
            "grid": {"cells_x": 8, "cells_y": 8},
            "operator": {"builtin": "heston_like",
                         "params": {"kappa": 2.0, "theta": 0.04, "sigma": 0.3, "rho": -0.5, "r": 0.05}},
            "bc": {"dirichlet": [{"region": "x_lo", "value": "0"},
                                  {"region": "x_hi", "value": "exp(-y)"},
                                  {"region": "y_hi", "value": "0"}]}
        }"#;
        let cfg = ProblemConfig::from_str(text).unwrap();
        let built = build_problem(&cfg).unwrap();
        // The variance floor y = 0 is degenerate and carries no data.
        assert!(!built.classification.degenerate.is_empty());
        for &id in &built.classification.degenerate {
            assert_eq!(built.grid.node(id)[1], 0.0);
        }
    }
}
