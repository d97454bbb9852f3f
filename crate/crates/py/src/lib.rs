//! Python bindings: confluent hypergeometric evaluations, boundary
//! classification, the solvers, and the verification suite, driven by the
//! same JSON problem configs as the CLI.

use degenmax::config::{build_problem, ProblemConfig};
use degenmax::error::Error;
use degenmax::geometry::Point;
use degenmax::obstacle::solve_obstacle_elliptic;
use degenmax::operator::fichera_function;
use degenmax::solver::{assemble_elliptic, solve_linear, RowKind};
use degenmax::special::{self, HypergeometricParams};
use degenmax::suite;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyfunction]
fn gamma(x: f64) -> f64 {
    special::gamma(x)
}

#[pyfunction]
#[pyo3(signature = (a, b, x, series_tol = 1e-16, max_terms = 600))]
fn kummer_m(a: f64, b: f64, x: f64, series_tol: f64, max_terms: usize) -> PyResult<f64> {
    special::kummer_m(
        &HypergeometricParams::with_tol(a, b, series_tol, max_terms),
        x,
    )
    .map_err(err)
}

#[pyfunction]
fn kummer_m_derivative(a: f64, b: f64, x: f64) -> PyResult<f64> {
    special::kummer_m_derivative(&HypergeometricParams::new(a, b), x).map_err(err)
}

#[pyfunction]
fn tricomi_u(a: f64, b: f64, x: f64) -> PyResult<f64> {
    special::tricomi_u(&HypergeometricParams::new(a, b), x).map_err(err)
}

#[pyfunction]
fn tricomi_u_derivative(a: f64, b: f64, x: f64) -> PyResult<f64> {
    special::tricomi_u_derivative(&HypergeometricParams::new(a, b), x).map_err(err)
}

/// Regularity class of U(a,b,.) at x = 0 as its token string.
#[pyfunction]
fn classify_u_regularity(a: f64, b: f64) -> PyResult<String> {
    special::classify_u_regularity(a, b)
        .map(|c| c.token().to_string())
        .map_err(err)
}

fn built_from_json(config_json: &str) -> PyResult<(ProblemConfig, degenmax::config::BuiltProblem)> {
    let cfg = ProblemConfig::from_str(config_json).map_err(err)?;
    let built = build_problem(&cfg).map_err(err)?;
    Ok((cfg, built))
}

fn node_coords(built: &degenmax::config::BuiltProblem) -> Vec<Vec<f64>> {
    (0..built.grid.len())
        .map(|i| {
            let p = built.grid.node(i);
            if built.grid.dim == 1 {
                vec![p[0]]
            } else {
                vec![p[0], p[1]]
            }
        })
        .collect()
}

/// Boundary classification for a JSON problem config: degenerate and
/// non-degenerate node ids, node coordinates, and Fichera values.
#[pyfunction]
fn classify_boundary<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let (_, built) = built_from_json(config_json)?;
    let out = PyDict::new_bound(py);
    out.set_item("degenerate", built.classification.degenerate.clone())?;
    out.set_item("nondegenerate", built.classification.nondegenerate.clone())?;
    out.set_item("nodes", node_coords(&built))?;
    let fichera = PyList::empty_bound(py);
    for &id in &built.classification.degenerate {
        let fb =
            fichera_function(&built.coeffs, &built.classification, &built.grid, id).map_err(err)?;
        fichera.append((id, fb))?;
    }
    out.set_item("fichera", fichera)?;
    out.set_item("tol_zero", built.classification.tol_zero)?;
    Ok(out)
}

/// Solve the elliptic problem from a JSON config; returns nodes, solution,
/// and solver diagnostics.
#[pyfunction]
fn solve<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let (cfg, built) = built_from_json(config_json)?;
    if cfg.is_parabolic() {
        return Err(PyValueError::new_err(
            "parabolic configs are driven through the CLI; the binding covers elliptic solves",
        ));
    }
    built.require_complete_bc().map_err(err)?;
    let f = built.f.clone();
    let mut op = assemble_elliptic(
        &built.coeffs,
        &built.grid,
        &built.classification,
        &move |x: &Point| f.eval(x[0], x[1], 0.0),
        &|_| f64::NAN,
    )
    .map_err(err)?;
    for id in 0..built.grid.len() {
        if op.row_kinds[id] == RowKind::Dirichlet {
            op.rhs[id] = built.g(0.0, id, &built.grid.node(id));
        }
    }
    let rep = solve_linear(&op).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("nodes", node_coords(&built))?;
    out.set_item("u", rep.solution)?;
    out.set_item("residual_norm", rep.residual_norm)?;
    out.set_item("m_matrix_ok", rep.m_matrix_ok)?;
    out.set_item("method", rep.method)?;
    Ok(out)
}

/// Solve the obstacle problem from a JSON config (psi required); returns
/// nodes, solution, active set, and the complementarity residual.
#[pyfunction]
fn solve_obstacle<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let (cfg, built) = built_from_json(config_json)?;
    if cfg.is_parabolic() {
        return Err(PyValueError::new_err(
            "parabolic configs are driven through the CLI; the binding covers elliptic solves",
        ));
    }
    built.require_complete_bc().map_err(err)?;
    let psi_expr = built
        .psi
        .clone()
        .ok_or_else(|| PyValueError::new_err("config has no psi expression"))?;
    let f = built.f.clone();
    let mut op = assemble_elliptic(
        &built.coeffs,
        &built.grid,
        &built.classification,
        &move |x: &Point| f.eval(x[0], x[1], 0.0),
        &|_| f64::NAN,
    )
    .map_err(err)?;
    for id in 0..built.grid.len() {
        if op.row_kinds[id] == RowKind::Dirichlet {
            op.rhs[id] = built.g(0.0, id, &built.grid.node(id));
        }
    }
    let psi: Vec<f64> = (0..built.grid.len())
        .map(|i| {
            let p = built.grid.node(i);
            psi_expr.eval(p[0], p[1], 0.0)
        })
        .collect();
    let sol = solve_obstacle_elliptic(&op, &psi, built.omega, built.tol, built.max_iter, None)
        .map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("nodes", node_coords(&built))?;
    out.set_item("u", sol.u)?;
    out.set_item("active_set", sol.active_set)?;
    out.set_item("complementarity_residual", sol.complementarity_residual)?;
    out.set_item("iterations", sol.iterations)?;
    Ok(out)
}

/// Run the verification suite; returns a list of
/// {"id", "name", "passed", "runtime_seconds"} dicts.
#[pyfunction]
#[pyo3(signature = (selection = "all", seed = 42))]
fn run_verify_suite<'py>(
    py: Python<'py>,
    selection: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyList>> {
    let ids = suite::suite_selection(selection)
        .ok_or_else(|| PyValueError::new_err(format!("unknown suite selection '{selection}'")))?;
    let results = suite::run_suite(&ids, seed, 1);
    let list = PyList::empty_bound(py);
    for r in results {
        let d = PyDict::new_bound(py);
        d.set_item("id", r.id)?;
        d.set_item("name", r.name)?;
        d.set_item("passed", r.passed)?;
        d.set_item("runtime_seconds", r.runtime_seconds)?;
        list.append(d)?;
    }
    Ok(list)
}

#[pymodule]
fn degenmax_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(kummer_m, m)?)?;
    m.add_function(wrap_pyfunction!(kummer_m_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(tricomi_u, m)?)?;
    m.add_function(wrap_pyfunction!(tricomi_u_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(classify_u_regularity, m)?)?;
    m.add_function(wrap_pyfunction!(classify_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_obstacle, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify_suite, m)?)?;
    Ok(())
}
