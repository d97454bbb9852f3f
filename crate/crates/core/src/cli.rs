//! Command implementations behind the binary: wiring problem configs to the
//! library operations and writing result.json / CSV outputs.  Exit-code
//! convention: 0 success, 1 assertion or verification failure, 2 config
//! error (handled by the binary from the error variant).

use crate::coefficients::{CoefficientField, SmoothField, SymMat};
use crate::config::{build_problem, BuiltProblem, ProblemConfig};
use crate::error::{Error, Result};
use crate::geometry::{Point, SpatialDomain};
use crate::obstacle::{solve_obstacle_elliptic, solve_obstacle_parabolic};
use crate::operator::{estimate_boundary_lipschitz, fichera_function};
use crate::perturbation::{
    build_cylinder, build_w, certify, frame_point, select_constants, BoundaryMaxData, Mode,
};
use crate::report::{json_to_string_17, write_csv};
use crate::solver::{
    assemble_elliptic, assemble_parabolic, discrete_weak_max_check, solve_linear, solve_parabolic,
    RowKind,
};
use crate::suite;
use crate::transform::{
    build_tangential_killing_map, default_killing_delta, straighten_graph_boundary,
    transform_coefficients, verify_transform, TransformMethod,
};
use serde_json::{json, Value};
use std::path::Path;

fn write_result_json(out_dir: &Path, value: &Value) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("result.json"), json_to_string_17(value))?;
    Ok(())
}

fn solution_rows(built: &BuiltProblem, values: &[f64], active: Option<&[bool]>) -> Vec<Vec<f64>> {
    (0..built.grid.len())
        .map(|i| {
            let p = built.grid.node(i);
            let mut row = vec![p[0]];
            if built.grid.dim == 2 {
                row.push(p[1]);
            }
            row.push(values[i]);
            if let Some(a) = active {
                row.push(if a[i] { 1.0 } else { 0.0 });
            }
            row
        })
        .collect()
}

fn solution_header(dim: usize, active: bool) -> Vec<&'static str> {
    let mut h = if dim == 1 { vec!["x"] } else { vec!["x", "y"] };
    h.push("u");
    if active {
        h.push("active");
    }
    h
}

pub fn cmd_classify(problem: &Path, out_dir: &Path) -> Result<()> {
    let cfg = ProblemConfig::from_path(problem)?;
    let built = build_problem(&cfg)?;
    let mut rows = Vec::new();
    let mut fichera_values = Vec::new();
    for &id in &built.classification.degenerate {
        let fb = fichera_function(&built.coeffs, &built.classification, &built.grid, id)?;
        fichera_values.push(json!({"node": id, "fichera": fb}));
    }
    for id in 0..built.grid.len() {
        if !built.grid.is_boundary(id) {
            continue;
        }
        let p = built.grid.node(id);
        let n = built.grid.inward_normal(id).unwrap();
        let deg = built.classification.is_degenerate(id);
        let fb = if deg {
            fichera_function(&built.coeffs, &built.classification, &built.grid, id)?
        } else {
            f64::NAN
        };
        let mut row = vec![p[0]];
        if built.grid.dim == 2 {
            row.push(p[1]);
        }
        row.push(if deg { 1.0 } else { 0.0 });
        row.push(n[0]);
        if built.grid.dim == 2 {
            row.push(n[1]);
        }
        row.push(fb);
        rows.push(row);
    }
    let lipschitz = if built.classification.degenerate.is_empty() {
        Value::Null
    } else {
        let probe = 0.1 * built.grid.min_spacing() * built.grid.counts[0] as f64;
        let rep =
            estimate_boundary_lipschitz(&built.coeffs, &built.classification, &built.grid, probe)?;
        json!({
            "k": rep.k,
            "non_lipschitz": rep.non_lipschitz,
            "level_maxima": rep.level_maxima,
            "probe_depth": probe,
        })
    };
    let report = json!({
        "degenerate_nodes": built.classification.degenerate,
        "nondegenerate_nodes": built.classification.nondegenerate,
        "tol_zero": built.classification.tol_zero,
        "fichera": fichera_values,
        "lipschitz": lipschitz,
    });
    std::fs::create_dir_all(out_dir)?;
    let header = if built.grid.dim == 1 {
        vec!["x", "degenerate", "normal_x", "fichera"]
    } else {
        vec!["x", "y", "degenerate", "normal_x", "normal_y", "fichera"]
    };
    write_csv(&out_dir.join("boundary.csv"), &header, &rows)?;
    write_result_json(out_dir, &report)
}

pub fn cmd_solve(problem: &Path, out_dir: &Path) -> Result<()> {
    let cfg = ProblemConfig::from_path(problem)?;
    let built = build_problem(&cfg)?;
    built.require_complete_bc()?;
    std::fs::create_dir_all(out_dir)?;
    if cfg.is_parabolic() {
        let times = built.times.clone().expect("validated by build_problem");
        let terminal = built.terminal.clone().expect("validated by build_problem");
        let f = built.f.clone();
        let grid = built.grid.clone();
        let cls = built.classification.clone();
        let bc = built.bc.clone();
        let domain = built.domain.clone();
        let h = grid.min_spacing();
        let plan = assemble_parabolic(
            &built.coeffs,
            &built.grid,
            &built.classification,
            times,
            move |t, x: &Point| f.eval(x[0], x[1], t),
            move |t, x: &Point| {
                let id = (0..grid.len()).find(|&i| grid.node(i) == *x).unwrap();
                for (region, value) in &bc {
                    if region.contains(&domain, &cls, id, x, h) {
                        return value.eval(x[0], x[1], t);
                    }
                }
                f64::NAN
            },
            move |x: &Point| terminal.eval(x[0], x[1], 0.0),
        )?;
        let rep = solve_parabolic(&plan)?;
        for w in &rep.warnings {
            log::warn!("{w}");
        }
        let final_frame = rep.frames.last().unwrap();
        write_csv(
            &out_dir.join("solution.csv"),
            &solution_header(built.grid.dim, false),
            &solution_rows(&built, final_frame, None),
        )?;
        let report = json!({
            "mode": "parabolic",
            "steps": rep.times.len() - 1,
            "m_matrix_ok": rep.m_matrix_ok,
            "warnings": rep.warnings,
            "final_time": rep.times.last(),
            "max_u_final": final_frame.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        });
        write_result_json(out_dir, &report)
    } else {
        let f = built.f.clone();
        let op = assemble_elliptic(
            &built.coeffs,
            &built.grid,
            &built.classification,
            &move |x: &Point| f.eval(x[0], x[1], 0.0),
            &|x: &Point| {
                // Dirichlet values are filled per node below via built.g.
                let _ = x;
                f64::NAN
            },
        )?;
        // Re-fill Dirichlet rows through the region table (assemble_elliptic
        // takes a plain closure; regions need the node id).
        let mut op = op;
        for id in 0..built.grid.len() {
            if op.row_kinds[id] == RowKind::Dirichlet {
                op.rhs[id] = built.g(0.0, id, &built.grid.node(id));
            }
        }
        for w in &op.warnings {
            log::warn!("{w}");
        }
        let rep = solve_linear(&op)?;
        let f_max = (0..op.matrix.n)
            .filter(|&i| op.row_kinds[i] != RowKind::Dirichlet)
            .map(|i| op.rhs[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let c_min = (0..built.grid.len())
            .map(|i| built.coeffs.c(0.0, &built.grid.node(i)))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let weak_max_violations: Value = if f_max <= 0.0 || c_min > 0.0 {
            let c0 = if c_min > 0.0 { c_min } else { 0.0 };
            json!(discrete_weak_max_check(&rep, &op, c0))
        } else {
            Value::Null
        };
        write_csv(
            &out_dir.join("solution.csv"),
            &solution_header(built.grid.dim, false),
            &solution_rows(&built, &rep.solution, None),
        )?;
        let report = json!({
            "mode": "elliptic",
            "method": rep.method,
            "residual_norm": rep.residual_norm,
            "m_matrix_ok": rep.m_matrix_ok,
            "m_matrix_witnesses": rep.m_matrix_witnesses,
            "weak_max_violations": weak_max_violations,
            "warnings": op.warnings,
        });
        write_result_json(out_dir, &report)
    }
}

pub fn cmd_obstacle(problem: &Path, out_dir: &Path) -> Result<()> {
    let cfg = ProblemConfig::from_path(problem)?;
    let built = build_problem(&cfg)?;
    let psi_expr = built
        .psi
        .clone()
        .ok_or_else(|| Error::Config("obstacle runs need a psi expression".into()))?;
    built.require_complete_bc()?;
    std::fs::create_dir_all(out_dir)?;
    if cfg.is_parabolic() {
        let times = built.times.clone().unwrap();
        let terminal = built.terminal.clone().unwrap();
        let f = built.f.clone();
        let grid = built.grid.clone();
        let cls = built.classification.clone();
        let bc = built.bc.clone();
        let domain = built.domain.clone();
        let h = grid.min_spacing();
        let plan = assemble_parabolic(
            &built.coeffs,
            &built.grid,
            &built.classification,
            times,
            move |t, x: &Point| f.eval(x[0], x[1], t),
            move |t, x: &Point| {
                let id = (0..grid.len()).find(|&i| grid.node(i) == *x).unwrap();
                for (region, value) in &bc {
                    if region.contains(&domain, &cls, id, x, h) {
                        return value.eval(x[0], x[1], t);
                    }
                }
                f64::NAN
            },
            move |x: &Point| terminal.eval(x[0], x[1], 0.0),
        )?;
        let psi = move |t: f64, x: &Point| psi_expr.eval(x[0], x[1], t);
        let rep = solve_obstacle_parabolic(&plan, &psi, built.omega, built.tol, built.max_iter)?;
        let last = rep.frames.last().unwrap();
        let active_last = rep.active_frames.last().unwrap();
        let active: Vec<bool> = (0..built.grid.len())
            .map(|i| active_last.contains(&i))
            .collect();
        write_csv(
            &out_dir.join("solution.csv"),
            &solution_header(built.grid.dim, true),
            &solution_rows(&built, last, Some(&active)),
        )?;
        let report = json!({
            "mode": "parabolic",
            "steps": rep.times.len() - 1,
            "active_nodes_final": active_last,
        });
        write_result_json(out_dir, &report)
    } else {
        let f = built.f.clone();
        let mut op = assemble_elliptic(
            &built.coeffs,
            &built.grid,
            &built.classification,
            &move |x: &Point| f.eval(x[0], x[1], 0.0),
            &|_| f64::NAN,
        )?;
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
        let sol = solve_obstacle_elliptic(&op, &psi, built.omega, built.tol, built.max_iter, None)?;
        let active: Vec<bool> = (0..built.grid.len())
            .map(|i| sol.active_set.contains(&i))
            .collect();
        write_csv(
            &out_dir.join("solution.csv"),
            &solution_header(built.grid.dim, true),
            &solution_rows(&built, &sol.u, Some(&active)),
        )?;
        let report = json!({
            "mode": "elliptic",
            "iterations": sol.iterations,
            "complementarity_residual": sol.complementarity_residual,
            "active_set": sol.active_set,
            "omega": built.omega,
            "tol": built.tol,
        });
        write_result_json(out_dir, &report)
    }
}

/// Shift (and possibly reflect) the coefficients so the requested boundary
/// point becomes the origin of the straightened frame with inward normal
/// along the last axis.
fn frame_coefficients(built: &BuiltProblem, point: &Point) -> Result<(CoefficientField, Point)> {
    let dim = built.grid.dim;
    // The point must be a degenerate boundary node (within half a spacing).
    let h = built.grid.min_spacing();
    let node = built
        .classification
        .degenerate
        .iter()
        .cloned()
        .find(|&id| {
            let p = built.grid.node(id);
            (p[0] - point[0]).abs() <= 0.5 * h && (p[1] - point[1]).abs() <= 0.5 * h
        })
        .ok_or_else(|| {
            Error::Config(format!(
                "point ({}, {}) is not a degenerate boundary node",
                point[0], point[1]
            ))
        })?;
    let base = built.grid.node(node);
    let n = built.classification.inward_normals[&node];
    let cf = built.coeffs.clone();
    match (dim, n) {
        (1, [nx, _]) if nx > 0.99 => {
            let field = CoefficientField::new(
                1,
                {
                    let cf = cf.clone();
                    move |t, x: &Point| cf.a(t, &[base[0] + x[0], 0.0]).unwrap_or(SymMat::zero(1))
                },
                {
                    let cf = cf.clone();
                    move |t, x: &Point| cf.b(t, &[base[0] + x[0], 0.0]).unwrap_or([f64::NAN; 2])
                },
                {
                    let cf = cf.clone();
                    move |t, x: &Point| cf.c(t, &[base[0] + x[0], 0.0]).unwrap_or(f64::NAN)
                },
            )
            .with_parabolic(cf.parabolic);
            Ok((field, base))
        }
        (1, [nx, _]) if nx < -0.99 => {
            // Right endpoint: reflect, flipping the drift sign.
            let field = CoefficientField::new(
                1,
                {
                    let cf = cf.clone();
                    move |t, x: &Point| cf.a(t, &[base[0] - x[0], 0.0]).unwrap_or(SymMat::zero(1))
                },
                {
                    let cf = cf.clone();
                    move |t, x: &Point| {
                        let b = cf.b(t, &[base[0] - x[0], 0.0]).unwrap_or([f64::NAN; 2]);
                        [-b[0], 0.0]
                    }
                },
                {
                    let cf = cf.clone();
                    move |t, x: &Point| cf.c(t, &[base[0] - x[0], 0.0]).unwrap_or(f64::NAN)
                },
            )
            .with_parabolic(cf.parabolic);
            Ok((field, base))
        }
        (2, [_, ny]) if ny > 0.99 => {
            let field = CoefficientField::new(
                2,
                {
                    let cf = cf.clone();
                    move |t, x: &Point| {
                        cf.a(t, &[base[0] + x[0], base[1] + x[1]]).unwrap_or(SymMat::zero(2))
                    }
                },
                {
                    let cf = cf.clone();
                    move |t, x: &Point| {
                        cf.b(t, &[base[0] + x[0], base[1] + x[1]]).unwrap_or([f64::NAN; 2])
                    }
                },
                {
                    let cf = cf.clone();
                    move |t, x: &Point| {
                        cf.c(t, &[base[0] + x[0], base[1] + x[1]]).unwrap_or(f64::NAN)
                    }
                },
            )
            .with_parabolic(cf.parabolic);
            Ok((field, base))
        }
        _ => Err(Error::Config(format!(
            "perturb supports base points with axis-aligned inward normals (got normal ({}, {})); straighten the boundary first",
            n[0], n[1]
        ))),
    }
}

pub fn cmd_perturb(problem: &Path, point_arg: &str, out_dir: &Path) -> Result<()> {
    let cfg = ProblemConfig::from_path(problem)?;
    let built = build_problem(&cfg)?;
    let pc = cfg
        .perturbation
        .clone()
        .ok_or_else(|| Error::Config("perturb runs need a perturbation section".into()))?;
    let coords: Vec<f64> = point_arg
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad --point '{point_arg}': {e}")))?;
    if coords.len() != built.grid.dim {
        return Err(Error::Config(format!(
            "--point needs {} coordinates",
            built.grid.dim
        )));
    }
    let point = [coords[0], *coords.get(1).unwrap_or(&0.0)];
    let (coeffs, base) = frame_coefficients(&built, &point)?;
    let dim = built.grid.dim;
    let mode = if cfg.is_parabolic() {
        Mode::Parabolic
    } else {
        Mode::Elliptic
    };

    let b0 = coeffs.b(0.0, &[0.0, 0.0])?[dim - 1];
    let k_lip = match pc.k_lip {
        Some(k) => k,
        None => {
            let probe = 0.5 * pc.ell;
            let rep = estimate_boundary_lipschitz(
                &built.coeffs,
                &built.classification,
                &built.grid,
                probe,
            )?;
            rep.k.max(1e-6)
        }
    };
    let lambda0 = match pc.lambda0 {
        Some(l) => l,
        None => {
            let mut sup: f64 = 0.0;
            for i in 0..=20 {
                for j in 0..=20 {
                    let x = frame_point(
                        dim,
                        pc.rho0 * (2.0 * i as f64 / 20.0 - 1.0),
                        pc.ell * j as f64 / 20.0,
                    );
                    sup = sup.max(coeffs.c(0.0, &x)?.max(0.0));
                }
            }
            sup
        }
    };
    let data = BoundaryMaxData::new(
        pc.p,
        pc.r,
        b0,
        k_lip,
        lambda0,
        pc.ell,
        pc.rho0,
        pc.tau.unwrap_or(0.0),
    )?;
    // Built-in certification profile u = r + p x_d - (alpha/2)|x'|^2.
    let (p, r, alpha) = (pc.p, pc.r, pc.alpha);
    let u = SmoothField::new(
        dim,
        move |_, x: &Point| {
            let xd = x[dim - 1];
            let xt = if dim == 2 { x[0] } else { 0.0 };
            r + p * xd - 0.5 * alpha * xt * xt
        },
        move |_, x: &Point| {
            let mut g = [0.0, 0.0];
            g[dim - 1] = p;
            if dim == 2 {
                g[0] = -alpha * x[0];
            }
            g
        },
        move |_, _| {
            let mut h = SymMat::zero(dim);
            if dim == 2 {
                h.set_sym(0, 0, -alpha);
            }
            h
        },
    )
    .with_dt(|_, _| 0.0);
    let uval = {
        let u = u.clone();
        move |t: f64, x: &Point| u.value(t, x)
    };
    let spec = select_constants(&data, dim, &uval, mode)?;
    let w = build_w(&spec, &data, dim);
    let cyl = build_cylinder(&spec, &data)?;
    let density = pc.grid_density.unwrap_or(16);
    let report = certify(&spec, &data, &coeffs, &u, density)?;

    std::fs::create_dir_all(out_dir)?;
    // Sampled v over the closed cylinder.
    let mut rows = Vec::new();
    let sweep = 4 * density;
    for i in 0..=sweep {
        let x_d = cyl.x_hat_d * i as f64 / sweep as f64;
        let rad = cyl.rho(x_d);
        if dim == 1 {
            let x = frame_point(1, 0.0, x_d);
            rows.push(vec![x_d, u.value(0.0, &x) + w.value(0.0, &x)]);
        } else {
            for j in 0..=20 {
                let xt = rad * (2.0 * j as f64 / 20.0 - 1.0);
                let x = frame_point(2, xt, x_d);
                rows.push(vec![xt, x_d, u.value(0.0, &x) + w.value(0.0, &x)]);
            }
        }
    }
    let header: Vec<&str> = if dim == 1 {
        vec!["x_d", "v"]
    } else {
        vec!["x_tangential", "x_d", "v"]
    };
    write_csv(&out_dir.join("v_field.csv"), &header, &rows)?;
    let rho_samples: Vec<Value> = (0..=16)
        .map(|i| {
            let x_d = cyl.x_hat_d * i as f64 / 16.0;
            json!([x_d, cyl.rho(x_d)])
        })
        .collect();
    let doc = json!({
        "base_point": [base[0], base[1]],
        "mode": if cfg.is_parabolic() { "parabolic" } else { "elliptic" },
        "constants": {
            "eta": spec.eta,
            "zeta": spec.zeta,
            "q": spec.q,
            "m": spec.m,
            "x_hat_d": spec.x_hat_d,
            "b0": data.b0,
            "k_lip": data.k_lip,
            "lambda0": data.lambda0,
        },
        "cylinder": {
            "x_hat_d": cyl.x_hat_d,
            "rho0": cyl.rho0,
            "tau": cyl.tau,
            "rho_samples": rho_samples,
        },
        "certificate": {
            "passed": report.passed,
            "interior_samples": report.interior_sample_count,
            "max_A_u_plus_w": report.avw_max,
            "max_A_w": report.aw_max,
            "v_max": report.v_max,
            "argmax_interior": report.v_argmax_interior,
            "argmax_within_one_cell": report.argmax_within_one_cell,
            "bottom_sweep_max": report.bottom_sweep_max,
            "top_sweep_max": report.top_sweep_max,
            "side_sweep_max": report.side_sweep_max,
            "temporal_sweep_max": report.temporal_sweep_max,
            "failures": report.failures,
        }
    });
    write_result_json(out_dir, &doc)?;
    report.into_result().map(|_| ())
}

pub fn cmd_transform(problem: &Path, map: &str, verify: bool, out_dir: &Path) -> Result<()> {
    let cfg = ProblemConfig::from_path(problem)?;
    let built = build_problem(&cfg)?;
    std::fs::create_dir_all(out_dir)?;
    match map {
        "straighten" => {
            let gamma = match &built.domain {
                SpatialDomain::HalfGraph { gamma, .. } => gamma.clone(),
                _ => {
                    return Err(Error::Config(
                        "straighten requires a half_graph domain".into(),
                    ))
                }
            };
            let shear = straighten_graph_boundary(&gamma);
            let t_op = transform_coefficients(&built.coeffs, &shear, TransformMethod::Analytic)?;
            let mut rows = Vec::new();
            for id in 0..built.grid.len() {
                let x = built.grid.node(id);
                let y = shear.forward(0.0, &x);
                let a = t_op.coeffs.a(0.0, &y)?;
                let b = t_op.coeffs.b(0.0, &y)?;
                let c = t_op.coeffs.c(0.0, &y)?;
                rows.push(vec![
                    y[0],
                    y[1],
                    a.get(0, 0),
                    a.get(0, 1),
                    a.get(1, 1),
                    b[0],
                    b[1],
                    c,
                ]);
            }
            write_csv(
                &out_dir.join("transformed.csv"),
                &["y1", "y2", "a11", "a12", "a22", "b1", "b2", "c"],
                &rows,
            )?;
            let pts: Vec<Point> = (0..built.grid.len()).map(|i| built.grid.node(i)).collect();
            let roundtrip = shear.roundtrip_deviation(0.0, &pts)?;
            let doc = json!({
                "map": "straighten",
                "roundtrip_deviation": roundtrip,
                "nodes": built.grid.len(),
            });
            write_result_json(out_dir, &doc)?;
            if verify && roundtrip > 1e-10 {
                return Err(Error::Transform(format!(
                    "straightening roundtrip deviation {roundtrip:e}"
                )));
            }
            Ok(())
        }
        "kill-tangential" => {
            if built.grid.dim != 2 {
                return Err(Error::Config(
                    "kill-tangential needs a two-dimensional straightened frame".into(),
                ));
            }
            let delta = match cfg.transform.as_ref().and_then(|t| t.delta) {
                Some(d) => d,
                None => default_killing_delta(&built.coeffs, 0.5)?,
            };
            let map = build_tangential_killing_map(&built.coeffs, delta)?;
            let analytic = transform_coefficients(&built.coeffs, &map, TransformMethod::Analytic)?;
            let numeric =
                transform_coefficients(&built.coeffs, &map, TransformMethod::ChainRuleNumeric)?;
            let mut rows = Vec::new();
            let mut max_gap: f64 = 0.0;
            for i in 0..=16 {
                for j in 0..=8 {
                    let x = [
                        -0.9 * delta + 1.8 * delta * i as f64 / 16.0,
                        0.9 * delta * j as f64 / 8.0,
                    ];
                    let y = map.forward(0.0, &x);
                    let a = analytic.coeffs.a(0.0, &y)?;
                    let b = analytic.coeffs.b(0.0, &y)?;
                    let c = analytic.coeffs.c(0.0, &y)?;
                    let an = numeric.coeffs.a(0.0, &y)?;
                    let bn = numeric.coeffs.b(0.0, &y)?;
                    for r in 0..2 {
                        for s in 0..2 {
                            max_gap = max_gap.max((a.get(r, s) - an.get(r, s)).abs());
                        }
                    }
                    max_gap = max_gap.max((b[0] - bn[0]).abs()).max((b[1] - bn[1]).abs());
                    rows.push(vec![
                        y[0],
                        y[1],
                        a.get(0, 0),
                        a.get(0, 1),
                        a.get(1, 1),
                        b[0],
                        b[1],
                        c,
                    ]);
                }
            }
            write_csv(
                &out_dir.join("transformed.csv"),
                &["y1", "y2", "a11", "a12", "a22", "b1", "b2", "c"],
                &rows,
            )?;
            let boundary: Vec<Point> = (0..=32)
                .map(|i| [-delta + 2.0 * delta * i as f64 / 32.0, 0.0])
                .collect();
            // Eigenvalue comparison runs where the map is the identity.
            let interior: Vec<Point> = (0..built.grid.len())
                .filter(|&i| !built.grid.is_boundary(i))
                .map(|i| built.grid.node(i))
                .filter(|p| (p[0] * p[0] + p[1] * p[1]).sqrt() > 2.05 * delta)
                .take(25)
                .collect();
            let verification = verify_transform(&analytic, &boundary, delta, &interior, 1e-8)?;
            let doc = json!({
                "map": "kill-tangential",
                "delta": delta,
                "max_analytic_vs_numeric_gap": max_gap,
                "verification": {
                    "passed": verification.passed,
                    "max_a_norm_on_boundary": verification.max_a_norm_boundary,
                    "min_b_perp_on_boundary": verification.min_b_perp_boundary,
                    "max_b_tangential_on_patch": verification.max_b_tangential_patch,
                    "max_eigenvalue_relative_mismatch": verification.max_eigen_rel_mismatch,
                    "failures": verification.failures,
                },
            });
            write_result_json(out_dir, &doc)?;
            if verify && !verification.passed {
                return Err(Error::Transform(verification.failures.join("; ")));
            }
            Ok(())
        }
        other => Err(Error::Config(format!(
            "unknown map '{other}' (expected straighten or kill-tangential)"
        ))),
    }
}

pub fn cmd_special_eval(func: &str, a: f64, b: f64, x: f64) -> Result<()> {
    let params = crate::special::HypergeometricParams::new(a, b);
    let value = match func {
        "M" => crate::special::kummer_m(&params, x)?,
        "U" => crate::special::tricomi_u(&params, x)?,
        "Mprime" => crate::special::kummer_m_derivative(&params, x)?,
        "Uprime" => crate::special::tricomi_u_derivative(&params, x)?,
        other => {
            return Err(Error::Config(format!(
                "unknown function '{other}' (expected M, U, Mprime, Uprime)"
            )))
        }
    };
    println!("{value}");
    Ok(())
}

pub fn cmd_special_classify(a: f64, b: f64) -> Result<()> {
    let c = crate::special::classify_u_regularity(a, b)?;
    println!("{c}");
    Ok(())
}

/// Run the verification suite; prints one line per criterion and returns
/// whether everything passed.
pub fn cmd_verify_suite(selection: &str, seed: u64, out_dir: Option<&Path>) -> Result<bool> {
    let ids = suite::suite_selection(selection)
        .ok_or_else(|| Error::Config(format!("empty or unknown suite selection '{selection}'")))?;
    let threads = std::env::var("DEGENMAX_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get().min(4))
                .unwrap_or(1)
        });
    let results = suite::run_suite(&ids, seed, threads);
    let mut all_ok = true;
    for r in &results {
        let runtime_ok = r.runtime_seconds < r.budget_seconds;
        let status = if r.passed && runtime_ok {
            "PASS"
        } else {
            "FAIL"
        };
        println!(
            "criterion {:2} {:42} {} ({:.3}s, budget {:.1}s)",
            r.id, r.name, status, r.runtime_seconds, r.budget_seconds
        );
        if !r.passed {
            if let Some(fails) = r.details.get("failures").and_then(|f| f.as_array()) {
                for f in fails {
                    println!("    {}", f.as_str().unwrap_or_default());
                }
            }
        }
        all_ok &= r.passed && runtime_ok;
    }
    if let Some(dir) = out_dir {
        write_result_json(dir, &suite::suite_report_json(&results, seed))?;
    }
    Ok(all_ok)
}
