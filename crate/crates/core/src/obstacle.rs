//! Unilateral obstacle problems min{A u - f, u - psi} = 0 (and the parabolic
//! analogue) solved by projected SOR over the assembled upwind systems.
//! Dirichlet data enters only on the non-degenerate boundary, exactly as in
//! the unconstrained solver.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::solver::{solve_linear, DiscreteOperator, ParabolicProblem, RowKind};

/// Converged obstacle solution with contact diagnostics.
#[derive(Clone, Debug)]
pub struct ObstacleSolution {
    pub u: Vec<f64>,
    /// Nodes with u - psi <= tol_active (= 10 * solver tol).
    pub active_set: Vec<usize>,
    /// max_i |min((A u - f)_i, (u - psi)_i)| over non-Dirichlet nodes.
    pub complementarity_residual: f64,
    pub iterations: usize,
}

/// One projected Gauss-Seidel/SOR sweep in lexicographic node order.
/// Returns the max-norm update.
pub fn psor_sweep(op: &DiscreteOperator, psi: &[f64], omega: f64, u: &mut [f64]) -> f64 {
    let mut delta: f64 = 0.0;
    for i in 0..op.matrix.n {
        let (cols, vals) = op.matrix.row(i);
        if op.row_kinds[i] == RowKind::Dirichlet {
            let new = op.rhs[i];
            delta = delta.max((new - u[i]).abs());
            u[i] = new;
            continue;
        }
        let mut sum = op.rhs[i];
        let mut diag = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                sum -= v * u[j];
            }
        }
        let gs = sum / diag;
        let new = (u[i] + omega * (gs - u[i])).max(psi[i]);
        delta = delta.max((new - u[i]).abs());
        u[i] = new;
    }
    delta
}

fn complementarity_residual(op: &DiscreteOperator, psi: &[f64], u: &[f64]) -> f64 {
    let au = op.matrix.matvec(u);
    let mut worst: f64 = 0.0;
    for i in 0..op.matrix.n {
        if op.row_kinds[i] == RowKind::Dirichlet {
            continue;
        }
        let row_res = au[i] - op.rhs[i];
        let gap = u[i] - psi[i];
        worst = worst.max(row_res.min(gap).abs());
    }
    worst
}

fn check_compatibility(op: &DiscreteOperator, psi: &[f64]) -> Result<()> {
    for i in 0..op.matrix.n {
        if op.row_kinds[i] == RowKind::Dirichlet && psi[i] > op.rhs[i] + 1e-12 {
            return Err(Error::Config(format!(
                "obstacle incompatible with boundary data at node {i}: psi = {} > g = {}",
                psi[i], op.rhs[i]
            )));
        }
    }
    Ok(())
}

/// Solve min{A u - f, u - psi} = 0 by projected SOR.
///
/// Iterates start from the obstacle unless `u0` is supplied; convergence is
/// declared when a full sweep moves no node by more than `tol`.
pub fn solve_obstacle_elliptic(
    op: &DiscreteOperator,
    psi: &[f64],
    omega: f64,
    tol: f64,
    max_iter: usize,
    u0: Option<&[f64]>,
) -> Result<ObstacleSolution> {
    if !(0.0 < omega && omega < 2.0) {
        return Err(Error::InvalidParams(format!(
            "relaxation omega = {omega} not in (0, 2)"
        )));
    }
    check_compatibility(op, psi)?;
    let mut u: Vec<f64> = match u0 {
        Some(v) => v.to_vec(),
        None => psi.to_vec(),
    };
    let mut last_delta = f64::INFINITY;
    for it in 1..=max_iter {
        last_delta = psor_sweep(op, psi, omega, &mut u);
        if last_delta < tol {
            let tol_active = 10.0 * tol;
            let active_set = (0..op.matrix.n)
                .filter(|&i| u[i] - psi[i] <= tol_active)
                .collect();
            return Ok(ObstacleSolution {
                complementarity_residual: complementarity_residual(op, psi, &u),
                active_set,
                u,
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence(format!(
        "projected SOR still moving {last_delta:e} per sweep after {max_iter} iterations"
    )))
}

/// One-sided supersolution verification: both A u - f >= -tol and
/// u - psi >= -tol at every non-Dirichlet node, without the min = 0 clause.
pub fn verify_supersolution(
    op: &DiscreteOperator,
    psi: &[f64],
    u: &[f64],
    tol: f64,
) -> (bool, Vec<usize>) {
    let au = op.matrix.matvec(u);
    let mut witnesses = Vec::new();
    for i in 0..op.matrix.n {
        if op.row_kinds[i] == RowKind::Dirichlet {
            continue;
        }
        if au[i] - op.rhs[i] < -tol || u[i] - psi[i] < -tol {
            witnesses.push(i);
        }
    }
    (witnesses.is_empty(), witnesses)
}

/// Parabolic obstacle march: each implicit step folds the time term into
/// the diagonal and right-hand side and is solved by projected SOR.
#[derive(Clone, Debug)]
pub struct ObstacleParabolicReport {
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
    pub active_frames: Vec<Vec<usize>>,
}

pub fn solve_obstacle_parabolic(
    problem: &ParabolicProblem,
    psi: &dyn Fn(f64, &Point) -> f64,
    omega: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ObstacleParabolicReport> {
    let grid = &problem.grid;
    let n = grid.len();
    let terminal: Vec<f64> = (0..n)
        .map(|i| problem.terminal_value(&grid.node(i)))
        .collect();
    let t_start = problem.times[0];
    for (i, &v) in terminal.iter().enumerate() {
        let p = psi(t_start, &grid.node(i));
        if v < p - 1e-12 {
            return Err(Error::Config(format!(
                "terminal data below the obstacle at node {i}: {v} < {p}"
            )));
        }
    }
    let mut frames = vec![terminal];
    let mut active_frames = vec![Vec::new()];
    for w in problem.times.windows(2) {
        let (t_prev, t_new) = (w[0], w[1]);
        let dt = t_prev - t_new;
        let u_prev = frames.last().unwrap().clone();
        let op = problem.step_operator(t_new, dt, &u_prev)?;
        let psi_now: Vec<f64> = (0..n).map(|i| psi(t_new, &grid.node(i))).collect();
        let sol = solve_obstacle_elliptic(&op, &psi_now, omega, tol, max_iter, Some(&u_prev))?;
        active_frames.push(sol.active_set);
        frames.push(sol.u);
    }
    Ok(ObstacleParabolicReport {
        times: problem.times.clone(),
        frames,
        active_frames,
    })
}

/// Node-wise comparison of two obstacle solutions on the same grid.
#[derive(Clone, Debug)]
pub struct ComparisonReport {
    /// u2 >= u1 - tol at every node.
    pub ordered: bool,
    pub max_violation: f64,
    pub witnesses: Vec<usize>,
    /// max |u2 - u1|; with identical data this is the uniqueness gap.
    pub max_abs_diff: f64,
}

pub fn comparison_check(
    sol1: &ObstacleSolution,
    sol2: &ObstacleSolution,
    tol: f64,
) -> ComparisonReport {
    let mut max_violation: f64 = 0.0;
    let mut max_abs_diff: f64 = 0.0;
    let mut witnesses = Vec::new();
    for (i, (a, b)) in sol1.u.iter().zip(&sol2.u).enumerate() {
        max_abs_diff = max_abs_diff.max((b - a).abs());
        let viol = a - b;
        if viol > tol {
            witnesses.push(i);
        }
        max_violation = max_violation.max(viol);
    }
    ComparisonReport {
        ordered: witnesses.is_empty(),
        max_violation,
        witnesses,
        max_abs_diff,
    }
}

/// Unconstrained solve used as the psi -> -inf oracle.
pub fn unconstrained_solution(op: &DiscreteOperator) -> Result<Vec<f64>> {
    Ok(solve_linear(op)?.solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientField;
    use crate::geometry::{Grid, SpatialDomain};
    use crate::operator::{classify_boundary, default_tol_zero, BoundaryClassification};
    use crate::solver::assemble_elliptic;
    use std::collections::BTreeMap;

    fn kummer_op(
        cells: usize,
        f: impl Fn(&Point) -> f64,
        g: impl Fn(&Point) -> f64,
    ) -> (
        DiscreteOperator,
        Grid,
        BoundaryClassification,
        CoefficientField,
    ) {
        let domain = SpatialDomain::interval(0.0, 1.0).unwrap();
        let grid = Grid::on_domain(&domain, [cells, 0]).unwrap();
        let coeffs = CoefficientField::kummer(1.0, 1.0);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        let op = assemble_elliptic(&coeffs, &grid, &cls, &f, &g).unwrap();
        (op, grid, cls, coeffs)
    }

    #[test]
    fn very_negative_obstacle_matches_unconstrained() {
        let (op, _, _, _) = kummer_op(32, |x| (2.0 * x[0]).cos() - 0.4, |_| 0.1);
        let psi = vec![-1e6; op.matrix.n];
        let sol = solve_obstacle_elliptic(&op, &psi, 1.5, 1e-12, 20_000, None).unwrap();
        let free = unconstrained_solution(&op).unwrap();
        for (a, b) in sol.u.iter().zip(&free) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!(sol.active_set.is_empty());
    }

    #[test]
    fn supersolution_obstacle_is_the_solution() {
        // psi = 1 - x with f very negative: A psi - f >= 0 everywhere, and
        // g = psi on the Dirichlet node, so u = psi.
        let (op, grid, _, _) = kummer_op(24, |_| -25.0, |x| 1.0 - x[0]);
        let psi: Vec<f64> = (0..grid.len()).map(|i| 1.0 - grid.node(i)[0]).collect();
        let sol = solve_obstacle_elliptic(&op, &psi, 1.5, 1e-12, 20_000, None).unwrap();
        for (a, b) in sol.u.iter().zip(&psi) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(sol.active_set.len(), grid.len());
        let (ok, w) = verify_supersolution(&op, &psi, &sol.u, 1e-9);
        assert!(ok, "witnesses {w:?}");
    }

    #[test]
    fn ramp_obstacle_active_set_is_left_interval() {
        // psi(x) = max(0.5 - x, 0) * 0.3, f = 0, g(1) = 0.
        let cells = 32;
        let (op, grid, _, _) = kummer_op(cells, |_| 0.0, |_| 0.0);
        let psi: Vec<f64> = (0..grid.len())
            .map(|i| (0.5 - grid.node(i)[0]).max(0.0) * 0.3)
            .collect();
        let tol = 1e-12;
        let sol = solve_obstacle_elliptic(&op, &psi, 1.5, tol, 50_000, None).unwrap();
        assert!(sol.complementarity_residual < 1e-8);

        // Dense oracle: enumerate contiguous left active sets [0..=k], solve
        // the reduced equality system, keep the complementarity-feasible one.
        let mut oracle: Option<Vec<f64>> = None;
        'outer: for k in 0..cells {
            let mut rows = Vec::new();
            let mut rhs = vec![0.0; op.matrix.n];
            let mut kinds = Vec::new();
            for i in 0..op.matrix.n {
                if i <= k {
                    let mut row = BTreeMap::new();
                    row.insert(i, 1.0);
                    rows.push(row);
                    rhs[i] = psi[i];
                    kinds.push(RowKind::Dirichlet);
                } else {
                    let (cols, vals) = op.matrix.row(i);
                    let row: BTreeMap<usize, f64> =
                        cols.iter().cloned().zip(vals.iter().cloned()).collect();
                    rows.push(row);
                    rhs[i] = op.rhs[i];
                    kinds.push(op.row_kinds[i]);
                }
            }
            let trial_op = DiscreteOperator {
                matrix: crate::solver::CsrMatrix::from_rows(rows),
                rhs,
                row_kinds: kinds,
                warnings: Vec::new(),
                grid: grid.clone(),
            };
            let trial = solve_linear(&trial_op).unwrap().solution;
            // Feasible: u >= psi off the active set, A u - f >= 0 on it.
            for i in (k + 1)..op.matrix.n {
                if trial[i] < psi[i] - 1e-10 {
                    continue 'outer;
                }
            }
            let au = op.matrix.matvec(&trial);
            for i in 0..=k {
                if au[i] - op.rhs[i] < -1e-10 {
                    continue 'outer;
                }
            }
            oracle = Some(trial);
            break;
        }
        let oracle = oracle.expect("some contiguous active set must be feasible");
        for (a, b) in sol.u.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        // Contact nodes form a left interval; u > psi strictly to its right
        // (the Dirichlet node at x = 1 touches psi = 0 trivially).
        let contact: Vec<usize> = sol
            .active_set
            .iter()
            .cloned()
            .filter(|&i| op.row_kinds[i] != RowKind::Dirichlet)
            .collect();
        let max_active = *contact.iter().max().unwrap();
        for i in 0..=max_active {
            assert!(contact.contains(&i));
        }
        for i in (max_active + 1)..grid.len() - 1 {
            assert!(sol.u[i] > psi[i]);
        }
    }

    #[test]
    fn psor_iterates_monotone_from_obstacle() {
        let (op, grid, _, _) = kummer_op(24, |_| 0.0, |_| 0.0);
        let psi: Vec<f64> = (0..grid.len())
            .map(|i| (0.5 - grid.node(i)[0]).max(0.0) * 0.3)
            .collect();
        let mut u = psi.clone();
        let mut prev = u.clone();
        for _ in 0..50 {
            psor_sweep(&op, &psi, 1.5, &mut u);
            for (new, old) in u.iter().zip(&prev) {
                assert!(*new >= old - 1e-13, "iterate decreased: {new} < {old}");
            }
            prev = u.clone();
        }
    }

    #[test]
    fn active_set_grows_when_obstacle_rises() {
        let (op, grid, _, _) = kummer_op(32, |_| 0.0, |_| 0.5);
        let psi1: Vec<f64> = (0..grid.len())
            .map(|i| (0.5 - grid.node(i)[0]).max(0.0) * 0.3)
            .collect();
        let psi2: Vec<f64> = psi1.iter().map(|p| p + 0.05).collect();
        let s1 = solve_obstacle_elliptic(&op, &psi1, 1.5, 1e-12, 50_000, None).unwrap();
        let s2 = solve_obstacle_elliptic(&op, &psi2, 1.5, 1e-12, 50_000, None).unwrap();
        for i in &s1.active_set {
            // Allow tol-boundary slack: a node active for psi1 is either
            // active for psi2 or within the contact tolerance.
            assert!(
                s2.active_set.contains(i) || s2.u[*i] - psi2[*i] <= 1e-7,
                "node {i} left the active set"
            );
        }
    }

    #[test]
    fn comparison_and_uniqueness() {
        let (op1, grid, _, _) = kummer_op(32, |_| 0.0, |_| 0.0);
        let (op2, _, _, _) = kummer_op(32, |_| 0.0, |_| 0.1);
        let psi: Vec<f64> = (0..grid.len())
            .map(|i| (0.5 - grid.node(i)[0]).max(0.0) * 0.3)
            .collect();
        let tol = 1e-10;
        let a = solve_obstacle_elliptic(&op1, &psi, 1.5, tol, 50_000, None).unwrap();
        let b = solve_obstacle_elliptic(&op2, &psi, 1.5, tol, 50_000, None).unwrap();
        let rep = comparison_check(&a, &b, 1e-8);
        assert!(rep.ordered, "violation {:e}", rep.max_violation);

        // Identical data, different initial iterates: unique up to 2 tol.
        let g_ext: Vec<f64> = vec![0.0; grid.len()];
        let a2 = solve_obstacle_elliptic(&op1, &psi, 1.5, tol, 50_000, Some(&g_ext)).unwrap();
        let rep = comparison_check(&a, &a2, 1e-8);
        assert!(rep.max_abs_diff < 2.0 * 1e-8);
    }

    #[test]
    fn incompatible_obstacle_rejected() {
        let (op, grid, _, _) = kummer_op(16, |_| 0.0, |_| 0.0);
        let psi = vec![0.5; grid.len()];
        assert!(matches!(
            solve_obstacle_elliptic(&op, &psi, 1.5, 1e-10, 1000, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn boundary_data_never_read_on_degenerate_nodes() {
        // The Dirichlet evaluator may be poisoned on the degenerate portion:
        // it is never consulted there, and solutions agree bit for bit.
        let domain = SpatialDomain::interval(0.0, 1.0).unwrap();
        let grid = Grid::on_domain(&domain, [32, 0]).unwrap();
        let coeffs = CoefficientField::kummer(1.0, 1.0);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        let clean = assemble_elliptic(&coeffs, &grid, &cls, &|_| 0.0, &|_| 0.25).unwrap();
        let poisoned = assemble_elliptic(&coeffs, &grid, &cls, &|_| 0.0, &|x| {
            if x[0] < 0.5 {
                f64::NAN
            } else {
                0.25
            }
        })
        .unwrap();
        let psi: Vec<f64> = (0..grid.len())
            .map(|i| (0.4 - grid.node(i)[0]).max(0.0))
            .collect();
        let a = solve_obstacle_elliptic(&clean, &psi, 1.5, 1e-12, 50_000, None).unwrap();
        let b = solve_obstacle_elliptic(&poisoned, &psi, 1.5, 1e-12, 50_000, None).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn parabolic_obstacle_matches_unconstrained_and_elliptic_limits() {
        use crate::solver::{assemble_parabolic, solve_parabolic};
        let domain = SpatialDomain::interval(0.0, 1.0).unwrap();
        let grid = Grid::on_domain(&domain, [24, 0]).unwrap();
        let coeffs = CoefficientField::kummer(1.0, 1.0).with_parabolic(true);
        let tolc = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tolc).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| 1.0 - k as f64 / 20.0).collect();
        let plan = assemble_parabolic(
            &coeffs,
            &grid,
            &cls,
            times.clone(),
            |_, _| 0.0,
            |_, _| 0.2,
            |x| 0.2 * (1.0 - x[0]) + 0.2,
        )
        .unwrap();

        // Very negative obstacle reproduces the unconstrained march.
        let free = solve_parabolic(&plan).unwrap();
        let rep = solve_obstacle_parabolic(&plan, &|_, _| -1e6, 1.5, 1e-12, 50_000).unwrap();
        for (fa, fb) in free.frames.iter().zip(&rep.frames) {
            for (a, b) in fa.iter().zip(fb) {
                assert!((a - b).abs() < 1e-8);
            }
        }

        // Time-independent payoff obstacle: u non-decreasing as t decreases.
        let payoff = |x: &Point| (0.5 - x[0]).max(0.0) * 0.3;
        let plan2 = assemble_parabolic(&coeffs, &grid, &cls, times, |_, _| 0.0, |_, _| 0.0, payoff)
            .unwrap();
        let rep2 =
            solve_obstacle_parabolic(&plan2, &move |_, x| payoff(x), 1.5, 1e-12, 50_000).unwrap();
        for w in rep2.frames.windows(2) {
            for (prev, next) in w[0].iter().zip(&w[1]) {
                assert!(*next >= prev - 1e-9);
            }
        }

        // A single huge step reduces to the elliptic obstacle problem.
        let plan3 = assemble_parabolic(
            &coeffs,
            &grid,
            &cls,
            vec![1e8, 0.0],
            |_, _| 0.0,
            |_, _| 0.0,
            payoff,
        )
        .unwrap();
        let rep3 =
            solve_obstacle_parabolic(&plan3, &move |_, x| payoff(x), 1.5, 1e-12, 50_000).unwrap();
        let ell = CoefficientField::kummer(1.0, 1.0);
        let op = assemble_elliptic(&ell, &grid, &cls, &|_| 0.0, &|_| 0.0).unwrap();
        let psi: Vec<f64> = (0..grid.len()).map(|i| payoff(&grid.node(i))).collect();
        let sol = solve_obstacle_elliptic(&op, &psi, 1.5, 1e-12, 50_000, None).unwrap();
        for (a, b) in rep3.frames.last().unwrap().iter().zip(&sol.u) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}
