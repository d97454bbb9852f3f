//! Boundary classification for boundary-degenerate operators, the Fichera
//! function, coefficient-regularity probes, pointwise operator application,
//! and the second-derivative boundary-vanishing diagnostic.
//!
//! A boundary node belongs to the degenerate portion when the diffusion
//! matrix a, extrapolated to the node along the inward normal, vanishes.
//! Dirichlet data is only ever imposed on the complementary, non-degenerate
//! portion.

use crate::coefficients::{CoefficientField, SmoothField};
use crate::error::{Error, Result};
use crate::geometry::{Grid, Point, SpatialDomain};
use std::collections::BTreeMap;

/// Partition of the boundary nodes of a grid.
#[derive(Clone, Debug)]
pub struct BoundaryClassification {
    /// Sorted node ids on the degenerate portion (a -> 0).
    pub degenerate: Vec<usize>,
    /// Sorted node ids on the non-degenerate portion.
    pub nondegenerate: Vec<usize>,
    /// Inward unit normal per boundary node.
    pub inward_normals: BTreeMap<usize, Point>,
    /// Threshold used for the degeneracy decision.
    pub tol_zero: f64,
}

impl BoundaryClassification {
    pub fn is_degenerate(&self, id: usize) -> bool {
        self.degenerate.binary_search(&id).is_ok()
    }

    pub fn is_nondegenerate(&self, id: usize) -> bool {
        self.nondegenerate.binary_search(&id).is_ok()
    }
}

/// Scale-free default threshold: 1e-8 times the largest sampled |a| over the
/// grid, floored at 1.
pub fn default_tol_zero(coeffs: &CoefficientField, grid: &Grid) -> Result<f64> {
    let mut max_norm: f64 = 0.0;
    for id in 0..grid.len() {
        let a = coeffs.a(0.0, &grid.node(id))?;
        max_norm = max_norm.max(a.frobenius_norm());
    }
    Ok(1e-8 * max_norm.max(1.0))
}

/// Classify every boundary node as degenerate or non-degenerate.
///
/// The boundary limit of |a| is taken along the inward normal: samples at
/// distances h, h/2, h/4 are Richardson-extrapolated to distance zero, and
/// the node is degenerate iff the extrapolated norm falls below `tol_zero`.
/// Nodes where the two portions meet land on the degenerate side of the
/// threshold by construction.
pub fn classify_boundary(
    _domain: &SpatialDomain,
    grid: &Grid,
    coeffs: &CoefficientField,
    tol_zero: f64,
) -> Result<BoundaryClassification> {
    let h = grid.min_spacing();
    let mut degenerate = Vec::new();
    let mut nondegenerate = Vec::new();
    let mut inward_normals = BTreeMap::new();
    for id in grid.boundary_node_ids() {
        let x = grid.node(id);
        let n = grid.inward_normal(id).expect("boundary node has a normal");
        inward_normals.insert(id, n);
        let sample = |s: f64| -> Result<f64> {
            let p = [x[0] + s * n[0], x[1] + s * n[1]];
            let a = coeffs.a(0.0, &p).map_err(|e| {
                Error::Classification(format!(
                    "coefficient evaluation failed near boundary node {id} at ({}, {}): {e}",
                    p[0], p[1]
                ))
            })?;
            Ok(a.frobenius_norm())
        };
        let f1 = sample(h)?;
        let f2 = sample(h / 2.0)?;
        let f4 = sample(h / 4.0)?;
        // Eliminate the linear term twice, then the quadratic term.
        let r1 = 2.0 * f2 - f1;
        let r2 = 2.0 * f4 - f2;
        let limit = (4.0 * r2 - r1) / 3.0;
        if limit.abs() < tol_zero {
            degenerate.push(id);
        } else {
            nondegenerate.push(id);
        }
    }
    degenerate.sort_unstable();
    nondegenerate.sort_unstable();
    Ok(BoundaryClassification {
        degenerate,
        nondegenerate,
        inward_normals,
        tol_zero,
    })
}

/// Fichera function at a degenerate boundary node:
/// fb = sum_k (b^k - sum_j da^{kj}/dx_j) n_k with n the inward normal.
pub fn fichera_function(
    coeffs: &CoefficientField,
    classification: &BoundaryClassification,
    grid: &Grid,
    node: usize,
) -> Result<f64> {
    if !classification.is_degenerate(node) {
        return Err(Error::Classification(format!(
            "fichera function is defined on degenerate boundary nodes; node {node} is not one"
        )));
    }
    let x = grid.node(node);
    let n = classification.inward_normals[&node];
    let h_fd = grid.min_spacing() / 4.0;
    let b = coeffs.b(0.0, &x)?;
    let da = coeffs.da(0.0, &x, h_fd)?;
    let mut fb = 0.0;
    for k in 0..coeffs.dim {
        let mut div_k = 0.0;
        for j in 0..coeffs.dim {
            div_k += da[j].get(k, j);
        }
        fb += (b[k] - div_k) * n[k];
    }
    Ok(fb)
}

/// Result of probing |a(x)| / dist(x, degenerate boundary).
#[derive(Clone, Debug)]
pub struct LipschitzReport {
    /// Supremum of the ratio over all samples.
    pub k: f64,
    /// Set when the per-level maxima grow monotonically by more than 2x
    /// across the ladder, indicating |a| is not Lipschitz in the distance.
    pub non_lipschitz: bool,
    /// Maximum ratio per ladder level (level k probes depth * 2^-k).
    pub level_maxima: Vec<f64>,
}

/// Estimate the Lipschitz-in-distance constant of a near the degenerate
/// boundary by sampling a geometric ladder of depths along inward normals.
pub fn estimate_boundary_lipschitz(
    coeffs: &CoefficientField,
    classification: &BoundaryClassification,
    grid: &Grid,
    probe_depth: f64,
) -> Result<LipschitzReport> {
    if classification.degenerate.is_empty() {
        return Err(Error::Classification(
            "lipschitz estimate requires a nonempty degenerate boundary".into(),
        ));
    }
    if probe_depth <= 0.0 {
        return Err(Error::InvalidParams("probe_depth must be positive".into()));
    }
    let mut level_maxima = Vec::with_capacity(11);
    for k in 0..=10 {
        let d = probe_depth * 0.5_f64.powi(k);
        let mut level_max: f64 = 0.0;
        for &id in &classification.degenerate {
            let x = grid.node(id);
            let n = classification.inward_normals[&id];
            let p = [x[0] + d * n[0], x[1] + d * n[1]];
            let a = coeffs.a(0.0, &p)?;
            level_max = level_max.max(a.frobenius_norm() / d);
        }
        level_maxima.push(level_max);
    }
    let k_sup = level_maxima.iter().cloned().fold(0.0, f64::max);
    let monotone_growth = level_maxima.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-12));
    let non_lipschitz =
        monotone_growth && level_maxima[level_maxima.len() - 1] > 2.0 * level_maxima[0];
    Ok(LipschitzReport {
        k: k_sup,
        non_lipschitz,
        level_maxima,
    })
}

/// Pointwise application of A u = -tr(a D^2 u) - <b, Du> + c u, with the
/// additional -u_t term when the coefficient field is parabolic.
pub fn apply_operator(
    coeffs: &CoefficientField,
    u: &SmoothField,
    t: f64,
    x: &Point,
) -> Result<f64> {
    let a = coeffs.a(t, x)?;
    let b = coeffs.b(t, x)?;
    let c = coeffs.c(t, x)?;
    let grad = u.gradient(t, x);
    let hess = u.hessian(t, x);
    let mut value = -a.double_dot(&hess) - (b[0] * grad[0] + b[1] * grad[1]) + c * u.value(t, x);
    if coeffs.parabolic {
        value -= u.dt(t, x)?;
    }
    Ok(value)
}

/// One ladder of theta(dist) * (second difference of u) at a degenerate
/// boundary node for the index pair (i, j).
#[derive(Clone, Debug)]
pub struct VanishingDiagnostic {
    pub node: usize,
    pub i: usize,
    pub j: usize,
    /// theta(s_k) * second difference at distance s_k, coarsest first.
    pub ladder: Vec<f64>,
    /// Monotone decrease of the magnitudes over the last three levels.
    pub decays: bool,
}

/// Boundary-vanishing diagnostic for second derivatives: reports
/// theta(dist) * D^2_{ij} u along geometric inward ladders from each
/// degenerate boundary node.  Tangential pairs are always included; pairs
/// involving the normal direction only when the caller asserts the
/// divergence condition on 1/theta.
pub fn check_second_derivative_vanishing(
    u: &dyn Fn(&Point) -> f64,
    grid: &Grid,
    classification: &BoundaryClassification,
    theta: &dyn Fn(f64) -> f64,
    levels: usize,
    divergence_asserted: bool,
) -> Result<Vec<VanishingDiagnostic>> {
    if levels < 4 {
        return Err(Error::Grid(format!(
            "grid too coarse: {levels} ladder levels, need at least 4"
        )));
    }
    if theta(0.0).abs() > 1e-12 {
        return Err(Error::InvalidParams("theta(0) must be 0".into()));
    }
    let dim = grid.dim;
    // Coarsest ladder level: a quarter of the largest axis extent, so the
    // whole ladder (and its difference stencils) stays inside the domain.
    let extent = (0..dim)
        .map(|a| grid.spacing[a] * (grid.counts[a] - 1) as f64)
        .fold(0.0_f64, f64::max);
    let s0 = 0.25 * extent;
    let mut out = Vec::new();
    for &node in &classification.degenerate {
        let n = classification.inward_normals[&node];
        // Pairs are classified against axis-aligned normals only.
        let normal_axis = if n[0].abs() > 0.999 {
            Some(0)
        } else if n[1].abs() > 0.999 {
            Some(1)
        } else {
            None
        };
        let Some(na) = normal_axis else { continue };
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                let involves_normal = i == na || j == na;
                if !involves_normal || divergence_asserted {
                    pairs.push((i, j));
                }
            }
        }
        let x0 = grid.node(node);
        for (i, j) in pairs {
            let mut ladder = Vec::with_capacity(levels);
            for k in 0..levels {
                let s = s0 * 0.5_f64.powi(k as i32);
                let th = theta(s);
                if th <= 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "theta must be positive on (0, inf); theta({s}) = {th}"
                    )));
                }
                let base = [x0[0] + s * n[0], x0[1] + s * n[1]];
                let d = s / 2.0;
                let second = if i == j {
                    let mut p = base;
                    let mut m = base;
                    p[i] += d;
                    m[i] -= d;
                    (u(&p) - 2.0 * u(&base) + u(&m)) / (d * d)
                } else {
                    let mut pp = base;
                    let mut pm = base;
                    let mut mp = base;
                    let mut mm = base;
                    pp[i] += d;
                    pp[j] += d;
                    pm[i] += d;
                    pm[j] -= d;
                    mp[i] -= d;
                    mp[j] += d;
                    mm[i] -= d;
                    mm[j] -= d;
                    (u(&pp) - u(&pm) - u(&mp) + u(&mm)) / (4.0 * d * d)
                };
                ladder.push(th * second);
            }
            let l = ladder.len();
            let decays = ladder[l - 3].abs() >= ladder[l - 2].abs()
                && ladder[l - 2].abs() >= ladder[l - 1].abs();
            out.push(VanishingDiagnostic {
                node,
                i,
                j,
                ladder,
                decays,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::SymMat;
    use crate::special::{kummer_m, tricomi_u, HypergeometricParams};

    fn kummer_setup(
        a_param: f64,
        b_param: f64,
        ell: f64,
        cells: usize,
    ) -> (SpatialDomain, Grid, CoefficientField) {
        let domain = SpatialDomain::interval(0.0, ell).unwrap();
        let grid = Grid::on_domain(&domain, [cells, 0]).unwrap();
        let coeffs = CoefficientField::kummer(a_param, b_param);
        (domain, grid, coeffs)
    }

    #[test]
    fn kummer_classification() {
        let (domain, grid, coeffs) = kummer_setup(1.0, 1.0, 1.0, 16);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        assert_eq!(cls.degenerate, vec![0]);
        assert_eq!(cls.nondegenerate, vec![16]);
    }

    #[test]
    fn hypergeometric_classification_both_ends_degenerate() {
        let domain = SpatialDomain::interval(0.0, 1.0).unwrap();
        let grid = Grid::on_domain(&domain, [32, 0]).unwrap();
        let coeffs = CoefficientField::hypergeometric(1.0, 1.0, 1.0);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        assert_eq!(cls.degenerate, vec![0, 32]);
        assert!(cls.nondegenerate.is_empty());
    }

    #[test]
    fn uniformly_elliptic_square_has_no_degenerate_nodes() {
        let domain = SpatialDomain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        let grid = Grid::on_domain(&domain, [8, 8]).unwrap();
        let coeffs = CoefficientField::constant(2, SymMat::identity(2), [0.0, 0.0], 0.0);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        assert!(cls.degenerate.is_empty());
        assert_eq!(cls.nondegenerate.len(), grid.boundary_node_ids().len());
    }

    #[test]
    fn classification_idempotent_and_partition() {
        let (domain, grid, coeffs) = kummer_setup(0.5, 2.0, 1.0, 20);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let c1 = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        let c2 = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        assert_eq!(c1.degenerate, c2.degenerate);
        assert_eq!(c1.nondegenerate, c2.nondegenerate);
        let all: Vec<usize> = grid.boundary_node_ids();
        let mut merged = c1.degenerate.clone();
        merged.extend(&c1.nondegenerate);
        merged.sort_unstable();
        assert_eq!(merged, all);
    }

    #[test]
    fn fichera_kummer_is_b_minus_one() {
        for b_param in [0.5, 1.0, 2.0] {
            let (domain, grid, coeffs) = kummer_setup(1.0, b_param, 1.0, 16);
            let tol = default_tol_zero(&coeffs, &grid).unwrap();
            let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
            let fb = fichera_function(&coeffs, &cls, &grid, 0).unwrap();
            assert!((fb - (b_param - 1.0)).abs() < 1e-12, "fb = {fb}");
        }
    }

    #[test]
    fn fichera_zero_field() {
        let domain = SpatialDomain::interval(0.0, 1.0).unwrap();
        let grid = Grid::on_domain(&domain, [8, 0]).unwrap();
        let coeffs = CoefficientField::constant(1, SymMat::zero(1), [0.0, 0.0], 0.0);
        let cls = classify_boundary(&domain, &grid, &coeffs, 1e-8).unwrap();
        let fb = fichera_function(&coeffs, &cls, &grid, 0).unwrap();
        assert_eq!(fb, 0.0);
    }

    #[test]
    fn fichera_2d_vertical_degeneracy() {
        // a = y I, b = (0, 2) on {y = 0} with inward normal (0, 1):
        // fb = 2 - da^{22}/dy = 1.
        let domain = SpatialDomain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        let grid = Grid::on_domain(&domain, [4, 4]).unwrap();
        let coeffs =
            CoefficientField::linear_in_distance(2, SymMat::identity(2), 1, [0.0, 2.0], 0.0);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        let id = (0..grid.len())
            .find(|&i| grid.node(i) == [0.5, 0.0])
            .unwrap();
        assert!(cls.is_degenerate(id));
        let fb = fichera_function(&coeffs, &cls, &grid, id).unwrap();
        assert!((fb - 1.0).abs() < 1e-12, "fb = {fb}");
    }

    #[test]
    fn fichera_stable_under_second_order_perturbation() {
        // Adding x^2-vanishing diffusion changes the Fichera value only at
        // the finite-difference error level.
        let (domain, grid, base) = kummer_setup(1.0, 2.0, 1.0, 32);
        let perturbed = CoefficientField::new(
            1,
            |_, x| SymMat::scalar_1d(x[0] + 3.0 * x[0] * x[0]),
            |_, x| [2.0 - x[0], 0.0],
            |_, _| 1.0,
        );
        let tol = default_tol_zero(&base, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &base, tol).unwrap();
        let f_base = fichera_function(&base, &cls, &grid, 0).unwrap();
        let f_pert = fichera_function(&perturbed, &cls, &grid, 0).unwrap();
        assert!((f_base - f_pert).abs() < 1e-6, "{f_base} vs {f_pert}");
    }

    #[test]
    fn lipschitz_linear_diffusion() {
        let (domain, grid, coeffs) = kummer_setup(0.0, 1.0, 1.0, 16);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        let rep = estimate_boundary_lipschitz(&coeffs, &cls, &grid, 0.1).unwrap();
        assert!((rep.k - 1.0).abs() < 0.05, "K = {}", rep.k);
        assert!(!rep.non_lipschitz);
    }

    #[test]
    fn lipschitz_quadratic_diffusion() {
        let domain = SpatialDomain::interval(0.0, 1.0).unwrap();
        let grid = Grid::on_domain(&domain, [16, 0]).unwrap();
        let coeffs = CoefficientField::new(
            1,
            |_, x| SymMat::scalar_1d(x[0] * x[0]),
            |_, _| [1.0, 0.0],
            |_, _| 0.0,
        );
        let cls = classify_boundary(&domain, &grid, &coeffs, 1e-8).unwrap();
        let rep = estimate_boundary_lipschitz(&coeffs, &cls, &grid, 0.1).unwrap();
        // sup of x over the ladder is at the largest sample depth.
        assert!((rep.k - 0.1).abs() < 1e-12, "K = {}", rep.k);
        assert!(!rep.non_lipschitz);
    }

    #[test]
    fn lipschitz_sqrt_diffusion_flagged() {
        // sqrt(x) vanishes at 0 but the ratio |a|/dist doubles every 4x
        // refinement; the ladder must flag it.  The node set is supplied
        // directly since polynomial extrapolation has no business detecting
        // a sqrt-type limit.
        let domain = SpatialDomain::interval(0.0, 1.0).unwrap();
        let grid = Grid::on_domain(&domain, [16, 0]).unwrap();
        let coeffs = CoefficientField::new(
            1,
            |_, x| SymMat::scalar_1d(x[0].abs().sqrt()),
            |_, _| [1.0, 0.0],
            |_, _| 0.0,
        );
        let mut inward_normals = BTreeMap::new();
        inward_normals.insert(0, [1.0, 0.0]);
        inward_normals.insert(16, [-1.0, 0.0]);
        let cls = BoundaryClassification {
            degenerate: vec![0],
            nondegenerate: vec![16],
            inward_normals,
            tol_zero: 1e-8,
        };
        let rep = estimate_boundary_lipschitz(&coeffs, &cls, &grid, 0.1).unwrap();
        assert!(rep.non_lipschitz);
    }

    #[test]
    fn lipschitz_matches_matrix_norm_for_distance_scaled_field() {
        // a(x) = dist * A0: the estimate recovers |A0| within 5 percent.
        let a0 = SymMat::from_entries_2d(2.0, 0.5, 1.0);
        let domain = SpatialDomain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap();
        let grid = Grid::on_domain(&domain, [8, 8]).unwrap();
        let coeffs = CoefficientField::linear_in_distance(2, a0, 1, [0.0, 1.0], 0.0);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        // Restrict to the straight part of the bottom edge (corners carry
        // diagonal normals).
        let bottom: Vec<usize> = cls
            .degenerate
            .iter()
            .cloned()
            .filter(|&id| grid.node(id)[1] == 0.0 && grid.inward_normal(id) == Some([0.0, 1.0]))
            .collect();
        let sub = BoundaryClassification {
            degenerate: bottom,
            nondegenerate: cls.nondegenerate.clone(),
            inward_normals: cls.inward_normals.clone(),
            tol_zero: cls.tol_zero,
        };
        let rep = estimate_boundary_lipschitz(&coeffs, &sub, &grid, 0.05).unwrap();
        let target = a0.frobenius_norm();
        assert!(
            (rep.k - target).abs() < 0.05 * target,
            "K = {} vs {target}",
            rep.k
        );
    }

    #[test]
    fn apply_operator_examples() {
        // Constants are annihilated when c = 0.
        let coeffs = CoefficientField::kummer(0.0, 1.0);
        let one = SmoothField::constant(1, 1.0);
        assert_eq!(
            apply_operator(&coeffs, &one, 0.0, &[0.3, 0.0]).unwrap(),
            0.0
        );

        // u(x) = x_d with b = e_d, c = 0 gives Au = -1.
        let cf = CoefficientField::new(
            2,
            |_, x| SymMat::from_entries_2d(x[1], 0.2 * x[1], 2.0 * x[1]),
            |_, _| [0.0, 1.0],
            |_, _| 0.0,
        );
        let u = SmoothField::linear(2, [0.0, 1.0], 0.0);
        let v = apply_operator(&cf, &u, 0.0, &[0.4, 0.2]).unwrap();
        assert!((v + 1.0).abs() < 1e-15);

        // M(1,1,.) solves the model equation with a_param = b_param = 1.
        let coeffs = CoefficientField::kummer(1.0, 1.0);
        let params = HypergeometricParams::new(1.0, 1.0);
        let m = SmoothField::new(
            1,
            move |_, x| kummer_m(&params, x[0]).unwrap(),
            move |_, x| {
                [
                    crate::special::kummer_m_derivative(&params, x[0]).unwrap(),
                    0.0,
                ]
            },
            move |_, x| {
                SymMat::scalar_1d(
                    crate::special::kummer_m_second_derivative(&params, x[0]).unwrap(),
                )
            },
        );
        for &x in &[0.25, 0.5] {
            let v = apply_operator(&coeffs, &m, 0.0, &[x, 0.0]).unwrap();
            assert!(v.abs() < 1e-8, "Au = {v:e} at x = {x}");
        }
    }

    #[test]
    fn apply_operator_parabolic_includes_time_derivative() {
        // L u = -u_t + A u: for u = t x with drift b(x) = 2 - x and c = 1,
        // L u = -x - (2 - x) t + t x at (t, x).
        let coeffs = CoefficientField::kummer(1.0, 2.0).with_parabolic(true);
        let u = SmoothField::new(1, |t, x| t * x[0], |t, _| [t, 0.0], |_, _| SymMat::zero(1))
            .with_dt(|_, x| x[0]);
        let (t, x) = (0.7, 0.3);
        let got = apply_operator(&coeffs, &u, t, &[x, 0.0]).unwrap();
        let want = -x - (2.0 - x) * t + t * x;
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        // A field without a time derivative is rejected in parabolic mode.
        let bad = SmoothField::linear(1, [1.0, 0.0], 0.0);
        let stripped = SmoothField::new(
            1,
            {
                let b = bad.clone();
                move |t, x| b.value(t, x)
            },
            {
                let b = bad.clone();
                move |t, x| b.gradient(t, x)
            },
            {
                let b = bad;
                move |t, x| b.hessian(t, x)
            },
        );
        assert!(apply_operator(&coeffs, &stripped, 0.0, &[0.5, 0.0]).is_err());
    }

    #[test]
    fn apply_operator_is_linear() {
        let coeffs = CoefficientField::kummer(1.0, 2.0);
        let params = HypergeometricParams::new(1.0, 2.0);
        let f1 = SmoothField::new(
            1,
            move |_, x| kummer_m(&params, x[0]).unwrap(),
            move |_, x| {
                [
                    crate::special::kummer_m_derivative(&params, x[0]).unwrap(),
                    0.0,
                ]
            },
            move |_, x| {
                SymMat::scalar_1d(
                    crate::special::kummer_m_second_derivative(&params, x[0]).unwrap(),
                )
            },
        );
        let f2 = SmoothField::linear(1, [2.0, 0.0], -0.7);
        let sum = SmoothField::new(
            1,
            {
                let (f1, f2) = (f1.clone(), f2.clone());
                move |t, x| f1.value(t, x) + f2.value(t, x)
            },
            {
                let (f1, f2) = (f1.clone(), f2.clone());
                move |t, x| {
                    let (g1, g2) = (f1.gradient(t, x), f2.gradient(t, x));
                    [g1[0] + g2[0], g1[1] + g2[1]]
                }
            },
            {
                let (f1, f2) = (f1.clone(), f2.clone());
                move |t, x| f1.hessian(t, x).add(&f2.hessian(t, x))
            },
        );
        for &x in &[0.1, 0.35, 0.8] {
            let p = [x, 0.0];
            let lhs = apply_operator(&coeffs, &f1, 0.0, &p).unwrap()
                + apply_operator(&coeffs, &f2, 0.0, &p).unwrap();
            let rhs = apply_operator(&coeffs, &sum, 0.0, &p).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn second_derivative_diagnostic_distinguishes_m_and_u() {
        let (domain, grid, coeffs) = kummer_setup(1.0, 2.0, 1.0, 64);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        let theta = |s: f64| s;

        // u = M(1,2,.) is smooth up to 0, so x u''(x) -> 0.
        let pm = HypergeometricParams::new(1.0, 2.0);
        let um = move |x: &Point| kummer_m(&pm, x[0].max(0.0)).unwrap();
        let diags = check_second_derivative_vanishing(&um, &grid, &cls, &theta, 8, true).unwrap();
        let at0: Vec<_> = diags.iter().filter(|d| d.node == 0).collect();
        assert!(!at0.is_empty());
        assert!(at0.iter().all(|d| d.decays), "{:?}", at0);

        // u = U(0.5, 0.5, .) has x u'' growing like x^{-1/2}.
        let pu = HypergeometricParams::new(0.5, 0.5);
        let uu = move |x: &Point| tricomi_u(&pu, x[0].max(1e-300)).unwrap();
        let diags = check_second_derivative_vanishing(&uu, &grid, &cls, &theta, 8, true).unwrap();
        let at0: Vec<_> = diags.iter().filter(|d| d.node == 0).collect();
        assert!(at0.iter().any(|d| !d.decays), "{:?}", at0);
    }

    #[test]
    fn second_derivative_diagnostic_linear_field_zero() {
        let (domain, grid, coeffs) = kummer_setup(1.0, 2.0, 1.0, 64);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        let u = |x: &Point| 3.0 * x[0] - 1.0;
        let diags = check_second_derivative_vanishing(&u, &grid, &cls, &|s| s, 6, true).unwrap();
        for d in diags {
            for v in d.ladder {
                assert!(v.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn second_derivative_diagnostic_needs_four_levels() {
        let (domain, grid, coeffs) = kummer_setup(1.0, 2.0, 1.0, 64);
        let tol = default_tol_zero(&coeffs, &grid).unwrap();
        let cls = classify_boundary(&domain, &grid, &coeffs, tol).unwrap();
        let u = |x: &Point| x[0];
        assert!(matches!(
            check_second_derivative_vanishing(&u, &grid, &cls, &|s| s, 3, true),
            Err(Error::Grid(_))
        ));
    }
}
