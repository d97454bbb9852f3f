//! Coefficient fields (a, b, c) of the operator
//! A u = -tr(a D^2 u) - <b, Du> + c u and its parabolic variant
//! L u = -u_t - tr(a D^2 u) - <b, Du> + c u, plus smooth test fields
//! carrying value/gradient/Hessian evaluators.

use crate::error::{Error, Result};
use crate::geometry::Point;
use std::sync::Arc;

/// Symmetric matrix in dimension 1 or 2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    pub dim: usize,
    m: [[f64; 2]; 2],
}

impl SymMat {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            m: [[0.0; 2]; 2],
        }
    }

    pub fn scalar_1d(a: f64) -> Self {
        Self {
            dim: 1,
            m: [[a, 0.0], [0.0, 0.0]],
        }
    }

    pub fn from_entries_2d(a11: f64, a12: f64, a22: f64) -> Self {
        Self {
            dim: 2,
            m: [[a11, a12], [a12, a22]],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zero(dim);
        for i in 0..dim {
            s.m[i][i] = 1.0;
        }
        s
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.m[i][j] = v;
        self.m[j][i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * self.m[i][j];
            }
        }
        s.sqrt()
    }

    /// Eigenvalues, ascending.  Closed form for the 2x2 symmetric case.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 1 {
            vec![self.m[0][0]]
        } else {
            let (a, b, c) = (self.m[0][0], self.m[0][1], self.m[1][1]);
            let mean = 0.5 * (a + c);
            let disc = (0.5 * (a - c)).hypot(b);
            vec![mean - disc, mean + disc]
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn scaled(&self, f: f64) -> Self {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] *= f;
            }
        }
        out
    }

    pub fn add(&self, other: &SymMat) -> Self {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] += other.m[i][j];
            }
        }
        out
    }

    /// Frobenius inner product tr(A B) for symmetric A, B.
    pub fn double_dot(&self, other: &SymMat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * other.m[j][i];
            }
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.m[i][j].is_finite()))
    }
}

type AEval = Arc<dyn Fn(f64, &Point) -> SymMat + Send + Sync>;
type BEval = Arc<dyn Fn(f64, &Point) -> Point + Send + Sync>;
type CEval = Arc<dyn Fn(f64, &Point) -> f64 + Send + Sync>;
type DaEval = Arc<dyn Fn(f64, &Point) -> [SymMat; 2] + Send + Sync>;

/// Evaluators for the operator coefficients.  Elliptic fields ignore the
/// time argument.
#[derive(Clone)]
pub struct CoefficientField {
    pub dim: usize,
    pub parabolic: bool,
    /// Asserted by the caller; when set, c < 0 evaluations are rejected.
    pub c_nonnegative_declared: bool,
    pub sym_tol: f64,
    a_eval: AEval,
    b_eval: BEval,
    c_eval: CEval,
    da_eval: Option<DaEval>,
}

impl CoefficientField {
    pub fn new(
        dim: usize,
        a: impl Fn(f64, &Point) -> SymMat + Send + Sync + 'static,
        b: impl Fn(f64, &Point) -> Point + Send + Sync + 'static,
        c: impl Fn(f64, &Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            parabolic: false,
            c_nonnegative_declared: false,
            sym_tol: 1e-10,
            a_eval: Arc::new(a),
            b_eval: Arc::new(b),
            c_eval: Arc::new(c),
            da_eval: None,
        }
    }

    pub fn with_da(
        mut self,
        da: impl Fn(f64, &Point) -> [SymMat; 2] + Send + Sync + 'static,
    ) -> Self {
        self.da_eval = Some(Arc::new(da));
        self
    }

    pub fn with_parabolic(mut self, parabolic: bool) -> Self {
        self.parabolic = parabolic;
        self
    }

    pub fn declare_c_nonnegative(mut self) -> Self {
        self.c_nonnegative_declared = true;
        self
    }

    pub fn has_analytic_da(&self) -> bool {
        self.da_eval.is_some()
    }

    pub fn a(&self, t: f64, x: &Point) -> Result<SymMat> {
        let a = (self.a_eval)(t, x);
        if !a.is_finite() {
            return Err(Error::CoefficientEval {
                point: x[..self.dim].to_vec(),
                reason: "a(x) is not finite".into(),
            });
        }
        if a.min_eigenvalue() < -self.sym_tol {
            return Err(Error::CoefficientEval {
                point: x[..self.dim].to_vec(),
                reason: format!("a(x) has eigenvalue {} below -sym_tol", a.min_eigenvalue()),
            });
        }
        Ok(a)
    }

    pub fn b(&self, t: f64, x: &Point) -> Result<Point> {
        let b = (self.b_eval)(t, x);
        if !b[0].is_finite() || !b[1].is_finite() {
            return Err(Error::CoefficientEval {
                point: x[..self.dim].to_vec(),
                reason: "b(x) is not finite".into(),
            });
        }
        Ok(b)
    }

    pub fn c(&self, t: f64, x: &Point) -> Result<f64> {
        let c = (self.c_eval)(t, x);
        if !c.is_finite() {
            return Err(Error::CoefficientEval {
                point: x[..self.dim].to_vec(),
                reason: "c(x) is not finite".into(),
            });
        }
        if self.c_nonnegative_declared && c < -self.sym_tol {
            return Err(Error::CoefficientEval {
                point: x[..self.dim].to_vec(),
                reason: format!("c(x) = {c} violates the declared nonnegativity"),
            });
        }
        Ok(c)
    }

    /// Partials da/dx_k, analytic when supplied, else central differences
    /// with step h_fd.  The difference stencil evaluates the raw closure:
    /// it may step just outside the domain, where the formula extends but
    /// the nonnegativity check does not apply.
    pub fn da(&self, t: f64, x: &Point, h_fd: f64) -> Result<[SymMat; 2]> {
        if let Some(da) = &self.da_eval {
            return Ok(da(t, x));
        }
        let mut out = [SymMat::zero(self.dim), SymMat::zero(self.dim)];
        for (k, slot) in out.iter_mut().enumerate().take(self.dim) {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h_fd;
            xm[k] -= h_fd;
            let ap = (self.a_eval)(t, &xp);
            let am = (self.a_eval)(t, &xm);
            if !ap.is_finite() || !am.is_finite() {
                return Err(Error::CoefficientEval {
                    point: x[..self.dim].to_vec(),
                    reason: "finite-difference stencil for da left the evaluable region".into(),
                });
            }
            *slot = ap.add(&am.scaled(-1.0)).scaled(1.0 / (2.0 * h_fd));
        }
        Ok(out)
    }

    // ---- named built-in fields -------------------------------------------

    /// One-dimensional model field: diffusion x, drift b_param - x,
    /// zero-order a_param (both parameters nonnegative).
    pub fn kummer(a_param: f64, b_param: f64) -> Self {
        Self::new(
            1,
            |_, x| SymMat::scalar_1d(x[0]),
            move |_, x| [b_param - x[0], 0.0],
            move |_, _| a_param,
        )
        .with_da(|_, _| [SymMat::scalar_1d(1.0), SymMat::zero(1)])
    }

    /// One-dimensional field on (0,1): diffusion x(1-x),
    /// drift c_param - (a_param + b_param + 1) x, zero-order a_param * b_param.
    pub fn hypergeometric(a_param: f64, b_param: f64, c_param: f64) -> Self {
        Self::new(
            1,
            |_, x| SymMat::scalar_1d(x[0] * (1.0 - x[0])),
            move |_, x| [c_param - (a_param + b_param + 1.0) * x[0], 0.0],
            move |_, _| a_param * b_param,
        )
        .with_da(|_, x| [SymMat::scalar_1d(1.0 - 2.0 * x[0]), SymMat::zero(1)])
    }

    /// Constant coefficients.
    pub fn constant(dim: usize, a: SymMat, b: Point, c: f64) -> Self {
        Self::new(dim, move |_, _| a, move |_, _| b, move |_, _| c)
            .with_da(move |_, _| [SymMat::zero(dim), SymMat::zero(dim)])
    }

    /// a(x) = dist(x, {x_axis = 0}) * a0 with constant drift and zero-order
    /// term; the degenerate face is the hyperplane where the chosen axis
    /// coordinate vanishes.
    pub fn linear_in_distance(dim: usize, a0: SymMat, axis: usize, b: Point, c: f64) -> Self {
        Self::new(
            dim,
            move |_, x| a0.scaled(x[axis].abs()),
            move |_, _| b,
            move |_, _| c,
        )
        .with_da(move |_, x| {
            let mut out = [SymMat::zero(dim), SymMat::zero(dim)];
            out[axis] = a0.scaled(x[axis].signum());
            out
        })
    }

    /// Stochastic-volatility style field in (x, v) with the variance axis
    /// degenerate at v = 0: a = (v/2) [[1, rho sigma], [rho sigma, sigma^2]],
    /// b = (r - v/2, kappa (theta - v)), c = r.
    pub fn heston_like(kappa: f64, theta: f64, sigma: f64, rho: f64, r: f64) -> Self {
        let a0 = SymMat::from_entries_2d(0.5, 0.5 * rho * sigma, 0.5 * sigma * sigma);
        Self::new(
            2,
            move |_, x| a0.scaled(x[1].max(0.0)),
            move |_, x| [r - 0.5 * x[1], kappa * (theta - x[1])],
            move |_, _| r,
        )
        .with_da(move |_, _| [SymMat::zero(2), a0])
    }
}

type ScalarEval = Arc<dyn Fn(f64, &Point) -> f64 + Send + Sync>;
type GradEval = Arc<dyn Fn(f64, &Point) -> Point + Send + Sync>;
type HessEval = Arc<dyn Fn(f64, &Point) -> SymMat + Send + Sync>;

/// A scalar field with exact derivative evaluators, used as the test
/// function u in operator application and certification.
#[derive(Clone)]
pub struct SmoothField {
    pub dim: usize,
    value: ScalarEval,
    gradient: GradEval,
    hessian: HessEval,
    dt: Option<ScalarEval>,
}

impl SmoothField {
    pub fn new(
        dim: usize,
        value: impl Fn(f64, &Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64, &Point) -> Point + Send + Sync + 'static,
        hessian: impl Fn(f64, &Point) -> SymMat + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            dt: None,
        }
    }

    pub fn with_dt(mut self, dt: impl Fn(f64, &Point) -> f64 + Send + Sync + 'static) -> Self {
        self.dt = Some(Arc::new(dt));
        self
    }

    pub fn value(&self, t: f64, x: &Point) -> f64 {
        (self.value)(t, x)
    }

    pub fn gradient(&self, t: f64, x: &Point) -> Point {
        (self.gradient)(t, x)
    }

    pub fn hessian(&self, t: f64, x: &Point) -> SymMat {
        (self.hessian)(t, x)
    }

    pub fn dt(&self, t: f64, x: &Point) -> Result<f64> {
        match &self.dt {
            Some(f) => Ok(f(t, x)),
            None => Err(Error::InvalidParams(
                "field has no time-derivative evaluator".into(),
            )),
        }
    }

    pub fn has_dt(&self) -> bool {
        self.dt.is_some()
    }

    /// Constant field.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(
            dim,
            move |_, _| c,
            |_, _| [0.0, 0.0],
            move |_, _| SymMat::zero(dim),
        )
        .with_dt(|_, _| 0.0)
    }

    /// Linear field u(x) = <g, x> + c0.
    pub fn linear(dim: usize, g: Point, c0: f64) -> Self {
        Self::new(
            dim,
            move |_, x| g[0] * x[0] + g[1] * x[1] + c0,
            move |_, _| g,
            move |_, _| SymMat::zero(dim),
        )
        .with_dt(|_, _| 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmat_eigenvalues_2d() {
        let m = SymMat::from_entries_2d(2.0, 1.0, 2.0);
        let ev = m.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn kummer_field_values() {
        let f = CoefficientField::kummer(1.0, 2.0);
        assert_eq!(f.a(0.0, &[0.0, 0.0]).unwrap().get(0, 0), 0.0);
        assert_eq!(f.a(0.0, &[0.3, 0.0]).unwrap().get(0, 0), 0.3);
        assert_eq!(f.b(0.0, &[0.3, 0.0]).unwrap()[0], 1.7);
        assert_eq!(f.c(0.0, &[0.3, 0.0]).unwrap(), 1.0);
        let da = f.da(0.0, &[0.3, 0.0], 1e-4).unwrap();
        assert_eq!(da[0].get(0, 0), 1.0);
    }

    #[test]
    fn finite_difference_da_matches_analytic() {
        let analytic = CoefficientField::hypergeometric(1.0, 1.0, 1.0);
        let numeric = CoefficientField::new(
            1,
            |_, x| SymMat::scalar_1d(x[0] * (1.0 - x[0])),
            |_, x| [1.0 - 3.0 * x[0], 0.0],
            |_, _| 1.0,
        );
        for &x in &[0.2, 0.5, 0.9] {
            let p = [x, 0.0];
            let da_a = analytic.da(0.0, &p, 1e-5).unwrap()[0].get(0, 0);
            let da_n = numeric.da(0.0, &p, 1e-5).unwrap()[0].get(0, 0);
            assert!((da_a - da_n).abs() < 1e-9);
        }
    }

    #[test]
    fn negative_definite_a_rejected() {
        let f = CoefficientField::new(
            1,
            |_, _| SymMat::scalar_1d(-1.0),
            |_, _| [0.0, 0.0],
            |_, _| 0.0,
        );
        assert!(f.a(0.0, &[0.5, 0.0]).is_err());
    }

    #[test]
    fn declared_nonnegative_c_enforced() {
        let f = CoefficientField::new(
            1,
            |_, _| SymMat::scalar_1d(1.0),
            |_, _| [0.0, 0.0],
            |_, x| -x[0],
        )
        .declare_c_nonnegative();
        assert!(f.c(0.0, &[0.5, 0.0]).is_err());
        assert!(f.c(0.0, &[0.0, 0.0]).is_ok());
    }

    #[test]
    fn heston_like_degenerates_at_v_zero() {
        let f = CoefficientField::heston_like(2.0, 0.04, 0.3, -0.5, 0.05);
        assert_eq!(f.a(0.0, &[1.0, 0.0]).unwrap().frobenius_norm(), 0.0);
        assert!(f.a(0.0, &[1.0, 0.2]).unwrap().min_eigenvalue() > 0.0);
    }
}
