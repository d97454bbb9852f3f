//! Coordinate changes that simplify the operator near the degenerate
//! boundary: the shear that straightens a graph boundary, and the
//! tangential-drift killing map y = x + psi(|x|/delta) xi(x') x_d with
//! xi^i = -b^i(x',0)/b^d(x',0), which leaves b^d and the boundary fixed and
//! removes the tangential drift there.  Coefficients transform by the chain
//! rule: a~^{kl} = a^{ij} dy_k/dx_i dy_l/dx_j,
//! b~^k = b^i dy_k/dx_i + a^{ij} d2y_k/dx_i dx_j (+ dy_k/dt when the map is
//! time-coupled), c~ = c o Phi^{-1}.

use crate::coefficients::{CoefficientField, SmoothField, SymMat};
use crate::error::{Error, Result};
use crate::geometry::Point;
use std::sync::Arc;

/// Small dense 2x2 (or 1x1) matrix for jacobians.
#[derive(Clone, Copy, Debug)]
pub struct Mat2 {
    pub dim: usize,
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub fn identity(dim: usize) -> Self {
        let mut m = [[0.0; 2]; 2];
        for i in 0..dim {
            m[i][i] = 1.0;
        }
        Mat2 { dim, m }
    }

    pub fn det(&self) -> f64 {
        if self.dim == 1 {
            self.m[0][0]
        } else {
            self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
        }
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let d = self.det();
        if d.abs() < 1e-14 {
            return Err(Error::Transform(format!("jacobian singular (det = {d:e})")));
        }
        if self.dim == 1 {
            return Ok(Mat2 {
                dim: 1,
                m: [[1.0 / d, 0.0], [0.0, 0.0]],
            });
        }
        Ok(Mat2 {
            dim: 2,
            m: [
                [self.m[1][1] / d, -self.m[0][1] / d],
                [-self.m[1][0] / d, self.m[0][0] / d],
            ],
        })
    }

    pub fn matmul(&self, other: &Mat2) -> Mat2 {
        let mut out = Mat2 {
            dim: self.dim,
            m: [[0.0; 2]; 2],
        };
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    out.m[i][j] += self.m[i][k] * other.m[k][j];
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &Point) -> Point {
        let mut out = [0.0, 0.0];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i] += self.m[i][j] * v[j];
            }
        }
        out
    }
}

type MapEval = Arc<dyn Fn(f64, &Point) -> Point + Send + Sync>;
type JacEval = Arc<dyn Fn(f64, &Point) -> Mat2 + Send + Sync>;
type HessEval = Arc<dyn Fn(f64, &Point) -> [SymMat; 2] + Send + Sync>;

/// A diffeomorphism of the (straightened) frame, with optional analytic
/// jacobian/hessian evaluators.  Missing pieces fall back on
/// Richardson-extrapolated finite differences of the forward map; a missing
/// inverse falls back on Newton iteration.
#[derive(Clone)]
pub struct Diffeomorphism {
    pub dim: usize,
    pub time_coupled: bool,
    /// Radius beyond which the map is the identity, when known.
    pub untouched_beyond: Option<f64>,
    forward: MapEval,
    inverse: Option<MapEval>,
    jacobian: Option<JacEval>,
    hessian_rows: Option<HessEval>,
    dy_dt: Option<MapEval>,
    pub fd_step: f64,
}

impl Diffeomorphism {
    pub fn new(dim: usize, forward: impl Fn(f64, &Point) -> Point + Send + Sync + 'static) -> Self {
        Self {
            dim,
            time_coupled: false,
            untouched_beyond: None,
            forward: Arc::new(forward),
            inverse: None,
            jacobian: None,
            hessian_rows: None,
            dy_dt: None,
            fd_step: 1e-3,
        }
    }

    pub fn with_inverse(
        mut self,
        inv: impl Fn(f64, &Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        self.inverse = Some(Arc::new(inv));
        self
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(f64, &Point) -> Mat2 + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_hessian_rows(
        mut self,
        hess: impl Fn(f64, &Point) -> [SymMat; 2] + Send + Sync + 'static,
    ) -> Self {
        self.hessian_rows = Some(Arc::new(hess));
        self
    }

    pub fn with_dy_dt(mut self, f: impl Fn(f64, &Point) -> Point + Send + Sync + 'static) -> Self {
        self.dy_dt = Some(Arc::new(f));
        self.time_coupled = true;
        self
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, |_, x| *x)
            .with_inverse(|_, y| *y)
            .with_jacobian(move |_, _| Mat2::identity(dim))
            .with_hessian_rows(move |_, _| [SymMat::zero(dim), SymMat::zero(dim)])
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.jacobian.is_some() && self.hessian_rows.is_some()
    }

    pub fn forward(&self, t: f64, x: &Point) -> Point {
        (self.forward)(t, x)
    }

    /// Inverse map: analytic when supplied, Newton iteration otherwise.
    pub fn inverse(&self, t: f64, y: &Point) -> Result<Point> {
        if let Some(inv) = &self.inverse {
            return Ok(inv(t, y));
        }
        let mut x = *y;
        for _ in 0..60 {
            let fx = self.forward(t, &x);
            let r = [fx[0] - y[0], fx[1] - y[1]];
            let res = (r[0] * r[0] + r[1] * r[1]).sqrt();
            if res < 1e-13 {
                return Ok(x);
            }
            let j = self.jacobian_at(t, &x);
            let jinv = j.inverse()?;
            let step = jinv.apply(&r);
            x[0] -= step[0];
            x[1] -= step[1];
        }
        Err(Error::Transform(format!(
            "Newton inversion did not converge at ({}, {})",
            y[0], y[1]
        )))
    }

    /// Jacobian dy/dx: analytic closure or Richardson-extrapolated central
    /// differences of the forward map.
    pub fn jacobian_at(&self, t: f64, x: &Point) -> Mat2 {
        if let Some(jac) = &self.jacobian {
            return jac(t, x);
        }
        self.jacobian_fd(t, x)
    }

    pub fn jacobian_fd(&self, t: f64, x: &Point) -> Mat2 {
        let fd = |h: f64| -> Mat2 {
            let mut m = Mat2 {
                dim: self.dim,
                m: [[0.0; 2]; 2],
            };
            for j in 0..self.dim {
                let mut xp = *x;
                let mut xm = *x;
                xp[j] += h;
                xm[j] -= h;
                let (fp, fm) = (self.forward(t, &xp), self.forward(t, &xm));
                for i in 0..self.dim {
                    m.m[i][j] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            m
        };
        let j1 = fd(self.fd_step);
        let j2 = fd(2.0 * self.fd_step);
        let mut out = j1;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = (4.0 * j1.m[i][j] - j2.m[i][j]) / 3.0;
            }
        }
        out
    }

    /// Hessian rows d2y_k/dx_i dx_j: analytic closure or extrapolated
    /// second differences of the forward map.
    pub fn hessian_rows_at(&self, t: f64, x: &Point) -> [SymMat; 2] {
        if let Some(hess) = &self.hessian_rows {
            return hess(t, x);
        }
        self.hessian_rows_fd(t, x)
    }

    pub fn hessian_rows_fd(&self, t: f64, x: &Point) -> [SymMat; 2] {
        let fd = |h: f64| -> [SymMat; 2] {
            let mut rows = [SymMat::zero(self.dim), SymMat::zero(self.dim)];
            let f0 = self.forward(t, x);
            for i in 0..self.dim {
                for j in i..self.dim {
                    let vals: Point = if i == j {
                        let mut xp = *x;
                        let mut xm = *x;
                        xp[i] += h;
                        xm[i] -= h;
                        let (fp, fm) = (self.forward(t, &xp), self.forward(t, &xm));
                        [
                            (fp[0] - 2.0 * f0[0] + fm[0]) / (h * h),
                            (fp[1] - 2.0 * f0[1] + fm[1]) / (h * h),
                        ]
                    } else {
                        let (mut pp, mut pm, mut mp, mut mm) = (*x, *x, *x, *x);
                        pp[i] += h;
                        pp[j] += h;
                        pm[i] += h;
                        pm[j] -= h;
                        mp[i] -= h;
                        mp[j] += h;
                        mm[i] -= h;
                        mm[j] -= h;
                        let (fpp, fpm, fmp, fmm) = (
                            self.forward(t, &pp),
                            self.forward(t, &pm),
                            self.forward(t, &mp),
                            self.forward(t, &mm),
                        );
                        [
                            (fpp[0] - fpm[0] - fmp[0] + fmm[0]) / (4.0 * h * h),
                            (fpp[1] - fpm[1] - fmp[1] + fmm[1]) / (4.0 * h * h),
                        ]
                    };
                    for k in 0..self.dim {
                        rows[k].set_sym(i, j, vals[k]);
                    }
                }
            }
            rows
        };
        let h1 = fd(self.fd_step);
        let h2 = fd(2.0 * self.fd_step);
        let mut out = [SymMat::zero(self.dim), SymMat::zero(self.dim)];
        for k in 0..self.dim {
            for i in 0..self.dim {
                for j in i..self.dim {
                    out[k].set_sym(i, j, (4.0 * h1[k].get(i, j) - h2[k].get(i, j)) / 3.0);
                }
            }
        }
        out
    }

    pub fn dy_dt_at(&self, t: f64, x: &Point) -> Point {
        match &self.dy_dt {
            Some(f) => f(t, x),
            None => [0.0, 0.0],
        }
    }

    /// Max forward-inverse roundtrip deviation over the given points.
    pub fn roundtrip_deviation(&self, t: f64, points: &[Point]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in points {
            let y = self.forward(t, p);
            let x = self.inverse(t, &y)?;
            worst = worst.max(((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt());
        }
        Ok(worst)
    }

    /// Composition outer o inner (elliptic maps only).
    pub fn compose(outer: &Diffeomorphism, inner: &Diffeomorphism) -> Diffeomorphism {
        let dim = inner.dim;
        let (fo, fi) = (outer.forward.clone(), inner.forward.clone());
        let mut out = Diffeomorphism::new(dim, move |t, x| fo(t, &fi(t, x)));
        if let (Some(io), Some(ii)) = (&outer.inverse, &inner.inverse) {
            let (io, ii) = (io.clone(), ii.clone());
            out = out.with_inverse(move |t, y| ii(t, &io(t, y)));
        }
        if outer.has_analytic_derivatives() && inner.has_analytic_derivatives() {
            let (o, i) = (outer.clone(), inner.clone());
            out = out.with_jacobian(move |t, x| {
                let y = i.forward(t, x);
                o.jacobian_at(t, &y).matmul(&i.jacobian_at(t, x))
            });
            let (o, i) = (outer.clone(), inner.clone());
            out = out.with_hessian_rows(move |t, x| {
                let y = i.forward(t, x);
                let jo = o.jacobian_at(t, &y);
                let ji = i.jacobian_at(t, x);
                let ho = o.hessian_rows_at(t, &y);
                let hi = i.hessian_rows_at(t, x);
                let mut rows = [SymMat::zero(dim), SymMat::zero(dim)];
                for k in 0..dim {
                    for a in 0..dim {
                        for b in a..dim {
                            let mut v = 0.0;
                            for p in 0..dim {
                                for q in 0..dim {
                                    v += ho[k].get(p, q) * ji.m[p][a] * ji.m[q][b];
                                }
                                v += jo.m[k][p] * hi[p].get(a, b);
                            }
                            rows[k].set_sym(a, b, v);
                        }
                    }
                }
                rows
            });
        }
        out
    }
}

/// Quintic bump: 1 on (-inf, 1], 0 on [2, inf), C^2 in between.
pub fn cutoff_psi(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let t = s - 1.0;
        1.0 - t * t * t * (6.0 * t * t - 15.0 * t + 10.0)
    }
}

fn cutoff_psi_d1(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        0.0
    } else {
        let t = s - 1.0;
        -30.0 * t * t * (t - 1.0) * (t - 1.0)
    }
}

fn cutoff_psi_d2(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        0.0
    } else {
        let t = s - 1.0;
        -60.0 * t * (2.0 * t - 1.0) * (t - 1.0)
    }
}

/// Shear that straightens the graph boundary {x_d = gamma(x')}: maps
/// (x', x_d) to (x', x_d - gamma(x')) with exact jacobian and hessian rows.
pub fn straighten_graph_boundary(gamma: &crate::geometry::C2Scalar) -> Diffeomorphism {
    let g = gamma.clone();
    let gi = gamma.clone();
    let gj = gamma.clone();
    let gh = gamma.clone();
    Diffeomorphism::new(2, move |_, x| [x[0], x[1] - g.eval(x[0])])
        .with_inverse(move |_, y| [y[0], y[1] + gi.eval(y[0])])
        .with_jacobian(move |_, x| Mat2 {
            dim: 2,
            m: [[1.0, 0.0], [-gj.deriv(x[0]), 1.0]],
        })
        .with_hessian_rows(move |_, x| {
            let mut h1 = SymMat::zero(2);
            h1.set_sym(0, 0, -gh.second_deriv(x[0]));
            [SymMat::zero(2), h1]
        })
}

/// Tangential-drift killing map in the straightened frame (boundary =
/// {x_d = 0}, inward normal e_d): y = x + psi(|x|/delta) xi(x') x_d with
/// xi(x') = -b^tangential(x',0) / b^d(x',0).
///
/// Requires b^d > 0 on the closed working ball of radius 2 delta.  Every
/// boundary point is fixed, and the d-th coordinate is untouched, so
/// b~^d = b^d exactly.  For time-coupled (parabolic) fields xi also depends
/// on t and the map contributes dy/dt to the transformed drift.
pub fn build_tangential_killing_map(
    coeffs: &CoefficientField,
    delta: f64,
) -> Result<Diffeomorphism> {
    if coeffs.dim != 2 {
        return Err(Error::Transform(
            "the killing map is implemented for the 2-dimensional straightened frame".into(),
        ));
    }
    if delta <= 0.0 {
        return Err(Error::InvalidParams("delta must be positive".into()));
    }
    // b^d must stay positive on the closed working ball.
    for i in 0..=64 {
        let x0 = -2.0 * delta + 4.0 * delta * i as f64 / 64.0;
        let b = coeffs.b(0.0, &[x0, 0.0])?;
        if b[1] <= 0.0 {
            return Err(Error::Transform(format!(
                "b_perp = {} <= 0 at boundary point x' = {x0}; the killing map requires b_perp > 0",
                b[1]
            )));
        }
    }
    let cf = coeffs.clone();
    let xi = move |t: f64, x0: f64| -> f64 {
        let b = (cf.b(t, &[x0, 0.0])).unwrap_or([f64::NAN, f64::NAN]);
        -b[0] / b[1]
    };
    let xi = Arc::new(xi);
    let hx = 1e-6;
    let xi_d1 = {
        let xi = xi.clone();
        move |t: f64, x0: f64| (xi(t, x0 + hx) - xi(t, x0 - hx)) / (2.0 * hx)
    };
    let hx2 = 1e-4;
    let xi_d2 = {
        let xi = xi.clone();
        move |t: f64, x0: f64| (xi(t, x0 + hx2) - 2.0 * xi(t, x0) + xi(t, x0 - hx2)) / (hx2 * hx2)
    };

    let forward = {
        let xi = xi.clone();
        move |t: f64, x: &Point| -> Point {
            let s = (x[0] * x[0] + x[1] * x[1]).sqrt() / delta;
            [x[0] + cutoff_psi(s) * xi(t, x[0]) * x[1], x[1]]
        }
    };
    let jac = {
        let xi = xi.clone();
        let xi_d1 = xi_d1.clone();
        move |t: f64, x: &Point| -> Mat2 {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let s = r / delta;
            let k = xi(t, x[0]);
            let kp = xi_d1(t, x[0]);
            let psi = cutoff_psi(s);
            let psi1 = cutoff_psi_d1(s);
            let (s0, s1) = if psi1 == 0.0 || r == 0.0 {
                (0.0, 0.0)
            } else {
                (x[0] / (delta * r), x[1] / (delta * r))
            };
            Mat2 {
                dim: 2,
                m: [
                    [
                        1.0 + psi1 * s0 * k * x[1] + psi * kp * x[1],
                        psi1 * s1 * k * x[1] + psi * k,
                    ],
                    [0.0, 1.0],
                ],
            }
        }
    };
    let hess = {
        let xi = xi.clone();
        let xi_d1 = xi_d1.clone();
        move |t: f64, x: &Point| -> [SymMat; 2] {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let s = r / delta;
            let k = xi(t, x[0]);
            let kp = xi_d1(t, x[0]);
            let kpp = xi_d2(t, x[0]);
            let psi = cutoff_psi(s);
            let psi1 = cutoff_psi_d1(s);
            let psi2 = cutoff_psi_d2(s);
            let smooth = psi1 == 0.0 && psi2 == 0.0;
            let (s0, s1, s00, s01, s11) = if smooth || r == 0.0 {
                (0.0, 0.0, 0.0, 0.0, 0.0)
            } else {
                (
                    x[0] / (delta * r),
                    x[1] / (delta * r),
                    1.0 / (delta * r) - x[0] * x[0] / (delta * r * r * r),
                    -x[0] * x[1] / (delta * r * r * r),
                    1.0 / (delta * r) - x[1] * x[1] / (delta * r * r * r),
                )
            };
            let g00 = (psi2 * s0 * s0 + psi1 * s00) * k * x[1]
                + 2.0 * psi1 * s0 * kp * x[1]
                + psi * kpp * x[1];
            let g01 = (psi2 * s0 * s1 + psi1 * s01) * k * x[1]
                + psi1 * s0 * k
                + psi1 * s1 * kp * x[1]
                + psi * kp;
            let g11 = (psi2 * s1 * s1 + psi1 * s11) * k * x[1] + 2.0 * psi1 * s1 * k;
            let mut h0 = SymMat::zero(2);
            h0.set_sym(0, 0, g00);
            h0.set_sym(0, 1, g01);
            h0.set_sym(1, 1, g11);
            [h0, SymMat::zero(2)]
        }
    };
    let mut map = Diffeomorphism::new(2, forward)
        .with_jacobian(jac)
        .with_hessian_rows(hess);
    map.untouched_beyond = Some(2.0 * delta);
    map.fd_step = (1e-3 * delta).min(1e-3);
    if coeffs.parabolic {
        let xi = xi.clone();
        let ht = 1e-6;
        map = map.with_dy_dt(move |t: f64, x: &Point| {
            let s = (x[0] * x[0] + x[1] * x[1]).sqrt() / delta;
            let dxi = (xi(t + ht, x[0]) - xi(t - ht, x[0])) / (2.0 * ht);
            [cutoff_psi(s) * dxi * x[1], 0.0]
        });
    }
    // The jacobian must stay invertible on the patch; a too-large delta
    // (steep xi variation) shows up as a small determinant.
    for i in 0..=16 {
        for j in 0..=16 {
            let p = [
                -2.0 * delta + 4.0 * delta * i as f64 / 16.0,
                2.0 * delta * j as f64 / 16.0,
            ];
            let d = map.jacobian_at(0.0, &p).det();
            if d.abs() < 0.05 {
                return Err(Error::Transform(format!(
                    "killing-map jacobian nearly singular (det = {d:.3e}) at ({}, {}); use a smaller delta",
                    p[0], p[1]
                )));
            }
        }
    }
    Ok(map)
}

/// Default patch size: half the distance at which b^d first leaves the
/// band [b0/2, 2 b0], with b0 = b^d at the base point.
pub fn default_killing_delta(coeffs: &CoefficientField, max_delta: f64) -> Result<f64> {
    let b0 = coeffs.b(0.0, &[0.0, 0.0])?[1];
    if b0 <= 0.0 {
        return Err(Error::Transform(format!(
            "b_perp at the base point is {b0} <= 0"
        )));
    }
    let mut r = max_delta;
    'outer: for i in 1..=256 {
        let d = max_delta * i as f64 / 256.0;
        for &p in &[[d, 0.0], [-d, 0.0], [0.0, d], [d / 2.0, d / 2.0]] {
            let bd = coeffs.b(0.0, &p)?[1];
            if bd < 0.5 * b0 || bd > 2.0 * b0 {
                r = d;
                break 'outer;
            }
        }
    }
    Ok(r / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformMethod {
    /// Closed-form jacobian/hessian evaluators of the map.
    Analytic,
    /// Finite-difference jacobian/hessian of the forward map.
    ChainRuleNumeric,
}

/// The transformed operator coefficients together with their provenance.
#[derive(Clone)]
pub struct TransformedOperator {
    pub coeffs: CoefficientField,
    pub method: TransformMethod,
    pub phi: Diffeomorphism,
    pub original: CoefficientField,
}

/// Transform the coefficients under y = Phi(x) so that the operator acting
/// on v = u o Phi^{-1} reproduces A u: a~ = J a J^T, b~ = J b + a : H,
/// c~ = c o Phi^{-1}.
pub fn transform_coefficients(
    coeffs: &CoefficientField,
    phi: &Diffeomorphism,
    method: TransformMethod,
) -> Result<TransformedOperator> {
    if method == TransformMethod::Analytic && !phi.has_analytic_derivatives() {
        return Err(Error::Transform(
            "analytic transform requested but the map carries no analytic jacobian/hessian".into(),
        ));
    }
    let dim = coeffs.dim;
    let derivs = {
        let phi = phi.clone();
        move |t: f64, x: &Point| -> (Mat2, [SymMat; 2]) {
            match method {
                TransformMethod::Analytic => (phi.jacobian_at(t, x), phi.hessian_rows_at(t, x)),
                TransformMethod::ChainRuleNumeric => {
                    (phi.jacobian_fd(t, x), phi.hessian_rows_fd(t, x))
                }
            }
        }
    };
    let derivs = Arc::new(derivs);
    let nan_mat = move || {
        let mut m = SymMat::zero(dim);
        for i in 0..dim {
            m.set_sym(i, i, f64::NAN);
        }
        m
    };

    let a_eval = {
        let (phi, cf, derivs) = (phi.clone(), coeffs.clone(), derivs.clone());
        move |t: f64, y: &Point| -> SymMat {
            let Ok(x) = phi.inverse(t, y) else {
                return nan_mat();
            };
            let Ok(a) = cf.a(t, &x) else { return nan_mat() };
            let (j, _) = derivs(t, &x);
            let mut out = SymMat::zero(dim);
            for k in 0..dim {
                for l in k..dim {
                    let mut v = 0.0;
                    for i in 0..dim {
                        for jj in 0..dim {
                            v += a.get(i, jj) * j.m[k][i] * j.m[l][jj];
                        }
                    }
                    out.set_sym(k, l, v);
                }
            }
            out
        }
    };
    let b_eval = {
        let (phi, cf, derivs) = (phi.clone(), coeffs.clone(), derivs.clone());
        move |t: f64, y: &Point| -> Point {
            let Ok(x) = phi.inverse(t, y) else {
                return [f64::NAN, f64::NAN];
            };
            let (Ok(a), Ok(b)) = (cf.a(t, &x), cf.b(t, &x)) else {
                return [f64::NAN, f64::NAN];
            };
            let (j, h) = derivs(t, &x);
            let mut out = [0.0, 0.0];
            for (k, slot) in out.iter_mut().enumerate().take(dim) {
                let mut v = 0.0;
                for i in 0..dim {
                    v += b[i] * j.m[k][i];
                    for jj in 0..dim {
                        v += a.get(i, jj) * h[k].get(i, jj);
                    }
                }
                *slot = v;
            }
            if phi.time_coupled {
                let dydt = phi.dy_dt_at(t, &x);
                for k in 0..dim {
                    out[k] += dydt[k];
                }
            }
            out
        }
    };
    let c_eval = {
        let (phi, cf) = (phi.clone(), coeffs.clone());
        move |t: f64, y: &Point| -> f64 {
            let Ok(x) = phi.inverse(t, y) else {
                return f64::NAN;
            };
            cf.c(t, &x).unwrap_or(f64::NAN)
        }
    };
    let new_coeffs =
        CoefficientField::new(dim, a_eval, b_eval, c_eval).with_parabolic(coeffs.parabolic);
    Ok(TransformedOperator {
        coeffs: new_coeffs,
        method,
        phi: phi.clone(),
        original: coeffs.clone(),
    })
}

/// Verification of the killing-map identities on sampled points.
#[derive(Clone, Debug)]
pub struct TransformVerification {
    /// max |a~| over the sampled boundary points.
    pub max_a_norm_boundary: f64,
    /// min b~^d over the sampled boundary points.
    pub min_b_perp_boundary: f64,
    /// max |b~^tangential| over boundary points inside the delta patch.
    pub max_b_tangential_patch: f64,
    /// max relative mismatch of sorted eigenvalue lists a~(Phi(x)) vs a(x)
    /// over the supplied interior points.
    pub max_eigen_rel_mismatch: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Check, on sampled points, that the transformed coefficients satisfy the
/// boundary identities (a~ = 0, b~_perp > 0, b~_tangential = 0 inside the
/// patch) and that interior eigenvalues are preserved at the supplied
/// points.  Interior eigenvalue comparison is meaningful where the map is
/// an isometry (identity region, rotations); pass points accordingly.
pub fn verify_transform(
    t_op: &TransformedOperator,
    boundary_points: &[Point],
    patch_radius: f64,
    interior_points: &[Point],
    tol: f64,
) -> Result<TransformVerification> {
    let mut v = TransformVerification {
        max_a_norm_boundary: 0.0,
        min_b_perp_boundary: f64::INFINITY,
        max_b_tangential_patch: 0.0,
        max_eigen_rel_mismatch: 0.0,
        passed: true,
        failures: Vec::new(),
    };
    let dim = t_op.coeffs.dim;
    for p in boundary_points {
        // Boundary points are fixed by the killing map: y = x there.
        let a = t_op.coeffs.a(0.0, p)?;
        let b = t_op.coeffs.b(0.0, p)?;
        v.max_a_norm_boundary = v.max_a_norm_boundary.max(a.frobenius_norm());
        if a.frobenius_norm() >= tol {
            v.passed = false;
            v.failures.push(format!(
                "a~ = {:e} at boundary point ({}, {})",
                a.frobenius_norm(),
                p[0],
                p[1]
            ));
        }
        v.min_b_perp_boundary = v.min_b_perp_boundary.min(b[dim - 1]);
        if b[dim - 1] <= 0.0 {
            v.passed = false;
            v.failures.push(format!(
                "b~_perp = {:e} at ({}, {})",
                b[dim - 1],
                p[0],
                p[1]
            ));
        }
        let tangential = b[0].abs();
        if p[0].abs() <= patch_radius {
            v.max_b_tangential_patch = v.max_b_tangential_patch.max(tangential);
            if tangential >= tol {
                v.passed = false;
                v.failures.push(format!(
                    "b~_tangential = {tangential:e} at patch boundary point ({}, {})",
                    p[0], p[1]
                ));
            }
        }
    }
    for p in interior_points {
        let y = t_op.phi.forward(0.0, p);
        let la = t_op.original.a(0.0, p)?.eigenvalues();
        let lb = t_op.coeffs.a(0.0, &y)?.eigenvalues();
        for (ea, eb) in la.iter().zip(&lb) {
            let rel = (ea - eb).abs() / ea.abs().max(1e-12);
            v.max_eigen_rel_mismatch = v.max_eigen_rel_mismatch.max(rel);
            if rel >= 1e-8 {
                v.passed = false;
                v.failures.push(format!(
                    "eigenvalue mismatch {rel:e} at interior point ({}, {})",
                    p[0], p[1]
                ));
            }
        }
    }
    Ok(v)
}

/// Pull a smooth field back through the map: v = u o Phi^{-1} with exact
/// chain-rule first and second derivatives (elliptic maps).
pub fn pull_back_field(u: &SmoothField, phi: &Diffeomorphism) -> SmoothField {
    let dim = u.dim;
    let value = {
        let (u, phi) = (u.clone(), phi.clone());
        move |t: f64, y: &Point| -> f64 {
            match phi.inverse(t, y) {
                Ok(x) => u.value(t, &x),
                Err(_) => f64::NAN,
            }
        }
    };
    let gradient = {
        let (u, phi) = (u.clone(), phi.clone());
        move |t: f64, y: &Point| -> Point {
            let Ok(x) = phi.inverse(t, y) else {
                return [f64::NAN, f64::NAN];
            };
            let Ok(jinv) = phi.jacobian_at(t, &x).inverse() else {
                return [f64::NAN, f64::NAN];
            };
            let g = u.gradient(t, &x);
            let mut out = [0.0, 0.0];
            for m in 0..dim {
                for p in 0..dim {
                    out[m] += g[p] * jinv.m[p][m];
                }
            }
            out
        }
    };
    let hessian = {
        let (u, phi) = (u.clone(), phi.clone());
        move |t: f64, y: &Point| -> SymMat {
            let Ok(x) = phi.inverse(t, y) else {
                return SymMat::zero(dim);
            };
            let j = phi.jacobian_at(t, &x);
            let Ok(jinv) = j.inverse() else {
                return SymMat::zero(dim);
            };
            let h_fwd = phi.hessian_rows_at(t, &x);
            // Hessian rows of the inverse map from the forward data.
            let mut h_inv = [SymMat::zero(dim), SymMat::zero(dim)];
            for s in 0..dim {
                for m in 0..dim {
                    for n in m..dim {
                        let mut val = 0.0;
                        for k in 0..dim {
                            let mut inner = 0.0;
                            for p in 0..dim {
                                for r in 0..dim {
                                    inner += h_fwd[k].get(p, r) * jinv.m[r][m] * jinv.m[p][n];
                                }
                            }
                            val -= jinv.m[s][k] * inner;
                        }
                        h_inv[s].set_sym(m, n, val);
                    }
                }
            }
            let g = u.gradient(t, &x);
            let hu = u.hessian(t, &x);
            let mut out = SymMat::zero(dim);
            for m in 0..dim {
                for n in m..dim {
                    let mut val = 0.0;
                    for p in 0..dim {
                        for q in 0..dim {
                            val += hu.get(p, q) * jinv.m[p][m] * jinv.m[q][n];
                        }
                        val += g[p] * h_inv[p].get(m, n);
                    }
                    out.set_sym(m, n, val);
                }
            }
            out
        }
    };
    SmoothField::new(dim, value, gradient, hessian)
}
