//! Perturbation of a degenerate-boundary local maximum: given a function u
//! with a strict local maximum at the origin of the straightened frame
//! (boundary = {x_d = 0}, inward normal e_d) and inward slope p < 0, the
//! quadratic w = -zeta t + (eta - p) x_d - (Q/2)|x|^2 with suitably chosen
//! constants makes v = u + w strictly subharmonic on a thin cut cylinder V
//! while moving the maximum of v to the interior of V.  This module selects
//! the constants, builds w and V, and certifies the resulting inequalities
//! by dense sampling.

use crate::coefficients::{CoefficientField, SmoothField, SymMat};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::operator::apply_operator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Elliptic,
    Parabolic,
}

/// Data observed at the boundary maximum: slope, value, drift, coefficient
/// bounds, and the working cylinder extents.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryMaxData {
    /// Inward normal derivative u_{x_d}(0) (must be < 0).
    pub p: f64,
    /// Maximum value u(0).
    pub r: f64,
    /// Normal drift b^d(0) (must be > 0).
    pub b0: f64,
    /// Lipschitz-in-distance constant of |a| and |b_tangential| near the
    /// degenerate boundary.
    pub k_lip: f64,
    /// Upper bound for c^+ on the cylinder.
    pub lambda0: f64,
    /// Cylinder height bound.
    pub ell: f64,
    /// Cylinder base radius.
    pub rho0: f64,
    /// Time extent (parabolic mode only).
    pub tau: f64,
}

impl BoundaryMaxData {
    pub fn new(
        p: f64,
        r: f64,
        b0: f64,
        k_lip: f64,
        lambda0: f64,
        ell: f64,
        rho0: f64,
        tau: f64,
    ) -> Result<Self> {
        if !(p < 0.0) {
            return Err(Error::InvalidParams(format!("p = {p} must be negative")));
        }
        if !(b0 > 0.0) {
            return Err(Error::InvalidParams(format!("b0 = {b0} must be positive")));
        }
        if !(k_lip > 0.0 && ell > 0.0 && rho0 > 0.0 && lambda0 >= 0.0) {
            return Err(Error::InvalidParams(
                "k_lip, ell, rho0 must be positive and lambda0 nonnegative".into(),
            ));
        }
        if lambda0 * ell > b0 / 4.0 + 1e-14 {
            return Err(Error::InvalidParams(format!(
                "lambda0 * ell = {} exceeds b0/4 = {}",
                lambda0 * ell,
                b0 / 4.0
            )));
        }
        if rho0 > 1.0 + 2.0 * b0 / k_lip + 1e-14 {
            return Err(Error::InvalidParams(format!(
                "rho0 = {rho0} exceeds 1 + 2 b0 / K = {}",
                1.0 + 2.0 * b0 / k_lip
            )));
        }
        Ok(Self {
            p,
            r,
            b0,
            k_lip,
            lambda0,
            ell,
            rho0,
            tau,
        })
    }
}

/// The selected perturbation constants.
#[derive(Clone, Copy, Debug)]
pub struct PerturbationSpec {
    pub eta: f64,
    /// Time slope of w (0 in elliptic mode).
    pub zeta: f64,
    pub q: f64,
    pub m: f64,
    /// Cylinder height (eta - p) / (m Q).
    pub x_hat_d: f64,
    pub mode: Mode,
}

impl PerturbationSpec {
    /// Validate the defining inequalities against the data.
    pub fn validate(&self, data: &BoundaryMaxData) -> Result<()> {
        let p = data.p;
        if !(self.eta > 0.0 && self.eta <= 1.0 && self.eta < -p / (8.0 * self.m)) {
            return Err(Error::InvalidParams(format!(
                "eta = {} violates 0 < eta < -p/(8m) = {}",
                self.eta,
                -p / (8.0 * self.m)
            )));
        }
        if self.x_hat_d > data.ell * (1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!(
                "x_hat_d = {} exceeds ell = {}",
                self.x_hat_d, data.ell
            )));
        }
        if self.mode == Mode::Parabolic && self.zeta > -data.b0 * p / 8.0 + 1e-14 {
            return Err(Error::InvalidParams(format!(
                "zeta = {} exceeds -b0 p / 8 = {}",
                self.zeta,
                -data.b0 * p / 8.0
            )));
        }
        Ok(())
    }

    /// Drift coefficient m for the given mode: (8/b0)(K + 2 b0) elliptic,
    /// (16/b0)(K + 2 b0) parabolic.
    pub fn m_for(data: &BoundaryMaxData, mode: Mode) -> f64 {
        let factor = match mode {
            Mode::Elliptic => 8.0,
            Mode::Parabolic => 16.0,
        };
        factor / data.b0 * (data.k_lip + 2.0 * data.b0)
    }
}

/// Outcome of the one-sided normal-derivative estimate at a boundary point.
#[derive(Clone, Copy, Debug)]
pub struct HopfReport {
    pub normal_derivative: f64,
    pub pass: bool,
}

/// Estimate D_n u(x0) by second-order one-sided differencing along the
/// inward normal and flag whether it is strictly negative.  A nonnegative
/// value signals that the strict-maximum or subharmonicity premise fails.
pub fn hopf_check(
    u: &dyn Fn(f64, &Point) -> f64,
    t: f64,
    x0: &Point,
    normal: &Point,
    depth: f64,
    tol_hopf: f64,
) -> HopfReport {
    let h = depth / 2.0;
    let at = |s: f64| u(t, &[x0[0] + s * normal[0], x0[1] + s * normal[1]]);
    let d = (-3.0 * at(0.0) + 4.0 * at(h) - at(2.0 * h)) / (2.0 * h);
    HopfReport {
        normal_derivative: d,
        pass: d < -tol_hopf,
    }
}

/// Point in the straightened frame from (tangential, normal) coordinates:
/// the normal coordinate is the last axis (axis 0 in one dimension).
pub fn frame_point(dim: usize, tangential: f64, normal: f64) -> Point {
    if dim == 1 {
        [normal, 0.0]
    } else {
        [tangential, normal]
    }
}

/// Select the perturbation constants for the given boundary data.
///
/// eta is fixed at half its admissible bound, zeta (parabolic) at half its
/// cap, and Q is doubled from (eta - p)/(m ell) until the cylinder fits
/// under all the defining inequalities and the empirical Taylor remainder
/// of the oracle is small enough on the sampled box.
pub fn select_constants(
    data: &BoundaryMaxData,
    dim: usize,
    u_oracle: &dyn Fn(f64, &Point) -> f64,
    mode: Mode,
) -> Result<PerturbationSpec> {
    let p = data.p;
    let m = PerturbationSpec::m_for(data, mode);
    let eta = -p / (16.0 * m);
    let zeta = match mode {
        Mode::Elliptic => 0.0,
        Mode::Parabolic => (-data.b0 * p / 16.0).min(1.0),
    };
    let o_threshold = match mode {
        Mode::Elliptic => -p / (8.0 * m),
        Mode::Parabolic => (-p / (8.0 * m)).min(zeta / 2.0),
    };
    if mode == Mode::Parabolic {
        if data.tau <= 0.0 {
            return Err(Error::ConstantsSelection("tau > 0 (parabolic mode)".into()));
        }
        if data.rho0 > data.tau / 2.0 {
            return Err(Error::ConstantsSelection(format!(
                "rho0 <= tau/2 (temporal face needs |x'| <= tau/2; rho0 = {}, tau = {})",
                data.rho0, data.tau
            )));
        }
    }
    // Empirical Taylor remainder o = (u - r - p x_d) / (t + |x|) sampled on
    // a dyadic ladder in x_d and a uniform sweep in x' (and t).
    let remainder_sup = |x_hat: f64| -> f64 {
        let mut sup: f64 = 0.0;
        let times: Vec<f64> = match mode {
            Mode::Elliptic => vec![0.0],
            Mode::Parabolic => (0..=4).map(|k| data.tau * k as f64 / 4.0).collect(),
        };
        let tangentials: Vec<f64> = if dim == 1 {
            vec![0.0]
        } else {
            (-6..=6_i32).map(|j| data.rho0 * j as f64 / 6.0).collect()
        };
        for &t in &times {
            for k in 0..=8 {
                let x_d = x_hat * 0.5_f64.powi(k);
                for &xp in &tangentials {
                    let x = frame_point(dim, xp, x_d);
                    let denom = t + (x[0] * x[0] + x[1] * x[1]).sqrt();
                    if denom == 0.0 {
                        continue;
                    }
                    let o = (u_oracle(t, &x) - data.r - p * x_d) / denom;
                    sup = sup.max(o.abs());
                }
            }
        }
        sup
    };
    let mut q = (eta - p) / (m * data.ell);
    for _ in 0..=60 {
        let x_hat_d = (eta - p) / (m * q);
        let mut violated: Option<String> = None;
        if x_hat_d > data.ell * (1.0 + 1e-12) {
            violated = Some(format!("x_hat_d = {x_hat_d} <= ell = {}", data.ell));
        } else if -p / (8.0 * m * q) > data.rho0 {
            violated = Some(format!(
                "side-envelope cap -p/(8 m Q) = {} <= rho0 = {}",
                -p / (8.0 * m * q),
                data.rho0
            ));
        } else if x_hat_d > data.rho0 {
            violated = Some(format!("x_hat_d = {x_hat_d} <= rho0 = {}", data.rho0));
        } else if mode == Mode::Parabolic && x_hat_d > (zeta * data.tau / 4.0).min(data.tau / 2.0) {
            violated = Some(format!(
                "x_hat_d = {x_hat_d} <= min(zeta tau / 4, tau / 2) = {}",
                (zeta * data.tau / 4.0).min(data.tau / 2.0)
            ));
        } else {
            let sup = remainder_sup(x_hat_d);
            if sup >= o_threshold {
                violated = Some(format!(
                    "empirical Taylor remainder sup |o| = {sup:e} < threshold {o_threshold:e}"
                ));
            }
        }
        match violated {
            None => {
                let spec = PerturbationSpec {
                    eta,
                    zeta,
                    q,
                    m,
                    x_hat_d,
                    mode,
                };
                spec.validate(data)?;
                return Ok(spec);
            }
            Some(msg) => {
                if q > 1e280 {
                    return Err(Error::ConstantsSelection(msg));
                }
                q *= 2.0;
            }
        }
    }
    Err(Error::ConstantsSelection(
        "doubling cap reached without satisfying the constants inequalities".into(),
    ))
}

/// The quadratic perturbation w(t, x) = -zeta t + (eta - p) x_d - (Q/2)|x|^2
/// with exact derivative evaluators.
#[derive(Clone, Copy, Debug)]
pub struct WPolynomial {
    pub eta_minus_p: f64,
    pub q: f64,
    pub zeta: f64,
    pub dim: usize,
}

impl WPolynomial {
    pub fn value(&self, t: f64, x: &Point) -> f64 {
        let norm2 = x[0] * x[0] + x[1] * x[1];
        -self.zeta * t + self.eta_minus_p * x[..self.dim][self.dim - 1] - 0.5 * self.q * norm2
    }

    pub fn gradient(&self, x: &Point) -> Point {
        let mut g = [-self.q * x[0], -self.q * x[1]];
        g[self.dim - 1] += self.eta_minus_p;
        g
    }

    pub fn hessian(&self) -> SymMat {
        SymMat::identity(self.dim).scaled(-self.q)
    }

    pub fn dt(&self) -> f64 {
        -self.zeta
    }

    pub fn as_field(&self) -> SmoothField {
        let w = *self;
        SmoothField::new(
            w.dim,
            move |t, x| w.value(t, x),
            move |_, x| w.gradient(x),
            move |_, _| w.hessian(),
        )
        .with_dt(move |_, _| w.dt())
    }
}

/// Build the perturbation polynomial for a selected spec.
pub fn build_w(spec: &PerturbationSpec, data: &BoundaryMaxData, dim: usize) -> WPolynomial {
    WPolynomial {
        eta_minus_p: spec.eta - data.p,
        q: spec.q,
        zeta: spec.zeta,
        dim,
    }
}

/// The cut cylinder V = {0 < x_d < x_hat_d, |x'| < rho(x_d)} with
/// rho = max(side envelope, linear interpolant rho0 -> x_hat_d), clipped
/// at rho0.
#[derive(Clone, Copy, Debug)]
pub struct CutCylinder {
    pub x_hat_d: f64,
    pub rho0: f64,
    pub tau: f64,
    p: f64,
    m: f64,
    q: f64,
}

impl CutCylinder {
    /// Lower envelope required along the curved side: the positive root of
    /// (Q/2) rho^2 + (p/8m) rho + (p/8m + Q x_d/2) x_d = 0 on
    /// (0, -p/(4mQ)), zero elsewhere.
    pub fn envelope(&self, x_d: f64) -> f64 {
        let (p, m, q) = (self.p, self.m, self.q);
        if x_d <= 0.0 || x_d >= -p / (4.0 * m * q) {
            return 0.0;
        }
        let disc = p * p / (64.0 * m * m) - 2.0 * x_d * q * (p / (8.0 * m) + 0.5 * q * x_d);
        if disc <= 0.0 {
            return 0.0;
        }
        (-p / (8.0 * m) - disc.sqrt()) / q
    }

    fn interpolant(&self, x_d: f64) -> f64 {
        self.rho0 + (self.x_hat_d - self.rho0) * x_d / self.x_hat_d
    }

    /// Cylinder radius at height x_d in [0, x_hat_d].
    pub fn rho(&self, x_d: f64) -> f64 {
        self.envelope(x_d).max(self.interpolant(x_d)).min(self.rho0)
    }
}

/// Construct the cut cylinder and verify its defining conditions by
/// sampling (continuity, endpoint values, envelope below the base radius).
pub fn build_cylinder(spec: &PerturbationSpec, data: &BoundaryMaxData) -> Result<CutCylinder> {
    spec.validate(data)?;
    let cyl = CutCylinder {
        x_hat_d: spec.x_hat_d,
        rho0: data.rho0,
        tau: data.tau,
        p: data.p,
        m: spec.m,
        q: spec.q,
    };
    // Envelope must stay below the base radius; its analytic cap is
    // -p/(8 m Q), re-checked here by sampling.
    let n = 2000;
    let mut prev = cyl.rho(0.0);
    for i in 0..=n {
        let x_d = spec.x_hat_d * i as f64 / n as f64;
        let env = cyl.envelope(x_d);
        if env > data.rho0 * (1.0 + 1e-12) {
            return Err(Error::CylinderConstruction(format!(
                "side envelope {env} exceeds rho0 = {} at x_d = {x_d}; Q too small",
                data.rho0
            )));
        }
        let r = cyl.rho(x_d);
        if i > 0 && (r - prev).abs() > 20.0 * (data.rho0 + spec.x_hat_d) / n as f64 {
            return Err(Error::CylinderConstruction(format!(
                "radius jump {} at x_d = {x_d}",
                (r - prev).abs()
            )));
        }
        if i > 0 && i < n && r <= 0.0 {
            return Err(Error::CylinderConstruction(format!(
                "radius not positive at x_d = {x_d}"
            )));
        }
        prev = r;
    }
    if (cyl.rho(0.0) - data.rho0).abs() > 1e-12 * data.rho0 {
        return Err(Error::CylinderConstruction("rho(0) != rho0".into()));
    }
    if (cyl.rho(spec.x_hat_d) - spec.x_hat_d).abs() > 1e-12 * spec.x_hat_d {
        return Err(Error::CylinderConstruction(
            "rho(x_hat_d) != x_hat_d".into(),
        ));
    }
    Ok(cyl)
}

/// Outcome of the sampling certificate.
#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub interior_sample_count: usize,
    /// max over interior samples of A(u+w) (or L(u+w)).
    pub avw_max: f64,
    pub avw_argmax: (f64, Point),
    /// max over interior samples of A w alone.
    pub aw_max: f64,
    /// max over interior samples of A u alone (premise diagnostic).
    pub au_max: f64,
    pub v_max: f64,
    pub v_argmax: (f64, Point),
    pub v_argmax_interior: bool,
    pub r: f64,
    pub bottom_sweep_max: f64,
    pub top_sweep_max: f64,
    pub side_sweep_max: f64,
    /// Parabolic only: max of v on the temporal face t = tau.
    pub temporal_sweep_max: Option<f64>,
    pub brute_force_argmax: (f64, Point),
    pub argmax_within_one_cell: bool,
    pub failures: Vec<String>,
    pub passed: bool,
}

impl CertificateReport {
    pub fn into_result(self) -> Result<CertificateReport> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::Certificate(self.failures.join("; ")))
        }
    }
}

fn cylinder_samples(
    cyl: &CutCylinder,
    dim: usize,
    mode: Mode,
    density: usize,
    closed: bool,
) -> Vec<(f64, Point)> {
    let mut out = Vec::new();
    let times: Vec<f64> = match mode {
        Mode::Elliptic => vec![0.0],
        Mode::Parabolic => {
            // Parabolic interior is [0, tau) x V; the closed sweep includes tau.
            let hi = if closed { density } else { density - 1 };
            (0..=hi)
                .map(|k| cyl.tau * k as f64 / density as f64)
                .collect()
        }
    };
    // An even interval count keeps the axis x' = 0 (where v peaks) in the
    // tangential sample set.
    let k = density + 2 - density % 2;
    let (tlo, thi) = if closed { (0, k) } else { (1, k - 1) };
    let (lo, hi) = if closed {
        (0, density + 1)
    } else {
        (1, density)
    };
    for &t in &times {
        for i in lo..=hi {
            let x_d = cyl.x_hat_d * i as f64 / (density + 1) as f64;
            let rad = cyl.rho(x_d);
            if dim == 1 {
                out.push((t, frame_point(dim, 0.0, x_d)));
                continue;
            }
            for j in tlo..=thi {
                let frac = 2.0 * j as f64 / k as f64 - 1.0;
                out.push((t, frame_point(dim, rad * frac, x_d)));
            }
        }
    }
    out
}

/// Run the certificate: strict negativity of A(u+w) over an interior
/// sample of V, interior location of the maximum of v = u + w with
/// v_max > r, boundary sweeps v <= r (and the temporal-face bound in
/// parabolic mode), and a 10x-finer brute-force argmax cross-check.
pub fn certify(
    spec: &PerturbationSpec,
    data: &BoundaryMaxData,
    coeffs: &CoefficientField,
    u: &SmoothField,
    grid_density: usize,
) -> Result<CertificateReport> {
    if grid_density < 4 {
        return Err(Error::InvalidParams(
            "grid_density must be at least 4".into(),
        ));
    }
    if (spec.mode == Mode::Parabolic) != coeffs.parabolic {
        return Err(Error::InvalidParams(
            "coefficient field parabolic flag must match the selected mode".into(),
        ));
    }
    let dim = coeffs.dim;
    // Hopf precheck: refuse before sampling when the inward slope at the
    // base point is not strictly negative.
    let uval = |t: f64, x: &Point| u.value(t, x);
    let mut normal = [0.0, 0.0];
    normal[dim - 1] = 1.0;
    let hopf = hopf_check(&uval, 0.0, &[0.0, 0.0], &normal, spec.x_hat_d / 8.0, 1e-10);
    if !hopf.pass {
        return Err(Error::HopfViolation {
            value: hopf.normal_derivative,
        });
    }

    let cyl = build_cylinder(spec, data)?;
    let w = build_w(spec, data, dim);
    let w_field = w.as_field();
    let v = {
        let (u, w) = (u.clone(), w_field.clone());
        let mut sum = SmoothField::new(
            dim,
            {
                let (u, w) = (u.clone(), w.clone());
                move |t, x| u.value(t, x) + w.value(t, x)
            },
            {
                let (u, w) = (u.clone(), w.clone());
                move |t, x| {
                    let (a, b) = (u.gradient(t, x), w.gradient(t, x));
                    [a[0] + b[0], a[1] + b[1]]
                }
            },
            {
                let (u, w) = (u.clone(), w.clone());
                move |t, x| u.hessian(t, x).add(&w.hessian(t, x))
            },
        );
        if u.has_dt() {
            let (u, w) = (u.clone(), w.clone());
            sum = sum.with_dt(move |t, x| u.dt(t, x).unwrap() + w.dt(t, x).unwrap());
        }
        sum
    };

    let mut failures = Vec::new();

    // (i) Strict subharmonicity of v over the interior sample.
    let interior = cylinder_samples(&cyl, dim, spec.mode, grid_density, false);
    let mut avw_max = f64::NEG_INFINITY;
    let mut aw_max = f64::NEG_INFINITY;
    let mut au_max = f64::NEG_INFINITY;
    let mut avw_argmax = (0.0, [0.0, 0.0]);
    for (t, x) in &interior {
        let avw = apply_operator(coeffs, &v, *t, x)?;
        let aw = apply_operator(coeffs, &w_field, *t, x)?;
        au_max = au_max.max(avw - aw);
        aw_max = aw_max.max(aw);
        if avw > avw_max {
            avw_max = avw;
            avw_argmax = (*t, *x);
        }
    }
    if avw_max >= 0.0 {
        failures.push(format!(
            "A(u+w) = {avw_max:e} >= 0 at (t, x) = ({}, ({}, {}))",
            avw_argmax.0, avw_argmax.1[0], avw_argmax.1[1]
        ));
    }

    // (ii) Interior argmax of v over the closed cylinder with v_max > r.
    let closed = cylinder_samples(&cyl, dim, spec.mode, grid_density, true);
    let mut v_max = f64::NEG_INFINITY;
    let mut v_argmax = (0.0, [0.0, 0.0]);
    for (t, x) in &closed {
        let val = v.value(*t, x);
        if val > v_max {
            v_max = val;
            v_argmax = (*t, *x);
        }
    }
    let interior_point = |t: f64, x: &Point| -> bool {
        let x_d = x[dim - 1];
        let in_space = x_d > 0.0 && x_d < cyl.x_hat_d && (dim == 1 || x[0].abs() < cyl.rho(x_d));
        match spec.mode {
            Mode::Elliptic => in_space,
            Mode::Parabolic => in_space && t < cyl.tau,
        }
    };
    let v_argmax_interior = interior_point(v_argmax.0, &v_argmax.1);
    if !v_argmax_interior {
        failures.push(format!(
            "argmax of v at (t, x) = ({}, ({}, {})) is not interior",
            v_argmax.0, v_argmax.1[0], v_argmax.1[1]
        ));
    }
    if v_max <= data.r {
        failures.push(format!("v_max = {v_max} does not exceed r = {}", data.r));
    }

    // (iii) Boundary sweeps.
    let slack = 1e-12 * data.r.abs().max(1.0);
    let times: Vec<f64> = match spec.mode {
        Mode::Elliptic => vec![0.0],
        Mode::Parabolic => (0..=grid_density)
            .map(|k| cyl.tau * k as f64 / grid_density as f64)
            .collect(),
    };
    let sweep_n = 10 * grid_density;
    let mut bottom_sweep_max = f64::NEG_INFINITY;
    let mut top_sweep_max = f64::NEG_INFINITY;
    let mut side_sweep_max = f64::NEG_INFINITY;
    for &t in &times {
        for j in 0..=sweep_n {
            let frac = 2.0 * j as f64 / sweep_n as f64 - 1.0;
            // Bottom: x_d = 0, |x'| <= rho0.
            let xb = frame_point(dim, data.rho0 * frac, 0.0);
            bottom_sweep_max = bottom_sweep_max.max(v.value(t, &xb));
            // Top: x_d = x_hat_d, |x'| <= rho(x_hat_d).
            let xt = frame_point(dim, cyl.rho(cyl.x_hat_d) * frac, cyl.x_hat_d);
            top_sweep_max = top_sweep_max.max(v.value(t, &xt));
            // Side: |x'| = rho(x_d).
            if dim == 2 {
                let x_d = cyl.x_hat_d * j as f64 / sweep_n as f64;
                let rad = cyl.rho(x_d);
                for sgn in [-1.0, 1.0] {
                    let xs = frame_point(dim, sgn * rad, x_d);
                    side_sweep_max = side_sweep_max.max(v.value(t, &xs));
                }
            }
        }
    }
    if dim == 1 {
        side_sweep_max = f64::NEG_INFINITY;
    }
    if bottom_sweep_max > data.r + slack {
        failures.push(format!("bottom sweep max {bottom_sweep_max} exceeds r"));
    }
    if top_sweep_max > data.r + slack {
        failures.push(format!("top sweep max {top_sweep_max} exceeds r"));
    }
    if dim == 2 && side_sweep_max > data.r + slack {
        failures.push(format!("side sweep max {side_sweep_max} exceeds r"));
    }
    let temporal_sweep_max = if spec.mode == Mode::Parabolic {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..=sweep_n {
            let x_d = cyl.x_hat_d * i as f64 / sweep_n as f64;
            let rad = cyl.rho(x_d);
            for j in 0..=sweep_n / 10 {
                let frac = 2.0 * j as f64 / (sweep_n / 10) as f64 - 1.0;
                worst = worst.max(v.value(cyl.tau, &frame_point(dim, rad * frac, x_d)));
            }
        }
        // Proof margin on the temporal face: v(tau, .) <= r - zeta tau / 4.
        if worst > data.r - spec.zeta * cyl.tau / 4.0 + 1e-12 {
            failures.push(format!(
                "temporal face max {worst} exceeds r - zeta tau / 4 = {}",
                data.r - spec.zeta * cyl.tau / 4.0
            ));
        }
        Some(worst)
    } else {
        None
    };

    // Brute-force cross-check at 10x the sampling density.
    let fine = cylinder_samples(&cyl, dim, spec.mode, 10 * grid_density, true);
    let mut bf_max = f64::NEG_INFINITY;
    let mut bf_argmax = (0.0, [0.0, 0.0]);
    for (t, x) in &fine {
        let val = v.value(*t, x);
        if val > bf_max {
            bf_max = val;
            bf_argmax = (*t, *x);
        }
    }
    let cell_d = cyl.x_hat_d / (grid_density + 1) as f64;
    let cell_p = 2.0 * data.rho0 / (grid_density + 1) as f64;
    let cell_t = if spec.mode == Mode::Parabolic {
        cyl.tau / grid_density as f64
    } else {
        f64::INFINITY
    };
    let argmax_within_one_cell = (bf_argmax.1[dim - 1] - v_argmax.1[dim - 1]).abs()
        <= cell_d * (1.0 + 1e-9)
        && (dim == 1 || (bf_argmax.1[0] - v_argmax.1[0]).abs() <= cell_p * (1.0 + 1e-9))
        && (spec.mode == Mode::Elliptic
            || (bf_argmax.0 - v_argmax.0).abs() <= cell_t * (1.0 + 1e-9));
    if !argmax_within_one_cell {
        failures.push(format!(
            "fine argmax ({}, ({}, {})) farther than one coarse cell from ({}, ({}, {}))",
            bf_argmax.0, bf_argmax.1[0], bf_argmax.1[1], v_argmax.0, v_argmax.1[0], v_argmax.1[1]
        ));
    }

    let passed = failures.is_empty();
    Ok(CertificateReport {
        interior_sample_count: interior.len(),
        avw_max,
        avw_argmax,
        aw_max,
        au_max,
        v_max,
        v_argmax,
        v_argmax_interior,
        r: data.r,
        bottom_sweep_max,
        top_sweep_max,
        side_sweep_max,
        temporal_sweep_max,
        brute_force_argmax: bf_argmax,
        argmax_within_one_cell,
        failures,
        passed,
    })
}
