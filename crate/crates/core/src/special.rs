//! Confluent hypergeometric functions M (Kummer) and U (Tricomi).
//!
//! M is evaluated by its power series, U through the Gamma/M connection
//! formula for non-integer second parameter and through terminating closed
//! forms in the degenerate cases `a = -n` and `a = b-1-n`.  Derivatives use
//! the recurrences M'(a,b,x) = (a/b) M(a+1,b+1,x) and
//! U'(a,b,x) = -a U(a+1,b+1,x).  These are the reference solutions of the
//! one-dimensional model equation -x u'' - (b-x) u' + a u = 0 used by the
//! solver and diagnostic modules.

use crate::error::{Error, Result};

const INT_TOL: f64 = 1e-9;

/// Parameters and evaluation controls for M(a,b,x) / U(a,b,x).
#[derive(Clone, Copy, Debug)]
pub struct HypergeometricParams {
    pub a: f64,
    pub b: f64,
    /// Relative tail tolerance for series truncation.
    pub series_tol: f64,
    /// Hard cap on the number of series terms.
    pub max_terms: usize,
}

impl HypergeometricParams {
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            series_tol: 1e-16,
            max_terms: 600,
        }
    }

    pub fn with_tol(a: f64, b: f64, series_tol: f64, max_terms: usize) -> Self {
        Self {
            a,
            b,
            series_tol,
            max_terms,
        }
    }

    fn shifted(&self, da: f64, db: f64) -> Self {
        Self {
            a: self.a + da,
            b: self.b + db,
            ..*self
        }
    }
}

fn is_near_integer(x: f64) -> bool {
    (x - x.round()).abs() < INT_TOL
}

fn is_nonpositive_integer(x: f64) -> bool {
    x < 0.5 && is_near_integer(x)
}

/// Rising factorial (x)_n = x (x+1) ... (x+n-1), with (x)_0 = 1.
pub fn pochhammer(x: f64, n: usize) -> f64 {
    let mut p = 1.0;
    for k in 0..n {
        p *= x + k as f64;
    }
    p
}

// Lanczos g=7, n=9 coefficients (GSL / Numerical Recipes set).
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// Gamma function by the Lanczos approximation, reflection for x < 1/2.
///
/// Relative error is below 1e-13 away from the poles at 0, -1, -2, ...
pub fn gamma(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut t = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            t += c / (x + i as f64);
        }
        let w = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * w.powf(x + 0.5) * (-w).exp() * t
    }
}

/// 1/Gamma(x); exactly zero at the poles x = 0, -1, -2, ...
pub fn recip_gamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// Kummer confluent hypergeometric function M(a,b,x) by power series.
///
/// The series is truncated once the running term stays below
/// `series_tol * |partial sum|` for three consecutive terms.
pub fn kummer_m(params: &HypergeometricParams, x: f64) -> Result<f64> {
    let HypergeometricParams {
        a,
        b,
        series_tol,
        max_terms,
    } = *params;
    if is_nonpositive_integer(b) {
        return Err(Error::InvalidParams(format!(
            "M(a,b,x) undefined for b = {b} (non-positive integer)"
        )));
    }
    if max_terms < 1 || series_tol <= 0.0 {
        return Err(Error::InvalidParams(
            "max_terms must be >= 1 and series_tol > 0".into(),
        ));
    }
    let mut sum = 1.0_f64;
    let mut term = 1.0_f64;
    let mut small_count = 0;
    for n in 0..max_terms {
        let nf = n as f64;
        term *= (a + nf) * x / ((b + nf) * (nf + 1.0));
        sum += term;
        if !sum.is_finite() {
            return Err(Error::SeriesTruncation {
                max_terms: n + 1,
                last_term: term,
            });
        }
        if term.abs() <= series_tol * sum.abs() {
            small_count += 1;
            if small_count >= 3 {
                return Ok(sum);
            }
        } else {
            small_count = 0;
        }
    }
    Err(Error::SeriesTruncation {
        max_terms,
        last_term: term,
    })
}

/// M'(a,b,x) via the recurrence (a/b) M(a+1,b+1,x).
pub fn kummer_m_derivative(params: &HypergeometricParams, x: f64) -> Result<f64> {
    let HypergeometricParams { a, b, .. } = *params;
    if b.abs() < INT_TOL {
        return Err(Error::InvalidParams("M'(a,b,x) requires b != 0".into()));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(a / b * kummer_m(&params.shifted(1.0, 1.0), x)?)
}

/// M''(a,b,x) by applying the derivative recurrence twice.
pub fn kummer_m_second_derivative(params: &HypergeometricParams, x: f64) -> Result<f64> {
    let HypergeometricParams { a, b, .. } = *params;
    if b.abs() < INT_TOL || (b + 1.0).abs() < INT_TOL {
        return Err(Error::InvalidParams(
            "M''(a,b,x) requires b, b+1 != 0".into(),
        ));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    if (a + 1.0).abs() < INT_TOL {
        return Ok(a / b * kummer_m_derivative(&params.shifted(1.0, 1.0), x)?);
    }
    Ok(a / b * (a + 1.0) / (b + 1.0) * kummer_m(&params.shifted(2.0, 2.0), x)?)
}

/// Terminating form U(-n, b, x) = (-1)^n sum_k C(n,k) (b+k)_{n-k} (-x)^k.
fn u_terminating(n: usize, b: f64, x: f64) -> f64 {
    let mut sum = 0.0;
    let mut binom = 1.0_f64;
    for k in 0..=n {
        sum += binom * pochhammer(b + k as f64, n - k) * (-x).powi(k as i32);
        binom *= (n - k) as f64 / (k + 1) as f64;
    }
    if n % 2 == 0 {
        sum
    } else {
        -sum
    }
}

/// Tricomi confluent hypergeometric function U(a,b,x) for x > 0.
///
/// Branches, in order of precedence:
/// - a = -n (n = 0, 1, ...): terminating polynomial;
/// - a = b-1-n: x^{1-b} times a terminating polynomial (Kummer transform);
/// - non-integer b: Gamma/M connection formula;
/// - remaining integer-b cases are the logarithmic regime and are rejected.
pub fn tricomi_u(params: &HypergeometricParams, x: f64) -> Result<f64> {
    let HypergeometricParams { a, b, .. } = *params;
    if x <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "U(a,b,x) requires x > 0, got {x}"
        )));
    }
    if is_nonpositive_integer(a) {
        let n = (-a).round() as usize;
        return Ok(u_terminating(n, b, x));
    }
    let shift = b - 1.0 - a;
    if shift > -INT_TOL && is_near_integer(shift) {
        // U(a,b,x) = x^{1-b} U(a-b+1, 2-b, x) with a-b+1 = -n.
        let n = shift.round().max(0.0) as usize;
        return Ok(x.powf(1.0 - b) * u_terminating(n, 2.0 - b, x));
    }
    if is_near_integer(b) {
        return Err(Error::Unsupported(format!(
            "U(a,b,x) with integer b = {b} is in the logarithmic regime"
        )));
    }
    let m1 = kummer_m(params, x)?;
    let m2 = kummer_m(
        &HypergeometricParams {
            a: a - b + 1.0,
            b: 2.0 - b,
            ..*params
        },
        x,
    )?;
    Ok(gamma(1.0 - b) * recip_gamma(a - b + 1.0) * m1
        + gamma(b - 1.0) * recip_gamma(a) * x.powf(1.0 - b) * m2)
}

/// U'(a,b,x) via the recurrence -a U(a+1,b+1,x).
pub fn tricomi_u_derivative(params: &HypergeometricParams, x: f64) -> Result<f64> {
    let a = params.a;
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(-a * tricomi_u(&params.shifted(1.0, 1.0), x)?)
}

/// U''(a,b,x) = a (a+1) U(a+2,b+2,x), the derivative recurrence applied twice.
pub fn tricomi_u_second_derivative(params: &HypergeometricParams, x: f64) -> Result<f64> {
    let a = params.a;
    if a == 0.0 || (a + 1.0).abs() < INT_TOL {
        return Ok(0.0);
    }
    Ok(a * (a + 1.0) * tricomi_u(&params.shifted(2.0, 2.0), x)?)
}

/// Regularity of U(a,b,.) at x = 0 for a >= 0, b >= 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum URegularity {
    /// Smooth up to 0 (a = 0, where U is constant 1).
    CInf,
    /// Continuous on [0,inf) but not C^1: terminating x^{1-b} family with b <= 1.
    C0NotC1,
    /// Continuous on [0,inf) because 0 < b < 1 in the generic branch; never C^1.
    C0OnlyIfBInUnitInterval,
    /// Not continuous up to 0 (the leading term is unbounded).
    NotC0,
}

impl URegularity {
    pub fn is_continuous(&self) -> bool {
        !matches!(self, URegularity::NotC0)
    }

    pub fn is_c1(&self) -> bool {
        matches!(self, URegularity::CInf)
    }

    pub fn token(&self) -> &'static str {
        match self {
            URegularity::CInf => "C_inf",
            URegularity::C0NotC1 => "C0_not_C1",
            URegularity::C0OnlyIfBInUnitInterval => "C0_only_if_b_in_(0,1)",
            URegularity::NotC0 => "not_C0",
        }
    }
}

impl std::fmt::Display for URegularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// Classify the boundary regularity of U(a,b,.) at x = 0.
///
/// Only a >= 0, b >= 0 are in scope.  `a = 0` is smooth; `a = b-1-n` for an
/// integer 0 <= n <= b-1 is the terminating family (continuous exactly when
/// b <= 1); the generic case is continuous exactly when 0 < b < 1 and is
/// never C^1.
pub fn classify_u_regularity(a: f64, b: f64) -> Result<URegularity> {
    if a < -INT_TOL || b < -INT_TOL {
        return Err(Error::Unsupported(format!(
            "regularity classification covers a >= 0, b >= 0 only (got a={a}, b={b})"
        )));
    }
    if a.abs() < INT_TOL {
        return Ok(URegularity::CInf);
    }
    let shift = b - 1.0 - a;
    if shift > -INT_TOL && is_near_integer(shift) {
        if b <= 1.0 + INT_TOL {
            return Ok(URegularity::C0NotC1);
        }
        return Ok(URegularity::NotC0);
    }
    if b > INT_TOL && b < 1.0 - INT_TOL {
        return Ok(URegularity::C0OnlyIfBInUnitInterval);
    }
    Ok(URegularity::NotC0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64, b: f64) -> HypergeometricParams {
        HypergeometricParams::new(a, b)
    }

    #[test]
    fn gamma_known_values() {
        assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((gamma(5.0) - 24.0).abs() < 1e-11);
        assert!((gamma(1.0) - 1.0).abs() < 1e-14);
        // Gamma(-0.5) = -2 sqrt(pi)
        assert!((gamma(-0.5) + 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert_eq!(recip_gamma(0.0), 0.0);
        assert_eq!(recip_gamma(-3.0), 0.0);
    }

    #[test]
    fn m_at_zero_is_one() {
        for (a, b) in [(1.0, 1.0), (0.5, 1.5), (2.0, 3.0), (-1.0, 0.7)] {
            assert_eq!(kummer_m(&p(a, b), 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn m_vanishing_a_collapses_series() {
        assert_eq!(kummer_m(&p(0.0, 1.0), 5.0).unwrap(), 1.0);
    }

    #[test]
    fn m_1_1_is_exponential() {
        // Independent oracle: direct summation of sum 1/n!.
        let mut oracle = 0.0;
        let mut term = 1.0;
        for n in 0..40 {
            oracle += term;
            term /= (n + 1) as f64;
        }
        let m = kummer_m(&p(1.0, 1.0), 1.0).unwrap();
        assert!((m - oracle).abs() < 1e-14, "M(1,1,1)={m} oracle={oracle}");
        for &x in &[0.25, 0.5, 1.7] {
            let m = kummer_m(&p(1.0, 1.0), x).unwrap();
            assert!((m - x.exp()).abs() < 1e-13 * x.exp());
        }
    }

    #[test]
    fn m_rejects_nonpositive_integer_b() {
        assert!(kummer_m(&p(1.0, 0.0), 0.5).is_err());
        assert!(kummer_m(&p(1.0, -2.0), 0.5).is_err());
    }

    #[test]
    fn m_derivative_recurrence() {
        assert_eq!(kummer_m_derivative(&p(0.0, 2.0), 3.0).unwrap(), 0.0);
        assert!((kummer_m_derivative(&p(1.0, 1.0), 0.0).unwrap() - 1.0).abs() < 1e-14);
        // Finite-difference oracle at x = 0.5.
        let h = 1e-5;
        let fd = (kummer_m(&p(1.0, 2.0), 0.5 + h).unwrap()
            - kummer_m(&p(1.0, 2.0), 0.5 - h).unwrap())
            / (2.0 * h);
        let d = kummer_m_derivative(&p(1.0, 2.0), 0.5).unwrap();
        assert!((d - fd).abs() < 1e-8, "d={d} fd={fd}");
    }

    #[test]
    fn m_satisfies_kummer_ode() {
        // -x M'' - (b-x) M' + a M = 0, residual below 1e-7 on (0, 2].
        for (a, b) in [(1.0, 1.0), (1.0, 2.0), (0.5, 1.5), (2.0, 3.0)] {
            for i in 1..=20 {
                let x = 0.1 * i as f64;
                let params = p(a, b);
                let m = kummer_m(&params, x).unwrap();
                let m1 = kummer_m_derivative(&params, x).unwrap();
                let m2 = kummer_m_second_derivative(&params, x).unwrap();
                let res = -x * m2 - (b - x) * m1 + a * m;
                assert!(res.abs() < 1e-7, "a={a} b={b} x={x} res={res:e}");
            }
        }
    }

    #[test]
    fn series_tol_halving_is_consistent() {
        // Halving series_tol changes the value by less than the previous tol.
        for &x in &[0.3, 1.1, 2.0] {
            let mut tol = 1e-8;
            for _ in 0..4 {
                let coarse =
                    kummer_m(&HypergeometricParams::with_tol(0.7, 1.3, tol, 600), x).unwrap();
                let fine =
                    kummer_m(&HypergeometricParams::with_tol(0.7, 1.3, tol / 2.0, 600), x).unwrap();
                assert!((coarse - fine).abs() <= tol * coarse.abs().max(1.0));
                tol /= 2.0;
            }
        }
    }

    #[test]
    fn truncation_error_reported() {
        let params = HypergeometricParams::with_tol(1.0, 1.0, 1e-16, 5);
        match kummer_m(&params, 30.0) {
            Err(Error::SeriesTruncation { last_term, .. }) => assert!(last_term != 0.0),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn u_constant_when_a_zero() {
        for &b in &[0.5, 1.0, 3.0, 7.3] {
            for &x in &[1e-3, 0.5, 2.0] {
                assert_eq!(tricomi_u(&p(0.0, b), x).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn u_terminating_limit_matches_pochhammer() {
        // U(-1,b,x) -> (-1)^1 (b)_1 = -b as x -> 0.
        for &b in &[0.5, 1.0, 2.5] {
            let lim = -pochhammer(b, 1);
            let mut prev = f64::INFINITY;
            for &x in &[1e-2, 1e-3, 1e-4] {
                let u = tricomi_u(&p(-1.0, b), x).unwrap();
                let err = (u - lim).abs();
                assert!(err < prev);
                prev = err;
            }
            // Exact polynomial: U(-1,b,x) = x - b.
            assert!((tricomi_u(&p(-1.0, b), 0.7).unwrap() - (0.7 - b)).abs() < 1e-14);
        }
    }

    #[test]
    fn u_connection_formula_leading_coefficient() {
        // For a = 0.5, b = 0.5: x^{b-1} (U - Gamma(1-b)/Gamma(a-b+1)) -> Gamma(b-1)/Gamma(a).
        let (a, b) = (0.5, 0.5);
        let constant = gamma(1.0 - b) * recip_gamma(a - b + 1.0);
        let target = gamma(b - 1.0) * recip_gamma(a);
        let s = |x: f64| x.powf(b - 1.0) * (tricomi_u(&p(a, b), x).unwrap() - constant);
        // The sub-leading gap is x^{1-b}; extrapolate with that power.
        let q = 1.0 - b;
        let ratio: f64 = 10.0;
        let extrap = (ratio.powf(q) * s(1e-4) - s(1e-3)) / (ratio.powf(q) - 1.0);
        assert!(
            (extrap - target).abs() < 1e-3 * target.abs(),
            "extrap={extrap} target={target}"
        );
    }

    #[test]
    fn u_rejects_logarithmic_integer_b() {
        assert!(matches!(
            tricomi_u(&p(0.7, 2.0), 0.5),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            tricomi_u(&p(0.7, 1.0), 0.5),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn u_derivative_recurrence() {
        for &x in &[0.3, 1.0] {
            assert_eq!(tricomi_u_derivative(&p(0.0, 1.7), x).unwrap(), 0.0);
        }
        // U'(-1, 0.5, x) = U(0, 1.5, x) = 1.
        assert_eq!(tricomi_u_derivative(&p(-1.0, 0.5), 0.4).unwrap(), 1.0);
        // Finite-difference oracle at x = 1.
        let h = 1e-5;
        let fd = (tricomi_u(&p(0.5, 0.3), 1.0 + h).unwrap()
            - tricomi_u(&p(0.5, 0.3), 1.0 - h).unwrap())
            / (2.0 * h);
        let d = tricomi_u_derivative(&p(0.5, 0.3), 1.0).unwrap();
        assert!((d - fd).abs() < 1e-6 * d.abs(), "d={d} fd={fd}");
    }

    #[test]
    fn u_satisfies_kummer_ode() {
        // Connection-formula regime, relative residual below 1e-6 on [0.1, 2].
        for (a, b) in [(0.7, 0.5), (1.3, 1.5), (0.5, 2.5)] {
            for i in 1..=20 {
                let x = 0.1 * i as f64;
                let params = p(a, b);
                let u = tricomi_u(&params, x).unwrap();
                let u1 = tricomi_u_derivative(&params, x).unwrap();
                let u2 = tricomi_u_second_derivative(&params, x).unwrap();
                let res = -x * u2 - (b - x) * u1 + a * u;
                let scale = u.abs().max(u1.abs()).max(1.0);
                assert!(res.abs() < 1e-6 * scale, "a={a} b={b} x={x} res={res:e}");
            }
        }
    }

    #[test]
    fn regularity_classification() {
        assert_eq!(classify_u_regularity(0.0, 3.0).unwrap(), URegularity::CInf);
        // a = 2, b = 1.5: generic branch with b > 1, not even continuous.
        assert_eq!(classify_u_regularity(2.0, 1.5).unwrap(), URegularity::NotC0);
        // a = 0.5, b = 0.5: continuous on [0,inf) but not C1.
        let c = classify_u_regularity(0.5, 0.5).unwrap();
        assert!(c.is_continuous() && !c.is_c1());
        assert_eq!(c, URegularity::C0OnlyIfBInUnitInterval);
        // Terminating family with b > 1 blows up like x^{1-b}.
        assert_eq!(classify_u_regularity(0.2, 1.2).unwrap(), URegularity::NotC0);
        assert!(classify_u_regularity(-1.0, 0.5).is_err());
        assert!(classify_u_regularity(0.5, -0.5).is_err());
    }
}
