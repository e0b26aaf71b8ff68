//! Riemann–Liouville differintegrals and closed-form differentiation rules.
//!
//! Negative orders are evaluated as the kernel integral
//! `(1/Γ(-s)) ∫_a^x (x-t)^{-s-1} f(t) dt`. Non-negative orders compose
//! `n = ⌊s⌋ + 1` classical derivatives (central finite differences) with the
//! integral of order `s - n`. The closed-form rules (power, exponential,
//! logarithm) are the preferred route; the quadrature route is kept as an
//! independent check on them.

use crate::error::{Error, Result};
use crate::quadrature::{integrate_power_kernel, QuadratureSpec};
use crate::series::{SeriesApproximation, TruncationPolicy};
use crate::special::{
    digamma, gamma_log, gen_binomial, lower_incomplete_gamma, near_nonpositive_integer,
    EULER_GAMMA, POLE_THRESHOLD,
};
use crate::summation::NeumaierSum;

/// Differintegration order `s`; negative means integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() {
            Ok(Self(s))
        } else {
            Err(Error::domain(format!("order must be finite, got {s}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The order as a non-negative integer, if it is one (within the pole
    /// threshold).
    pub fn as_nonneg_integer(self) -> Option<u32> {
        let r = self.0.round();
        (r >= 0.0 && (self.0 - r).abs() < POLE_THRESHOLD && r <= f64::from(u32::MAX))
            .then_some(r as u32)
    }
}

/// Boundary point `a` and evaluation point `x`, with `a < x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySetup {
    a: f64,
    x: f64,
}

impl BoundarySetup {
    pub fn new(a: f64, x: f64) -> Result<Self> {
        if a.is_finite() && x.is_finite() && a < x {
            Ok(Self { a, x })
        } else {
            Err(Error::domain(format!(
                "boundary point must lie below the evaluation point (a = {a}, x = {x})"
            )))
        }
    }

    /// Zero boundary point, as used by the exponential and logarithm rules.
    pub fn origin(x: f64) -> Result<Self> {
        Self::new(0.0, x)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn span(&self) -> f64 {
        self.x - self.a
    }
}

/// Riemann–Liouville integral of order `s < 0`.
pub fn rl_integral<F: Fn(f64) -> f64>(
    f: F,
    order: FractionalOrder,
    bounds: BoundarySetup,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let s = order.value();
    if !(s < 0.0) {
        return Err(Error::domain(format!(
            "Riemann-Liouville integral needs s < 0, got {s}"
        )));
    }
    let kernel_exponent = -s - 1.0;
    let integral = integrate_power_kernel(&f, bounds.a(), bounds.x(), kernel_exponent, spec)?;
    let g = gamma_log(-s)?;
    Ok(integral.value * f64::from(g.sign) * (-g.log_abs).exp())
}

/// Finite-difference step used for the `n`-th classical derivative in
/// [`rl_derivative`]. `n = 1` uses `max(1e-5, 1e-5 |x - a|)`; higher orders
/// widen the step to keep quadrature noise (amplified by `h^-n`) in check.
pub fn composition_step(n: u32, span: f64) -> f64 {
    let base = match n {
        0 | 1 => 1e-5,
        n => 10f64.powf(-16.0 / (f64::from(n) + 2.0)),
    };
    base * span.abs().max(1.0)
}

/// Fractional derivative of order `s >= 0` by composition with
/// `n = ⌊s⌋ + 1` classical derivatives.
pub fn rl_derivative<F: Fn(f64) -> f64>(
    f: F,
    order: FractionalOrder,
    bounds: BoundarySetup,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let s = order.value();
    if s < 0.0 {
        return Err(Error::domain(format!(
            "composition derivative needs s >= 0, got {s}"
        )));
    }
    let n = s.floor() as u32 + 1;
    rl_derivative_with_n(f, order, bounds, spec, n)
}

/// [`rl_derivative`] with an explicit number `n > s` of classical derivatives.
pub fn rl_derivative_with_n<F: Fn(f64) -> f64>(
    f: F,
    order: FractionalOrder,
    bounds: BoundarySetup,
    spec: &QuadratureSpec,
    n: u32,
) -> Result<f64> {
    let s = order.value();
    if !(f64::from(n) > s) || n == 0 {
        return Err(Error::domain(format!(
            "need n > s classical derivatives (n = {n}, s = {s})"
        )));
    }
    let inner = FractionalOrder::new(s - f64::from(n))?;
    let h = composition_step(n, bounds.span());
    let half_width = 0.5 * f64::from(n) * h;
    if bounds.x() - half_width <= bounds.a() {
        return Err(Error::domain(format!(
            "evaluation point {} too close to boundary {} for step {h}",
            bounds.x(),
            bounds.a()
        )));
    }
    // Central n-th difference: Σ_i (-1)^i C(n, i) F(x + (n/2 - i) h) / h^n.
    let mut acc = NeumaierSum::new();
    let mut binom = 1.0;
    for i in 0..=n {
        if i > 0 {
            binom *= f64::from(n - i + 1) / f64::from(i);
        }
        let y = bounds.x() + (0.5 * f64::from(n) - f64::from(i)) * h;
        let value = rl_integral(&f, inner, BoundarySetup::new(bounds.a(), y)?, spec)?;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(sign * binom * value);
    }
    Ok(acc.value() / h.powi(n as i32))
}

/// `Γ(p+1)/Γ(p+1-s) (x-a)^{p-s}`, the derivative of `(x-a)^p` of any order.
/// Returns exactly zero when `p + 1 - s` is a pole of `Γ`.
pub fn power_rule(order: FractionalOrder, p: f64, bounds: BoundarySetup) -> Result<f64> {
    if !(p > -1.0) {
        return Err(Error::domain(format!("power rule needs p > -1, got {p}")));
    }
    let s = order.value();
    let q = p + 1.0 - s;
    if near_nonpositive_integer(q).is_some() {
        return Ok(0.0);
    }
    let num = gamma_log(p + 1.0)?;
    let den = gamma_log(q)?;
    let log_abs = num.log_abs - den.log_abs + (p - s) * bounds.span().ln();
    Ok(f64::from(num.sign * den.sign) * log_abs.exp())
}

/// `∂^s exp(βx) = β^s exp(βx) γ(-s, βx)/Γ(-s)` with boundary point zero.
/// Non-negative integer orders return the classical `β^n exp(βx)`.
pub fn exp_rule(order: FractionalOrder, beta: f64, x: f64) -> Result<f64> {
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::domain(format!(
            "exp rule needs finite beta != 0, got {beta}"
        )));
    }
    if !(x > 0.0) {
        return Err(Error::domain(format!("exp rule needs x > 0, got {x}")));
    }
    if let Some(n) = order.as_nonneg_integer() {
        return Ok(beta.powi(n as i32) * (beta * x).exp());
    }
    let s = order.value();
    let y = beta * x;
    if !(y > 0.0) {
        return Err(Error::domain(format!(
            "exp rule at non-integer order needs beta x > 0, got {y}"
        )));
    }
    let lower = lower_incomplete_gamma(-s, y)?;
    let g = gamma_log(-s)?;
    let scale = (s * beta.ln() + y - g.log_abs).exp() * f64::from(g.sign);
    Ok(scale * lower)
}

/// `∂^s ln x = x^{-s}/Γ(1-s) [ln x - ψ(-s) - C + 1/s]` with boundary point
/// zero. Positive integer orders return `(-1)^{n-1} (n-1)! / x^n`; `s = 0` is
/// the identity and returns `ln x`.
pub fn log_rule(order: FractionalOrder, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("log rule needs x > 0, got {x}")));
    }
    let s = order.value();
    if s == 0.0 {
        return Ok(x.ln());
    }
    if let Some(n) = order.as_nonneg_integer() {
        if n == 0 {
            return Err(Error::domain(format!(
                "log rule is singular at order {s} (too close to 0 for the 1/s term)"
            )));
        }
        let log_fact = libm::lgamma(f64::from(n));
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        return Ok(sign * (log_fact - f64::from(n) * x.ln()).exp());
    }
    let g = gamma_log(1.0 - s)?;
    let bracket = x.ln() - digamma(-s)? - EULER_GAMMA + 1.0 / s;
    Ok(f64::from(g.sign) * (-s * x.ln() - g.log_abs).exp() * bracket)
}

/// Truncated fractional Leibniz sum
/// `Σ_{j=0}^{N} C(s, j) ∂^{s-j} f · ∂^j g`.
///
/// `g_derivative(j)` supplies the classical `j`-th derivative of `g` at `x`
/// and `f_fractional(order)` the fractional derivative of `f` of that order.
/// Terms whose `g` derivative is exactly zero are skipped without evaluating
/// `f_fractional`.
pub fn leibniz_series<G, F>(
    g_derivative: G,
    f_fractional: F,
    order: FractionalOrder,
    n_terms: u32,
) -> Result<SeriesApproximation>
where
    G: Fn(u32) -> Result<f64>,
    F: Fn(f64) -> Result<f64>,
{
    let policy = TruncationPolicy::default();
    let s = order.value();
    let mut acc = NeumaierSum::new();
    let mut last_term_abs = 0.0;
    let mut terms_used = 0usize;
    let mut small_run = 0usize;
    let mut converged = false;
    for j in 0..=n_terms {
        let dg = g_derivative(j)?;
        terms_used += 1;
        let term = if dg == 0.0 {
            0.0
        } else {
            gen_binomial(s, j) * f_fractional(s - f64::from(j))? * dg
        };
        if term != 0.0 || j == 0 {
            acc.add(term);
        }
        last_term_abs = term.abs();
        if last_term_abs <= policy.rel_stop * acc.value().abs() {
            small_run += 1;
            if small_run >= policy.consecutive {
                converged = true;
            }
        } else {
            small_run = 0;
            converged = false;
        }
    }
    Ok(SeriesApproximation {
        value: acc.value(),
        terms_used,
        last_term_abs,
        converged,
        diverging: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    fn q() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn ord(s: f64) -> FractionalOrder {
        FractionalOrder::new(s).unwrap()
    }

    #[test]
    fn rl_integral_examples() {
        let v = rl_integral(
            |_| 1.0,
            ord(-1.0),
            BoundarySetup::new(0.0, 2.0).unwrap(),
            &q(),
        )
        .unwrap();
        assert!(rel(v, 2.0) < 1e-12);

        let v = rl_integral(
            |t| t,
            ord(-0.5),
            BoundarySetup::new(0.0, 1.0).unwrap(),
            &q(),
        )
        .unwrap();
        assert!(rel(v, 4.0 / (3.0 * PI.sqrt())) < 1e-10);

        // (t-1)^2 from a = 1: Γ(3)/Γ(3.3)
        let v = rl_integral(
            |t| (t - 1.0) * (t - 1.0),
            ord(-0.3),
            BoundarySetup::new(1.0, 2.0).unwrap(),
            &q(),
        )
        .unwrap();
        let want = 2.0 / libm::tgamma(3.3);
        assert!(rel(v, want) < 1e-10);
    }

    #[test]
    fn rl_integral_domain_errors() {
        assert!(BoundarySetup::new(1.0, 1.0).is_err());
        assert!(BoundarySetup::new(2.0, 1.0).is_err());
        let b = BoundarySetup::new(0.0, 1.0).unwrap();
        assert!(matches!(
            rl_integral(|t| t, ord(0.0), b, &q()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            rl_integral(|t| t, ord(0.5), b, &q()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rl_derivative_examples() {
        let b = BoundarySetup::new(0.0, 1.0).unwrap();
        let v = rl_derivative(|t| t, ord(0.5), b, &q()).unwrap();
        assert!(rel(v, 2.0 / PI.sqrt()) < 1e-6, "{v}");

        let b = BoundarySetup::new(0.0, 3.0).unwrap();
        let v = rl_derivative(|t| t * t, ord(1.0), b, &q()).unwrap();
        assert!(rel(v, 6.0) < 1e-5, "{v}");
    }

    #[test]
    fn rl_derivative_of_exponential_matches_exp_rule() {
        let b = BoundarySetup::origin(1.0).unwrap();
        let via_quadrature = rl_derivative(f64::exp, ord(0.5), b, &q()).unwrap();
        let closed = exp_rule(ord(0.5), 1.0, 1.0).unwrap();
        assert!(
            rel(via_quadrature, closed) < 1e-6,
            "{via_quadrature} vs {closed}"
        );
    }

    #[test]
    fn power_rule_examples() {
        let b = BoundarySetup::new(0.0, 2.0).unwrap();
        assert!(rel(power_rule(ord(2.0), 3.0, b).unwrap(), 12.0) < 1e-14);
        let b = BoundarySetup::new(0.0, 1.0).unwrap();
        assert!(rel(power_rule(ord(0.5), 1.0, b).unwrap(), 2.0 / PI.sqrt()) < 1e-14);
        for x in [0.5, 1.0, 7.0] {
            let b = BoundarySetup::new(0.0, x).unwrap();
            assert_eq!(power_rule(ord(2.0), 1.0, b).unwrap(), 0.0);
        }
        assert!(power_rule(ord(0.5), -1.0, b).is_err());
    }

    #[test]
    fn exp_rule_examples() {
        assert!(rel(exp_rule(ord(1.0), 2.0, 0.5).unwrap(), 2.0 * E) < 1e-15);
        assert!(rel(exp_rule(ord(0.0), 1.0, 1.0).unwrap(), E) < 1e-15);
        // s = -1: e γ(1, 1) = e - 1 = ∫_0^1 e^t dt
        let closed = exp_rule(ord(-1.0), 1.0, 1.0).unwrap();
        assert!(rel(closed, E - 1.0) < 1e-14);
        let quad = rl_integral(
            f64::exp,
            ord(-1.0),
            BoundarySetup::origin(1.0).unwrap(),
            &q(),
        )
        .unwrap();
        assert!(rel(closed, quad) < 1e-12);
        assert!(exp_rule(ord(0.5), -1.0, 1.0).is_err());
        assert!(exp_rule(ord(0.5), 0.0, 1.0).is_err());
    }

    #[test]
    fn log_rule_examples() {
        assert!(rel(log_rule(ord(1.0), 2.0).unwrap(), 0.5) < 1e-15);
        assert!(rel(log_rule(ord(2.0), 1.0).unwrap(), -1.0) < 1e-15);
        assert!(rel(log_rule(ord(-1.0), 1.0).unwrap(), -1.0) < 1e-14);
        let quad = rl_integral(
            f64::ln,
            ord(-1.0),
            BoundarySetup::origin(1.0).unwrap(),
            &q(),
        )
        .unwrap();
        assert!(rel(quad, -1.0) < 1e-9);
        assert_eq!(log_rule(ord(0.0), 3.0).unwrap(), 3f64.ln());
        assert!(log_rule(ord(1e-13), 3.0).is_err());
        assert!(log_rule(ord(0.5), 0.0).is_err());
    }

    #[test]
    fn log_rule_matches_quadrature_at_fractional_order() {
        let b = BoundarySetup::origin(2.0).unwrap();
        for s in [-0.3, -0.75, -1.6] {
            let closed = log_rule(ord(s), 2.0).unwrap();
            let quad = rl_integral(f64::ln, ord(s), b, &q()).unwrap();
            assert!(rel(closed, quad) < 1e-8, "s = {s}: {closed} vs {quad}");
        }
    }

    #[test]
    fn leibniz_with_constant_g_is_single_term() {
        let f_frac =
            |o: f64| power_rule(FractionalOrder::new(o)?, 1.5, BoundarySetup::origin(0.8)?);
        let g = |j: u32| Ok(if j == 0 { 1.0 } else { 0.0 });
        let series = leibniz_series(g, f_frac, ord(0.37), 20).unwrap();
        let direct = f_frac(0.37).unwrap();
        assert_eq!(series.value.to_bits(), direct.to_bits());
    }

    #[test]
    fn leibniz_reproduces_integral_of_t() {
        // f ≡ 1, g(t) = t, s = -1: x·x - x²/2 = x²/2
        let x = 1.7;
        let f_frac = |o: f64| power_rule(FractionalOrder::new(o)?, 0.0, BoundarySetup::origin(x)?);
        let g = |j: u32| {
            Ok(match j {
                0 => x,
                1 => 1.0,
                _ => 0.0,
            })
        };
        let series = leibniz_series(g, f_frac, ord(-1.0), 10).unwrap();
        assert!(rel(series.value, x * x / 2.0) < 1e-15);
        assert!(series.converged);
        let quad = rl_integral(|t| t, ord(-1.0), BoundarySetup::origin(x).unwrap(), &q()).unwrap();
        assert!(rel(series.value, quad) < 1e-12);
    }
}
