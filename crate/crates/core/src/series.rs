//! Power-series representations of `K_s(z)` and of the fractional derivative
//! of `x^ν exp(-β x^α)`, with adaptive truncation.
//!
//! Every expansion here is a sum over `w_k(z) = (-1)^k V_k(z) / k!` times a
//! gamma ratio. The `w_k` are alternating polynomial sums that lose many
//! digits to cancellation, so they are always evaluated exactly (see
//! [`crate::dyadic`]); only the outer sum runs in floating point.

use std::collections::VecDeque;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::eval_integer_poly;
use crate::error::{Error, Result};
use crate::oracle::{k_oracle, IdentityId, VerificationRecord};
use crate::quadrature::QuadratureSpec;
use crate::special::{gamma_log, ln_pochhammer};
use crate::summation::NeumaierSum;
use crate::vk::{closed_m1_integers, AlphaParam, ScaledVkSequence};

/// Orders closer than this to zero are rejected (pole of `Γ(s)`).
pub const ORDER_POLE_THRESHOLD: f64 = 1e-10;

/// Tolerance asserted for the analytically forced `s = 1/2` adjudication row.
pub const M10_FORCED_TOL: f64 = 1e-9;

/// Tolerance used to label the informational adjudication rows.
pub const M10_REPORT_TOL: f64 = 1e-6;

/// Stopping rules for the outer sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// A term counts as negligible when `|term| <= rel_stop · |partial sum|`.
    pub rel_stop: f64,
    /// Number of successive negligible terms required to declare convergence.
    pub consecutive: usize,
    pub max_terms: usize,
    /// Number of strictly growing term magnitudes that marks divergence.
    pub divergence_window: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            rel_stop: 1e-14,
            consecutive: 3,
            max_terms: 200,
            divergence_window: 5,
        }
    }
}

impl TruncationPolicy {
    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms = max_terms;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_stop > 0.0 && self.rel_stop.is_finite()) {
            return Err(Error::domain(format!(
                "rel_stop must be positive, got {}",
                self.rel_stop
            )));
        }
        if self.consecutive == 0 || self.max_terms == 0 || self.divergence_window == 0 {
            return Err(Error::domain(
                "consecutive, max_terms and divergence_window must be positive",
            ));
        }
        Ok(())
    }
}

/// A truncated series value with its truncation metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesApproximation {
    pub value: f64,
    pub terms_used: usize,
    pub last_term_abs: f64,
    pub converged: bool,
    pub diverging: bool,
}

impl SeriesApproximation {
    /// Turns a diverging approximation into [`Error::SeriesDiverged`].
    pub fn require_not_diverging(self) -> Result<Self> {
        if self.diverging {
            Err(Error::SeriesDiverged {
                terms: self.terms_used,
                last_term_abs: self.last_term_abs,
            })
        } else {
            Ok(self)
        }
    }
}

/// Bessel order and argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderArg {
    pub s: f64,
    pub z: f64,
}

impl OrderArg {
    pub fn new(s: f64, z: f64) -> Result<Self> {
        check_arg(z)?;
        if !s.is_finite() {
            return Err(Error::domain(format!("order must be finite, got {s}")));
        }
        Ok(Self { s, z })
    }
}

struct Accumulator {
    policy: TruncationPolicy,
    sum: NeumaierSum,
    terms: usize,
    small_run: usize,
    recent: VecDeque<f64>,
    last_abs: f64,
}

enum Step {
    Continue,
    Converged,
}

impl Accumulator {
    fn new(policy: TruncationPolicy) -> Self {
        Self {
            policy,
            sum: NeumaierSum::new(),
            terms: 0,
            small_run: 0,
            recent: VecDeque::with_capacity(policy.divergence_window),
            last_abs: 0.0,
        }
    }

    fn push(&mut self, term: f64) -> Step {
        self.sum.add(term);
        self.terms += 1;
        self.last_abs = term.abs();
        if self.recent.len() == self.policy.divergence_window {
            self.recent.pop_front();
        }
        self.recent.push_back(self.last_abs);
        if self.last_abs <= self.policy.rel_stop * self.sum.value().abs() {
            self.small_run += 1;
        } else {
            self.small_run = 0;
        }
        if self.small_run >= self.policy.consecutive {
            Step::Converged
        } else {
            Step::Continue
        }
    }

    fn is_full(&self) -> bool {
        self.terms >= self.policy.max_terms
    }

    fn growing(&self) -> bool {
        self.recent.len() == self.policy.divergence_window
            && self
                .recent
                .iter()
                .zip(self.recent.iter().skip(1))
                .all(|(a, b)| b > a)
    }

    /// `scale` multiplies both the value and the reported last term.
    fn finish(self, scale: f64, converged: bool) -> SeriesApproximation {
        let diverging = !converged && self.growing();
        SeriesApproximation {
            value: scale * self.sum.value(),
            terms_used: self.terms,
            last_term_abs: (scale * self.last_abs).abs(),
            converged,
            diverging,
        }
    }
}

/// Runs `term(k)` for `k = 0, 1, ...` under `policy`. A term of `None` marks
/// exact termination (all further terms vanish) and is not counted.
fn run_series<T>(policy: TruncationPolicy, scale: f64, mut term: T) -> Result<SeriesApproximation>
where
    T: FnMut(usize) -> Result<Option<f64>>,
{
    policy.validate()?;
    let mut acc = Accumulator::new(policy);
    let mut converged = false;
    let mut k = 0;
    while !acc.is_full() {
        match term(k)? {
            None => {
                converged = true;
                break;
            }
            Some(t) => {
                if let Step::Converged = acc.push(t) {
                    converged = true;
                    break;
                }
            }
        }
        k += 1;
    }
    Ok(acc.finish(scale, converged))
}

fn check_arg(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "argument z must be positive and finite, got {z}"
        )))
    }
}

fn check_positive_order(s: f64) -> Result<()> {
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::domain(format!("order s must be positive, got {s}")));
    }
    if s < ORDER_POLE_THRESHOLD {
        return Err(Error::domain(format!(
            "order s = {s} is at the pole of Γ(s) in the prefactor"
        )));
    }
    Ok(())
}

fn check_not_half_integer(s: f64) -> Result<()> {
    if let Some(r) = crate::special::near_nonpositive_integer(0.5 - s) {
        return Err(Error::domain(format!(
            "Γ(1/2 - s) has a pole at s = {}; use the rearranged or regularised form",
            0.5 - r
        )));
    }
    Ok(())
}

/// `ln(2^{s-1} Γ(s) z^{-s} e^{-z})` for `s > 0`.
fn ln_canonical_prefactor(s: f64, z: f64) -> Result<f64> {
    Ok((s - 1.0) * std::f64::consts::LN_2 + gamma_log(s)?.log_abs - s * z.ln() - z)
}

/// `Γ(k + 1/2 - s) / Γ(k + 1/2 + s)` through log-gamma.
fn raw_gamma_ratio(k: usize, s: f64) -> Result<f64> {
    let kf = k as f64;
    let num = gamma_log(kf + 0.5 - s)?;
    let den = gamma_log(kf + 0.5 + s)?;
    Ok(f64::from(num.sign * den.sign) * (num.log_abs - den.log_abs).exp())
}

/// Fractional derivative of `x^ν exp(-β x^α)` of order `s` (lower limit 0)
/// by the `V_k^(α)` expansion
/// `x^{ν-s} Γ(ν+1) e^{-βx^α} Σ_k (-s)_k / Γ(k-s+ν+1) · w_k(βx^α)`.
pub fn general_expansion_m7(
    s: f64,
    nu: f64,
    alpha: AlphaParam,
    beta: f64,
    x: f64,
    policy: TruncationPolicy,
) -> Result<SeriesApproximation> {
    if !(nu > -1.0) || !nu.is_finite() {
        return Err(Error::domain(format!("ν must exceed -1, got {nu}")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain(format!("β must be positive, got {beta}")));
    }
    check_arg(x)?;
    if !s.is_finite() {
        return Err(Error::domain(format!("order must be finite, got {s}")));
    }
    let a = alpha.value();
    let zarg = beta * x.powf(a);
    let ln_scale = (nu - s) * x.ln() + gamma_log(nu + 1.0)?.log_abs - zarg;
    let mut w = ScaledVkSequence::new(alpha, zarg);
    run_series(policy, ln_scale.exp(), |k| {
        let wk = w.next().expect("infinite sequence");
        let (lp, sp) = ln_pochhammer(-s, k as u32);
        if sp == 0 {
            return Ok(Some(0.0));
        }
        let coeff = match gamma_log(k as f64 - s + nu + 1.0) {
            Ok(g) => f64::from(sp * g.sign) * (lp - g.log_abs).exp(),
            Err(_) => 0.0,
        };
        Ok(Some(coeff * wk))
    })
}

/// `K_s(z)` from the series with `V_k^(-1)(2z)` and the prefactor
/// `√π (2z)^{-s} e^{-z} Γ(2s) / Γ(1/2 - s)`, gamma ratios in log space.
pub fn k_series_m9(s: f64, z: f64, policy: TruncationPolicy) -> Result<SeriesApproximation> {
    check_positive_order(s)?;
    check_arg(z)?;
    check_not_half_integer(s)?;
    let g2s = gamma_log(2.0 * s)?;
    let ghalf = gamma_log(0.5 - s)?;
    let ln_pref =
        0.5 * std::f64::consts::PI.ln() - s * (2.0 * z).ln() - z + g2s.log_abs - ghalf.log_abs;
    let scale = f64::from(g2s.sign * ghalf.sign) * ln_pref.exp();
    let x = 2.0 * z;
    let mut fact = BigInt::from(1);
    run_series(policy, scale, |k| {
        if k > 0 {
            fact *= k;
        }
        let coeffs = closed_m1_integers(k as u32);
        let vk_over_fact = eval_integer_poly(&coeffs, &fact, x);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        Ok(Some(sign * raw_gamma_ratio(k, s)? * vk_over_fact))
    })
}

/// `Σ_{j=1}^{k} C(k-1, j-1) (-x)^j / j!`, exactly, rounded once.
fn inner_binomial_sum(k: u32, x: f64) -> f64 {
    // Integer numerators over the common denominator k!:
    // c_j = (-1)^j C(k-1, j-1) k!/j!.
    let ku = k as usize;
    let mut coeffs = vec![BigInt::from(0); ku + 1];
    let mut binom = BigInt::from(1); // C(k-1, j-1) at j = 1
    let mut binoms = Vec::with_capacity(ku);
    for j in 1..=k {
        binoms.push(binom.clone());
        if j < k {
            binom = binom * (k - j) / j;
        }
    }
    let mut falling = BigInt::from(1); // k!/j! at j = k
    for j in (1..=k).rev() {
        let c = &binoms[(j - 1) as usize] * &falling;
        coeffs[j as usize] = if j % 2 == 0 { c } else { -c };
        falling *= j;
    }
    // falling is now k!.
    eval_integer_poly(&coeffs, &falling, x)
}

/// `K_s(z) = 2^{s-1} Γ(s) z^{-s} e^{-z} [1 + Σ_{k>=1} (1/2-s)_k/(1/2+s)_k
/// Σ_j C(k-1,j-1) (-2z)^j / j!]`.
///
/// The Pochhammer ratio is accumulated as a product, so at `s = m + 1/2` it
/// becomes exactly zero at `k = m + 1` and the sum stops after `m + 1` terms.
pub fn k_series_rearranged(
    s: f64,
    z: f64,
    policy: TruncationPolicy,
) -> Result<SeriesApproximation> {
    check_positive_order(s)?;
    check_arg(z)?;
    let scale = ln_canonical_prefactor(s, z)?.exp();
    let x = 2.0 * z;
    let mut ratio = 1.0f64;
    run_series(policy, scale, |k| {
        if k == 0 {
            return Ok(Some(1.0));
        }
        let kf = (k - 1) as f64;
        ratio *= (0.5 - s + kf) / (0.5 + s + kf);
        if ratio == 0.0 {
            return Ok(None);
        }
        Ok(Some(ratio * inner_binomial_sum(k as u32, x)))
    })
}

/// `K_s(z)` from the series with `V_k^(-1/2)(z)` exactly as written, with
/// prefactor `2^{s-1} √π Γ(2s) / Γ(1/2 - s) z^{-s} e^{-z}` and ratios
/// `Γ(k+1/2-s) / Γ(k+1/2+s)`.
pub fn k_series_m10(s: f64, z: f64, policy: TruncationPolicy) -> Result<SeriesApproximation> {
    check_positive_order(s)?;
    check_arg(z)?;
    check_not_half_integer(s)?;
    let g2s = gamma_log(2.0 * s)?;
    let ghalf = gamma_log(0.5 - s)?;
    let ln_pref =
        (s - 1.0) * std::f64::consts::LN_2 + 0.5 * std::f64::consts::PI.ln() + g2s.log_abs
            - ghalf.log_abs
            - s * z.ln()
            - z;
    let scale = f64::from(g2s.sign * ghalf.sign) * ln_pref.exp();
    let mut w = ScaledVkSequence::new(AlphaParam::rational(-1, 2)?, z);
    run_series(policy, scale, |k| {
        let wk = w.next().expect("infinite sequence");
        Ok(Some(raw_gamma_ratio(k, s)? * wk))
    })
}

/// The same series with the gamma factors folded by the duplication formula:
/// `2^{3s-2} Γ(s) z^{-s} e^{-z} Σ_k (1/2-s)_k/(1/2+s)_k w_k^(-1/2)(z)`.
/// Total at half-integer `s`, where it terminates.
pub fn k_series_m10_regularized(
    s: f64,
    z: f64,
    policy: TruncationPolicy,
) -> Result<SeriesApproximation> {
    check_positive_order(s)?;
    check_arg(z)?;
    let ln_pref = (3.0 * s - 2.0) * std::f64::consts::LN_2 + gamma_log(s)?.log_abs - s * z.ln() - z;
    let mut w = ScaledVkSequence::new(AlphaParam::rational(-1, 2)?, z);
    let mut ratio = 1.0f64;
    run_series(policy, ln_pref.exp(), |k| {
        if k > 0 {
            let kf = (k - 1) as f64;
            ratio *= (0.5 - s + kf) / (0.5 + s + kf);
            if ratio == 0.0 {
                return Ok(None);
            }
        }
        let wk = w.next().expect("infinite sequence");
        Ok(Some(ratio * wk))
    })
}

/// The `V_k^(-1/2)` series rederived from the fractional derivative of
/// `x^{s-1/2} exp(-β/√x)`:
/// `2^{s-1} Γ(s) z^{-s} e^{-z} Σ_k (1/2-s)_k/(1/2)_k w_k^(-1/2)(z)`.
/// It coincides with [`k_series_m10_regularized`] only at `s = 1/2`.
pub fn k_series_m10_corrected(
    s: f64,
    z: f64,
    policy: TruncationPolicy,
) -> Result<SeriesApproximation> {
    check_positive_order(s)?;
    check_arg(z)?;
    let scale = ln_canonical_prefactor(s, z)?.exp();
    let mut w = ScaledVkSequence::new(AlphaParam::rational(-1, 2)?, z);
    let mut ratio = 1.0f64;
    run_series(policy, scale, |k| {
        if k > 0 {
            let kf = (k - 1) as f64;
            ratio *= (0.5 - s + kf) / (0.5 + kf);
            if ratio == 0.0 {
                return Ok(None);
            }
        }
        let wk = w.next().expect("infinite sequence");
        Ok(Some(ratio * wk))
    })
}

/// Front-door evaluator: `K_s = K_{-s}`, then the rearranged series.
pub fn k_mcdonald(s: f64, z: f64, policy: TruncationPolicy) -> Result<SeriesApproximation> {
    if !s.is_finite() {
        return Err(Error::domain(format!("order must be finite, got {s}")));
    }
    if s.abs() < ORDER_POLE_THRESHOLD {
        return Err(Error::domain(
            "order s = 0 hits the pole of Γ(s); K_0 is not representable by this series",
        ));
    }
    k_series_rearranged(s.abs(), z, policy)
}

/// Compares the regularised `V_k^(-1/2)` series with the quadrature oracle on
/// `grid`. Only the `s = 1/2` rows are asserted; the rest are reported.
pub fn adjudicate_m10(grid: &[OrderArg], policy: TruncationPolicy) -> Vec<VerificationRecord> {
    let q = QuadratureSpec::default();
    grid.par_iter()
        .map(|p| {
            let mut params = std::collections::BTreeMap::new();
            params.insert("s".to_string(), p.s);
            params.insert("z".to_string(), p.z);
            let forced = (p.s - 0.5).abs() < 1e-15;
            let tol = if forced {
                M10_FORCED_TOL
            } else {
                M10_REPORT_TOL
            };
            let series = k_series_m10_regularized(p.s, p.z, policy);
            let oracle = k_oracle(p.s, p.z, &q);
            let (lhs, rhs, note) = match (series, oracle) {
                (Ok(a), Ok(b)) => {
                    let mut note = format!("terms={} converged={}", a.terms_used, a.converged);
                    if let Ok(c) = k_series_m10_corrected(p.s, p.z, policy) {
                        note.push_str(&format!(
                            " rederived={:.16e} rederived_rel_dev={:.3e} rederived_converged={}",
                            c.value,
                            (c.value - b).abs() / b.abs(),
                            c.converged
                        ));
                    }
                    (a.value, b, note)
                }
                (Err(e), Ok(b)) => (f64::NAN, b, format!("series: {e}")),
                (Ok(a), Err(e)) => (a.value, f64::NAN, format!("oracle: {e}")),
                (Err(e1), Err(e2)) => (f64::NAN, f64::NAN, format!("series: {e1}; oracle: {e2}")),
            };
            VerificationRecord::new(IdentityId::M10Adj, params, lhs, rhs, tol, forced, note)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    fn policy() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn half_integer_closed_forms() {
        let r = k_series_rearranged(0.5, 1.0, policy()).unwrap();
        assert!(rel(r.value, (PI / 2.0).sqrt() / E) < 1e-15);
        assert_eq!(r.terms_used, 1);
        assert!(r.converged);

        let r = k_series_rearranged(1.5, 2.0, policy()).unwrap();
        assert!(rel(r.value, (PI / 4.0).sqrt() * (-2.0f64).exp() * 1.5) < 1e-14);
        assert_eq!(r.terms_used, 2);

        let r = k_series_rearranged(2.5, 1.0, policy()).unwrap();
        assert!(rel(r.value, 7.0 * (PI / 2.0).sqrt() / E) < 1e-14);
        assert_eq!(r.terms_used, 3);
    }

    #[test]
    fn m9_rejects_half_integers_and_matches_rearranged() {
        assert!(matches!(
            k_series_m9(0.5, 1.0, policy()),
            Err(Error::Domain(_))
        ));
        let a = k_series_m9(0.7, 1.3, policy()).unwrap();
        let b = k_series_rearranged(0.7, 1.3, policy()).unwrap();
        assert_eq!(a.terms_used, b.terms_used);
        assert!(rel(a.value, b.value) < 1e-12, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn m10_regularized_first_term() {
        let r = k_series_m10_regularized(0.5, 1.0, policy()).unwrap();
        assert_eq!(r.terms_used, 1);
        assert!(rel(r.value, (PI / 2.0).sqrt() / E) < 1e-15);
        let r = k_series_m10_regularized(1.5, 2.0, policy()).unwrap();
        assert_eq!(r.terms_used, 2);
        assert!(r.value.is_finite());
    }

    #[test]
    fn m10_raw_matches_regularized_off_half_integers() {
        let a = k_series_m10(0.7, 1.0, policy()).unwrap();
        let b = k_series_m10_regularized(0.7, 1.0, policy()).unwrap();
        assert!(a.value.is_finite());
        assert!(rel(a.value, b.value) < 1e-12);
        assert!(matches!(
            k_series_m10(1.5, 1.0, policy()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn m10_corrected_half_integers() {
        for (s, z) in [(0.5, 1.0), (1.5, 2.0), (2.5, 1.0), (4.5, 0.3)] {
            let c = k_series_m10_corrected(s, z, policy()).unwrap();
            let r = k_series_rearranged(s, z, policy()).unwrap();
            assert_eq!(c.terms_used, r.terms_used);
            assert!(rel(c.value, r.value) < 1e-13, "s={s} z={z}");
        }
    }

    #[test]
    fn front_door_symmetry_and_pole() {
        let a = k_mcdonald(-0.5, 1.0, policy()).unwrap();
        let b = k_mcdonald(0.5, 1.0, policy()).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            k_mcdonald(0.0, 1.0, policy()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            k_mcdonald(1.0, 0.0, policy()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn m7_integer_order_is_classical() {
        let alpha = AlphaParam::new(1.0).unwrap();
        let r = general_expansion_m7(1.0, 2.0, alpha, 1.0, 1.0, policy()).unwrap();
        assert!(rel(r.value, 1.0 / E) < 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn m7_small_beta_is_power_rule() {
        let alpha = AlphaParam::new(-1.0).unwrap();
        let r = general_expansion_m7(-0.4, 1.2, alpha, 1e-8, 1.0, policy()).unwrap();
        let want = crate::special::gamma(2.2).unwrap() / crate::special::gamma(2.6).unwrap();
        assert!(rel(r.value, want) < 1e-6);
        assert!(general_expansion_m7(-0.4, -1.0, alpha, 1.0, 1.0, policy()).is_err());
    }

    #[test]
    fn metadata_respects_cap() {
        let p = policy().with_max_terms(7);
        let r = k_series_rearranged(0.25, 1.0, p).unwrap();
        assert_eq!(r.terms_used, 7);
        assert!(!r.converged);
        assert!(!(r.converged && r.diverging));
    }

    #[test]
    fn divergence_flag_and_error() {
        // Rapidly growing magnitudes: z large makes early w_k grow.
        let p = policy().with_max_terms(6);
        let r = run_series(p, 1.0, |k| Ok(Some(2f64.powi(k as i32)))).unwrap();
        assert!(r.diverging);
        assert!(!r.converged);
        assert!(matches!(
            r.require_not_diverging(),
            Err(Error::SeriesDiverged { terms: 6, .. })
        ));
    }

    #[test]
    fn invalid_policy_rejected() {
        let mut p = policy();
        p.consecutive = 0;
        assert!(k_series_rearranged(1.2, 1.0, p).is_err());
    }

    #[test]
    fn inner_sum_small_cases() {
        // k = 1: -x; k = 2: -x + x²/2.
        assert_eq!(inner_binomial_sum(1, 3.0), -3.0);
        assert_eq!(inner_binomial_sum(2, 3.0), -3.0 + 4.5);
    }

    #[test]
    fn adjudication_forced_row_and_empty_grid() {
        assert!(adjudicate_m10(&[], policy()).is_empty());
        let grid = [
            OrderArg::new(0.5, 1.0).unwrap(),
            OrderArg::new(1.5, 2.0).unwrap(),
        ];
        let recs = adjudicate_m10(&grid, policy());
        assert_eq!(recs.len(), 2);
        assert!(recs[0].asserted && recs[0].pass, "{:?}", recs[0]);
        assert!(!recs[1].asserted);
        assert_eq!(recs[1].params["s"], 1.5);
    }
}
