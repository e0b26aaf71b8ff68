//! The polynomials `V_k^(α)` defined by
//! `V_k^(α)(β x^α) = x^k exp(β x^α) d^k/dx^k exp(-β x^α)`.
//!
//! Three independent constructions are provided:
//!
//! * the explicit coefficient sum
//!   `A_kj = (-1)^k Σ_i (-1)^i / (i! (j-i)!) · (-αi)_k`,
//! * the closed form for `α = -1`,
//!   `A_kj = (-1)^{k+j} k! (k-1)! / ((k-j)! j! (j-1)!)`,
//! * the recurrence `V_{k+1} = αz V_k' - (k + αz) V_k`, `V_0 = 1`, obtained
//!   by differentiating the definition once more.
//!
//! The rising factorial `(-αi)_k` replaces the ratio `Γ(k-αi)/Γ(-αi)`; it is
//! zero for `i = 0, k >= 1`, which is the reciprocal-gamma value of the
//! degenerate summand.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::dyadic::{binomial, eval_integer_poly, factorial};
use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

/// Degree up to which the rational-α recurrence stays in exact arithmetic.
pub const EXACT_RECURRENCE_MAX_K: u32 = 25;

/// Polynomial with real coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Number of stored coefficients minus one.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc.mul_add(z, c))
    }
}

/// Polynomial with exact rational coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPolynomial {
    coeffs: Vec<BigRational>,
}

impl ExactPolynomial {
    pub fn new(coeffs: Vec<BigRational>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integer())
    }

    pub fn to_f64(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .map(|c| c.to_f64().unwrap_or(f64::NAN))
                .collect(),
        )
    }

    /// Exact value at `z`, rounded once.
    pub fn eval(&self, z: f64) -> f64 {
        let den = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let nums: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| c.numer() * (&den / c.denom()))
            .collect();
        eval_integer_poly(&nums, &den, z)
    }
}

/// The parameter α (non-zero). Values given as doubles that equal the double
/// nearest to `p/q` for some `q <= 64` are also recorded exactly as `p/q`,
/// which enables the exact-arithmetic paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaParam {
    value: f64,
    exact: Option<Ratio<i64>>,
}

impl AlphaParam {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha == 0.0 {
            return Err(Error::domain(format!(
                "alpha must be finite and non-zero, got {alpha}"
            )));
        }
        let exact = (1..=64i64).find_map(|q| {
            let p = (alpha * q as f64).round();
            (p.abs() < 1e15 && p / q as f64 == alpha).then(|| Ratio::new(p as i64, q))
        });
        Ok(Self {
            value: alpha,
            exact,
        })
    }

    pub fn rational(p: i64, q: i64) -> Result<Self> {
        if q == 0 || p == 0 {
            return Err(Error::domain(format!(
                "alpha = {p}/{q} must be finite and non-zero"
            )));
        }
        let r = Ratio::new(p, q);
        Ok(Self {
            value: *r.numer() as f64 / *r.denom() as f64,
            exact: Some(r),
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<Ratio<i64>> {
        self.exact
    }

    fn exact_big(&self) -> Option<BigRational> {
        self.exact
            .map(|r| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom())))
    }
}

/// Coefficients from the explicit sum. Rational α is summed exactly and
/// rounded once; the alternating sum loses about `k` digits in floating
/// point. Other α use rising products and compensated summation in double
/// precision.
pub fn vk_coeffs_sum(alpha: AlphaParam, k: u32) -> Polynomial {
    match vk_coeffs_sum_exact(alpha, k) {
        Ok(p) => p.to_f64(),
        Err(_) => vk_coeffs_sum_float(alpha, k),
    }
}

/// The explicit sum evaluated entirely in double precision.
pub fn vk_coeffs_sum_float(alpha: AlphaParam, k: u32) -> Polynomial {
    let a = alpha.value();
    let mut inv_fact = vec![1.0f64; k as usize + 1];
    for i in 1..=k as usize {
        inv_fact[i] = inv_fact[i - 1] / i as f64;
    }
    let rising: Vec<f64> = (0..=k)
        .map(|i| (0..k).map(|m| -a * f64::from(i) + f64::from(m)).product())
        .collect();
    let parity_k = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let coeffs = (0..=k as usize)
        .map(|j| {
            let mut acc = NeumaierSum::new();
            for i in 0..=j {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                acc.add(sign * inv_fact[i] * inv_fact[j - i] * rising[i]);
            }
            parity_k * acc.value()
        })
        .collect();
    Polynomial::new(coeffs)
}

/// Coefficients from the explicit sum in exact rational arithmetic.
pub fn vk_coeffs_sum_exact(alpha: AlphaParam, k: u32) -> Result<ExactPolynomial> {
    let a = alpha
        .exact_big()
        .ok_or_else(|| Error::domain("exact coefficients need a rational alpha"))?;
    let one = BigRational::one();
    let rising: Vec<BigRational> = (0..=k)
        .map(|i| {
            let base = -(&a * BigRational::from_integer(BigInt::from(i)));
            (0..k).fold(one.clone(), |acc, m| {
                acc * (&base + BigRational::from_integer(BigInt::from(m)))
            })
        })
        .collect();
    let coeffs = (0..=k)
        .map(|j| {
            let mut acc = BigRational::zero();
            for i in 0..=j {
                let denom = factorial(i) * factorial(j - i);
                let term = &rising[i as usize] / BigRational::from_integer(denom);
                if i % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            if k % 2 == 1 {
                acc = -acc;
            }
            acc
        })
        .collect();
    Ok(ExactPolynomial::new(coeffs))
}

/// Integer coefficients of `V_k^(-1)` from the closed form
/// `(-1)^{k+j} C(k, j) C(k-1, j-1) (k-j)!`.
pub fn closed_m1_integers(k: u32) -> Vec<BigInt> {
    if k == 0 {
        return vec![BigInt::one()];
    }
    (0..=k)
        .map(|j| {
            if j == 0 {
                return BigInt::zero();
            }
            let c = binomial(k, j) * binomial(k - 1, j - 1) * factorial(k - j);
            if (k + j).is_multiple_of(2) {
                c
            } else {
                -c
            }
        })
        .collect()
}

/// `V_k^(-1)` from the closed form, with exact integer coefficients.
pub fn vk_coeffs_closed_m1(k: u32) -> ExactPolynomial {
    ExactPolynomial::new(
        closed_m1_integers(k)
            .into_iter()
            .map(BigRational::from_integer)
            .collect(),
    )
}

/// Coefficients from the recurrence. Exact for rational α up to
/// [`EXACT_RECURRENCE_MAX_K`], double precision beyond that or for other α.
pub fn vk_coeffs_recurrence(alpha: AlphaParam, k: u32) -> Polynomial {
    if alpha.exact.is_some() && k <= EXACT_RECURRENCE_MAX_K {
        if let Ok(p) = vk_coeffs_recurrence_exact(alpha, k) {
            return p.to_f64();
        }
    }
    let a = alpha.value();
    let mut v = vec![1.0f64];
    for step in 0..k {
        let kf = f64::from(step);
        let mut next = vec![0.0; v.len() + 1];
        for (j, &c) in v.iter().enumerate() {
            next[j] += (a * j as f64 - kf) * c;
            next[j + 1] -= a * c;
        }
        v = next;
    }
    Polynomial::new(v)
}

/// Coefficients from the recurrence in exact rational arithmetic.
pub fn vk_coeffs_recurrence_exact(alpha: AlphaParam, k: u32) -> Result<ExactPolynomial> {
    let a = alpha
        .exact_big()
        .ok_or_else(|| Error::domain("exact coefficients need a rational alpha"))?;
    let mut v = vec![BigRational::one()];
    for step in 0..k {
        let kr = BigRational::from_integer(BigInt::from(step));
        let mut next = vec![BigRational::zero(); v.len() + 1];
        for (j, c) in v.iter().enumerate() {
            let jr = BigRational::from_integer(BigInt::from(j));
            next[j] += (&a * jr - &kr) * c;
            next[j + 1] -= &a * c;
        }
        v = next;
    }
    Ok(ExactPolynomial::new(v))
}

/// Horner evaluation of a polynomial.
pub fn vk_eval(p: &Polynomial, z: f64) -> f64 {
    p.eval(z)
}

/// Successive values `w_k = (-1)^k V_k^(α)(z) / k!` for `k = 0, 1, 2, ...`.
///
/// This is the normalised combination that enters the Bessel expansions.
/// For rational α the polynomials are carried as integer numerators over a
/// common denominator and evaluated exactly; otherwise the recurrence runs in
/// double precision.
pub struct ScaledVkSequence {
    z: f64,
    k: u32,
    state: ScaledState,
}

enum ScaledState {
    Exact {
        p: i64,
        q: i64,
        numer: Vec<BigInt>,
        denom: BigInt,
    },
    Float {
        alpha: f64,
        coeffs: Vec<f64>,
    },
}

impl ScaledVkSequence {
    pub fn new(alpha: AlphaParam, z: f64) -> Self {
        let state = match alpha.exact() {
            Some(r) => ScaledState::Exact {
                p: *r.numer(),
                q: *r.denom(),
                numer: vec![BigInt::one()],
                denom: BigInt::one(),
            },
            None => ScaledState::Float {
                alpha: alpha.value(),
                coeffs: vec![1.0],
            },
        };
        Self { z, k: 0, state }
    }

    fn current(&self) -> f64 {
        match &self.state {
            ScaledState::Exact { numer, denom, .. } => eval_integer_poly(numer, denom, self.z),
            ScaledState::Float { coeffs, .. } => coeffs
                .iter()
                .rev()
                .fold(0.0, |acc, &c| acc.mul_add(self.z, c)),
        }
    }

    // w_{k+1}[j] = ((k - αj) w_k[j] + α w_k[j-1]) / (k + 1)
    fn advance(&mut self) {
        let k = self.k;
        match &mut self.state {
            ScaledState::Exact { p, q, numer, denom } => {
                let (p, q) = (BigInt::from(*p), BigInt::from(*q));
                let qk = &q * k;
                let mut next = vec![BigInt::zero(); numer.len() + 1];
                for (j, c) in numer.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    next[j] += (&qk - &p * j) * c;
                    next[j + 1] += &p * c;
                }
                *denom *= q * (k + 1);
                // Keep the integers from growing needlessly.
                let g = next.iter().fold(denom.clone(), |acc, c| acc.gcd(c));
                if !g.is_one() && !g.is_zero() {
                    for c in next.iter_mut() {
                        *c /= &g;
                    }
                    *denom /= &g;
                }
                if denom.is_negative() {
                    *denom = -denom.clone();
                    for c in next.iter_mut() {
                        *c = -c.clone();
                    }
                }
                *numer = next;
            }
            ScaledState::Float { alpha, coeffs } => {
                let kf = f64::from(k);
                let mut next = vec![0.0; coeffs.len() + 1];
                for (j, &c) in coeffs.iter().enumerate() {
                    next[j] += (kf - *alpha * j as f64) * c;
                    next[j + 1] += *alpha * c;
                }
                let scale = 1.0 / (kf + 1.0);
                for c in next.iter_mut() {
                    *c *= scale;
                }
                *coeffs = next;
            }
        }
        self.k += 1;
    }
}

impl Iterator for ScaledVkSequence {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let value = self.current();
        self.advance();
        Some(value)
    }
}
