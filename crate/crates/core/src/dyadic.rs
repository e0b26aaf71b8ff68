//! Exact evaluation of integer-coefficient polynomials at double-precision
//! points.
//!
//! Every finite `f64` is a dyadic rational `m / 2^d`, so `Σ c_j x^j / den`
//! with big-integer `c_j` and `den` can be formed exactly and rounded once.
//! The alternating sums behind the `V_k` polynomials cancel by twenty or
//! more decimal digits at moderate `k` and `z`, which rules out evaluating
//! them in floating point.

use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// `x = mantissa / 2^shift`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dyadic {
    pub mantissa: BigInt,
    pub shift: u32,
}

impl Dyadic {
    /// Exact decomposition of a finite double.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self {
                mantissa: BigInt::zero(),
                shift: 0,
            });
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let fraction = bits & ((1u64 << 52) - 1);
        let (mut m, mut e) = if biased == 0 {
            (fraction, -1074)
        } else {
            (fraction | (1u64 << 52), biased - 1075)
        };
        let tz = m.trailing_zeros() as i32;
        m >>= tz;
        e += tz;
        let mut mantissa = BigInt::from(m);
        if negative {
            mantissa = -mantissa;
        }
        if e >= 0 {
            Some(Self {
                mantissa: mantissa << e as usize,
                shift: 0,
            })
        } else {
            Some(Self {
                mantissa,
                shift: (-e) as u32,
            })
        }
    }
}

/// `num / den` rounded to double precision (faithful to within one ulp).
pub fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    assert!(!den.is_zero(), "zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    let negative = (num.sign() == Sign::Minus) != (den.sign() == Sign::Minus);
    let n = num.abs();
    let d = den.abs();
    // Scale so that the integer quotient carries about 66 significant bits.
    let k: i64 = 66 - (n.bits() as i64 - d.bits() as i64);
    let q = if k >= 0 {
        (n << k as usize) / d
    } else {
        n / (d << (-k) as usize)
    };
    let qf = q.to_f64().unwrap_or(f64::INFINITY);
    let exp = (-k).clamp(i64::from(i32::MIN / 2), i64::from(i32::MAX / 2)) as i32;
    let v = libm::ldexp(qf, exp);
    if negative {
        -v
    } else {
        v
    }
}

/// `Σ_j coeffs[j] x^j / den`, computed exactly and rounded once.
pub fn eval_integer_poly(coeffs: &[BigInt], den: &BigInt, x: f64) -> f64 {
    let Some(point) = Dyadic::from_f64(x) else {
        return f64::NAN;
    };
    if coeffs.is_empty() {
        return 0.0;
    }
    let n = coeffs.len() - 1;
    let d = point.shift as usize;
    // Homogenised Horner: Σ c_j m^j 2^{d(n-j)} over den · 2^{dn}.
    let mut acc = coeffs[n].clone();
    for j in (0..n).rev() {
        acc *= &point.mantissa;
        if !coeffs[j].is_zero() {
            acc += &coeffs[j] << (d * (n - j));
        }
    }
    let full_den = if d == 0 { den.clone() } else { den << (d * n) };
    ratio_to_f64(&acc, &full_den)
}

/// `n!` as a big integer.
pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * i)
}

/// Binomial coefficient `C(n, k)` as a big integer (zero when `k > n`).
pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}
