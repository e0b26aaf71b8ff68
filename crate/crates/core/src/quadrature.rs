//! Globally adaptive 21-point Gauss–Kronrod quadrature.
//!
//! The worst interval (by error estimate) is bisected until the summed error
//! meets `max(abs_tol, rel_tol * |integral|)` or the subdivision budget runs
//! out. Endpoint power-law singularities are removed by a change of variable
//! before the adaptive loop sees them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::summation::compensated_sum;

/// Tolerances and budget for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Known exponent `e` of a `(hi - t)^e` singularity at the upper limit.
    pub endpoint_exponent_hint: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
            endpoint_exponent_hint: None,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_endpoint_exponent(mut self, exponent: f64) -> Self {
        self.endpoint_exponent_hint = Some(exponent);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::domain("max_subdivisions must be at least 1"));
        }
        if let Some(e) = self.endpoint_exponent_hint {
            if !(e > -1.0) {
                return Err(Error::domain(format!(
                    "endpoint exponent {e} is not integrable (must exceed -1)"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
    pub evaluations: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |t: f64| -> Result<f64> {
        let v = f(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(format!("integrand is not finite at t = {t}")))
        }
    };

    let f_center = eval(center)?;
    let mut res_kronrod = f_center * WGK[10];
    let mut res_gauss = 0.0;
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for (j, wg) in WG.iter().enumerate() {
        let idx = 2 * j + 1;
        let dx = half * XGK[idx];
        let (f1, f2) = (eval(center - dx)?, eval(center + dx)?);
        fv1[idx] = f1;
        fv2[idx] = f2;
        res_gauss += wg * (f1 + f2);
        res_kronrod += WGK[idx] * (f1 + f2);
        res_abs += WGK[idx] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let idx = 2 * j;
        let dx = half * XGK[idx];
        let (f1, f2) = (eval(center - dx)?, eval(center + dx)?);
        fv1[idx] = f1;
        fv2[idx] = f2;
        res_kronrod += WGK[idx] * (f1 + f2);
        res_abs += WGK[idx] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let width = half.abs();
    let value = res_kronrod * half;
    let res_abs = res_abs * width;
    let res_asc = res_asc * width;
    let mut error = ((res_kronrod - res_gauss) * half).abs();
    // QUADPACK error rescaling.
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment {
        lo,
        hi,
        value,
        error,
    })
}

/// `∫_lo^hi f(t) dt`.
///
/// With `spec.endpoint_exponent_hint = Some(e)` and `e < 0`, the integrand is
/// taken to behave like `(hi - t)^e` at the upper limit and the substitution
/// `u = (hi - t)^(e+1)` is applied. The integrand is still called with `t`,
/// so the hint only helps while `hi - t` stays resolvable in double
/// precision; callers that can evaluate the kernel from the distance itself
/// should use [`integrate_power_kernel`].
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    spec.validate()?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain("integration limits must be finite"));
    }
    match spec.endpoint_exponent_hint {
        Some(e) if e < 0.0 => {
            let sigma = e + 1.0;
            let inv = 1.0 / sigma;
            let g = move |u: f64| {
                let d = u.powf(inv);
                f(hi - d) * d / (sigma * u)
            };
            integrate_with_breaks(g, &[0.0, (hi - lo).powf(sigma)], spec)
        }
        _ => integrate_with_breaks(f, &[lo, hi], spec),
    }
}

/// `∫ f` over the consecutive intervals defined by `points`; each interval
/// seeds the adaptive loop.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    spec.validate()?;
    if points.len() < 2 {
        return Err(Error::domain("need at least two break points"));
    }
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        heap.push(gauss_kronrod_21(&f, w[0], w[1])?);
    }
    let mut evaluations = 21 * heap.len();
    let mut subdivisions = heap.len();

    loop {
        let total = compensated_sum(heap.iter().chain(frozen.iter()).map(|s| s.value));
        let err = compensated_sum(heap.iter().chain(frozen.iter()).map(|s| s.error));
        let target = spec.abs_tol.max(spec.rel_tol * total.abs());
        if err <= target || heap.is_empty() {
            if err <= target {
                return Ok(QuadratureResult {
                    value: total,
                    abs_error: err,
                    subdivisions,
                    evaluations,
                });
            }
            return Err(Error::ToleranceNotMet {
                estimate: total,
                abs_error: err,
                subdivisions,
            });
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::ToleranceNotMet {
                estimate: total,
                abs_error: err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) || (worst.hi - worst.lo) < 1e3 * f64::MIN_POSITIVE {
            // Interval cannot be split further in double precision.
            frozen.push(worst);
            continue;
        }
        heap.push(gauss_kronrod_21(&f, worst.lo, mid)?);
        heap.push(gauss_kronrod_21(&f, mid, worst.hi)?);
        evaluations += 42;
        subdivisions += 1;
    }
}

/// `∫_lo^hi (hi - t)^exponent h(t) dt` for `exponent > -1`.
///
/// For a singular kernel (`exponent < 0`) the substitution
/// `u = (hi - t)^(exponent + 1)` turns the integral into
/// `(1/σ) ∫_0^{(hi-lo)^σ} h(hi - u^{1/σ}) du` with `σ = exponent + 1`,
/// which is free of the endpoint singularity. `h` receives `t` clamped to
/// `[lo, hi]`.
pub fn integrate_power_kernel<H: Fn(f64) -> f64>(
    h: H,
    lo: f64,
    hi: f64,
    exponent: f64,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    if !(exponent > -1.0) {
        return Err(Error::domain(format!(
            "kernel exponent {exponent} is not integrable (must exceed -1)"
        )));
    }
    if !(lo < hi) {
        return Err(Error::domain(format!("empty interval [{lo}, {hi}]")));
    }
    let plain = QuadratureSpec {
        endpoint_exponent_hint: None,
        ..*spec
    };
    if exponent >= 0.0 {
        let g = |t: f64| {
            let d = hi - t;
            if d <= 0.0 {
                0.0
            } else {
                d.powf(exponent) * h(t)
            }
        };
        return integrate_with_breaks(g, &[lo, hi], &plain);
    }
    let sigma = exponent + 1.0;
    let inv = 1.0 / sigma;
    let g = |u: f64| {
        let t = (hi - u.powf(inv)).max(lo);
        h(t) / sigma
    };
    integrate_with_breaks(g, &[0.0, (hi - lo).powf(sigma)], &plain)
}
