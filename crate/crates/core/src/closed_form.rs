//! The truncated product-of-Pareto integral
//!
//! ```text
//! M(R,k1,k2,c,n) = h_R(k1)^-n ∫_{[1,R]^n} χ(r1···rn ≤ c) Π r_i^-k2 dr
//! ```
//!
//! evaluated through its closed form (an alternating binomial sum of truncated
//! exponential series), a brute-force grid oracle, the hypothesis-count volume
//! and the full query bound built from them.
//!
//! With `k' = 1 - k2`, `c' = ln c` and `a' = ln R` the weighted volume is
//!
//! ```text
//! h^n M = (-1)^n / k'^n · Σ_{j=0}^{min(n, ⌊c'/a'⌋)} (-1)^j C(n,j)
//!           · [ e^{a'k'j} - e^{c'k'} Σ_{l<n} (a'k'j - c'k')^l / l! ]
//! ```
//!
//! The terms grow like `2^n e^{a'|k'| n}` before cancelling, so the sum is
//! carried in binary floating point of adaptively escalated precision.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QdError, Result};
use crate::logvalue::LogValue;
use crate::powerlaw::continuous_h;

type Big = FBig<HalfEven, 2>;

/// 50 significant decimal digits.
pub const BASE_PRECISION_BITS: usize = 167;
/// Escalation stops here and reports [`QdError::PrecisionExhausted`].
pub const MAX_PRECISION_BITS: usize = 1 << 16;
/// Two successive precision levels must agree to this relative tolerance.
const AGREEMENT: f64 = 1e-12;
const SINGULAR_K2: f64 = 1e-9;

/// Parameters of `M(R,k1,k2,c,n)`. The threshold is stored as `ln c` because
/// thresholds of interest (`c ~ R^n`) overflow `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedIntegralSpec {
    pub r: u64,
    pub k1: f64,
    pub k2: f64,
    pub ln_c: f64,
    pub n: u32,
}

impl TruncatedIntegralSpec {
    pub fn new(r: u64, k1: f64, k2: f64, c: f64, n: u32) -> Result<Self> {
        if !(c > 0.0) {
            return Err(QdError::domain(format!(
                "threshold c must be positive, got {c}"
            )));
        }
        Self::from_ln_c(r, k1, k2, c.ln(), n)
    }

    pub fn from_ln_c(r: u64, k1: f64, k2: f64, ln_c: f64, n: u32) -> Result<Self> {
        if r < 2 {
            return Err(QdError::domain("R must be at least 2"));
        }
        if n < 1 {
            return Err(QdError::domain("n must be at least 1"));
        }
        if !k1.is_finite() || !k2.is_finite() || ln_c.is_nan() {
            return Err(QdError::domain("k1, k2 and ln c must be finite"));
        }
        Ok(TruncatedIntegralSpec { r, k1, k2, ln_c, n })
    }

    fn a(&self) -> f64 {
        (self.r as f64).ln()
    }

    /// `ln h_R(k1)^n`, the normalizer.
    fn ln_norm(&self) -> f64 {
        self.n as f64 * continuous_h(self.r, self.k1).ln()
    }
}

/// Result of an adaptive-precision evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormValue {
    pub value: LogValue,
    /// Working precision of the accepted evaluation; 0 when a boundary
    /// shortcut applied and no sum was formed.
    pub bits: usize,
}

/// `M(R,k1,k2,c,n)` as a linear value (saturating for huge `k1 ≠ k2` ratios).
pub fn m_closed(spec: &TruncatedIntegralSpec) -> Result<f64> {
    m_closed_ln(spec).map(LogValue::value)
}

pub fn m_closed_ln(spec: &TruncatedIntegralSpec) -> Result<LogValue> {
    m_closed_detailed(spec).map(|v| v.value)
}

pub fn m_closed_detailed(spec: &TruncatedIntegralSpec) -> Result<ClosedFormValue> {
    if (1.0 - spec.k2).abs() < SINGULAR_K2 {
        return Err(QdError::SingularExponent { k2: spec.k2 });
    }
    let v = adaptive(spec.r, spec.k2, spec.ln_c, spec.n, Some(spec.k1))?;
    Ok(clamp_mass(spec, v))
}

/// With `k1 = k2` the value is a cumulative probability; rounding in the last
/// place must not push it above one.
fn clamp_mass(spec: &TruncatedIntegralSpec, v: ClosedFormValue) -> ClosedFormValue {
    if spec.k1 == spec.k2 && v.value.ln() > 0.0 {
        ClosedFormValue {
            value: LogValue::ONE,
            ..v
        }
    } else {
        v
    }
}

/// One evaluation at a fixed working precision, no escalation; used to audit
/// the precision agreement. Returns `ln M`, or an error if the sum came out
/// non-positive at this precision.
pub fn m_closed_at_precision(spec: &TruncatedIntegralSpec, bits: usize) -> Result<f64> {
    if (1.0 - spec.k2).abs() < SINGULAR_K2 {
        return Err(QdError::SingularExponent { k2: spec.k2 });
    }
    let kp = 1.0 - spec.k2;
    let ln_m = match shortcut(spec.r, kp, spec.ln_c, spec.n) {
        Some(v) => v - spec.ln_norm(),
        None => volume_sum_ln(spec.a(), kp, spec.ln_c, spec.n, bits, Some(spec.k1))
            .ok_or(QdError::PrecisionExhausted { bits })?,
    };
    let v = ClosedFormValue {
        value: LogValue::from_ln(ln_m),
        bits,
    };
    Ok(clamp_mass(spec, v).value.ln())
}

/// The `k2 → 1` limit, by Richardson extrapolation of symmetric averages of
/// `ln M` at `k2 = 1 ± δ`, `δ ∈ {1e-3, 5e-4, 2.5e-4}`. The average is even in
/// `δ`, so the error terms go as `δ²` and `δ⁴`.
pub fn m_closed_k1limit(spec: &TruncatedIntegralSpec) -> Result<f64> {
    m_closed_k1limit_ln(spec).map(LogValue::value)
}

pub fn m_closed_k1limit_ln(spec: &TruncatedIntegralSpec) -> Result<LogValue> {
    if (spec.k2 - 1.0).abs() > 1e-6 {
        return Err(QdError::domain(format!(
            "k1-limit evaluator needs k2 = 1, got {}",
            spec.k2
        )));
    }
    if spec.ln_c <= 0.0 {
        return Ok(LogValue::ZERO);
    }
    let avg = |d: f64| -> Result<f64> {
        let up = m_closed_ln(&TruncatedIntegralSpec {
            k2: 1.0 + d,
            ..*spec
        })?;
        let down = m_closed_ln(&TruncatedIntegralSpec {
            k2: 1.0 - d,
            ..*spec
        })?;
        Ok(0.5 * (up.ln() + down.ln()))
    };
    let a1 = avg(1e-3)?;
    let a2 = avg(5e-4)?;
    let a3 = avg(2.5e-4)?;
    let b1 = (4.0 * a2 - a1) / 3.0;
    let b2 = (4.0 * a3 - a2) / 3.0;
    Ok(LogValue::from_ln((16.0 * b2 - b1) / 15.0))
}

/// Dispatch between the closed form and its `k2 = 1` limit.
pub fn m_auto_ln(spec: &TruncatedIntegralSpec) -> Result<LogValue> {
    if (1.0 - spec.k2).abs() < SINGULAR_K2 {
        m_closed_k1limit_ln(&TruncatedIntegralSpec { k2: 1.0, ..*spec })
    } else {
        m_closed_ln(spec)
    }
}

/// Unnormalized weighted volume `∫ χ(Π r ≤ c) Π r^-k2 dr` over `[1,R]^n`.
pub fn weighted_volume(r: u64, k2: f64, ln_c: f64, n: u32) -> Result<ClosedFormValue> {
    if (1.0 - k2).abs() < SINGULAR_K2 {
        return Err(QdError::SingularExponent { k2 });
    }
    adaptive(r, k2, ln_c, n, None)
}

/// Escalate precision until two successive levels agree; the result is
/// `ln(volume / h_R(k1)^n)` when `k1` is given, else `ln(volume)`.
fn adaptive(r: u64, k2: f64, ln_c: f64, n: u32, k1: Option<f64>) -> Result<ClosedFormValue> {
    let kp = 1.0 - k2;
    if let Some(v) = shortcut(r, kp, ln_c, n) {
        let norm = k1.map_or(0.0, |k1| n as f64 * continuous_h(r, k1).ln());
        // Equal exponents over the full cube: exactly one.
        let ln = if k1 == Some(k2) && v.is_finite() {
            0.0
        } else {
            v - norm
        };
        return Ok(ClosedFormValue {
            value: LogValue::from_ln(ln),
            bits: 0,
        });
    }
    let a = (r as f64).ln();
    let mut bits = initial_precision(a, kp, ln_c, n);
    let mut prev: Option<f64> = None;
    while bits <= MAX_PRECISION_BITS {
        let cur = volume_sum_ln(a, kp, ln_c, n, bits, k1);
        if let (Some(p), Some(c)) = (prev, cur) {
            if (p - c).abs() <= AGREEMENT {
                return Ok(ClosedFormValue {
                    value: LogValue::from_ln(c),
                    bits,
                });
            }
        }
        prev = cur;
        bits *= 2;
    }
    Err(QdError::PrecisionExhausted {
        bits: MAX_PRECISION_BITS,
    })
}

/// Boundary cases that need no sum: an empty region (`c ≤ 1`) and the full
/// cube (`c ≥ R^n`), where the volume factorizes into `h_R(k2)^n`.
fn shortcut(r: u64, kp: f64, ln_c: f64, n: u32) -> Option<f64> {
    let a = (r as f64).ln();
    if ln_c <= 0.0 {
        Some(f64::NEG_INFINITY)
    } else if ln_c >= n as f64 * a {
        Some(n as f64 * continuous_h(r, 1.0 - kp).ln())
    } else {
        None
    }
}

fn ln_factorials(n: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Base-2 size of the largest summand plus the bits lost to the `1/k'^n`
/// division, on top of the 50-digit floor.
fn initial_precision(a: f64, kp: f64, cp: f64, n: u32) -> usize {
    let lf = ln_factorials(n);
    let jmax = upper_index(a, cp, n);
    let mut worst: f64 = 0.0;
    for j in 0..=jmax {
        let ln_binom = lf[n as usize] - lf[j] - lf[n as usize - j];
        let x = (a * j as f64 - cp) * kp;
        let mag = (a * kp * j as f64).max(cp * kp + x.abs());
        worst = worst.max(ln_binom + mag);
    }
    let division = if kp.abs() < 1.0 {
        -(n as f64) * kp.abs().log2()
    } else {
        0.0
    };
    BASE_PRECISION_BITS
        + (worst / std::f64::consts::LN_2).ceil() as usize
        + division.ceil() as usize
}

/// `min(n, ⌊c'/a'⌋)`; the boundary index is included (its term vanishes).
fn upper_index(a: f64, cp: f64, n: u32) -> usize {
    ((cp / a).floor().max(0.0) as usize).min(n as usize)
}

fn big(x: f64, bits: usize) -> Big {
    Big::try_from(x)
        .expect("finite f64 converts exactly")
        .with_precision(bits)
        .value()
}

/// `ln h_R(k)` at working precision.
fn ln_h_big(ap: &Big, k: f64, bits: usize) -> Big {
    let t = 1.0 - k;
    if t == 0.0 {
        return ap.ln();
    }
    let tb = big(t, bits);
    let h = ((&tb * ap).exp() - big(1.0, bits)) / &tb;
    h.ln()
}

/// Bits the difference form below loses to cancellation beyond which the
/// tail series is used instead.
const CANCELLATION_SWITCH_BITS: f64 = 32.0;

/// `e^{ak} - e^{ck} Σ_{l<n} x^l/l!` with `x = ak - ck`, which equals
/// `e^{ck} Σ_{l≥n} x^l/l!`. The difference form cancels about
/// `log2(e^{|x|} n! / |x|^n)` bits; when that is large (`|x|` well below `n`)
/// the tail series is summed directly, its terms shrinking from the first.
/// The number of tail terms is fixed in advance from the term magnitudes.
fn bracket(
    ak: &Big,
    x: &Big,
    e_ck: &Big,
    n: u32,
    fact_n: &Big,
    ln_fact_n: f64,
    bits: usize,
) -> Big {
    let xf = x.to_f64().value();
    let ln_x = xf.abs().ln();
    let loss = (xf.abs() + ln_fact_n - n as f64 * ln_x) / std::f64::consts::LN_2;
    if loss > CANCELLATION_SWITCH_BITS && xf.abs() <= n as f64 {
        if xf == 0.0 {
            return big(0.0, bits);
        }
        // ln|t_l / t_n| = Σ_{i=n+1}^{l} ln(|x|/i); stop once below 2^-(bits+8).
        let floor = -(bits as f64 + 8.0) * std::f64::consts::LN_2;
        let mut extra = 0u64;
        let mut rel = 0.0;
        while rel > floor {
            extra += 1;
            rel += ln_x - ((n as u64 + extra) as f64).ln();
        }
        let mut term = x.powi(n.into()) / fact_n;
        let mut tail = term.clone();
        for l in n as u64 + 1..=n as u64 + extra {
            term = term * x / Big::from(l);
            tail += &term;
        }
        return e_ck * tail;
    }
    let mut series = big(0.0, bits);
    let mut term = big(1.0, bits);
    for l in 0..n {
        series += &term;
        term = term * x / Big::from(l as u64 + 1);
    }
    ak.exp() - e_ck * series
}

/// `ln` of the weighted volume at a fixed precision (normalized by
/// `h_R(k1)^n` when `k1` is given), or `None` if the sum is not positive
/// (cancellation not yet resolved).
fn volume_sum_ln(a: f64, kp: f64, cp: f64, n: u32, bits: usize, k1: Option<f64>) -> Option<f64> {
    let jmax = upper_index(a, cp, n);
    let ap = big(a, bits);
    let kpb = big(kp, bits);
    let cpb = big(cp, bits);
    let ck = &cpb * &kpb;
    let e_ck = ck.exp();
    let ln_fact_n: f64 = (2..=n).map(|i| (i as f64).ln()).sum();
    let fact_n = (2..=n as u64).fold(big(1.0, bits), |f, i| f * Big::from(i));

    let mut binoms = Vec::with_capacity(jmax + 1);
    let mut b = big(1.0, bits);
    for j in 0..=jmax {
        binoms.push(b.clone());
        b = b * Big::from((n as usize - j) as u64) / Big::from((j + 1) as u64);
    }

    let terms: Vec<Big> = (0..=jmax)
        .into_par_iter()
        .map(|j| {
            let ak = &ap * &kpb * Big::from(j as u64);
            let x = &ak - &ck;
            &binoms[j] * bracket(&ak, &x, &e_ck, n, &fact_n, ln_fact_n, bits)
        })
        .collect();

    let mut sum = big(0.0, bits);
    for (j, t) in terms.into_iter().enumerate() {
        if j % 2 == 0 {
            sum += t;
        } else {
            sum -= t;
        }
    }
    // vol = (-1)^n sum / k'^n  =  sum / (-k')^n
    let positive_factor = kp < 0.0 || n.is_multiple_of(2);
    let zero = big(0.0, bits);
    let sum = if positive_factor {
        sum
    } else {
        zero.clone() - sum
    };
    if sum <= zero {
        return None;
    }
    let nb = Big::from(n as u64);
    let mut ln_vol = sum.ln() - &nb * big(kp.abs(), bits).ln();
    if let Some(k1) = k1 {
        ln_vol -= &nb * ln_h_big(&ap, k1, bits);
    }
    Some(ln_vol.to_f64().value())
}

/// Grid oracle: midpoint rule in `z = ln r` coordinates.
///
/// In log coordinates the integrand factorizes into `Π e^{k' z_i}` and the
/// constraint becomes `Σ z_i ≤ c'`, so the `n`-dimensional grid collapses to
/// an `n`-fold discrete convolution over cell-index sums (cells with equal
/// index sum have equal midpoint sum). The level cut by the constraint is
/// counted fractionally. Only the axis range `[0, min(a', c')]` can contribute.
pub fn m_bruteforce(spec: &TruncatedIntegralSpec, resolution: usize) -> Result<f64> {
    if spec.n > 6 {
        return Err(QdError::OracleRefused(format!(
            "grid oracle unreliable for n = {} > 6",
            spec.n
        )));
    }
    if resolution < 64 {
        return Err(QdError::domain("resolution must be at least 64"));
    }
    if spec.ln_c <= 0.0 {
        return Ok(0.0);
    }
    let n = spec.n as usize;
    let kp = 1.0 - spec.k2;
    let top = spec.a().min(spec.ln_c);
    let dz = top / resolution as f64;
    let cell: Vec<f64> = (0..resolution)
        .map(|i| (kp * (i as f64 + 0.5) * dz).exp() * dz)
        .collect();

    let mut levels = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![0.0; levels.len() + resolution - 1];
        for (l, &w) in levels.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (i, &c) in cell.iter().enumerate() {
                next[l + i] += w * c;
            }
        }
        levels = next;
    }

    // Midpoint sum of level L is (L + n/2) dz; it owns the band [L - 1/2, L + 1/2].
    let t = spec.ln_c / dz - n as f64 / 2.0;
    let mut total = 0.0;
    for (l, &w) in levels.iter().enumerate() {
        let frac = (t - (l as f64 - 0.5)).clamp(0.0, 1.0);
        if frac == 0.0 {
            break;
        }
        total += w * frac;
    }
    Ok((total.ln() - spec.ln_norm()).exp())
}

/// Volume `∫ χ(r1···rn ≤ c) dr` over `[1,R]^n`; `(R-1)^n` for `c ≥ R^n`.
pub fn hypothesis_count(r: u64, c: f64, n: u32) -> Result<f64> {
    if !(c > 0.0) {
        return Err(QdError::domain(format!(
            "threshold c must be positive, got {c}"
        )));
    }
    hypothesis_count_ln(r, c.ln(), n).map(LogValue::value)
}

pub fn hypothesis_count_ln(r: u64, ln_c: f64, n: u32) -> Result<LogValue> {
    if r < 2 || n < 1 {
        return Err(QdError::domain("hypothesis count needs R >= 2 and n >= 1"));
    }
    weighted_volume(r, 0.0, ln_c, n).map(|v| v.value)
}

/// Constants of the two-region query bound `C1·rt + C2·√n·rt'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rt2Constants {
    pub c1: f64,
    pub c2: f64,
}

impl Default for Rt2Constants {
    fn default() -> Self {
        Rt2Constants { c1: 1.0, c2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rt2 {
    /// Amplification term over high-probability paths.
    pub rt: LogValue,
    /// Mass outside the threshold, `1 - M(R,k,k,c*,n)`.
    pub rt_prime: f64,
    pub total: LogValue,
}

/// Threshold `ln c* = (n/k) ln(R / h_R(k))`.
pub fn ln_threshold(r: u64, k: f64, n: u32) -> f64 {
    n as f64 / k * ((r as f64).ln() - continuous_h(r, k).ln())
}

/// `ln(√(h_R(k)^n) · M(R, k, k/2, c, n))`, the amplification term for a
/// threshold `ln c`. Switches to the limit evaluator when `k/2 = 1`.
pub(crate) fn rt_term_ln(r: u64, k: f64, n: u32, ln_c: f64) -> Result<LogValue> {
    let spec = TruncatedIntegralSpec::from_ln_c(r, k, k / 2.0, ln_c, n)?;
    let m = m_auto_ln(&spec)?;
    Ok(LogValue::from_ln(
        0.5 * n as f64 * continuous_h(r, k).ln() + m.ln(),
    ))
}

pub fn rt2_full(r: u64, k: f64, n: u32) -> Result<Rt2> {
    rt2_full_with(r, k, n, Rt2Constants::default())
}

pub fn rt2_full_with(r: u64, k: f64, n: u32, consts: Rt2Constants) -> Result<Rt2> {
    if r < 2 {
        return Err(QdError::domain("R must be at least 2"));
    }
    if !(k > 0.0) {
        return Err(QdError::domain(format!("k must be positive, got {k}")));
    }
    let ln_c = ln_threshold(r, k, n);
    let rt = rt_term_ln(r, k, n, ln_c)?;
    let mass = m_closed(&TruncatedIntegralSpec::from_ln_c(r, k, k, ln_c, n)?)?;
    let rt_prime = (1.0 - mass).max(0.0);
    let first = consts.c1.ln() + rt.ln();
    let second = consts.c2 * (n as f64).sqrt() * rt_prime;
    // ln(e^first + second), stable for either side dominating.
    let total = if second <= 0.0 {
        first
    } else {
        let ls = second.ln();
        let hi = first.max(ls);
        hi + ((first - hi).exp() + (ls - hi).exp()).ln()
    };
    Ok(Rt2 {
        rt,
        rt_prime,
        total: LogValue::from_ln(total),
    })
}
