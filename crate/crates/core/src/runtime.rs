//! Query-count formulas for Most Likely Parse and power-law advice.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::{QdError, Result};
use crate::logvalue::LogValue;
use crate::powerlaw::{continuous_h, harmonic_number};

/// Grover query count for amplifying a component of mass `success_prob`:
/// `(π/4) / sqrt(p)`.
pub fn mlp_queries(success_prob: f64) -> Result<f64> {
    if !(success_prob > 0.0 && success_prob <= 1.0) {
        return Err(QdError::domain(format!(
            "success probability must lie in (0, 1], got {success_prob}"
        )));
    }
    Ok(FRAC_PI_4 / success_prob.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeQuery {
    pub r: u64,
    pub k: f64,
    pub n: u32,
}

impl RuntimeQuery {
    pub fn new(r: u64, k: f64, n: u32) -> Result<Self> {
        if r < 1 || n < 1 {
            return Err(QdError::domain("R and n must be positive"));
        }
        if !(k >= 0.0) || !k.is_finite() {
            return Err(QdError::domain(format!(
                "exponent k must be finite and >= 0, got {k}"
            )));
        }
        Ok(RuntimeQuery { r, k, n })
    }
}

/// `RT1 = H_R(k/2)^n / H_R(k)^(n/2)`.
pub fn rt1(q: &RuntimeQuery) -> LogValue {
    let n = q.n as f64;
    LogValue::from_ln(
        n * harmonic_number(q.r, q.k / 2.0).ln() - 0.5 * n * harmonic_number(q.r, q.k).ln(),
    )
}

/// Runtime exponent `f(R,k)` with `RT1 = R^(n f)`.
pub fn speedup_exponent(r: u64, k: f64) -> Result<f64> {
    if r < 2 {
        return Err(QdError::domain("speedup exponent needs R >= 2 (log R = 0)"));
    }
    let half = harmonic_number(r, k / 2.0).ln();
    let full = harmonic_number(r, k).ln();
    Ok((half - 0.5 * full) / (r as f64).ln())
}

/// Continuous analogue `h_R(k/2)^n / h_R(k)^(n/2)`.
pub fn rt1_continuous(q: &RuntimeQuery) -> Result<LogValue> {
    if q.r < 2 {
        return Err(QdError::domain("continuous runtime needs R >= 2"));
    }
    let n = q.n as f64;
    Ok(LogValue::from_ln(
        n * continuous_h(q.r, q.k / 2.0).ln() - 0.5 * n * continuous_h(q.r, q.k).ln(),
    ))
}

/// Classical sample complexity of Highest Score Parse: the number of accepted strings.
pub fn hsp_classical_baseline(num_accepted: u64) -> Result<u64> {
    if num_accepted < 1 {
        return Err(QdError::domain("at least one accepted string is required"));
    }
    Ok(num_accepted)
}
