//! Beam post-amplification analysis: splitting-exponent optimization,
//! retained-hypothesis counts, runtime bounds and capped-width sweeps.
//!
//! A splitting exponent `f` sets the product threshold
//! `c(f) = (R / h_R(k))^(n f / k)`; paths with `r1···rn ≤ c` are retained,
//! which in probability terms is the cutoff `p0 = c^-k / h_R(k)^n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::{
    hypothesis_count_ln, ln_threshold, m_closed, m_closed_ln, rt_term_ln, TruncatedIntegralSpec,
};
use crate::error::{QdError, Result};
use crate::logvalue::LogValue;
use crate::powerlaw::continuous_h;

pub const FSPLIT_LOWER: f64 = 1e-6;
pub const FSPLIT_TOLERANCE: f64 = 1e-6;

/// `ln c(f)`.
pub fn ln_threshold_for(r: u64, k: f64, n: u32, f_split: f64) -> f64 {
    f_split * ln_threshold(r, k, n)
}

/// Natural log of the path-probability cutoff for a product threshold.
pub fn ln_cutoff_probability(r: u64, k: f64, n: u32, ln_c: f64) -> f64 {
    -k * ln_c - n as f64 * continuous_h(r, k).ln()
}

/// Splitting exponent whose threshold corresponds to the probability cutoff `p0`.
pub fn fsplit_from_cutoff(r: u64, k: f64, n: u32, p0: f64) -> Result<f64> {
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(QdError::domain(format!(
            "cutoff p0 must lie in (0, 1], got {p0}"
        )));
    }
    let ln_c = (-p0.ln() - n as f64 * continuous_h(r, k).ln()) / k;
    Ok(ln_c / ln_threshold(r, k, n))
}

/// Retained mass `M(R,k,k,c,n)` at threshold `ln c`.
pub fn retained_mass(r: u64, k: f64, n: u32, ln_c: f64) -> Result<f64> {
    m_closed(&TruncatedIntegralSpec::from_ln_c(r, k, k, ln_c, n)?)
}

fn check_common(r: u64, k: f64, n: u32) -> Result<()> {
    if r < 2 || n < 1 {
        return Err(QdError::domain("beam analysis needs R >= 2 and n >= 1"));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(QdError::domain(format!("k must be positive, got {k}")));
    }
    if ln_threshold(r, k, n) <= 0.0 {
        return Err(QdError::domain("R / h_R(k) must exceed one"));
    }
    Ok(())
}

fn check_fsplit(f_split: f64) -> Result<()> {
    if !(f_split > 0.0 && f_split <= 1.0) {
        return Err(QdError::domain(format!(
            "f_split must lie in (0, 1], got {f_split}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FsplitSolution {
    pub f_split: f64,
    /// `M` at the returned exponent; at least `C0`.
    pub mass: f64,
    /// Optimal amplification rounds for this retained mass, `⌈(π/4)/asin√C0 − 1/2⌉`.
    pub rounds: u64,
    /// Rounds by the inverse-square-root rule `⌈C0^(-1/2)⌉`.
    pub rounds_inverse_sqrt: u64,
}

/// Rounds to amplify mass `c0`: `⌈(π/4)/asin(√c0) − 1/2⌉`.
pub fn rounds_for_mass(c0: f64) -> u64 {
    (std::f64::consts::FRAC_PI_4 / c0.sqrt().asin() - 0.5)
        .ceil()
        .max(0.0) as u64
}

/// Smallest `f ∈ [1e-6, 1]` with `M(R,k,k,c(f),n) ≥ C0`, by bisection to `1e-6`.
pub fn optimize_fsplit(r: u64, k: f64, n: u32, c0: f64) -> Result<FsplitSolution> {
    check_common(r, k, n)?;
    if !(c0 > 0.0 && c0 <= 1.0) {
        return Err(QdError::domain(format!(
            "retained mass C0 must lie in (0, 1], got {c0}"
        )));
    }
    let mass = |f: f64| retained_mass(r, k, n, ln_threshold_for(r, k, n, f));
    let top = mass(1.0)?;
    if top < c0 {
        return Err(QdError::Infeasible(format!(
            "even f_split = 1 retains only M = {top:.6} < C0 = {c0}"
        )));
    }
    let finish = |f: f64, m: f64| FsplitSolution {
        f_split: f,
        mass: m,
        rounds: rounds_for_mass(c0),
        rounds_inverse_sqrt: (1.0 / c0.sqrt()).ceil() as u64,
    };
    let bottom = mass(FSPLIT_LOWER)?;
    if bottom >= c0 {
        return Ok(finish(FSPLIT_LOWER, bottom));
    }
    let (mut lo, mut hi, mut m_hi) = (FSPLIT_LOWER, 1.0, top);
    while hi - lo > FSPLIT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let m = mass(mid)?;
        if m >= c0 {
            hi = mid;
            m_hi = m;
        } else {
            lo = mid;
        }
    }
    Ok(finish(hi, m_hi))
}

/// Continuous count of hypotheses retained at splitting exponent `f`.
pub fn retained_hypotheses(r: u64, k: f64, n: u32, f_split: f64) -> Result<LogValue> {
    check_common(r, k, n)?;
    check_fsplit(f_split)?;
    hypothesis_count_ln(r, ln_threshold_for(r, k, n, f_split), n)
}

/// `g^(-1/2) · √(h_R(k)^n) · M(R,k,k/2,c(f),n)`.
pub fn beam_runtime_bound(r: u64, k: f64, n: u32, f_split: f64, g: f64) -> Result<LogValue> {
    check_common(r, k, n)?;
    check_fsplit(f_split)?;
    if !(g > 0.0 && g <= 1.0) {
        return Err(QdError::domain(format!(
            "retained fraction g must lie in (0, 1], got {g}"
        )));
    }
    let rt = rt_term_ln(r, k, n, ln_threshold_for(r, k, n, f_split))?;
    Ok(LogValue::from_ln(rt.ln() - 0.5 * g.ln()))
}

/// Root of an increasing function on `[lo, hi]` by the Illinois variant of
/// regula falsi, falling back to bisection when the secant step stalls.
fn solve_increasing<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    if f_lo >= 0.0 {
        return Ok(lo);
    }
    if f_hi <= 0.0 {
        return Ok(hi);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= tol * hi.abs().max(1.0) {
            break;
        }
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let width = hi - lo;
        if !(x > lo + 1e-3 * width && x < hi - 1e-3 * width) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Threshold at which the retained mass equals `g`, and what it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionSolution {
    pub ln_c: f64,
    pub f_split: f64,
    pub n_hyp: LogValue,
    pub runtime: LogValue,
}

/// Minimize the cutoff subject to `M(R,k,k,c,n) ≥ g`; report the retained
/// count and the runtime bound `g^(-1/2)·√(h^n)·M(R,k,k/2,c,n)`.
pub fn solve_fraction(r: u64, k: f64, n: u32, g: f64) -> Result<FractionSolution> {
    check_common(r, k, n)?;
    if !(g > 0.0 && g <= 1.0) {
        return Err(QdError::domain(format!(
            "retained fraction g must lie in (0, 1], got {g}"
        )));
    }
    let full = n as f64 * (r as f64).ln();
    let ln_g = g.ln();
    let ln_c = solve_increasing(
        |x| {
            let m = retained_mass(r, k, n, x)?;
            Ok(if m > 0.0 { m.ln() - ln_g } else { -f64::MAX })
        },
        0.0,
        full,
        1e-12,
    )?;
    let star = ln_threshold(r, k, n);
    let rt = rt_term_ln(r, k, n, ln_c)?;
    Ok(FractionSolution {
        ln_c,
        f_split: ln_c / star,
        n_hyp: hypothesis_count_ln(r, ln_c, n)?,
        runtime: LogValue::from_ln(rt.ln() - 0.5 * ln_g),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// The unpruned threshold already retains at most `N_max` hypotheses.
    Unpruned,
    /// The beam is cut to exactly `N_max` hypotheses.
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CappedRow {
    pub n: u32,
    pub regime: Regime,
    pub f_split: f64,
    /// Retained mass `g`.
    pub mass: f64,
    pub n_hyp: LogValue,
    pub runtime: LogValue,
}

/// For each `n`: if the unpruned threshold `c*` keeps at most `N_max`
/// hypotheses, report the unpruned amplification term; otherwise lower the
/// threshold until exactly `N_max` remain and report the beam runtime bound
/// with the mass retained there.
pub fn capped_width_sweep(
    r: u64,
    k: f64,
    n_max: LogValue,
    n_range: &[u32],
) -> Result<Vec<CappedRow>> {
    if n_max.ln() < 0.0 {
        return Err(QdError::domain("N_max must be at least 1"));
    }
    n_range
        .par_iter()
        .map(|&n| capped_point(r, k, n, n_max))
        .collect()
}

fn capped_point(r: u64, k: f64, n: u32, n_max: LogValue) -> Result<CappedRow> {
    check_common(r, k, n)?;
    let star = ln_threshold(r, k, n);
    let count_star = hypothesis_count_ln(r, star, n)?;
    if count_star.ln() <= n_max.ln() {
        return Ok(CappedRow {
            n,
            regime: Regime::Unpruned,
            f_split: 1.0,
            mass: retained_mass(r, k, n, star)?,
            n_hyp: count_star,
            runtime: rt_term_ln(r, k, n, star)?,
        });
    }
    let target = n_max.ln();
    let ln_c = solve_increasing(
        |x| {
            let v = hypothesis_count_ln(r, x, n)?.ln();
            Ok(if v.is_finite() { v - target } else { -f64::MAX })
        },
        0.0,
        star,
        1e-12,
    )?;
    let g = retained_mass(r, k, n, ln_c)?;
    if !(g > 0.0) {
        return Err(QdError::Infeasible(format!(
            "no probability mass retained at n = {n}"
        )));
    }
    let rt = rt_term_ln(r, k, n, ln_c)?;
    Ok(CappedRow {
        n,
        regime: Regime::Capped,
        f_split: ln_c / star,
        mass: g,
        n_hyp: hypothesis_count_ln(r, ln_c, n)?,
        runtime: LogValue::from_ln(rt.ln() - 0.5 * g.ln()),
    })
}

/// How the beam is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", content = "parameter", rename_all = "snake_case")]
pub enum BeamMode {
    /// Probability cutoff `p0`.
    Cutoff(f64),
    /// Splitting exponent; `g` is the mass retained at `c(f)`.
    Split(f64),
    /// Retained fraction `g`; the cutoff is solved for.
    Fraction(f64),
    /// Capped width, given as `log10 N_max`.
    Capped(f64),
    /// Constant retained mass `C0` via the optimized splitting exponent.
    Constant(f64),
}

impl BeamMode {
    pub fn name(&self) -> &'static str {
        match self {
            BeamMode::Cutoff(_) => "cutoff",
            BeamMode::Split(_) => "split",
            BeamMode::Fraction(_) => "fraction",
            BeamMode::Capped(_) => "capped",
            BeamMode::Constant(_) => "constant",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            BeamMode::Cutoff(v)
            | BeamMode::Split(v)
            | BeamMode::Fraction(v)
            | BeamMode::Capped(v)
            | BeamMode::Constant(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamConfig {
    pub r: u64,
    pub k: f64,
    pub n: u32,
    pub mode: BeamMode,
}

/// One row of a beam sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamRow {
    #[serde(rename = "R")]
    pub r: u64,
    pub k: f64,
    pub n: u32,
    pub mode: String,
    pub parameter: f64,
    #[serde(rename = "log10_N_hyp")]
    pub log10_n_hyp: f64,
    pub log10_runtime: f64,
    pub f_split: f64,
}

/// Exponent, count and runtime at threshold `ln c`, with the mass retained
/// there as `g`.
fn threshold_point(r: u64, k: f64, n: u32, ln_c: f64) -> Result<(f64, LogValue, LogValue)> {
    // The mass can be far below the smallest double, so stay in logs.
    let g = if ln_c > 0.0 {
        m_closed_ln(&TruncatedIntegralSpec::from_ln_c(r, k, k, ln_c, n)?)?
    } else {
        LogValue::ZERO
    };
    if g.is_zero() {
        return Err(QdError::Infeasible(
            "the cutoff retains no probability mass".into(),
        ));
    }
    let rt = rt_term_ln(r, k, n, ln_c)?;
    Ok((
        ln_c / ln_threshold(r, k, n),
        hypothesis_count_ln(r, ln_c, n)?,
        LogValue::from_ln(rt.ln() - 0.5 * g.ln()),
    ))
}

impl BeamConfig {
    pub fn evaluate(&self) -> Result<BeamRow> {
        let (r, k, n) = (self.r, self.k, self.n);
        let (f, n_hyp, runtime) = match self.mode {
            BeamMode::Cutoff(p0) => {
                check_common(r, k, n)?;
                threshold_point(
                    r,
                    k,
                    n,
                    fsplit_from_cutoff(r, k, n, p0)? * ln_threshold(r, k, n),
                )?
            }
            BeamMode::Split(f) => {
                check_common(r, k, n)?;
                check_fsplit(f)?;
                threshold_point(r, k, n, ln_threshold_for(r, k, n, f))?
            }
            BeamMode::Fraction(g) => {
                let s = solve_fraction(r, k, n, g)?;
                (s.f_split, s.n_hyp, s.runtime)
            }
            BeamMode::Capped(log10_max) => {
                let row = capped_point(
                    r,
                    k,
                    n,
                    LogValue::from_ln(log10_max * std::f64::consts::LN_10),
                )?;
                (row.f_split, row.n_hyp, row.runtime)
            }
            BeamMode::Constant(c0) => {
                let s = optimize_fsplit(r, k, n, c0)?;
                (
                    s.f_split,
                    retained_hypotheses(r, k, n, s.f_split)?,
                    beam_runtime_bound(r, k, n, s.f_split, s.mass)?,
                )
            }
        };
        Ok(BeamRow {
            r,
            k,
            n,
            mode: self.mode.name().to_string(),
            parameter: self.mode.parameter(),
            log10_n_hyp: n_hyp.log10(),
            log10_runtime: runtime.log10(),
            f_split: f,
        })
    }
}
