//! Monte-Carlo estimate of the biased next-token conditional from uniform
//! grammar samples, and the Chebyshev sample-size bound that drives it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::acceptor::Automaton;
use super::counting::CountTable;
use super::table::TokenTable;
use crate::error::{QdError, Result};

/// Draws used to estimate the relative variance before a real run.
pub const PILOT_DRAWS: usize = 1_000;
const KAPPA_FLOOR: f64 = 1e-12;

/// `⌈κ n² / ε²⌉`, the per-step sample count for relative error `ε/n`.
pub fn sample_size_bound(kappa: f64, n: usize, epsilon: f64) -> Result<u64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(QdError::domain(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(QdError::domain(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    let x = kappa * (n as f64).powi(2) / (epsilon * epsilon);
    // Strip the last-ulp noise of exact products such as 4·100/0.01.
    Ok((x * (1.0 - 1e-12)).ceil().max(1.0) as u64)
}

/// Per-token sums of importance weights from `samples` uniform completions.
struct Bins {
    /// Weight sums, rescaled by a common factor.
    sums: Vec<f64>,
    /// Per-sample weights with their first token, same scale as `sums`.
    draws: Vec<(usize, f64)>,
}

fn draw_bins<A: Automaton + ?Sized>(
    acceptor: &A,
    table: &TokenTable,
    prefix: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Bins> {
    let n = table.len();
    let i = prefix.len();
    if i >= n {
        return Err(QdError::domain("prefix leaves no next position"));
    }
    let state = acceptor.run(prefix).ok_or(QdError::DeadPrefix)?;
    let counts = CountTable::new(acceptor, n - i);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = Vec::with_capacity(n - i);
    let mut raw: Vec<(usize, f64)> = Vec::with_capacity(samples);
    for _ in 0..samples {
        buf.clear();
        counts
            .draw_completion(acceptor, state, n - i, &mut rng, &mut buf)
            .map_err(|_| QdError::DeadPrefix)?;
        // The prefix weight is common to every sample and cancels.
        raw.push((buf[0], table.ln_weight(i, &buf)));
    }
    let max = raw.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let shift = if max.is_finite() { max } else { 0.0 };
    let mut sums = vec![0.0; acceptor.alphabet_size()];
    let draws: Vec<(usize, f64)> = raw
        .into_iter()
        .map(|(a, lw)| {
            let w = (lw - shift).exp();
            sums[a] += w;
            (a, w)
        })
        .collect();
    Ok(Bins { sums, draws })
}

/// Estimate `Pr(next = a | prefix)` as `Σ_{b: b1=a} p(b) / Σ_b p(b)` over
/// `samples` uniform accepted completions `b` of the prefix.
pub fn biased_conditional_estimate<A: Automaton + ?Sized>(
    acceptor: &A,
    table: &TokenTable,
    prefix: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if samples < 1 {
        return Err(QdError::domain("at least one sample is required"));
    }
    let bins = draw_bins(acceptor, table, prefix, samples, seed)?;
    let total: f64 = bins.sums.iter().sum();
    if !(total > 0.0) {
        return Err(QdError::DeadPrefix);
    }
    Ok(bins.sums.into_iter().map(|s| s / total).collect())
}

/// Largest relative variance `Var(Y_a)/E(Y_a)²` over tokens with nonzero
/// estimated mean, where `Y_a = p(b)·[b1 = a]`, from a pilot of `pilot` draws.
pub fn estimate_kappa<A: Automaton + ?Sized>(
    acceptor: &A,
    table: &TokenTable,
    prefix: &[usize],
    pilot: usize,
    seed: u64,
) -> Result<f64> {
    if pilot < 2 {
        return Err(QdError::domain("pilot needs at least two draws"));
    }
    let bins = draw_bins(acceptor, table, prefix, pilot, seed)?;
    let m = pilot as f64;
    let mut kappa: f64 = KAPPA_FLOOR;
    for (a, &sum) in bins.sums.iter().enumerate() {
        if sum <= 0.0 {
            continue;
        }
        let mean = sum / m;
        let ss: f64 = bins
            .draws
            .iter()
            .map(|&(b, w)| {
                let y = if b == a { w } else { 0.0 };
                (y - mean).powi(2)
            })
            .sum();
        let var = ss / (m - 1.0);
        kappa = kappa.max(var / (mean * mean));
    }
    Ok(kappa)
}

/// Total variation distance between two distributions over the same support.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
