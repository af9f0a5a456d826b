use std::f64::consts::FRAC_PI_4;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::advice::{grover_iterate, AdviceState};
use crate::error::{QdError, Result};

/// Growth factor of the exponential-search bound.
pub const LAMBDA: f64 = 6.0 / 5.0;

/// How amplified measurement distributions are computed.
///
/// `Dense` applies the reflections to the full amplitude vector. `Subspace`
/// uses the closed-form rotation in the plane spanned by the marked and
/// unmarked components of the prepared state; it yields the same probability
/// vector in `O(N)` per measurement regardless of the iteration count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Dense,
    #[default]
    Subspace,
}

impl FromStr for Engine {
    type Err = QdError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Engine::Dense),
            "subspace" => Ok(Engine::Subspace),
            other => Err(QdError::domain(format!("unknown engine {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchAttempt {
    /// Last measured index (marked if `found`).
    pub index: usize,
    pub queries: u64,
    pub found: bool,
}

/// The state each attempt starts from, and what preparing it costs.
pub(crate) struct Prepared {
    /// Real amplitudes of the prepared state.
    pub amps: Vec<f64>,
    /// Born probabilities of `amps`.
    pub pi: Vec<f64>,
    /// Queries spent preparing the state once.
    pub prep_cost: u64,
    /// Queries per Grover iteration (marking plus un-/re-preparation).
    pub iter_cost: u64,
}

impl Prepared {
    pub fn plain(state: &AdviceState) -> Self {
        Prepared {
            amps: state.prep().to_vec(),
            pi: state.prep().iter().map(|a| a * a).collect(),
            prep_cost: 0,
            iter_cost: 1,
        }
    }

    pub fn attempt_cost(&self, j: u64) -> u64 {
        self.prep_cost + j * self.iter_cost
    }
}

/// Index sampled by inverse CDF; zero-probability entries are never returned.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if target < acc {
                return i;
            }
        }
    }
    last
}

/// Probabilities after `j` iterations, from the two-dimensional rotation.
pub(crate) fn rotated_probs(pi: &[f64], marked: &[bool], marked_mass: f64, j: u64) -> Vec<f64> {
    if marked_mass <= 0.0 || marked_mass >= 1.0 {
        return pi.to_vec();
    }
    let theta = marked_mass.sqrt().asin();
    let s = ((2 * j + 1) as f64 * theta).sin().powi(2);
    let on = s / marked_mass;
    let off = (1.0 - s) / (1.0 - marked_mass);
    pi.iter()
        .zip(marked)
        .map(|(&p, &m)| if m { p * on } else { p * off })
        .collect()
}

/// Exponential search with `λ = 6/5`: attempt bounds grow as `m ← min(λm, √N)`
/// and each attempt runs `j ~ U[0, ⌈m⌉)` iterations from a fresh preparation.
/// Stops on a marked measurement, or once the queries exceed `⌈3√N⌉` (or the
/// attempt count does, which only binds for very small `N`).
pub(crate) fn search_prepared<G: Rng + ?Sized>(
    prep: &Prepared,
    dense: Option<&mut AdviceState>,
    marked: &[bool],
    space: usize,
    rng: &mut G,
) -> SearchAttempt {
    let sqrt_n = (space as f64).sqrt();
    let cutoff = (3.0 * sqrt_n).ceil() as u64;
    let marked_mass: f64 = prep
        .pi
        .iter()
        .zip(marked)
        .filter(|(_, &m)| m)
        .map(|(p, _)| p)
        .sum();
    let mut dense = dense;
    let mut m = 1.0f64;
    let mut queries = 0u64;
    let mut attempts = 0u64;
    loop {
        attempts += 1;
        let j = rng.gen_range(0..m.ceil() as u64);
        let u: f64 = rng.gen();
        let cost = prep.attempt_cost(j);
        queries += cost;
        let probs = match dense.as_deref_mut() {
            Some(state) => {
                state.reset();
                grover_iterate(state, marked, j);
                state.charge(cost - j);
                state.measurement_probs()
            }
            None => rotated_probs(&prep.pi, marked, marked_mass, j),
        };
        let index = sample_index(&probs, u);
        if marked[index] {
            return SearchAttempt {
                index,
                queries,
                found: true,
            };
        }
        if queries > cutoff || attempts > cutoff {
            return SearchAttempt {
                index,
                queries,
                found: false,
            };
        }
        m = (LAMBDA * m).min(sqrt_n.max(1.0));
    }
}

/// Exponential search over the advice state's own preparation.
pub fn exponential_search(
    state: &mut AdviceState,
    marked: &[bool],
    seed: u64,
    engine: Engine,
) -> SearchAttempt {
    let prep = Prepared::plain(state);
    let space = state.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match engine {
        Engine::Dense => search_prepared(&prep, Some(state), marked, space, &mut rng),
        Engine::Subspace => {
            let out = search_prepared(&prep, None, marked, space, &mut rng);
            state.charge(out.queries);
            out
        }
    }
}

/// Optimal amplification rounds `⌊π/(4θ)⌋`, `sin²θ = W`, for retained mass `W`.
pub fn amplification_rounds(mass: f64) -> u64 {
    if mass >= 1.0 {
        return 0;
    }
    (FRAC_PI_4 / mass.sqrt().asin()).floor() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> AdviceState {
        AdviceState::from_parts(vec![1.0 / n as f64; n], vec![0.0; n]).unwrap()
    }

    #[test]
    fn everything_marked_needs_no_queries() {
        let mut s = uniform(16);
        let out = exponential_search(&mut s, &[true; 16], 3, Engine::Dense);
        assert!(out.found);
        assert_eq!(out.queries, 0);
    }

    #[test]
    fn engines_agree() {
        let probs: Vec<f64> = {
            let raw: Vec<f64> = (1..=50).map(|i| 1.0 / (i as f64).powi(2)).collect();
            let t: f64 = raw.iter().sum();
            raw.iter().map(|v| v / t).collect()
        };
        let marked: Vec<bool> = (0..50).map(|i| i % 7 == 3).collect();
        for seed in 0..200 {
            let mut a = AdviceState::from_parts(probs.clone(), vec![0.0; 50]).unwrap();
            let mut b = a.clone();
            let x = exponential_search(&mut a, &marked, seed, Engine::Dense);
            let y = exponential_search(&mut b, &marked, seed, Engine::Subspace);
            assert_eq!(x, y, "seed {seed}");
            assert_eq!(a.oracle_queries(), x.queries);
            assert_eq!(b.oracle_queries(), y.queries);
        }
    }

    #[test]
    fn rotation_matches_dense_vector() {
        let mut s = uniform(32);
        let marked: Vec<bool> = (0..32).map(|i| i < 3).collect();
        grover_iterate(&mut s, &marked, 3);
        let r = rotated_probs(&Prepared::plain(&uniform(32)).pi, &marked, 3.0 / 32.0, 3);
        for (a, b) in s.measurement_probs().iter().zip(r) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn single_marked_mean_queries() {
        let mut marked = vec![false; 256];
        marked[77] = true;
        let mut total = 0.0;
        let mut found = 0;
        for seed in 0..1000 {
            let mut s = uniform(256);
            let out = exponential_search(&mut s, &marked, seed, Engine::Subspace);
            total += out.queries as f64;
            found += out.found as usize;
        }
        assert!(total / 1000.0 <= 4.0 * 16.0);
        assert!(found > 800);
    }

    #[test]
    fn inverse_mass_scaling() {
        // Synthetic advice with a marked component of mass p.
        for p in [0.5, 0.1, 0.01] {
            let n = 400;
            let probs: Vec<f64> = (0..n)
                .map(|i| {
                    if i == 0 {
                        p
                    } else {
                        (1.0 - p) / (n - 1) as f64
                    }
                })
                .collect();
            let mut marked = vec![false; n];
            marked[0] = true;
            let mean = (0..1000)
                .map(|seed| {
                    let mut s = AdviceState::from_parts(probs.clone(), vec![0.0; n]).unwrap();
                    exponential_search(&mut s, &marked, seed, Engine::Subspace).queries as f64
                })
                .sum::<f64>()
                / 1000.0;
            assert!(mean <= 4.0 / p.sqrt(), "p={p}: {mean}");
        }
    }

    #[test]
    fn rounds_for_mass() {
        assert_eq!(amplification_rounds(1.0), 0);
        assert_eq!(amplification_rounds(0.25), 1);
        assert_eq!(amplification_rounds(0.01), 7);
        assert_eq!(sample_index(&[0.0, 0.5, 0.0, 0.5, 0.0], 0.999_999_999), 3);
        assert_eq!(sample_index(&[0.0, 0.5, 0.5], 0.0), 1);
    }
}
