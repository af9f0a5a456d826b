use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::advice::{grover_iterate, AdviceState};
use super::search::{amplification_rounds, search_prepared, Engine, Prepared};
use crate::error::{QdError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub best_index: Option<usize>,
    pub best_score: f64,
    /// Every query spent, including rounds that found nothing better.
    pub oracle_queries: u64,
    /// Queries spent up to and including the round that measured the final best.
    pub queries_to_best: u64,
    pub rounds: u32,
    /// Whether the returned score equals the target maximum (ties count).
    pub success: bool,
    /// Pre-amplification rounds per state preparation (zero without pruning).
    pub amplification_rounds: u64,
}

/// `⌈log₂ N⌉ + 3`.
pub fn default_rounds(space: usize) -> u32 {
    (space.max(1) as f64).log2().ceil() as u32 + 3
}

fn round_rng(seed: u64, round: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round as u64);
    rng
}

/// Maximum finding with the advice state as starting distribution: each round
/// marks `{x : F(x) > best}`, runs exponential search and keeps a marked hit.
pub fn quantum_search_decode(
    state: &AdviceState,
    rounds: u32,
    seed: u64,
    engine: Engine,
) -> Result<SearchOutcome> {
    if rounds < 1 {
        return Err(QdError::domain("at least one round is required"));
    }
    let prep = Prepared::plain(state);
    let allowed = vec![true; state.len()];
    Ok(decode_loop(
        state,
        &prep,
        &allowed,
        state.len(),
        state.max_score(),
        rounds,
        seed,
        engine,
        0,
    ))
}

/// Prune to `{q : p_q ≥ p0}`, amplify that subspace with `⌊π/(4θ_W)⌋` rounds
/// (`sin²θ_W = W`, the retained mass), then run the maximum-finding loop with
/// marks restricted to retained hypotheses. Each attempt with `j` iterations
/// costs `r + j(2r + 1)` queries: one preparation, and per iteration the mark
/// plus un-preparation and re-preparation.
pub fn quantum_beam_decode(
    state: &AdviceState,
    p0: f64,
    rounds: Option<u32>,
    seed: u64,
    engine: Engine,
) -> Result<SearchOutcome> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(QdError::domain(format!(
            "cutoff p0 must lie in [0, 1], got {p0}"
        )));
    }
    let retained: Vec<bool> = state.probs().iter().map(|&p| p >= p0).collect();
    let mass: f64 = state
        .probs()
        .iter()
        .zip(&retained)
        .filter(|(_, &r)| r)
        .map(|(p, _)| p)
        .sum();
    let kept = retained.iter().filter(|&&r| r).count();
    if kept == 0 || mass <= 0.0 {
        return Err(QdError::EmptyBeam);
    }
    let r = if kept == state.len() {
        0
    } else {
        amplification_rounds(mass)
    };
    let amps: Vec<f64> = if r == 0 {
        state.amplitudes().iter().map(|a| a.re).collect()
    } else {
        match engine {
            Engine::Dense => {
                let mut s = state.clone();
                s.reset();
                grover_iterate(&mut s, &retained, r);
                s.amplitudes().iter().map(|a| a.re).collect()
            }
            Engine::Subspace => {
                let theta = mass.sqrt().asin();
                let angle = (2 * r + 1) as f64 * theta;
                let on = angle.sin() / mass.sqrt();
                let off = if mass < 1.0 {
                    angle.cos() / (1.0 - mass).sqrt()
                } else {
                    0.0
                };
                state
                    .probs()
                    .iter()
                    .zip(&retained)
                    .map(|(p, &k)| p.sqrt() * if k { on } else { off })
                    .collect()
            }
        }
    };
    let prep = Prepared {
        pi: amps.iter().map(|a| a * a).collect(),
        amps,
        prep_cost: r,
        iter_cost: 2 * r + 1,
    };
    let target = state
        .scores()
        .iter()
        .zip(&retained)
        .filter(|(_, &k)| k)
        .map(|(s, _)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let rounds = rounds.unwrap_or_else(|| default_rounds(kept));
    if rounds < 1 {
        return Err(QdError::domain("at least one round is required"));
    }
    Ok(decode_loop(
        state, &prep, &retained, kept, target, rounds, seed, engine, r,
    ))
}

#[allow(clippy::too_many_arguments)]
fn decode_loop(
    state: &AdviceState,
    prep: &Prepared,
    allowed: &[bool],
    space: usize,
    target: f64,
    rounds: u32,
    seed: u64,
    engine: Engine,
    amp_rounds: u64,
) -> SearchOutcome {
    let scores = state.scores();
    let mut best = f64::NEG_INFINITY;
    let mut best_index = None;
    let mut total = 0u64;
    let mut to_best = 0u64;
    let mut dense_state = match engine {
        Engine::Dense => Some(AdviceState::with_preparation(
            prep.amps.clone(),
            state.probs().to_vec(),
            scores.to_vec(),
        )),
        Engine::Subspace => None,
    };
    let mut marked = vec![false; state.len()];
    for round in 0..rounds {
        for ((m, &s), &a) in marked.iter_mut().zip(scores).zip(allowed) {
            *m = a && s > best;
        }
        let mut rng = round_rng(seed, round);
        let attempt = search_prepared(prep, dense_state.as_mut(), &marked, space, &mut rng);
        total += attempt.queries;
        if attempt.found {
            best = scores[attempt.index];
            best_index = Some(attempt.index);
            to_best = total;
        }
    }
    if let Some(s) = &dense_state {
        debug_assert_eq!(s.oracle_queries(), total);
    }
    SearchOutcome {
        best_index,
        best_score: best,
        oracle_queries: total,
        queries_to_best: to_best,
        rounds,
        success: best_index.is_some() && best >= target,
        amplification_rounds: amp_rounds,
    }
}

/// Which decoder a trial batch runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Search,
    Beam { p0: f64 },
}

/// One row of a trial batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub overlap: f64,
    /// Queries up to the final best (the observable of the query bound).
    pub queries: u64,
    pub success: bool,
    pub rounds: u32,
    pub total_queries: u64,
}

/// Per-trial seed derived from a root seed.
pub fn trial_seed(root: u64, trial: u64) -> u64 {
    root ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Independent trials, evaluated in parallel and returned in trial order.
pub fn run_trials(
    state: &AdviceState,
    mode: DecodeMode,
    rounds: Option<u32>,
    trials: u64,
    seed: u64,
    engine: Engine,
) -> Result<Vec<TrialRecord>> {
    let overlap = state.overlap(state.best_scored());
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            let out = match mode {
                DecodeMode::Search => quantum_search_decode(
                    state,
                    rounds.unwrap_or_else(|| default_rounds(state.len())),
                    s,
                    engine,
                )?,
                DecodeMode::Beam { p0 } => quantum_beam_decode(state, p0, rounds, s, engine)?,
            };
            Ok(TrialRecord {
                trial: t,
                n: state.len(),
                overlap,
                queries: out.queries_to_best,
                success: out.success,
                rounds: out.rounds,
                total_queries: out.oracle_queries,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{enumerate_paths, Dfa, TokenTable};
    use crate::quantum::{amplification_rounds, prepare_advice};

    fn power_tree(r: usize, k: f64, n: usize) -> AdviceState {
        let d = enumerate_paths(&Dfa::full(r), &TokenTable::power_law(r, k, n).unwrap()).unwrap();
        prepare_advice(&d, |e| e.ln_prob)
    }

    #[test]
    fn point_mass_succeeds_immediately() {
        let s = AdviceState::from_parts(vec![1.0], vec![3.0]).unwrap();
        let out = quantum_search_decode(&s, 1, 0, Engine::Dense).unwrap();
        assert!(out.success);
        assert_eq!(out.best_index, Some(0));
        assert_eq!(out.oracle_queries, 0);
    }

    #[test]
    fn engines_give_identical_outcomes() {
        let s = power_tree(3, 1.0, 4);
        for seed in 0..50 {
            let a = quantum_search_decode(&s, 7, seed, Engine::Dense).unwrap();
            let b = quantum_search_decode(&s, 7, seed, Engine::Subspace).unwrap();
            assert_eq!(a, b);
            let a = quantum_beam_decode(&s, 0.01, None, seed, Engine::Dense).unwrap();
            let b = quantum_beam_decode(&s, 0.01, None, seed, Engine::Subspace).unwrap();
            assert_eq!(a.best_index, b.best_index);
            assert_eq!(a.oracle_queries, b.oracle_queries);
        }
    }

    #[test]
    fn unpruned_beam_is_plain_search() {
        let s = power_tree(3, 2.0, 3);
        for seed in 0..100 {
            let a =
                quantum_search_decode(&s, default_rounds(s.len()), seed, Engine::Subspace).unwrap();
            let b = quantum_beam_decode(&s, 0.0, None, seed, Engine::Subspace).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_survivor_costs_amplification() {
        let s = power_tree(3, 2.0, 4);
        let top = s.probs()[0];
        for seed in 0..20 {
            let out = quantum_beam_decode(&s, top - 1e-12, None, seed, Engine::Dense).unwrap();
            assert_eq!(out.best_index, Some(0));
            assert!(out.success);
            assert_eq!(out.amplification_rounds, amplification_rounds(top));
            assert_eq!(out.amplification_rounds, 1);
            // First attempt has j = 0 and costs exactly the preparation.
            assert_eq!(out.queries_to_best, 1);
        }
        assert!(quantum_beam_decode(&s, 1.1, None, 0, Engine::Dense).is_err());
        assert!(matches!(
            quantum_beam_decode(
                &AdviceState::from_parts(vec![0.5, 0.5], vec![0.0, 1.0]).unwrap(),
                0.6,
                None,
                0,
                Engine::Dense
            ),
            Err(QdError::EmptyBeam)
        ));
    }

    #[test]
    fn degenerate_scores_always_succeed() {
        let n = 16;
        let s = AdviceState::from_parts(vec![1.0 / n as f64; n], vec![1.0; n]).unwrap();
        for seed in 0..20 {
            let out = quantum_search_decode(&s, 5, seed, Engine::Subspace).unwrap();
            assert!(out.success);
            assert_eq!(out.queries_to_best, 0);
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let s = power_tree(3, 2.0, 3);
        let a = run_trials(&s, DecodeMode::Search, None, 40, 11, Engine::Subspace).unwrap();
        let b = run_trials(&s, DecodeMode::Search, None, 40, 11, Engine::Subspace).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[5].trial, 5);
    }
}
