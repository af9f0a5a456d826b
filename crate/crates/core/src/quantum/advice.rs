use num_complex::Complex64;

use crate::decoder::{PathDistribution, PathEntry};
use crate::error::{QdError, Result};

/// Superposition `Σ √p_q |q⟩` over hypothesis indices, with per-index scores.
///
/// The ancilla registers of the advice state are classically correlated with
/// the index, so they are folded into it: measurement statistics and query
/// counts are the same as on the full register.
#[derive(Debug, Clone)]
pub struct AdviceState {
    amplitudes: Vec<Complex64>,
    /// The prepared state that Grover iterations reflect about.
    prep: Vec<f64>,
    probs: Vec<f64>,
    scores: Vec<f64>,
    oracle_queries: u64,
}

impl AdviceState {
    /// Advice from an explicit probability vector; probabilities must sum to
    /// one within 1e-10.
    pub fn from_parts(probs: Vec<f64>, scores: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(QdError::domain(
                "advice state needs at least one hypothesis",
            ));
        }
        if probs.len() != scores.len() {
            return Err(QdError::domain(
                "probability and score vectors differ in length",
            ));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(QdError::domain(
                "probabilities must be finite and nonnegative",
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(QdError::domain(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let prep: Vec<f64> = probs.iter().map(|p| p.sqrt()).collect();
        Ok(Self::with_preparation(prep, probs, scores))
    }

    /// A state whose reflection axis is an arbitrary real unit vector `prep`.
    pub(crate) fn with_preparation(prep: Vec<f64>, probs: Vec<f64>, scores: Vec<f64>) -> Self {
        AdviceState {
            amplitudes: prep.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
            prep,
            probs,
            scores,
            oracle_queries: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub(crate) fn prep(&self) -> &[f64] {
        &self.prep
    }

    pub fn oracle_queries(&self) -> u64 {
        self.oracle_queries
    }

    pub(crate) fn charge(&mut self, queries: u64) {
        self.oracle_queries += queries;
    }

    /// `|⟨x|μ⟩|` for hypothesis `x`.
    pub fn overlap(&self, index: usize) -> f64 {
        self.prep[index].abs()
    }

    /// Index of the highest score; ties go to the lowest index.
    pub fn best_scored(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_score(&self) -> f64 {
        self.scores[self.best_scored()]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Born-rule probabilities of the current amplitudes.
    pub fn measurement_probs(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Return to the prepared state; the query counter is kept.
    pub fn reset(&mut self) {
        for (a, &p) in self.amplitudes.iter_mut().zip(&self.prep) {
            *a = Complex64::new(p, 0.0);
        }
    }
}

/// Advice state over a decoder distribution, scoring each hypothesis once.
pub fn prepare_advice<F>(dist: &PathDistribution, mut scorer: F) -> AdviceState
where
    F: FnMut(&PathEntry) -> f64,
{
    let probs = dist.probs();
    let scores = dist.entries().iter().map(&mut scorer).collect();
    let prep = probs.iter().map(|p| p.sqrt()).collect();
    AdviceState::with_preparation(prep, probs, scores)
}

/// Apply `(2|μ⟩⟨μ| − I)(I − 2P_marked)` `iterations` times.
pub fn grover_iterate(state: &mut AdviceState, marked: &[bool], iterations: u64) {
    debug_assert_eq!(marked.len(), state.len());
    for _ in 0..iterations {
        for (a, &m) in state.amplitudes.iter_mut().zip(marked) {
            if m {
                *a = -*a;
            }
        }
        let overlap: Complex64 = state
            .prep
            .iter()
            .zip(&state.amplitudes)
            .map(|(&p, a)| a * p)
            .sum();
        let twice = overlap * 2.0;
        for (a, &p) in state.amplitudes.iter_mut().zip(&state.prep) {
            *a = twice * p - *a;
        }
    }
    state.oracle_queries += iterations;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{enumerate_paths, Dfa, TokenTable};

    fn uniform(n: usize) -> AdviceState {
        AdviceState::from_parts(vec![1.0 / n as f64; n], (0..n).map(|i| i as f64).collect())
            .unwrap()
    }

    #[test]
    fn preparation_examples() {
        let d = enumerate_paths(
            &Dfa::single_path(2, &[1]).unwrap(),
            &TokenTable::uniform(2, 1).unwrap(),
        )
        .unwrap();
        let s = prepare_advice(&d, |_| 0.0);
        assert_eq!(s.amplitudes(), &[Complex64::new(1.0, 0.0)]);
        for a in uniform(4).amplitudes() {
            assert!((a.re - 0.5).abs() < 1e-15);
        }
        let d = enumerate_paths(&Dfa::full(3), &TokenTable::power_law(3, 2.0, 2).unwrap()).unwrap();
        let s = prepare_advice(&d, |e| e.ln_prob);
        assert!((s.overlap(0) - 36.0 / 49.0).abs() < 1e-15);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn four_element_grover_is_exact() {
        let mut s = uniform(4);
        let marked = [false, false, true, false];
        grover_iterate(&mut s, &marked, 1);
        assert!((s.amplitudes()[2].re - 1.0).abs() < 1e-12);
        assert!((s.measurement_probs()[2] - 1.0).abs() < 1e-12);
        assert_eq!(s.oracle_queries(), 1);
    }

    #[test]
    fn empty_marked_set_keeps_distribution() {
        let d = enumerate_paths(&Dfa::full(3), &TokenTable::power_law(3, 1.0, 2).unwrap()).unwrap();
        let mut s = prepare_advice(&d, |_| 0.0);
        let before = s.measurement_probs();
        grover_iterate(&mut s, &[false; 9], 5);
        for (a, b) in s.measurement_probs().iter().zip(before) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(s.oracle_queries(), 5);
    }

    #[test]
    fn angle_formula_for_64() {
        let mut s = uniform(64);
        let mut marked = vec![false; 64];
        marked[17] = true;
        grover_iterate(&mut s, &marked, 6);
        let theta = (1.0f64 / 8.0).asin();
        let expect = (13.0 * theta).sin().powi(2);
        assert!((s.measurement_probs()[17] - expect).abs() < 1e-12);
        assert!((s.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_unnormalized_advice() {
        assert!(AdviceState::from_parts(vec![0.5, 0.6], vec![0.0, 1.0]).is_err());
        assert!(AdviceState::from_parts(vec![1.0], vec![0.0, 1.0]).is_err());
    }
}
