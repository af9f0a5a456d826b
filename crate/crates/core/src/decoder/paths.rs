use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::acceptor::Automaton;
use super::counting::{CountTable, MassTable};
use super::table::TokenTable;
use crate::error::{QdError, Result};
use crate::powerlaw::Sampler;

/// Largest language that [`enumerate_paths`] will materialize.
pub const ENUMERATION_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEntry {
    pub tokens: Vec<usize>,
    /// Natural log of the normalized path probability.
    pub ln_prob: f64,
}

/// Normalized distribution over the accepted strings of one length, in
/// lexicographic token order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDistribution {
    entries: Vec<PathEntry>,
    /// `ln` of the raw accepted mass that the entries were divided by.
    ln_normalizer: f64,
}

impl PathDistribution {
    /// Normalize raw log-weights; the entries keep the given order.
    pub fn from_ln_weights(entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(QdError::domain("distribution needs at least one entry"));
        }
        let max = entries
            .iter()
            .map(|e| e.1)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(QdError::domain("all entries have zero weight"));
        }
        let ln_normalizer = max + entries.iter().map(|e| (e.1 - max).exp()).sum::<f64>().ln();
        Ok(PathDistribution {
            entries: entries
                .into_iter()
                .map(|(tokens, w)| PathEntry {
                    tokens,
                    ln_prob: w - ln_normalizer,
                })
                .collect(),
            ln_normalizer,
        })
    }

    pub fn entries(&self) -> &[PathEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ln_normalizer(&self) -> f64 {
        self.ln_normalizer
    }

    pub fn probs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ln_prob.exp()).collect()
    }

    /// Index of the most probable string; ties go to the lexicographically
    /// smallest, i.e. the first in storage order.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.entries.iter().enumerate() {
            if e.ln_prob > self.entries[best].ln_prob {
                best = i;
            }
        }
        best
    }

    pub fn position_of(&self, tokens: &[usize]) -> Option<usize> {
        self.entries
            .binary_search_by(|e| e.tokens.as_slice().cmp(tokens))
            .ok()
    }
}

/// The exact normalized distribution over accepted strings of length
/// `table.len()`.
pub fn enumerate_paths<A: Automaton + ?Sized>(
    acceptor: &A,
    table: &TokenTable,
) -> Result<PathDistribution> {
    enumerate_paths_with_budget(acceptor, table, ENUMERATION_BUDGET)
}

pub fn enumerate_paths_with_budget<A: Automaton + ?Sized>(
    acceptor: &A,
    table: &TokenTable,
    budget: usize,
) -> Result<PathDistribution> {
    if table.alphabet_size() != acceptor.alphabet_size() {
        return Err(QdError::domain(
            "token table and acceptor alphabets differ in size",
        ));
    }
    let n = table.len();
    let counts = CountTable::new(acceptor, n);
    let ln_total = counts.ln_count(n, acceptor.start());
    if ln_total == f64::NEG_INFINITY {
        return Err(QdError::EmptyLanguage { n });
    }
    if ln_total > (budget as f64 + 0.5).ln() {
        return Err(QdError::EnumerationOverflow { budget });
    }
    let mut out = Vec::with_capacity(counts.count(n, acceptor.start()) as usize);
    let mut prefix = Vec::with_capacity(n);
    walk(
        acceptor,
        table,
        &counts,
        acceptor.start(),
        0.0,
        &mut prefix,
        &mut out,
    );
    if out.iter().all(|e| e.1 == f64::NEG_INFINITY) {
        return Err(QdError::EmptyLanguage { n });
    }
    PathDistribution::from_ln_weights(out)
}

fn walk<A: Automaton + ?Sized>(
    acceptor: &A,
    table: &TokenTable,
    counts: &CountTable,
    state: usize,
    ln_w: f64,
    prefix: &mut Vec<usize>,
    out: &mut Vec<(Vec<usize>, f64)>,
) {
    let n = table.len();
    let i = prefix.len();
    if i == n {
        out.push((prefix.clone(), ln_w));
        return;
    }
    for a in 0..acceptor.alphabet_size() {
        if let Some(t) = acceptor.step(state, a) {
            if counts.ln_count(n - i - 1, t) == f64::NEG_INFINITY {
                continue;
            }
            prefix.push(a);
            walk(
                acceptor,
                table,
                counts,
                t,
                ln_w + table.ln_prob(i, a),
                prefix,
                out,
            );
            prefix.pop();
        }
    }
}

/// A uniformly random accepted string of length `n`.
pub fn uniform_sample<A: Automaton + ?Sized>(
    acceptor: &A,
    n: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let counts = CountTable::new(acceptor, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    counts.draw_completion(acceptor, acceptor.start(), n, &mut rng, &mut out)?;
    Ok(out)
}

/// Exact next-token distribution after `prefix`, from the weighted backward DP.
pub fn biased_conditional_exact<A: Automaton + ?Sized>(
    acceptor: &A,
    table: &TokenTable,
    prefix: &[usize],
) -> Result<Vec<f64>> {
    if prefix.len() >= table.len() {
        return Err(QdError::domain(format!(
            "prefix of length {} leaves no next position in a table of length {}",
            prefix.len(),
            table.len()
        )));
    }
    let state = acceptor.run(prefix).ok_or(QdError::DeadPrefix)?;
    let mass = MassTable::new(acceptor, table)?;
    mass.conditional(acceptor, table, prefix.len(), state)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineOutcome {
    pub argmax: Vec<usize>,
    /// Draws until the most probable string first appeared (inclusive).
    pub draws: u64,
}

/// Sample from the distribution until its most probable string appears.
pub fn classical_mlp_baseline(dist: &PathDistribution, seed: u64) -> Result<BaselineOutcome> {
    if dist.is_empty() {
        return Err(QdError::domain("empty distribution"));
    }
    let top = dist.argmax();
    let sampler = Sampler::new(&dist.probs());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = 0u64;
    loop {
        draws += 1;
        if sampler.draw(&mut rng) == top {
            break;
        }
    }
    Ok(BaselineOutcome {
        argmax: dist.entries()[top].tokens.clone(),
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::acceptor::Dfa;

    #[test]
    fn single_path_is_point_mass() {
        let d = enumerate_paths(
            &Dfa::single_path(3, &[2, 0, 1]).unwrap(),
            &TokenTable::power_law(3, 2.0, 3).unwrap(),
        )
        .unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.entries()[0].ln_prob.abs() < 1e-15);
        let raw = TokenTable::power_law(3, 2.0, 3)
            .unwrap()
            .ln_weight(0, &[2, 0, 1]);
        assert!((d.ln_normalizer() - raw).abs() < 1e-14);
    }

    #[test]
    fn full_tree_reproduces_product_law() {
        let d = enumerate_paths(&Dfa::full(3), &TokenTable::power_law(3, 2.0, 2).unwrap()).unwrap();
        assert_eq!(d.len(), 9);
        let top = d.argmax();
        assert_eq!(d.entries()[top].tokens, vec![0, 0]);
        assert!((d.probs()[top] - (36.0f64 / 49.0).powi(2)).abs() < 1e-15);
        assert!(d.ln_normalizer().abs() < 1e-15);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn excluded_token_renormalizes() {
        let d = enumerate_paths(
            &Dfa::excluding(3, 2),
            &TokenTable::power_law(3, 2.0, 2).unwrap(),
        )
        .unwrap();
        assert_eq!(d.len(), 4);
        // (1, 1/4) ⊗ (1, 1/4) / (1 + 1/4)^2
        let expect = [1.0, 0.25, 0.25, 0.0625].map(|v| v / 1.5625);
        for (p, e) in d.probs().iter().zip(expect) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        let t = TokenTable::uniform(2, 3).unwrap();
        let empty = Dfa::single_path(2, &[0, 1]).unwrap();
        assert!(matches!(
            enumerate_paths(&empty, &t),
            Err(QdError::EmptyLanguage { n: 3 })
        ));
        assert!(matches!(
            enumerate_paths_with_budget(&Dfa::full(2), &t, 7),
            Err(QdError::EnumerationOverflow { budget: 7 })
        ));
        assert!(enumerate_paths_with_budget(&Dfa::full(2), &t, 8).is_ok());
        assert!(matches!(
            uniform_sample(&empty, 3, 0),
            Err(QdError::EmptyLanguage { .. })
        ));
        assert!(matches!(
            biased_conditional_exact(&Dfa::excluding(2, 1), &t, &[1]),
            Err(QdError::DeadPrefix)
        ));
    }

    #[test]
    fn ties_break_lexicographically() {
        let d = enumerate_paths(&Dfa::full(2), &TokenTable::uniform(2, 3).unwrap()).unwrap();
        assert_eq!(d.entries()[d.argmax()].tokens, vec![0, 0, 0]);
        assert_eq!(d.position_of(&[1, 0, 1]), Some(5));
    }

    #[test]
    fn uniform_over_full_binary_tree() {
        let mut freq = [0usize; 8];
        let counts = CountTable::new(&Dfa::full(2), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let mut s = Vec::new();
            counts
                .draw_completion(&Dfa::full(2), 0, 3, &mut rng, &mut s)
                .unwrap();
            freq[s[0] * 4 + s[1] * 2 + s[2]] += 1;
        }
        for f in freq {
            assert!((f as f64 / 1e4 - 0.125).abs() < 0.02);
        }
        assert_eq!(
            uniform_sample(&Dfa::single_path(3, &[1, 2]).unwrap(), 2, 4).unwrap(),
            vec![1, 2]
        );
    }

    #[test]
    fn conditional_examples() {
        let t = TokenTable::power_law(3, 1.5, 4).unwrap();
        let d = biased_conditional_exact(&Dfa::full(3), &t, &[0, 2]).unwrap();
        for (x, y) in d.iter().zip(t.row(2)) {
            assert!((x - y).abs() < 1e-15);
        }
        let acc = Dfa::from_strings(3, &[vec![0, 1, 2, 2], vec![1, 1, 1, 1]]).unwrap();
        assert_eq!(
            biased_conditional_exact(&acc, &t, &[0]).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn baseline_point_mass_and_geometric_mean() {
        let d = enumerate_paths(
            &Dfa::single_path(2, &[1, 1]).unwrap(),
            &TokenTable::uniform(2, 2).unwrap(),
        )
        .unwrap();
        assert_eq!(classical_mlp_baseline(&d, 3).unwrap().draws, 1);
        let d = enumerate_paths(&Dfa::full(2), &TokenTable::uniform(2, 4).unwrap()).unwrap();
        let mean = (0..2000)
            .map(|s| classical_mlp_baseline(&d, s).unwrap().draws as f64)
            .sum::<f64>()
            / 2000.0;
        assert!((mean - 16.0).abs() < 1.5, "{mean}");
    }
}
