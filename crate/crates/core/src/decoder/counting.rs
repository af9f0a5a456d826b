//! Backward dynamic programs over an acceptor: completion counts (for uniform
//! sampling) and probability-weighted completion masses (for exact
//! conditionals). Each level is rescaled by its maximum with the log scale
//! kept separately, so long sequences cannot overflow.

use rand::Rng;

use super::acceptor::Automaton;
use super::table::TokenTable;
use crate::error::{QdError, Result};

#[derive(Debug, Clone)]
struct ScaledLevels {
    levels: Vec<Vec<f64>>,
    ln_scale: Vec<f64>,
}

impl ScaledLevels {
    fn ln_value(&self, level: usize, state: usize) -> f64 {
        self.levels[level][state].ln() + self.ln_scale[level]
    }

    fn push_rescaled(&mut self, mut level: Vec<f64>, prev_scale: f64) {
        let max = level.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            level.iter_mut().for_each(|v| *v /= max);
            self.ln_scale.push(prev_scale + max.ln());
        } else {
            self.ln_scale.push(prev_scale);
        }
        self.levels.push(level);
    }
}

/// `count[s][q]`: number of accepted strings of length `s` readable from `q`.
#[derive(Debug, Clone)]
pub struct CountTable {
    inner: ScaledLevels,
}

impl CountTable {
    pub fn new<A: Automaton + ?Sized>(acceptor: &A, n: usize) -> Self {
        let states = acceptor.num_states();
        let sigma = acceptor.alphabet_size();
        let base: Vec<f64> = (0..states)
            .map(|q| if acceptor.is_accepting(q) { 1.0 } else { 0.0 })
            .collect();
        let mut inner = ScaledLevels {
            levels: Vec::with_capacity(n + 1),
            ln_scale: Vec::with_capacity(n + 1),
        };
        inner.push_rescaled(base, 0.0);
        for s in 1..=n {
            let prev = &inner.levels[s - 1];
            let level: Vec<f64> = (0..states)
                .map(|q| {
                    (0..sigma)
                        .filter_map(|a| acceptor.step(q, a))
                        .map(|t| prev[t])
                        .sum()
                })
                .collect();
            let scale = inner.ln_scale[s - 1];
            inner.push_rescaled(level, scale);
        }
        CountTable { inner }
    }

    pub fn max_steps(&self) -> usize {
        self.inner.levels.len() - 1
    }

    /// `ln` of the completion count; `-inf` for a dead state.
    pub fn ln_count(&self, steps: usize, state: usize) -> f64 {
        self.inner.ln_value(steps, state)
    }

    /// Completion count as `f64` (exact for counts below 2^53).
    pub fn count(&self, steps: usize, state: usize) -> f64 {
        self.ln_count(steps, state).exp().round()
    }

    /// Draw a uniformly random accepted completion of `steps` tokens from
    /// `state` by forward proportional choice.
    pub fn draw_completion<A: Automaton + ?Sized, G: Rng + ?Sized>(
        &self,
        acceptor: &A,
        state: usize,
        steps: usize,
        rng: &mut G,
        out: &mut Vec<usize>,
    ) -> Result<()> {
        if self.inner.levels[steps][state] == 0.0 {
            return Err(QdError::EmptyLanguage { n: steps });
        }
        let sigma = acceptor.alphabet_size();
        let mut q = state;
        for s in (1..=steps).rev() {
            let next = &self.inner.levels[s - 1];
            let total: f64 = (0..sigma)
                .filter_map(|a| acceptor.step(q, a))
                .map(|t| next[t])
                .sum();
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = None;
            for a in 0..sigma {
                if let Some(t) = acceptor.step(q, a) {
                    let w = next[t];
                    if w > 0.0 {
                        chosen = Some((a, t));
                        if u < w {
                            break;
                        }
                        u -= w;
                    }
                }
            }
            let (a, t) = chosen.expect("live state has a live successor");
            out.push(a);
            q = t;
        }
        Ok(())
    }
}

/// `mass[i][q]`: probability mass of accepted completions from state `q` at
/// position `i`, `Σ_a p[i][a] · mass[i+1][δ(q,a)]`.
#[derive(Debug, Clone)]
pub struct MassTable {
    inner: ScaledLevels,
}

impl MassTable {
    pub fn new<A: Automaton + ?Sized>(acceptor: &A, table: &TokenTable) -> Result<Self> {
        if table.alphabet_size() != acceptor.alphabet_size() {
            return Err(QdError::domain(format!(
                "token table has {} columns but the acceptor alphabet has {} symbols",
                table.alphabet_size(),
                acceptor.alphabet_size()
            )));
        }
        let n = table.len();
        let states = acceptor.num_states();
        let sigma = acceptor.alphabet_size();
        // Built back to front; stored so that index i is position i.
        let mut rev = ScaledLevels {
            levels: Vec::with_capacity(n + 1),
            ln_scale: Vec::with_capacity(n + 1),
        };
        let base: Vec<f64> = (0..states)
            .map(|q| if acceptor.is_accepting(q) { 1.0 } else { 0.0 })
            .collect();
        rev.push_rescaled(base, 0.0);
        for i in (0..n).rev() {
            let prev = rev.levels.last().expect("base level");
            let level: Vec<f64> = (0..states)
                .map(|q| {
                    (0..sigma)
                        .filter_map(|a| acceptor.step(q, a).map(|t| table.prob(i, a) * prev[t]))
                        .sum()
                })
                .collect();
            let scale = *rev.ln_scale.last().expect("base scale");
            rev.push_rescaled(level, scale);
        }
        rev.levels.reverse();
        rev.ln_scale.reverse();
        Ok(MassTable { inner: rev })
    }

    /// `ln` of the raw (unnormalized) completion mass.
    pub fn ln_mass(&self, position: usize, state: usize) -> f64 {
        self.inner.ln_value(position, state)
    }

    /// Exact next-token distribution at `position` from `state`.
    pub fn conditional<A: Automaton + ?Sized>(
        &self,
        acceptor: &A,
        table: &TokenTable,
        position: usize,
        state: usize,
    ) -> Result<Vec<f64>> {
        let next = &self.inner.levels[position + 1];
        let mut d: Vec<f64> = (0..acceptor.alphabet_size())
            .map(|a| {
                acceptor
                    .step(state, a)
                    .map_or(0.0, |t| table.prob(position, a) * next[t])
            })
            .collect();
        let total: f64 = d.iter().sum();
        if !(total > 0.0) {
            return Err(QdError::DeadPrefix);
        }
        d.iter_mut().for_each(|v| *v /= total);
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::acceptor::Dfa;

    #[test]
    fn counts_match_closed_forms() {
        let c = CountTable::new(&Dfa::full(3), 4);
        assert_eq!(c.count(4, 0), 81.0);
        let c = CountTable::new(&Dfa::excluding(3, 2), 5);
        assert_eq!(c.count(5, 0), 32.0);
        let big = CountTable::new(&Dfa::full(30), 500);
        assert!((big.ln_count(500, 0) - 500.0 * 30f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn mass_of_full_tree_is_one() {
        let t = TokenTable::power_law(4, 1.3, 6).unwrap();
        let m = MassTable::new(&Dfa::full(4), &t).unwrap();
        assert!(m.ln_mass(0, 0).abs() < 1e-14);
        let d = m.conditional(&Dfa::full(4), &t, 2, 0).unwrap();
        for (x, y) in d.iter().zip(t.row(2)) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
