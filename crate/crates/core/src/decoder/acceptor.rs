use std::collections::BTreeMap;
use std::io::Read;

use serde::Deserialize;

use crate::error::{QdError, Result};

/// A deterministic acceptor over token indices `0..alphabet_size`.
///
/// Undefined transitions lead to the implicit rejecting sink. The counting and
/// sampling layers only rely on this interface, so a different grammar backend
/// can be plugged in by implementing it.
pub trait Automaton: Sync {
    fn num_states(&self) -> usize;
    fn alphabet_size(&self) -> usize;
    fn start(&self) -> usize;
    fn step(&self, state: usize, token: usize) -> Option<usize>;
    fn is_accepting(&self, state: usize) -> bool;

    /// State reached after reading `tokens` from the start, or `None` if the sink was hit.
    fn run(&self, tokens: &[usize]) -> Option<usize> {
        tokens
            .iter()
            .try_fold(self.start(), |q, &a| self.step(q, a))
    }

    fn accepts(&self, tokens: &[usize]) -> bool {
        self.run(tokens).is_some_and(|q| self.is_accepting(q))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dfa {
    symbols: Vec<String>,
    start: usize,
    accepting: Vec<bool>,
    delta: Vec<Vec<Option<usize>>>,
}

impl Dfa {
    /// Build from explicit `(from, token, to)` triples. Two different targets
    /// for the same `(from, token)` pair are rejected as nondeterministic.
    pub fn new(
        symbols: Vec<String>,
        num_states: usize,
        start: usize,
        accepting: &[usize],
        transitions: &[(usize, usize, usize)],
    ) -> Result<Self> {
        if num_states == 0 {
            return Err(QdError::domain("acceptor needs at least one state"));
        }
        if symbols.is_empty() {
            return Err(QdError::domain("alphabet is empty"));
        }
        if start >= num_states {
            return Err(QdError::domain(format!("start state {start} out of range")));
        }
        let sigma = symbols.len();
        let mut acc = vec![false; num_states];
        for &q in accepting {
            if q >= num_states {
                return Err(QdError::domain(format!("accepting state {q} out of range")));
            }
            acc[q] = true;
        }
        let mut delta = vec![vec![None; sigma]; num_states];
        for &(from, tok, to) in transitions {
            if from >= num_states || to >= num_states || tok >= sigma {
                return Err(QdError::domain(format!(
                    "transition ({from}, {tok}, {to}) out of range"
                )));
            }
            match delta[from][tok] {
                Some(prev) if prev != to => {
                    return Err(QdError::domain(format!(
                        "nondeterministic transition from state {from} on token {tok}"
                    )))
                }
                _ => delta[from][tok] = Some(to),
            }
        }
        Ok(Dfa {
            symbols,
            start,
            accepting: acc,
            delta,
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// The unconstrained R-ary tree: every string is accepted.
    pub fn full(r: usize) -> Self {
        Dfa {
            symbols: default_symbols(r),
            start: 0,
            accepting: vec![true],
            delta: vec![(0..r).map(|_| Some(0)).collect()],
        }
    }

    /// Accepts exactly one string.
    pub fn single_path(r: usize, path: &[usize]) -> Result<Self> {
        Self::from_strings(r, &[path.to_vec()])
    }

    /// A trie accepting exactly the given strings.
    pub fn from_strings(r: usize, strings: &[Vec<usize>]) -> Result<Self> {
        let mut delta: Vec<Vec<Option<usize>>> = vec![vec![None; r]];
        let mut accepting = vec![false];
        for s in strings {
            let mut q = 0;
            for &a in s {
                if a >= r {
                    return Err(QdError::domain(format!(
                        "token {a} outside alphabet of size {r}"
                    )));
                }
                q = match delta[q][a] {
                    Some(next) => next,
                    None => {
                        delta.push(vec![None; r]);
                        accepting.push(false);
                        let next = delta.len() - 1;
                        delta[q][a] = Some(next);
                        next
                    }
                };
            }
            accepting[q] = true;
        }
        Ok(Dfa {
            symbols: default_symbols(r),
            start: 0,
            accepting,
            delta,
        })
    }

    /// All strings avoiding one token.
    pub fn excluding(r: usize, banned: usize) -> Self {
        Dfa {
            symbols: default_symbols(r),
            start: 0,
            accepting: vec![true],
            delta: vec![(0..r).map(|a| (a != banned).then_some(0)).collect()],
        }
    }

    /// A copy that additionally rejects one string of length `n` (used to
    /// check restriction/renormalization consistency).
    pub fn without_string(&self, removed: &[usize]) -> Result<Self> {
        // Product with a trie that tracks whether we are still on `removed`.
        let n = removed.len();
        let sigma = self.alphabet_size();
        let mut index: BTreeMap<(usize, Option<usize>), usize> = BTreeMap::new();
        let mut states: Vec<(usize, Option<usize>)> = Vec::new();
        let mut delta: Vec<Vec<Option<usize>>> = Vec::new();
        let mut accepting = Vec::new();
        let mut intern = |key: (usize, Option<usize>),
                          states: &mut Vec<(usize, Option<usize>)>,
                          delta: &mut Vec<Vec<Option<usize>>>,
                          accepting: &mut Vec<bool>| {
            *index.entry(key).or_insert_with(|| {
                states.push(key);
                delta.push(vec![None; sigma]);
                let (q, pos) = key;
                accepting.push(self.accepting[q] && pos != Some(n));
                states.len() - 1
            })
        };
        let start = intern(
            (self.start, Some(0)),
            &mut states,
            &mut delta,
            &mut accepting,
        );
        let mut i = 0;
        while i < states.len() {
            let (q, pos) = states[i];
            for a in 0..sigma {
                if let Some(t) = self.delta[q][a] {
                    let next_pos = match pos {
                        Some(p) if p < n && removed[p] == a => Some(p + 1),
                        _ => None,
                    };
                    let j = intern((t, next_pos), &mut states, &mut delta, &mut accepting);
                    delta[i][a] = Some(j);
                }
            }
            i += 1;
        }
        Ok(Dfa {
            symbols: self.symbols.clone(),
            start,
            accepting,
            delta,
        })
    }

    /// Parse the JSON acceptor format
    /// `{"alphabet": [...], "states": N, "start": q, "accepting": [...],
    ///   "transitions": [[from, token, to], ...]}`; tokens may be given as
    /// alphabet symbols or indices.
    pub fn from_json_reader<Rd: Read>(reader: Rd) -> Result<Self> {
        let raw: RawDfa =
            serde_json::from_reader(reader).map_err(|e| QdError::input(e.line(), e.to_string()))?;
        let lookup: BTreeMap<&str, usize> = raw
            .alphabet
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut triples = Vec::with_capacity(raw.transitions.len());
        for (from, tok, to) in &raw.transitions {
            let t = match tok {
                TokenRef::Index(i) => *i,
                TokenRef::Symbol(s) => *lookup
                    .get(s.as_str())
                    .ok_or_else(|| QdError::input(0, format!("unknown token symbol {s:?}")))?,
            };
            triples.push((*from, t, *to));
        }
        Dfa::new(
            raw.alphabet,
            raw.states,
            raw.start,
            &raw.accepting,
            &triples,
        )
        .map_err(|e| QdError::input(0, e.to_string()))
    }
}

impl Automaton for Dfa {
    fn num_states(&self) -> usize {
        self.delta.len()
    }

    fn alphabet_size(&self) -> usize {
        self.symbols.len()
    }

    fn start(&self) -> usize {
        self.start
    }

    fn step(&self, state: usize, token: usize) -> Option<usize> {
        self.delta[state][token]
    }

    fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }
}

fn default_symbols(r: usize) -> Vec<String> {
    (0..r).map(|i| format!("t{i}")).collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDfa {
    alphabet: Vec<String>,
    states: usize,
    start: usize,
    accepting: Vec<usize>,
    transitions: Vec<(usize, TokenRef, usize)>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TokenRef {
    Index(usize),
    Symbol(String),
}
