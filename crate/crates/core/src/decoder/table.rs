use std::io::Read;

use crate::error::{QdError, Result};
use crate::powerlaw::PowerLawSpec;

/// Rows whose sum misses one by more than this are rejected; smaller
/// deviations are renormalized away.
const ROW_TOLERANCE: f64 = 1e-6;

/// Per-position token probabilities `p[i][a]` of independent decoder outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenTable {
    symbols: Vec<String>,
    probs: Vec<Vec<f64>>,
    ln_probs: Vec<Vec<f64>>,
}

impl TokenTable {
    pub fn new(symbols: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(QdError::domain("token table needs at least one position"));
        }
        let sigma = symbols.len();
        let mut probs = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != sigma {
                return Err(QdError::domain(format!(
                    "row {i} has {} entries, expected {sigma}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(QdError::domain(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOLERANCE {
                return Err(QdError::domain(format!("row {i} sums to {s}, not 1")));
            }
            probs.push(row.into_iter().map(|p| p / s).collect::<Vec<f64>>());
        }
        let ln_probs = probs
            .iter()
            .map(|row| row.iter().map(|p| p.ln()).collect())
            .collect();
        Ok(TokenTable {
            symbols,
            probs,
            ln_probs,
        })
    }

    /// Every position follows the same power law, token `a` holding rank `a + 1`.
    pub fn power_law(r: usize, k: f64, n: usize) -> Result<Self> {
        let row = PowerLawSpec::new(r as u64, k)?.pmf_vec();
        Self::new(symbols(r), vec![row; n])
    }

    pub fn uniform(r: usize, n: usize) -> Result<Self> {
        Self::new(symbols(r), vec![vec![1.0 / r as f64; r]; n])
    }

    /// CSV with a header of token symbols and one row per position.
    pub fn from_csv_reader<Rd: Read>(reader: Rd) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| QdError::input(1, e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| QdError::input(line, e.to_string()))?;
            let row = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| QdError::input(line, format!("{f:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::new(header, rows).map_err(|e| QdError::input(0, e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn prob(&self, i: usize, a: usize) -> f64 {
        self.probs[i][a]
    }

    pub fn ln_prob(&self, i: usize, a: usize) -> f64 {
        self.ln_probs[i][a]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    /// `ln Π p[offset + i][tokens[i]]`.
    pub fn ln_weight(&self, offset: usize, tokens: &[usize]) -> f64 {
        tokens
            .iter()
            .enumerate()
            .map(|(i, &a)| self.ln_probs[offset + i][a])
            .sum()
    }
}

fn symbols(r: usize) -> Vec<String> {
    (0..r).map(|i| format!("t{i}")).collect()
}
