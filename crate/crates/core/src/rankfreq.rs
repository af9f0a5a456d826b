//! Rank-frequency statistics of per-frame softmax outputs and a log-log
//! least-squares power-law fit `a · r^(-b)`.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QdError, Result};
use crate::powerlaw::{PowerLawSpec, Sampler};
use crate::regression::ols;

/// Frames whose sum is within this of one are kept verbatim.
pub const SUM_TOLERANCE: f64 = 1e-6;
/// Frames whose sum is off by more than this are renormalized and counted.
pub const WARN_TOLERANCE: f64 = 1e-3;
/// Tail ranks with mean probability below this are dropped by the default range.
pub const TAIL_FLOOR: f64 = 10.0 * f64::EPSILON;

/// One probability vector per decoder time frame over a fixed alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDump {
    symbols: Vec<String>,
    frames: Vec<Vec<f64>>,
}

/// A validated dump plus the number of frames renormalized with a warning.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub dump: FrameDump,
    pub warnings: usize,
}

impl FrameDump {
    /// Validate and normalize. `lines[i]` is the source line of frame `i`,
    /// used in error messages.
    fn build(symbols: Vec<String>, frames: Vec<Vec<f64>>, lines: &[usize]) -> Result<Ingested> {
        if symbols.is_empty() {
            return Err(QdError::input(1, "frame dump declares no symbols"));
        }
        if frames.is_empty() {
            return Err(QdError::input(1, "frame dump contains no frames"));
        }
        let line_of = |i: usize| lines.get(i).copied().unwrap_or(0);
        let mut warnings = 0;
        let mut out = Vec::with_capacity(frames.len());
        for (i, mut frame) in frames.into_iter().enumerate() {
            if frame.len() != symbols.len() {
                return Err(QdError::input(
                    line_of(i),
                    format!(
                        "frame has {} values, expected {}",
                        frame.len(),
                        symbols.len()
                    ),
                ));
            }
            if frame.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(QdError::input(
                    line_of(i),
                    "probabilities must be finite and nonnegative",
                ));
            }
            let sum: f64 = frame.iter().sum();
            if !(sum > 0.0) {
                return Err(QdError::input(
                    line_of(i),
                    "frame has zero total probability",
                ));
            }
            if (sum - 1.0).abs() > WARN_TOLERANCE {
                warnings += 1;
            }
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                frame.iter_mut().for_each(|p| *p /= sum);
            }
            out.push(frame);
        }
        Ok(Ingested {
            dump: FrameDump {
                symbols,
                frames: out,
            },
            warnings,
        })
    }

    /// Build from in-memory frames.
    pub fn from_frames(symbols: Vec<String>, frames: Vec<Vec<f64>>) -> Result<Ingested> {
        let lines: Vec<usize> = (0..frames.len()).collect();
        Self::build(symbols, frames, &lines)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Header of symbols, then one frame per row.
    pub fn from_csv_reader<Rd: Read>(reader: Rd) -> Result<Ingested> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let symbols: Vec<String> = rdr
            .headers()
            .map_err(|e| QdError::input(1, e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let mut frames = Vec::new();
        let mut lines = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                QdError::input(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let frame = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| QdError::input(line, format!("{f:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            frames.push(frame);
            lines.push(line);
        }
        Self::build(symbols, frames, &lines)
    }

    /// `{"symbols": [...], "frames": [[...], ...]}`.
    pub fn from_json_str(text: &str) -> Result<Ingested> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            symbols: Vec<String>,
            frames: Vec<Vec<f64>>,
        }
        let raw: Raw =
            serde_json::from_str(text).map_err(|e| QdError::input(e.line(), e.to_string()))?;
        let lines = json_frame_lines(text);
        Self::build(raw.symbols, raw.frames, &lines)
    }

    /// Dispatch on extension: `.json` is JSON, anything else CSV.
    pub fn ingest(path: &Path) -> Result<Ingested> {
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json_str(&std::fs::read_to_string(path)?)
        } else {
            Self::from_csv_reader(std::fs::File::open(path)?)
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| QdError::Io(e.into());
        w.write_record(&self.symbols).map_err(io)?;
        for frame in &self.frames {
            w.write_record(frame.iter().map(|p| format!("{p:e}")))
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One frame per line.
    pub fn write_json<W: Write>(&self, mut writer: W) -> Result<()> {
        let json = |e: serde_json::Error| QdError::Io(e.into());
        write!(
            writer,
            "{{\"symbols\": {},\n\"frames\": [",
            serde_json::to_string(&self.symbols).map_err(json)?
        )?;
        for (i, frame) in self.frames.iter().enumerate() {
            let sep = if i == 0 { "\n" } else { ",\n" };
            write!(
                writer,
                "{sep}{}",
                serde_json::to_string(frame).map_err(json)?
            )?;
        }
        writeln!(writer, "\n]}}")?;
        Ok(())
    }
}

/// Source line of each element of the top-level `"frames"` array.
fn json_frame_lines(text: &str) -> Vec<usize> {
    let mut lines = Vec::new();
    let mut line = 1;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    let mut current = String::new();
    let mut last_key = String::new();
    let mut frames_depth = None;
    for ch in text.chars() {
        if ch == '\n' {
            line += 1;
        }
        if in_string {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
                last_key = std::mem::take(&mut current);
            } else {
                current.push(ch);
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '[' => {
                if depth == 1 && last_key == "frames" && frames_depth.is_none() {
                    frames_depth = Some(depth + 1);
                } else if frames_depth == Some(depth) {
                    lines.push(line);
                }
                depth += 1;
            }
            '}' | ']' => {
                depth = depth.saturating_sub(1);
                if frames_depth == Some(depth + 1) && ch == ']' && depth == 1 {
                    frames_depth = None;
                    last_key.clear();
                }
            }
            _ => {}
        }
    }
    lines
}

/// Each frame sorted descending, averaged position-wise. Nonincreasing.
pub fn rank_frequency(dump: &FrameDump) -> Vec<f64> {
    let sorted: Vec<Vec<f64>> = dump
        .frames
        .par_iter()
        .map(|f| {
            let mut s = f.clone();
            s.sort_by(|a, b| b.total_cmp(a));
            s
        })
        .collect();
    let mut mean = vec![0.0; dump.symbols.len()];
    for frame in &sorted {
        for (m, p) in mean.iter_mut().zip(frame) {
            *m += p;
        }
    }
    let count = sorted.len() as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    mean
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub stderr_a: f64,
    pub stderr_b: f64,
    pub r2: f64,
    /// Inclusive one-based ranks used.
    pub rank_range: [usize; 2],
}

/// `[1, last rank whose mean probability is at least TAIL_FLOOR]`.
pub fn default_rank_range(profile: &[f64]) -> [usize; 2] {
    let last = profile
        .iter()
        .rposition(|&p| p >= TAIL_FLOOR)
        .map_or(0, |i| i + 1);
    [1, last.max(1)]
}

/// Least squares of `ln p` on `ln r` over the inclusive rank range. The
/// standard error of `a = e^intercept` is propagated by the delta method.
pub fn fit_powerlaw(profile: &[f64], rank_range: [usize; 2]) -> Result<FitResult> {
    let [lo, hi] = rank_range;
    if lo < 1 || hi > profile.len() || hi < lo {
        return Err(QdError::domain(format!(
            "rank range [{lo}, {hi}] is not within 1..={}",
            profile.len()
        )));
    }
    if hi - lo + 1 < 3 {
        return Err(QdError::domain("a fit needs at least three ranks"));
    }
    let values = &profile[lo - 1..hi];
    if let Some(i) = values.iter().position(|&p| !(p > 0.0)) {
        return Err(QdError::domain(format!(
            "profile value at rank {} is not positive",
            lo + i
        )));
    }
    let xs: Vec<f64> = (lo..=hi).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|p| p.ln()).collect();
    let fit = ols(&xs, &ys);
    let flat = ys.iter().all(|&y| y == ys[0]);
    let (slope, intercept) = if flat {
        (0.0, ys[0])
    } else {
        (fit.slope, fit.intercept)
    };
    let a = intercept.exp();
    Ok(FitResult {
        a,
        b: if slope == 0.0 { 0.0 } else { -slope },
        stderr_a: a * fit.se_intercept,
        stderr_b: fit.se_slope,
        r2: fit.r2,
        rank_range,
    })
}

/// Synthetic dump of `frames` power-law frames over `symbol_0..symbol_{R-1}`,
/// each with its ranks assigned to a random permutation of the symbols. With
/// `draws = Some(m)` each frame is the empirical histogram of `m` samples
/// instead of the exact pmf.
pub fn synthetic_dump(
    spec: &PowerLawSpec,
    frames: usize,
    draws: Option<usize>,
    seed: u64,
) -> Result<FrameDump> {
    if frames == 0 {
        return Err(QdError::domain("at least one frame is required"));
    }
    if draws == Some(0) {
        return Err(QdError::domain("histogram frames need at least one draw"));
    }
    let r = spec.r() as usize;
    let pmf = spec.pmf_vec();
    let sampler = Sampler::new(&pmf);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..r).collect();
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        perm.shuffle(&mut rng);
        let by_rank: Vec<f64> = match draws {
            None => pmf.clone(),
            Some(m) => {
                let mut counts = vec![0.0; r];
                for _ in 0..m {
                    counts[sampler.draw(&mut rng)] += 1.0;
                }
                counts.iter().map(|c| c / m as f64).collect()
            }
        };
        let mut frame = vec![0.0; r];
        for (rank, &symbol) in perm.iter().enumerate() {
            frame[symbol] = by_rank[rank];
        }
        out.push(frame);
    }
    let symbols = (0..r).map(|i| format!("symbol_{i}")).collect();
    Ok(FrameDump::from_frames(symbols, out)?.dump)
}
