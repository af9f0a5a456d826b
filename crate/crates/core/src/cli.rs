//! Command-line driver: curve and sweep generation, simulation batches, fitting
//! and config-driven sweeps. Output is CSV unless `--json` is given, built
//! fully in memory and then moved into place atomically.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::beam::{capped_width_sweep, rounds_for_mass, BeamConfig, BeamMode, BeamRow};
use crate::closed_form::{rt2_full_with, Rt2Constants};
use crate::decoder::{enumerate_paths, Automaton, Dfa, TokenTable};
use crate::error::QdError;
use crate::powerlaw::PowerLawSpec;
use crate::quantum::{prepare_advice, run_trials, DecodeMode, Engine, TrialRecord};
use crate::rankfreq::{
    default_rank_range, fit_powerlaw, rank_frequency, synthetic_dump, FrameDump,
};
use crate::runtime::{rt1, rt1_continuous, speedup_exponent, RuntimeQuery};
use crate::LogValue;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_INPUT: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &QdError) -> i32 {
    match err {
        QdError::Domain(_) | QdError::SingularExponent { .. } | QdError::OracleRefused(_) => {
            EXIT_USAGE
        }
        QdError::Infeasible(_)
        | QdError::EmptyBeam
        | QdError::EmptyLanguage { .. }
        | QdError::DeadPrefix => EXIT_INFEASIBLE,
        QdError::EnumerationOverflow { .. } | QdError::PrecisionExhausted { .. } => EXIT_BUDGET,
        QdError::Input { .. } | QdError::Io(_) => EXIT_INPUT,
    }
}

impl From<QdError> for CliError {
    fn from(err: QdError) -> Self {
        CliError {
            code: exit_code(&err),
            message: err.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Comma-separated values, each a number or an inclusive `start:stop:step` range.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    raw: String,
    values: Vec<f64>,
}

impl Grid {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn integers<T: TryFrom<u64>>(&self, what: &str) -> CliResult<Vec<T>> {
        self.values
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    T::try_from(v as u64).ok()
                } else {
                    None
                }
                .ok_or_else(|| {
                    CliError::usage(format!("{what} must be a nonnegative integer, got {v}"))
                })
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let mut values = Vec::new();
        for part in s.split(',') {
            let pieces: Vec<&str> = part.split(':').collect();
            match pieces.as_slice() {
                [v] => values.push(num(v)?),
                [a, b, st] => {
                    let (a, b, st) = (num(a)?, num(b)?, num(st)?);
                    if !(st > 0.0) || b < a {
                        return Err(format!(
                            "range {part:?} needs start <= stop and a positive step"
                        ));
                    }
                    let steps = ((b - a) / st + 1e-9).floor() as u64;
                    // Grid points are computed from the index, not accumulated.
                    values.extend((0..=steps).map(|i| a + i as f64 * st));
                }
                _ => return Err(format!("{part:?} is neither a number nor start:stop:step")),
            }
        }
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err("grid must contain finite values".into());
        }
        Ok(Grid {
            raw: s.to_string(),
            values,
        })
    }
}

/// `value`, `n^e` or `value*n^e`; `inf` is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamExpr {
    raw: String,
    coef: f64,
    exponent: f64,
}

impl ParamExpr {
    pub fn at(&self, n: u32) -> f64 {
        if self.exponent == 0.0 {
            self.coef
        } else {
            self.coef * (n as f64).powf(self.exponent)
        }
    }
}

impl FromStr for ParamExpr {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let (coef, power) = match t.split_once('*') {
            Some((c, p)) => (num(c)?, Some(p.trim())),
            None if t.starts_with('n') => (1.0, Some(t)),
            None => (num(t)?, None),
        };
        let exponent = match power {
            None => 0.0,
            Some(p) => match p.strip_prefix("n^") {
                Some(e) => num(e)?,
                None if p == "n" => 1.0,
                None => return Err(format!("{p:?} is not of the form n^e")),
            },
        };
        if coef.is_nan() || !exponent.is_finite() {
            return Err(format!("{s:?} is not a valid parameter"));
        }
        Ok(ParamExpr {
            raw: t.to_string(),
            coef,
            exponent,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output file; standard output when absent.
    #[arg(long, global = false)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the hardware parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// TOML file whose keys mirror these flags; flags given here win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Parser)]
#[command(
    name = "qdecode",
    version,
    about = "Quantum search decoding: runtime theory, beam bounds and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Speedup exponent f(R, k) over a grid.
    #[command(args_override_self = true)]
    Curves(CurvesArgs),
    /// Expected-runtime bounds over (R, k, n).
    #[command(args_override_self = true)]
    Runtime(RuntimeArgs),
    /// Beam post-amplification sweep over n.
    #[command(args_override_self = true)]
    Beam(BeamArgs),
    /// Batches of simulated quantum decodes.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Rank-frequency power-law fit of a frame dump.
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Synthetic power-law frame dump.
    #[command(args_override_self = true)]
    Sample(SampleArgs),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Curves(a) => &a.common,
            Command::Runtime(a) => &a.common,
            Command::Beam(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Fit(a) => &a.common,
            Command::Sample(a) => &a.common,
        }
    }
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Branching ratios.
    #[arg(long = "r", default_value = "3,5,10,15,20,30,40,60,100")]
    pub r: Grid,
    /// Ascending exponent grid.
    #[arg(long = "k", default_value = "0:10:0.05")]
    pub k: Grid,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RuntimeArgs {
    #[arg(long = "r", default_value = "10")]
    pub r: Grid,
    #[arg(long = "k", default_value = "2.5")]
    pub k: Grid,
    #[arg(long = "n", default_value = "1:100:1")]
    pub n: Grid,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BeamModeArg {
    /// Splitting exponent f_split (may depend on n).
    Split,
    /// Retained fraction g (may depend on n).
    Fraction,
    /// Capped width N_max (`inf` disables the cap).
    Capped,
    /// Probability cutoff p0.
    Cutoff,
    /// Constant retained mass C0 with optimized f_split.
    Constant,
}

#[derive(Debug, Args)]
pub struct BeamArgs {
    #[arg(long = "r", default_value_t = 5)]
    pub r: u64,
    #[arg(long = "k", default_value_t = 2.91)]
    pub k: f64,
    #[arg(long = "n", default_value = "10:500:10")]
    pub n: Grid,
    #[arg(long, value_enum, default_value_t = BeamModeArg::Capped)]
    pub mode: BeamModeArg,
    /// Mode parameter: a number, `n^e` or `c*n^e`.
    #[arg(long, default_value = "1e15")]
    pub param: ParamExpr,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecoderArg {
    Search,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    /// Score by path probability (most likely parse).
    Mlp,
    /// Seeded uniform random scores.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Dense,
    Subspace,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Acceptor JSON; the full tree over the table's alphabet when absent.
    #[arg(long)]
    pub acceptor: Option<PathBuf>,
    /// Token-probability CSV; a power-law table from --r/--k/--n when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long = "r", default_value_t = 3)]
    pub r: usize,
    #[arg(long = "k", default_value_t = 2.0)]
    pub k: f64,
    #[arg(long = "n", default_value_t = 6)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = DecoderArg::Search)]
    pub decoder: DecoderArg,
    /// Probability cutoff for the beam decoder.
    #[arg(long, default_value_t = 0.0)]
    pub p0: f64,
    /// Maximum-finding rounds; ⌈log₂ N⌉ + 3 when absent.
    #[arg(long)]
    pub rounds: Option<u32>,
    #[arg(long, value_enum, default_value_t = EngineArg::Subspace)]
    pub engine: EngineArg,
    #[arg(long, value_enum, default_value_t = ScoreArg::Mlp)]
    pub score: ScoreArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Frame dump, CSV or `.json`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Inclusive one-based ranks `lo:hi`; all ranks above the numerical tail by default.
    #[arg(long)]
    pub rank_range: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long = "r", default_value_t = 29)]
    pub r: u64,
    #[arg(long = "k", default_value_t = 3.03)]
    pub k: f64,
    #[arg(long, default_value_t = 1000)]
    pub frames: usize,
    /// Draws per frame; frames are exact pmfs when absent.
    #[arg(long)]
    pub draws: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

/// Run with process arguments; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut stdout = std::io::stdout().lock();
    match run(args, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if !e.message.is_empty() {
                eprintln!("qdecode: {}", e.message);
            }
            e.code
        }
    }
}

/// Parse, merge the config file, execute, and write the result to `--out`
/// or `stdout`.
pub fn run<I, T, W>(args: I, stdout: &mut W) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = merge_config(args)?;
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let shown = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            if shown {
                stdout.write_all(text.as_bytes()).map_err(QdError::from)?;
                return Ok(());
            }
            return Err(CliError::usage(text.trim_end().to_string()));
        }
    };
    let common = cli.command.common().clone();
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = common.threads {
            if t == 0 {
                return Err(CliError::usage("--threads must be positive"));
            }
            b = b.num_threads(t);
        }
        b.build().map_err(|e| CliError::usage(e.to_string()))?
    };
    let output = pool.install(|| execute(&cli.command))?;
    emit(common.out.as_deref(), &output, stdout)
}

/// Splice config keys in as flags right after the subcommand, so that flags
/// on the command line (which come later) override them.
fn merge_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut config = None;
    for (i, a) in args.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        }
    }
    let Some(path) = config else {
        return Ok(args);
    };
    let Some(sub_at) = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
    else {
        return Ok(args);
    };
    let sub_at = sub_at + 1;
    let subcommand = args[sub_at].to_string_lossy().to_string();
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError {
        code: EXIT_INPUT,
        message: format!("config {}: {e}", path.display()),
    })?;
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in &table {
        let flag = key.replace('_', "-");
        if flag == "command" {
            match value.as_str() {
                Some(c) if c == subcommand => continue,
                _ => {
                    return Err(CliError::usage(format!(
                        "config command {value} does not match {subcommand:?}"
                    )))
                }
            }
        }
        if flag == "config" {
            return Err(CliError::usage(
                "config files cannot include other config files",
            ));
        }
        let text = match value {
            toml::Value::Boolean(true) => {
                extra.push(format!("--{flag}").into());
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(i) => Ok(i.to_string()),
                    toml::Value::Float(f) => Ok(f.to_string()),
                    other => Err(CliError::usage(format!(
                        "config key {key:?}: unsupported list item {other}"
                    ))),
                })
                .collect::<CliResult<Vec<_>>>()?
                .join(","),
            other => {
                return Err(CliError::usage(format!(
                    "config key {key:?}: unsupported value {other}"
                )))
            }
        };
        extra.push(format!("--{flag}").into());
        extra.push(text.into());
    }
    let mut merged = args[..=sub_at].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[sub_at + 1..]);
    Ok(merged)
}

/// Write the whole output at once; files go through a temporary in the same
/// directory so that a failure never leaves a partial file.
fn emit<W: Write>(out: Option<&Path>, bytes: &[u8], stdout: &mut W) -> CliResult<()> {
    match out {
        None => {
            stdout.write_all(bytes).map_err(QdError::from)?;
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError {
                code: EXIT_INPUT,
                message: format!("cannot write {}: {e}", path.display()),
            })?;
            tmp.write_all(bytes).map_err(QdError::from)?;
            tmp.persist(path).map_err(|e| CliError {
                code: EXIT_INPUT,
                message: format!("cannot write {}: {}", path.display(), e.error),
            })?;
            Ok(())
        }
    }
}

fn execute(command: &Command) -> CliResult<Vec<u8>> {
    match command {
        Command::Curves(a) => cmd_curves(a),
        Command::Runtime(a) => cmd_runtime(a),
        Command::Beam(a) => cmd_beam(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Sample(a) => cmd_sample(a),
    }
}

fn to_csv<S: Serialize>(rows: &[S], header: Option<&str>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    if let Some(h) = header {
        buf.extend_from_slice(h.as_bytes());
        buf.push(b'\n');
    }
    let mut w = csv::Writer::from_writer(&mut buf);
    for row in rows {
        w.serialize(row).map_err(|e| QdError::Io(e.into()))?;
    }
    w.flush().map_err(QdError::from)?;
    drop(w);
    Ok(buf)
}

fn to_json<S: Serialize + ?Sized>(value: &S) -> CliResult<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value).map_err(|e| QdError::Io(e.into()))?;
    buf.push(b'\n');
    Ok(buf)
}

fn rows_out<S: Serialize>(rows: &[S], json: bool) -> CliResult<Vec<u8>> {
    if json {
        to_json(rows)
    } else {
        to_csv(rows, None)
    }
}

#[derive(Debug, Serialize)]
struct CurveRow {
    #[serde(rename = "R")]
    r: u64,
    k: f64,
    f: f64,
}

fn ascending(values: &[f64], what: &str) -> CliResult<()> {
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::usage(format!(
            "{what} grid must be strictly ascending"
        )));
    }
    Ok(())
}

fn cmd_curves(a: &CurvesArgs) -> CliResult<Vec<u8>> {
    let rs: Vec<u64> = a.r.integers("R")?;
    ascending(a.k.values(), "k")?;
    let points: Vec<(u64, f64)> = rs
        .iter()
        .flat_map(|&r| a.k.values().iter().map(move |&k| (r, k)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(r, k)| {
            Ok(CurveRow {
                r,
                k,
                f: speedup_exponent(r, k)?,
            })
        })
        .collect::<Result<Vec<_>, QdError>>()?;
    rows_out(&rows, a.common.json)
}

#[derive(Debug, Serialize)]
struct RuntimeRow {
    #[serde(rename = "R")]
    r: u64,
    k: f64,
    n: u32,
    f: f64,
    log10_rt1: f64,
    log10_rt1_continuous: f64,
    log10_rt2: f64,
    rt2_prime: f64,
    log10_rt2_total: f64,
}

fn cmd_runtime(a: &RuntimeArgs) -> CliResult<Vec<u8>> {
    let rs: Vec<u64> = a.r.integers("R")?;
    let ns: Vec<u32> = a.n.integers("n")?;
    let consts = Rt2Constants { c1: a.c1, c2: a.c2 };
    let mut points = Vec::new();
    for &r in &rs {
        for &k in a.k.values() {
            for &n in &ns {
                points.push((r, k, n));
            }
        }
    }
    let rows = points
        .par_iter()
        .map(|&(r, k, n)| {
            let q = RuntimeQuery::new(r, k, n)?;
            let rt2 = rt2_full_with(r, k, n, consts)?;
            Ok(RuntimeRow {
                r,
                k,
                n,
                f: speedup_exponent(r, k)?,
                log10_rt1: rt1(&q).log10(),
                log10_rt1_continuous: rt1_continuous(&q)?.log10(),
                log10_rt2: rt2.rt.log10(),
                rt2_prime: rt2.rt_prime,
                log10_rt2_total: rt2.total.log10(),
            })
        })
        .collect::<Result<Vec<_>, QdError>>()?;
    rows_out(&rows, a.common.json)
}

fn beam_mode(mode: BeamModeArg, value: f64) -> BeamMode {
    match mode {
        BeamModeArg::Split => BeamMode::Split(value),
        BeamModeArg::Fraction => BeamMode::Fraction(value),
        BeamModeArg::Capped => BeamMode::Capped(value.log10()),
        BeamModeArg::Cutoff => BeamMode::Cutoff(value),
        BeamModeArg::Constant => BeamMode::Constant(value),
    }
}

#[derive(Debug, Serialize)]
struct BeamMetadata {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    #[serde(rename = "R")]
    r: u64,
    k: f64,
    n: String,
    mode: String,
    param: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rounds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rounds_inverse_sqrt: Option<u64>,
}

fn cmd_beam(a: &BeamArgs) -> CliResult<Vec<u8>> {
    let ns: Vec<u32> = a.n.integers("n")?;
    let mode_name = a
        .mode
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default();
    let rows: Vec<BeamRow> = if a.mode == BeamModeArg::Capped && a.param.exponent == 0.0 {
        let cap = LogValue::from_ln(a.param.coef.ln());
        capped_width_sweep(a.r, a.k, cap, &ns)?
            .into_iter()
            .map(|row| BeamRow {
                r: a.r,
                k: a.k,
                n: row.n,
                mode: "capped".into(),
                parameter: a.param.coef.log10(),
                log10_n_hyp: row.n_hyp.log10(),
                log10_runtime: row.runtime.log10(),
                f_split: row.f_split,
            })
            .collect()
    } else {
        ns.par_iter()
            .map(|&n| {
                BeamConfig {
                    r: a.r,
                    k: a.k,
                    n,
                    mode: beam_mode(a.mode, a.param.at(n)),
                }
                .evaluate()
            })
            .collect::<Result<Vec<_>, QdError>>()?
    };
    let (rounds, rounds_inverse_sqrt) =
        if a.mode == BeamModeArg::Constant && a.param.exponent == 0.0 {
            (
                Some(rounds_for_mass(a.param.coef)),
                Some((1.0 / a.param.coef.sqrt()).ceil() as u64),
            )
        } else {
            (None, None)
        };
    let meta = BeamMetadata {
        tool: "qdecode",
        version: env!("CARGO_PKG_VERSION"),
        command: "beam",
        r: a.r,
        k: a.k,
        n: a.n.raw.clone(),
        mode: mode_name,
        param: a.param.raw.clone(),
        seed: a.common.seed,
        rounds,
        rounds_inverse_sqrt,
    };
    if a.common.json {
        #[derive(Serialize)]
        struct Out<'a> {
            metadata: &'a BeamMetadata,
            rows: &'a [BeamRow],
        }
        return to_json(&Out {
            metadata: &meta,
            rows: &rows,
        });
    }
    let mut header = format!(
        "# {} {} beam R={} k={} n={} mode={} param={} seed={}",
        meta.tool, meta.version, meta.r, meta.k, meta.n, meta.mode, meta.param, meta.seed
    );
    if let (Some(x), Some(y)) = (rounds, rounds_inverse_sqrt) {
        header.push_str(&format!(" rounds={x} rounds_inverse_sqrt={y}"));
    }
    to_csv(&rows, Some(&header))
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    trials: u64,
    #[serde(rename = "N")]
    n: usize,
    overlap: f64,
    mean_queries: f64,
    success_rate: f64,
    mean_total_queries: f64,
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<Vec<u8>> {
    if a.trials == 0 {
        return Err(CliError::usage("--trials must be positive"));
    }
    let table = match &a.table {
        Some(p) => TokenTable::from_csv_reader(std::fs::File::open(p).map_err(QdError::from)?)?,
        None => TokenTable::power_law(a.r, a.k, a.n)?,
    };
    let acceptor = match &a.acceptor {
        Some(p) => Dfa::from_json_reader(std::fs::File::open(p).map_err(QdError::from)?)?,
        None => Dfa::full(table.alphabet_size()),
    };
    if acceptor.alphabet_size() != table.alphabet_size() {
        return Err(CliError {
            code: EXIT_INPUT,
            message: "acceptor and token table alphabets differ in size".into(),
        });
    }
    let dist = enumerate_paths(&acceptor, &table)?;
    let state = match a.score {
        ScoreArg::Mlp => prepare_advice(&dist, |e| e.ln_prob),
        ScoreArg::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed ^ 0x5C0E_5EED);
            prepare_advice(&dist, |_| rng.gen::<f64>())
        }
    };
    let mode = match a.decoder {
        DecoderArg::Search => DecodeMode::Search,
        DecoderArg::Beam => DecodeMode::Beam { p0: a.p0 },
    };
    let engine = match a.engine {
        EngineArg::Dense => Engine::Dense,
        EngineArg::Subspace => Engine::Subspace,
    };
    let records = run_trials(&state, mode, a.rounds, a.trials, a.common.seed, engine)?;
    let t = records.len() as f64;
    let summary = SimulationSummary {
        trials: a.trials,
        n: state.len(),
        overlap: records[0].overlap,
        mean_queries: records.iter().map(|r| r.queries as f64).sum::<f64>() / t,
        success_rate: records.iter().filter(|r| r.success).count() as f64 / t,
        mean_total_queries: records.iter().map(|r| r.total_queries as f64).sum::<f64>() / t,
    };
    if a.common.json {
        #[derive(Serialize)]
        struct Out<'a> {
            trials: &'a [TrialRecord],
            summary: &'a SimulationSummary,
        }
        return to_json(&Out {
            trials: &records,
            summary: &summary,
        });
    }
    let mut buf = to_csv(&records, None)?;
    // The summary row reuses the trial columns: mean queries under `queries`,
    // success rate under `success`, mean total under `total_queries`.
    let mut w = csv::Writer::from_writer(&mut buf);
    w.write_record([
        "summary".to_string(),
        summary.n.to_string(),
        summary.overlap.to_string(),
        summary.mean_queries.to_string(),
        summary.success_rate.to_string(),
        String::new(),
        summary.mean_total_queries.to_string(),
    ])
    .map_err(|e| QdError::Io(e.into()))?;
    w.flush().map_err(QdError::from)?;
    drop(w);
    Ok(buf)
}

fn parse_rank_range(s: &str) -> CliResult<[usize; 2]> {
    let bad = || CliError::usage(format!("rank range {s:?} must be lo:hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok([
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ])
}

fn cmd_fit(a: &FitArgs) -> CliResult<Vec<u8>> {
    let path = a
        .input
        .as_deref()
        .ok_or_else(|| CliError::usage("fit needs --input"))?;
    let range = a.rank_range.as_deref().map(parse_rank_range).transpose()?;
    let ingested = FrameDump::ingest(path)?;
    if ingested.warnings > 0 {
        eprintln!(
            "qdecode: renormalized {} frame(s) whose probabilities did not sum to 1",
            ingested.warnings
        );
    }
    let profile = rank_frequency(&ingested.dump);
    let range = range.unwrap_or_else(|| default_rank_range(&profile));
    to_json(&fit_powerlaw(&profile, range)?)
}

fn cmd_sample(a: &SampleArgs) -> CliResult<Vec<u8>> {
    let spec = PowerLawSpec::new(a.r, a.k)?;
    let dump = synthetic_dump(&spec, a.frames, a.draws, a.common.seed)?;
    let json = a.common.json
        || a.common
            .out
            .as_deref()
            .and_then(Path::extension)
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut buf = Vec::new();
    if json {
        dump.write_json(&mut buf)?;
    } else {
        dump.write_csv(&mut buf)?;
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> CliResult<String> {
        let mut out = Vec::new();
        let mut full = vec!["qdecode"];
        full.extend_from_slice(args);
        run(full, &mut out)?;
        Ok(String::from_utf8(out).unwrap())
    }

    #[test]
    fn grid_parsing() {
        let g: Grid = "0:1:0.25,3".parse().unwrap();
        assert_eq!(g.values(), &[0.0, 0.25, 0.5, 0.75, 1.0, 3.0]);
        assert_eq!("0:10:0.05".parse::<Grid>().unwrap().values().len(), 201);
        assert!("1:0:1".parse::<Grid>().is_err());
        assert!("a".parse::<Grid>().is_err());
    }

    #[test]
    fn param_parsing() {
        let p: ParamExpr = "n^-0.5".parse().unwrap();
        assert_eq!(p.at(100), 0.1);
        let p: ParamExpr = "2*n^-1".parse().unwrap();
        assert_eq!(p.at(4), 0.5);
        let p: ParamExpr = "inf".parse().unwrap();
        assert_eq!(p.at(3), f64::INFINITY);
        assert!("n^x".parse::<ParamExpr>().is_err());
    }

    #[test]
    fn curves_examples() {
        let out = run_str(&["curves", "--r", "2", "--k", "0"]).unwrap();
        assert_eq!(out, "R,k,f\n2,0.0,0.5\n");
        let out = run_str(&["curves", "--r", "3", "--k", "2"]).unwrap();
        let f: f64 = out
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap();
        assert!((f - 0.4114).abs() < 5e-5, "{f}");
        let e = run_str(&["curves", "--k", "1,0.5"]).unwrap_err();
        assert_eq!(e.code, EXIT_USAGE);
        let e = run_str(&["curves", "--r", "1", "--k", "1"]).unwrap_err();
        assert_eq!(e.code, EXIT_USAGE);
    }

    #[test]
    fn infeasible_beam_exit_code() {
        let e = run_str(&[
            "beam", "--r", "6", "--k", "2", "--n", "40", "--mode", "constant", "--param", "1",
        ])
        .unwrap_err();
        assert_eq!(e.code, EXIT_INFEASIBLE);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let e = run_str(&["curves", "--bogus", "1"]).unwrap_err();
        assert_eq!(e.code, EXIT_USAGE);
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(
            exit_code(&QdError::EnumerationOverflow { budget: 1 }),
            EXIT_BUDGET
        );
        assert_eq!(
            exit_code(&QdError::Input {
                line: 1,
                msg: String::new()
            }),
            EXIT_INPUT
        );
        assert_eq!(
            exit_code(&QdError::Infeasible(String::new())),
            EXIT_INFEASIBLE
        );
    }
}
