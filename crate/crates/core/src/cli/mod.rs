//! Command-line runner: argument parsing, resolved run configuration, output rendering
//! and exit codes.

mod commands;
mod selftest;

use crate::cusp_surface::{SurfaceModel, SurfaceSpec};
use crate::error::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

pub use selftest::{run_selftest, SelftestRow};

/// Version string echoed into every output.
pub const VERSION: &str = concat!("cusp-bergman ", env!("CARGO_PKG_VERSION"));

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "CUSP_BERGMAN_THREADS";

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Evaluation grid `kind:start:end:n` with `kind` one of `s` (`log|z|^2`) or `z` (`|z|`),
/// spaced linearly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    S,
    Z,
}

impl GridSpec {
    /// Grid points as `s` values.
    pub fn s_values(&self) -> Vec<f64> {
        match self.kind {
            GridKind::S => self.linear(),
            GridKind::Z => self.linear().into_iter().map(|z| 2.0 * z.ln()).collect(),
        }
    }
}

impl GridSpec {
    /// Grid points as radii `|z|`.
    pub fn z_values(&self) -> Vec<f64> {
        match self.kind {
            GridKind::S => self.s_values().into_iter().map(|s| (0.5 * s).exp()).collect(),
            GridKind::Z => self.linear(),
        }
    }

    fn linear(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| if n == 1 { self.start } else { self.start + (self.end - self.start) * i as f64 / (n - 1) as f64 })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = String;
    fn from_str(text: &str) -> Result<Self, String> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 4 {
            return Err(format!("grid must read kind:start:end:n, got '{text}'"));
        }
        let kind = match parts[0] {
            "s" => GridKind::S,
            "z" => GridKind::Z,
            other => return Err(format!("grid kind must be 's' or 'z', got '{other}'")),
        };
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("grid bound '{t}': {e}"));
        let (start, end) = (num(parts[1])?, num(parts[2])?);
        let n: usize = parts[3].parse().map_err(|e| format!("grid size '{}': {e}", parts[3]))?;
        if n < 1 || !start.is_finite() || !end.is_finite() {
            return Err(format!("grid '{text}' is empty or unbounded"));
        }
        if kind == GridKind::Z && !(start > 0.0 && end > 0.0 && start < 1.0 && end < 1.0) {
            return Err(format!("|z| grid must lie in (0, 1), got '{text}'"));
        }
        if kind == GridKind::S && !(start < 0.0 && end < 0.0) {
            return Err(format!("s grid must be negative, got '{text}'"));
        }
        Ok(GridSpec { kind, start, end, n })
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            GridKind::S => "s",
            GridKind::Z => "z",
        };
        write!(f, "{k}:{}:{}:{}", self.start, self.end, self.n)
    }
}

/// Closed interval `a:b` with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub start: f64,
    pub end: f64,
}

impl FromStr for Range {
    type Err = String;
    fn from_str(text: &str) -> Result<Self, String> {
        let (a, b) = text.split_once(':').ok_or_else(|| format!("range must read a:b, got '{text}'"))?;
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("range bound '{t}': {e}"));
        let (start, end) = (num(a)?, num(b)?);
        if !(start < end) {
            return Err(format!("range needs a < b, got '{text}'"));
        }
        Ok(Range { start, end })
    }
}

#[derive(Parser, Debug)]
#[command(name = "cusp-bergman", version, about = "Bergman kernels near Poincare cusps")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output format (default depends on the command).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file (default stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Surface model as inline JSON or a path to a JSON file.
    #[arg(long, global = true)]
    pub surface: Option<String>,
    /// Line bundle degree of the default surface model.
    #[arg(long, global = true, default_value_t = 1)]
    pub k: u32,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub r: f64,
    #[arg(long, global = true, default_value_t = 0.85)]
    pub beta: f64,
    #[arg(long, global = true, default_value_t = 0.5)]
    pub kappa: f64,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Diagonal model kernel on the punctured disc.
    ModelKernel {
        #[arg(long)]
        p: u32,
        /// Radii `|z|`, comma separated.
        #[arg(long, value_delimiter = ',')]
        z_abs: Vec<f64>,
        /// Grid `s:start:end:n` or `z:start:end:n`.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<GridSpec>,
    },
    /// Quotient of the surface kernel by the model kernel over a cusp range.
    QuotientScan {
        #[arg(long)]
        p: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        p_ladder: Vec<u32>,
        #[arg(long, allow_hyphen_values = true, default_value = "-40:-4")]
        s_range: Range,
        /// Grid points, spaced geometrically in `|s|`.
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        angles: usize,
    },
    /// Projected and orthonormalized cut-off monomials.
    Basis {
        #[arg(long)]
        p: u32,
        #[arg(long, value_enum, default_value_t = HeadKind::Delta)]
        heads: HeadKind,
        /// Also write the coefficient matrix `(j, l, sign, log_abs)` to this CSV file.
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Zeros of Gaussian random sections.
    Zeros {
        #[arg(long)]
        p: u32,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Annulus `s1:s2` in `s = log|z|^2`.
        #[arg(long, allow_hyphen_values = true, default_value = "-2:2")]
        annulus: Range,
    },
    /// Fubini-Study pullback density and the correction `eta_p`.
    FsMetric {
        #[arg(long)]
        p: u32,
        #[arg(long, allow_hyphen_values = true, default_value = "s:-40:-4:50")]
        grid: GridSpec,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta: f64,
    },
    /// Fast invariant suite with a pass/fail table.
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    Delta,
    DeltaPrime,
}

/// Fully resolved run configuration, echoed into every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub surface: Option<SurfaceSpec>,
    pub p: Option<u32>,
    pub p_ladder: Option<Vec<u32>>,
    pub r: f64,
    pub beta: f64,
    pub kappa: f64,
    pub grid: Option<String>,
    pub seed: u64,
    pub out: Option<String>,
    pub format: Format,
    /// Command-specific settings.
    pub params: BTreeMap<String, serde_json::Value>,
}

/// A failed run with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError { code: EXIT_NUMERICAL, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. }
            | Error::Factorization(_)
            | Error::RankDeficient { .. }
            | Error::Differentiation { .. }
            | Error::RootFinder { .. } => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        };
        CliError { code, message: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// One table cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) if *x == 0.0 || (1e-4..1e6).contains(&x.abs()) => format!("{x}"),
            Cell::F(x) => format!("{x:e}"),
            Cell::U(n) => n.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::F)
    }
}

/// Rows plus a JSON summary, rendered in either format.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Option<serde_json::Value>,
    /// Exit code after a successful write (nonzero for invariant failures).
    pub status: u8,
    /// Human-readable text used instead of the table when no format is requested.
    pub text: Option<String>,
}

fn render(report: &Report, config: &RunConfig, explicit_format: bool) -> Result<Vec<u8>, CliError> {
    let json_err = |e: serde_json::Error| CliError::numerical(format!("serialization: {e}"));
    if let (Some(text), false) = (&report.text, explicit_format) {
        return Ok(text.clone().into_bytes());
    }
    match config.format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = report
                .rows
                .iter()
                .map(|r| {
                    let m: serde_json::Map<String, serde_json::Value> = report
                        .columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| (c.to_string(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null)))
                        .collect();
                    serde_json::Value::Object(m)
                })
                .collect();
            let doc = serde_json::json!({
                "version": VERSION,
                "config": config,
                "summary": report.summary,
                "rows": rows,
            });
            let mut out = serde_json::to_vec_pretty(&doc).map_err(json_err)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = Vec::new();
            writeln!(out, "# version: {VERSION}").expect("in-memory write");
            writeln!(out, "# config: {}", serde_json::to_string(config).map_err(json_err)?).expect("in-memory write");
            if let Some(s) = &report.summary {
                writeln!(out, "# summary: {}", serde_json::to_string(s).map_err(json_err)?).expect("in-memory write");
            }
            let mut w = csv::Writer::from_writer(out);
            let io = |e: csv::Error| CliError::numerical(format!("csv: {e}"));
            w.write_record(&report.columns).map_err(io)?;
            for r in &report.rows {
                w.write_record(r.iter().map(Cell::render)).map_err(io)?;
            }
            w.into_inner().map_err(|e| CliError::numerical(format!("csv: {e}")))
        }
    }
}

/// Surface model from inline JSON, a JSON file, or the default of degree `k`.
pub fn resolve_surface(surface: Option<&str>, k: u32) -> Result<SurfaceModel, CliError> {
    match surface {
        None => Ok(SurfaceModel::standard(k)?),
        Some(text) if text.trim_start().starts_with('{') => Ok(SurfaceModel::from_json(text)?),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("surface file '{path}': {e}")))?;
            Ok(SurfaceModel::from_json(&text)?)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    // a pool built earlier in the same process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse `args`, run the command, write its output, and return the exit code.
/// Diagnostics go to `stderr`; output goes to `stdout` unless `--out` is given.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    match execute(&cli) {
        Ok((bytes, status)) => {
            let written = match &cli.common.out {
                Some(path) => std::fs::write(path, &bytes).map_err(|e| format!("cannot write '{}': {e}", path.display())),
                None => stdout.write_all(&bytes).map_err(|e| e.to_string()),
            };
            if let Err(msg) = written {
                let _ = writeln!(stderr, "error: {msg}");
                return EXIT_CONFIG;
            }
            status
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code
        }
    }
}

/// Run the parsed command and return the rendered output with its exit status.
pub fn execute(cli: &Cli) -> Result<(Vec<u8>, u8), CliError> {
    configure_threads()?;
    let (config, report) = commands::dispatch(cli)?;
    let bytes = render(&report, &config, cli.common.format.is_some())?;
    Ok((bytes, report.status))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g: GridSpec = "s:-40:-4:100".parse().unwrap();
        let v = g.s_values();
        assert_eq!(v.len(), 100);
        assert_eq!((v[0], v[99]), (-40.0, -4.0));
        assert!("s:-1:2:10".parse::<GridSpec>().is_err());
        assert!("z:0.1:1.5:10".parse::<GridSpec>().is_err());
        assert!("q:1:2:3".parse::<GridSpec>().is_err());
        assert_eq!(g.to_string(), "s:-40:-4:100");
    }

    #[test]
    fn ranges() {
        let r: Range = "-2:2".parse().unwrap();
        assert_eq!((r.start, r.end), (-2.0, 2.0));
        assert!("2:-2".parse::<Range>().is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::Domain("x".into())).code, EXIT_CONFIG);
        assert_eq!(CliError::from(Error::Factorization("x".into())).code, EXIT_NUMERICAL);
    }
}
