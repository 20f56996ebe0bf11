//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on usage or data errors, 2 when strict
//! validation or a reproduction check fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::engine::{self, EngineOptions};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::model::{validate, Dataset};
use crate::oracle::{self, Oracle};
use crate::query::{canonicalize, parse_query};
use crate::simgen::{self, GeneratorConfig, ObservationalSource, X1Bracket};
use crate::EPS_NUM;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

/// Published values are printed to three decimals.
pub const PUBLISHED_DECIMALS: usize = 3;

/// Bounds on probabilities of causation from experimental and observational
/// data.
#[derive(Debug, Parser)]
#[command(name = "causation-bounds", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bound a query with the closed-form bound rules.
    Bound {
        /// Dataset JSON file, or the name of a bundled example.
        #[arg(long)]
        data: String,
        #[arg(long)]
        query: String,
        /// Print the derivation tree as JSON.
        #[arg(long)]
        trace: bool,
        /// Also solve the linear program and check containment.
        #[arg(long)]
        oracle: bool,
        /// Refuse datasets that fail validation.
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 6)]
        precision: usize,
    },
    /// Tight bounds by linear programming.
    Oracle {
        #[arg(long)]
        data: String,
        #[arg(long)]
        query: String,
        /// Print the linear program instead of solving it.
        #[arg(long)]
        dump_lp: bool,
        #[arg(long, default_value_t = oracle::DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Run the simulation study and write its CSV.
    Simulate {
        #[arg(long, default_value_t = simgen::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = simgen::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = BracketArg::Printed)]
        bracket: BracketArg,
        /// Draw observational tables as published, or from the response types.
        #[arg(long, value_enum, default_value_t = SourceArg::Algorithm)]
        observational: SourceArg,
    },
    /// Check the consistency relation and LP feasibility of a dataset.
    Validate {
        #[arg(long)]
        data: String,
    },
    /// Recompute a worked example and compare with the published values.
    Reproduce {
        #[arg(long, value_enum)]
        example: Example,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BracketArg {
    Printed,
    Consistency,
}

impl From<BracketArg> for X1Bracket {
    fn from(b: BracketArg) -> Self {
        match b {
            BracketArg::Printed => X1Bracket::Printed,
            BracketArg::Consistency => X1Bracket::Consistency,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Algorithm,
    ResponseTypes,
}

impl From<SourceArg> for ObservationalSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Algorithm => ObservationalSource::Algorithm,
            SourceArg::ResponseTypes => ObservationalSource::ResponseTypes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    Treatment,
    Institute,
    Vaccine,
    Simulation,
}

/// Round half to even at `decimals` places.
pub fn round_half_even(v: f64, decimals: usize) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (v * scale).round_ties_even() / scale
}

pub fn fmt_prob(v: f64, decimals: usize) -> String {
    format!("{:.*}", decimals, round_half_even(v, decimals))
}

pub fn fmt_interval(lo: f64, hi: f64, decimals: usize) -> String {
    format!("[{}, {}]", fmt_prob(lo, decimals), fmt_prob(hi, decimals))
}

/// A dataset path, or the name of a bundled example.
pub fn load_data(arg: &str) -> Result<Dataset> {
    let path = Path::new(arg);
    if path.is_file() {
        return Dataset::load(path);
    }
    let name = arg.strip_suffix(".json").unwrap_or(arg);
    match fixtures::path(name) {
        Ok(p) if fixtures::NAMES.contains(&name) => Dataset::load(p),
        _ => Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{arg}: no such file or bundled example"),
        ))),
    }
}

/// One published value and the recomputed bound.
#[derive(Debug, Clone)]
pub struct ReproducedValue {
    pub query: &'static str,
    pub published: (f64, f64),
    pub lo: f64,
    pub hi: f64,
}

impl ReproducedValue {
    pub fn matches(&self) -> bool {
        round_half_even(self.lo, PUBLISHED_DECIMALS) == self.published.0
            && round_half_even(self.hi, PUBLISHED_DECIMALS) == self.published.1
    }
}

/// The published bounds of each worked example.
pub fn published_values(example: Example) -> &'static [(&'static str, f64, f64)] {
    match example {
        Example::Treatment => &[
            ("P(y3_x1, y1_x2)", 0.323, 0.340),
            ("P(y1_x2, y2_x3)", 0.243, 0.386),
            ("P(y3_x1, y2_x3)", 0.340, 0.472),
            ("P(y1_x2, y2_x3, x1, y3)", 0.0, 0.008),
            ("P(y3_x1, y2_x3, x2, y1)", 0.0, 0.011),
            ("P(y3_x1, y1_x2, x3, y2)", 0.0, 0.080),
            ("P(y3_x1, y1_x2, y2_x3)", 0.0, 0.099),
        ],
        Example::Institute => &[
            ("P(y1_x3, x2, y2)", 85.0 / 1200.0, 118.0 / 1200.0),
            ("P(y1_x4, x2, y2)", 0.0, 5.0 / 1200.0),
            ("P(y1_x3 | x2, y2)", 0.720, 1.0),
            ("P(y1_x4 | x2, y2)", 0.0, 0.042),
        ],
        Example::Vaccine => &[
            ("P(y4_x2, x1, y1)", 0.0, 0.005),
            ("P(y1_x1, x2, y4)", 0.0, 0.034),
            ("P(y4_x2, x1, y2)", 0.037, 0.062),
            ("P(y2_x1, x2, y4)", 0.0, 0.015),
            ("P(y4_x2, x1, y3)", 0.502, 0.527),
            ("P(y3_x1, x2, y4)", 0.0, 0.034),
            ("P(y1_x1, y4_x2)", 0.0, 0.039),
            ("P(y2_x1, y4_x2)", 0.037, 0.077),
            ("P(y3_x1, y4_x2)", 0.502, 0.561),
        ],
        Example::Simulation => &[],
    }
}

fn fixture_name(example: Example) -> &'static str {
    match example {
        Example::Treatment => "treatment",
        Example::Institute => "institute",
        Example::Vaccine => "vaccine",
        Example::Simulation => "simulation",
    }
}

/// Bound every published query of a worked example.
pub fn reproduce(example: Example) -> Result<Vec<ReproducedValue>> {
    let values = published_values(example);
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let ds = fixtures::load(fixture_name(example))?;
    values
        .iter()
        .map(|&(query, lo, hi)| {
            let q = parse_query(query, ds.space())?;
            let got = engine::bound(&ds, &q)?.interval;
            Ok(ReproducedValue {
                query,
                published: (round_half_even(lo, PUBLISHED_DECIMALS), round_half_even(hi, PUBLISHED_DECIMALS)),
                lo: got.lo,
                hi: got.hi,
            })
        })
        .collect()
}

/// Published average gap of the simulation study and the accepted spread.
pub const PUBLISHED_AVERAGE_GAP: f64 = 0.228;
pub const AVERAGE_GAP_TOLERANCE: f64 = 0.03;

/// Parse `args` (including the program name) and run, writing to `out` and
/// `err`. Returns the exit status.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Validation(_) => EXIT_FAILED,
                _ => EXIT_ERROR,
            }
        }
    }
}

fn execute(command: Command, out: &mut impl Write) -> Result<i32> {
    match command {
        Command::Bound {
            data,
            query,
            trace,
            oracle,
            strict,
            precision,
        } => cmd_bound(&data, &query, trace, oracle, strict, precision, out),
        Command::Oracle {
            data,
            query,
            dump_lp,
            budget,
        } => cmd_oracle(&data, &query, dump_lp, budget, out),
        Command::Simulate {
            samples,
            seed,
            out: path,
            bracket,
            observational,
        } => {
            let config = GeneratorConfig {
                bracket: bracket.into(),
                observational: observational.into(),
                ..GeneratorConfig::default()
            };
            cmd_simulate(samples, seed, path.as_deref(), &config, out)
        }
        Command::Validate { data } => cmd_validate(&data, out),
        Command::Reproduce { example } => cmd_reproduce(example, out),
    }
}

fn cmd_bound(
    data: &str,
    text: &str,
    trace: bool,
    with_oracle: bool,
    strict: bool,
    precision: usize,
    out: &mut impl Write,
) -> Result<i32> {
    let ds = load_data(data)?;
    let query = parse_query(text, ds.space())?;
    let options = EngineOptions {
        strict,
        ..EngineOptions::default()
    };
    let result = engine::bound_with(&ds, &query, &options)?;
    let iv = result.interval;
    writeln!(out, "{}", fmt_interval(iv.lo, iv.hi, precision))?;
    if !ds.validation().ok {
        writeln!(out, "warning: {}", ds.validation())?;
    }
    if with_oracle {
        let tight = Oracle::new(&ds)?.tight_bounds(&canonicalize(&query))?;
        let verdict = if iv.encloses(&tight, EPS_NUM) { "contained" } else { "NOT contained" };
        writeln!(out, "oracle {} {verdict}", fmt_interval(tight.lo, tight.hi, precision))?;
    }
    if trace {
        writeln!(out, "{}", result.trace.to_json())?;
    }
    Ok(EXIT_OK)
}

fn cmd_oracle(data: &str, text: &str, dump_lp: bool, budget: usize, out: &mut impl Write) -> Result<i32> {
    let ds = load_data(data)?;
    let query = canonicalize(&parse_query(text, ds.space())?);
    let oracle = Oracle::with_budget(&ds, budget)?;
    if dump_lp {
        write!(out, "{}", oracle.dump(&query))?;
        return Ok(EXIT_OK);
    }
    let iv = oracle.tight_bounds(&query)?;
    let mode = if oracle.is_exact() { "exact" } else { "float" };
    writeln!(out, "{} ({mode})", fmt_interval(iv.lo, iv.hi, 6))?;
    Ok(EXIT_OK)
}

fn cmd_simulate(
    samples: usize,
    seed: u64,
    path: Option<&Path>,
    config: &GeneratorConfig,
    out: &mut impl Write,
) -> Result<i32> {
    let start = Instant::now();
    let summary = simgen::run_simulation_with(samples, seed, config)?;
    writeln!(out, "samples          {}", summary.num_samples)?;
    writeln!(out, "seed             {seed}")?;
    writeln!(out, "average gap      {:.6}", summary.average_gap)?;
    writeln!(out, "containment rate {:.6}", summary.containment_rate)?;
    writeln!(out, "elapsed          {:.2?}", start.elapsed())?;
    if let Some(path) = path {
        simgen::export_csv(&summary.records, path)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(EXIT_OK)
}

fn cmd_validate(data: &str, out: &mut impl Write) -> Result<i32> {
    let ds = load_data(data)?;
    let report = validate(&ds, ds.tolerances().cons);
    writeln!(out, "{report}")?;
    match oracle::feasible(&ds) {
        Ok(true) => writeln!(out, "linear program: feasible")?,
        Ok(false) => writeln!(out, "linear program: infeasible")?,
        Err(e) => writeln!(out, "linear program: not checked ({e})")?,
    }
    Ok(if report.ok { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_reproduce(example: Example, out: &mut impl Write) -> Result<i32> {
    if example == Example::Simulation {
        let summary = simgen::run_simulation(simgen::DEFAULT_SAMPLES, simgen::DEFAULT_SEED)?;
        let ok = (summary.average_gap - PUBLISHED_AVERAGE_GAP).abs() <= AVERAGE_GAP_TOLERANCE;
        writeln!(out, "samples          {}", summary.num_samples)?;
        writeln!(
            out,
            "average gap      {:.3} (published {PUBLISHED_AVERAGE_GAP:.3} +/- {AVERAGE_GAP_TOLERANCE})",
            summary.average_gap
        )?;
        writeln!(out, "containment rate {:.3}", summary.containment_rate)?;
        writeln!(out, "{}", if ok { "ok" } else { "MISMATCH" })?;
        return Ok(if ok { EXIT_OK } else { EXIT_FAILED });
    }
    let rows = reproduce(example)?;
    let width = rows.iter().map(|r| r.query.len()).max().unwrap_or(0);
    let mut failed = 0;
    for r in &rows {
        let ok = r.matches();
        failed += usize::from(!ok);
        writeln!(
            out,
            "{:<width$}  {}  published {}  {}",
            r.query,
            fmt_interval(r.lo, r.hi, PUBLISHED_DECIMALS),
            fmt_interval(r.published.0, r.published.1, PUBLISHED_DECIMALS),
            if ok { "ok" } else { "MISMATCH" }
        )?;
    }
    if failed > 0 {
        writeln!(out, "{failed} of {} values differ", rows.len())?;
        return Ok(EXIT_FAILED);
    }
    Ok(EXIT_OK)
}
