//! Command-line front end.
//!
//! ```text
//! membrane-bm <density|sample|path|verify> --config <file> [--seed N] [--out PATH] [--format csv|jsonl]
//! ```
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage or
//! config error. Numbers are written with 17 significant digits in CSV and
//! in shortest round-trip form in JSON.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::density::TransitionKernel;
use crate::error::Error;
use crate::geometry::{build_decomposition, ModelParams, SpaceDecomposition};
use crate::quadrature::QuadratureSpec;
use crate::sampler::{sample_joint_batch, sample_paths, validate_grid, RngState};
use crate::verify::grid::ModelCell;
use crate::verify::report::{summary_table, tally};
use crate::verify::suite::{run_suite, SuiteOptions, DEFAULT_N, SUITES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Default seed when neither the config nor `--seed` sets one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "membrane-bm", version, about = "Brownian motion with a partly reflecting membrane: densities, exact sampling, verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the transition density on a grid.
    Density(CommonArgs),
    /// Draw endpoints and local times of one step.
    Sample(CommonArgs),
    /// Simulate paths on a time grid.
    Path(CommonArgs),
    /// Run a verification suite.
    Verify(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Density,
    Sample,
    Path,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

/// A single time or a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    Single(f64),
    Grid(Vec<f64>),
}

/// `count` equally spaced points from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Contents of the `--config` file. Every field is optional; each command
/// checks for the fields it needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<TimeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<QuadratureSpec>,
    /// Density evaluation grid, one axis per coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Axis>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self, Error> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn model(&self) -> Result<&ModelParams, Error> {
        self.model.as_ref().ok_or_else(|| Error::Config("missing field 'model'".into()))
    }

    fn single_time(&self) -> Result<f64, Error> {
        let t = match &self.t {
            Some(TimeSpec::Single(t)) => *t,
            Some(TimeSpec::Grid(g)) if g.len() == 1 => g[0],
            Some(TimeSpec::Grid(_)) => return Err(Error::Config("'t' must be a single time for this command".into())),
            None => return Err(Error::Config("missing field 't'".into())),
        };
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::NonPositiveTime(t));
        }
        Ok(t)
    }

    /// Path grid: a single `t` means `[0, t]`; a leading 0 is added if absent.
    fn time_grid(&self) -> Result<Vec<f64>, Error> {
        let mut grid = match &self.t {
            Some(TimeSpec::Single(t)) => vec![*t],
            Some(TimeSpec::Grid(g)) => g.clone(),
            None => return Err(Error::Config("missing field 't'".into())),
        };
        if grid.first() != Some(&0.0) {
            grid.insert(0, 0.0);
        }
        validate_grid(&grid)?;
        Ok(grid)
    }

    fn start(&self, d: usize) -> Result<DVector<f64>, Error> {
        let x = self.x.as_ref().ok_or_else(|| Error::Config("missing field 'x'".into()))?;
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                what: "x",
                expected: d,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "x" });
        }
        Ok(DVector::from_vec(x.clone()))
    }

    fn count(&self, default: usize) -> Result<usize, Error> {
        match self.n {
            None => Ok(default),
            Some(n) if n >= 1 => Ok(n as usize),
            Some(n) => Err(Error::Config(format!("'n' must be at least 1, got {n}"))),
        }
    }

    fn quad(&self) -> Result<QuadratureSpec, Error> {
        let q = self.quad.unwrap_or_default();
        q.validate()?;
        Ok(q)
    }
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

/// Config with command-line overrides applied.
struct Resolved {
    config: RunConfig,
    out: Option<PathBuf>,
    format: Format,
}

fn resolve(kind: RunKind, args: &CommonArgs) -> Result<Resolved, CliError> {
    let mut config = RunConfig::load(&args.config).map_err(usage)?;
    if let Some(run) = config.run {
        if run != kind {
            return Err(CliError::Usage(format!("config is for '{run:?}' but the command is '{kind:?}'").to_lowercase()));
        }
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    let output = config.output.clone().unwrap_or_default();
    let default_format = if kind == RunKind::Verify { Format::Jsonl } else { Format::Csv };
    let format = args.format.or(output.format).unwrap_or(default_format);
    if kind == RunKind::Verify && format != Format::Jsonl {
        return Err(CliError::Usage("verify writes JSON lines only".into()));
    }
    Ok(Resolved {
        out: args.out.clone().or(output.path),
        config,
        format,
    })
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| failure(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}_{i}")).collect()
}

/// Runs one parsed command and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Density(a) => cmd_density(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Path(a) => cmd_path(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("membrane-bm: {e}");
            e.exit_code()
        }
    }
}

fn model_and_dec(config: &RunConfig) -> Result<(ModelParams, SpaceDecomposition), CliError> {
    let params = config.model().map_err(usage)?.clone();
    let dec = build_decomposition(&params).map_err(usage)?;
    Ok((params, dec))
}

/// Evaluation points of a density grid in lexicographic index order (the
/// last axis varies fastest).
pub fn grid_points(axes: &[Axis], d: usize) -> Result<Vec<DVector<f64>>, Error> {
    if axes.len() != d {
        return Err(Error::DimensionMismatch {
            what: "grid",
            expected: d,
            got: axes.len(),
        });
    }
    for (i, a) in axes.iter().enumerate() {
        if a.count == 0 {
            return Err(Error::Config(format!("grid axis {} has count 0", i + 1)));
        }
        if !a.min.is_finite() || !a.max.is_finite() || a.min > a.max {
            return Err(Error::Config(format!("grid axis {} needs finite min <= max", i + 1)));
        }
    }
    let axes: Vec<Vec<f64>> = axes.iter().map(Axis::points).collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    for mut k in 0..total {
        let mut y = DVector::zeros(d);
        for i in (0..d).rev() {
            y[i] = axes[i][k % axes[i].len()];
            k /= axes[i].len();
        }
        out.push(y);
    }
    Ok(out)
}

pub fn cmd_density(args: &CommonArgs) -> Result<i32, CliError> {
    let r = resolve(RunKind::Density, args)?;
    let (params, dec) = model_and_dec(&r.config)?;
    let d = params.dim();
    let t = r.config.single_time().map_err(usage)?;
    let x = r.config.start(d).map_err(usage)?;
    let quad = r.config.quad().map_err(usage)?;
    let axes = r.config.grid.as_ref().ok_or_else(|| CliError::Usage("missing field 'grid'".into()))?;
    let points = grid_points(axes, d).map_err(usage)?;
    let kernel = TransitionKernel::new(&params, &dec, &quad).map_err(usage)?;
    let values: Vec<f64> = points
        .par_iter()
        .map(|y| kernel.density(t, &x, y))
        .collect::<Result<_, _>>()
        .map_err(failure)?;

    let mut w = open_output(&r.out)?;
    let io = |e: io::Error| failure(e);
    match r.format {
        Format::Csv => {
            let mut h = header("y", d);
            h.push("G".into());
            writeln!(w, "{}", h.join(",")).map_err(io)?;
            for (y, g) in points.iter().zip(&values) {
                let mut row: Vec<String> = y.iter().map(|&v| num(v)).collect();
                row.push(num(*g));
                writeln!(w, "{}", row.join(",")).map_err(io)?;
            }
        }
        Format::Jsonl => {
            for (y, g) in points.iter().zip(&values) {
                writeln!(w, "{}", json!({"y": y.as_slice(), "G": g})).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(EXIT_OK)
}

pub fn cmd_sample(args: &CommonArgs) -> Result<i32, CliError> {
    let r = resolve(RunKind::Sample, args)?;
    let (params, dec) = model_and_dec(&r.config)?;
    let d = params.dim();
    let t = r.config.single_time().map_err(usage)?;
    let x = r.config.start(d).map_err(usage)?;
    let n = r.config.count(1).map_err(usage)?;
    let state = RngState::new(r.config.seed.unwrap_or(DEFAULT_SEED), 0);
    let draws = sample_joint_batch(n, t, &x, &params, &dec, state).map_err(failure)?;

    let mut w = open_output(&r.out)?;
    let io = |e: io::Error| failure(e);
    match r.format {
        Format::Csv => {
            let mut h = header("y", d);
            h.extend(["theta".to_string(), "hit".to_string()]);
            writeln!(w, "{}", h.join(",")).map_err(io)?;
            for s in &draws {
                let mut row: Vec<String> = s.y.iter().map(|&v| num(v)).collect();
                row.push(num(s.theta));
                row.push(if s.hit { "1" } else { "0" }.into());
                writeln!(w, "{}", row.join(",")).map_err(io)?;
            }
        }
        Format::Jsonl => {
            for s in &draws {
                writeln!(w, "{}", json!({"y": s.y.as_slice(), "theta": s.theta, "hit": s.hit})).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(EXIT_OK)
}

pub fn cmd_path(args: &CommonArgs) -> Result<i32, CliError> {
    let r = resolve(RunKind::Path, args)?;
    let (params, dec) = model_and_dec(&r.config)?;
    let d = params.dim();
    let grid = r.config.time_grid().map_err(usage)?;
    let x = r.config.start(d).map_err(usage)?;
    let n = r.config.count(1).map_err(usage)?;
    let state = RngState::new(r.config.seed.unwrap_or(DEFAULT_SEED), 0);
    let paths = sample_paths(n, &x, &grid, &params, &dec, state).map_err(failure)?;

    let mut w = open_output(&r.out)?;
    let io = |e: io::Error| failure(e);
    match r.format {
        Format::Csv => {
            let mut h = vec!["path".to_string(), "t".to_string()];
            h.extend(header("x", d));
            h.push("eta".into());
            writeln!(w, "{}", h.join(",")).map_err(io)?;
            for (i, p) in paths.iter().enumerate() {
                for k in 0..p.times.len() {
                    let mut row = vec![i.to_string(), num(p.times[k])];
                    row.extend(p.states[k].iter().map(|&v| num(v)));
                    row.push(num(p.local_time[k]));
                    writeln!(w, "{}", row.join(",")).map_err(io)?;
                }
            }
        }
        Format::Jsonl => {
            for (i, p) in paths.iter().enumerate() {
                for k in 0..p.times.len() {
                    writeln!(
                        w,
                        "{}",
                        json!({"path": i, "t": p.times[k], "x": p.states[k].as_slice(), "eta": p.local_time[k]})
                    )
                    .map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(EXIT_OK)
}

/// Suite options from a config: a `model` replaces the default models, a
/// `t` replaces the default times.
pub fn suite_options(config: &RunConfig) -> Result<SuiteOptions, Error> {
    let models = match &config.model {
        Some(p) => Some(vec![ModelCell::new("config", p.clone())?]),
        None => None,
    };
    let times = match &config.t {
        None => None,
        Some(TimeSpec::Single(t)) => Some(vec![*t]),
        Some(TimeSpec::Grid(g)) => Some(g.clone()),
    };
    if let Some(ts) = &times {
        if ts.is_empty() {
            return Err(Error::Config("'t' must not be empty".into()));
        }
        if let Some(&bad) = ts.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(Error::NonPositiveTime(bad));
        }
    }
    Ok(SuiteOptions {
        seed: config.seed.unwrap_or(DEFAULT_SEED),
        n: config.count(DEFAULT_N)?,
        quad: config.quad()?,
        models,
        times,
        timings: false,
    })
}

pub fn cmd_verify(args: &CommonArgs) -> Result<i32, CliError> {
    let r = resolve(RunKind::Verify, args)?;
    let suite = r.config.suite.clone().unwrap_or_else(|| "all".into());
    if !SUITES.contains(&suite.as_str()) {
        return Err(usage(Error::UnknownSuite(suite)));
    }
    let opts = suite_options(&r.config).map_err(usage)?;
    let reports = run_suite(&suite, &opts).map_err(failure)?;

    let mut w = open_output(&r.out)?;
    for rep in &reports {
        writeln!(w, "{}", rep.to_json_line()).map_err(failure)?;
    }
    w.flush().map_err(failure)?;
    drop(w);
    let table = summary_table(&reports);
    if r.out.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    let (_, failed) = tally(&reports);
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"{
        "model": {"d": 2, "B": [2.0, 1.0, 1.0, 2.0], "nu": [0.0, 1.0], "q": 0.5, "alpha": [0.8, 0.0]},
        "run": "density",
        "t": 0.5,
        "x": [0.0, 0.25],
        "quad": {"rel_tol": 1e-9},
        "grid": [{"min": -1.0, "max": 1.0, "count": 3}, {"min": -1.0, "max": 1.0, "count": 2}],
        "output": {"format": "csv"}
    }"#;

    #[test]
    fn config_round_trip() {
        let c = RunConfig::from_json(CONFIG).unwrap();
        assert_eq!(c.quad.unwrap().rel_tol, 1e-9);
        assert_eq!(c.quad.unwrap().max_panels, QuadratureSpec::default().max_panels);
        let again = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn invalid_models_are_config_errors() {
        let bad = CONFIG.replace("\"q\": 0.5", "\"q\": 1.5");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config(_))));
        assert!(RunConfig::from_json(r#"{"colour": 1}"#).is_err());
    }

    #[test]
    fn grid_is_lexicographic() {
        let c = RunConfig::from_json(CONFIG).unwrap();
        let pts = grid_points(c.grid.as_ref().unwrap(), 2).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0].as_slice(), &[-1.0, -1.0]);
        assert_eq!(pts[1].as_slice(), &[-1.0, 1.0]);
        assert_eq!(pts[2].as_slice(), &[0.0, -1.0]);
        let empty = [Axis { min: 0.0, max: 1.0, count: 0 }, Axis { min: 0.0, max: 1.0, count: 2 }];
        assert!(grid_points(&empty, 2).is_err());
    }

    #[test]
    fn path_grid_gets_origin() {
        let mut c = RunConfig::from_json(CONFIG).unwrap();
        c.t = Some(TimeSpec::Grid(vec![0.5, 1.0]));
        assert_eq!(c.time_grid().unwrap(), vec![0.0, 0.5, 1.0]);
        c.t = Some(TimeSpec::Grid(vec![0.5, 0.5]));
        assert!(c.time_grid().is_err());
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
