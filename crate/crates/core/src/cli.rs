//! Command-line front end. Everything here is a thin layer over library
//! calls; the `dsa` binary only parses arguments and calls [`execute`].
//!
//! Exit codes: 0 success, 1 I/O error, 2 invalid input (scenario, override,
//! demo or suite name), 3 runtime abort, 4 an oracle suite found failures.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::{DsaError, Result};
use crate::output::{write_summary, NeighborDistanceCsv, TrajectoryCsv};
use crate::scenario::{OutputConfig, Scenario};
use crate::sim::{run_with_sink, NullSink, RecordSink, RunSummary, Tee};
use crate::verify;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_ABORT: u8 = 3;
pub const EXIT_ORACLE_FAILED: u8 = 4;

pub fn exit_code(err: &DsaError) -> u8 {
    match err {
        DsaError::Io { .. } => EXIT_IO,
        DsaError::InvalidScenario(_) => EXIT_INVALID,
        _ => EXIT_ABORT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "dsa", version, about = "Distributed Simplex Architecture simulator")]
pub struct Cli {
    /// Suppress the summary on stdout and non-error diagnostics.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file and write its outputs.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Parse and check a scenario file without running it.
    Validate {
        scenario: PathBuf,
        /// Dotted override applied after parsing, e.g. limits.eta=0.05.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a built-in scenario: flocking, flocking-nodsa or waypoint.
    Demo {
        name: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run a Monte Carlo verification suite (or `all`).
    Oracle {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Fraction of the full sample counts to use.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunOpts {
    /// Directory for output files. `run` defaults to the current directory;
    /// `demo` writes files only when this is given.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Seed for sampled initial states.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dotted override applied after parsing, e.g. limits.eta=0.05.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Also write the per-agent closest-neighbor distance series.
    #[arg(long)]
    pub neighbor_distances: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoName {
    Flocking,
    FlockingNoDsa,
    Waypoint,
}

impl DemoName {
    pub const ALL: [DemoName; 3] = [DemoName::Flocking, DemoName::FlockingNoDsa, DemoName::Waypoint];

    pub fn as_str(self) -> &'static str {
        match self {
            DemoName::Flocking => "flocking",
            DemoName::FlockingNoDsa => "flocking-nodsa",
            DemoName::Waypoint => "waypoint",
        }
    }
}

impl fmt::Display for DemoName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DemoName {
    type Err = DsaError;

    fn from_str(s: &str) -> Result<Self> {
        DemoName::ALL.into_iter().find(|d| d.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = DemoName::ALL.iter().map(|d| d.as_str()).collect();
            DsaError::InvalidScenario(format!("unknown demo '{s}'; valid names: {}", names.join(", ")))
        })
    }
}

/// The built-in scenario for a demo, with the default seed 1.
pub fn demo_scenario(name: DemoName) -> Scenario {
    match name {
        DemoName::Flocking => Scenario::flocking(1, true),
        DemoName::FlockingNoDsa => Scenario::flocking(1, false),
        DemoName::Waypoint => Scenario::waypoint(),
    }
}

/// Re-parses `scenario` with overrides so they go through the same
/// validation as a file.
fn with_overrides(scenario: Scenario, overrides: &[String]) -> Result<Scenario> {
    if overrides.is_empty() {
        return Ok(scenario);
    }
    Scenario::from_toml_str(&scenario.to_toml_string(), overrides)
}

/// Runs a scenario, writing the files named in its output section under
/// `out_dir` when one is given.
pub fn run_scenario(scenario: &Scenario, out_dir: Option<&Path>, neighbor_distances: bool) -> Result<RunSummary> {
    let Some(dir) = out_dir else {
        return run_with_sink(scenario, &mut NullSink);
    };
    std::fs::create_dir_all(dir).map_err(|e| DsaError::io(dir, e))?;
    let out = &scenario.output;
    let mut trajectory = out
        .trajectory
        .as_ref()
        .map(|p| TrajectoryCsv::create(&dir.join(p)))
        .transpose()?;
    let nd_path = match (&out.neighbor_distance, neighbor_distances) {
        (Some(p), _) => Some(p.clone()),
        (None, true) => Some(PathBuf::from(OutputConfig::DEFAULT_NEIGHBOR_DISTANCE)),
        (None, false) => None,
    };
    let mut nd = nd_path
        .map(|p| NeighborDistanceCsv::create(&dir.join(p)))
        .transpose()?;
    let mut sinks: Vec<&mut dyn RecordSink> = Vec::new();
    if let Some(t) = trajectory.as_mut() {
        sinks.push(t);
    }
    if let Some(n) = nd.as_mut() {
        sinks.push(n);
    }
    let summary = run_with_sink(scenario, &mut Tee(sinks))?;
    if let Some(p) = &out.summary {
        write_summary(&dir.join(p), &summary)?;
    }
    Ok(summary)
}

fn report(summary: &RunSummary, quiet: bool) {
    if !quiet {
        let mut stdout = std::io::stdout().lock();
        let _ = stdout.write_all(summary.to_toml_string().as_bytes());
    }
}

fn finish(result: Result<u8>) -> u8 {
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

pub fn cmd_run(path: &Path, opts: &RunOpts, quiet: bool) -> u8 {
    finish((|| {
        let mut scenario = Scenario::from_path(path, &opts.overrides)?;
        if let Some(seed) = opts.seed {
            scenario.set_seed(seed);
        }
        let dir = opts.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        let summary = run_scenario(&scenario, Some(&dir), opts.neighbor_distances)?;
        report(&summary, quiet);
        Ok(EXIT_OK)
    })())
}

pub fn cmd_validate(path: &Path, overrides: &[String], quiet: bool) -> u8 {
    finish((|| {
        let scenario = Scenario::from_path(path, overrides)?;
        scenario.initial_state()?;
        if !quiet {
            println!("{}: ok ({} agents, {} steps)", scenario.name, scenario.n, scenario.step_count());
        }
        Ok(EXIT_OK)
    })())
}

pub fn cmd_demo(name: &str, opts: &RunOpts, quiet: bool) -> u8 {
    finish((|| {
        let demo: DemoName = name.parse()?;
        let mut scenario = with_overrides(demo_scenario(demo), &opts.overrides)?;
        if let Some(seed) = opts.seed {
            scenario.set_seed(seed);
        }
        let summary = run_scenario(&scenario, opts.out_dir.as_deref(), opts.neighbor_distances)?;
        report(&summary, quiet);
        Ok(EXIT_OK)
    })())
}

pub fn cmd_oracle(suite: &str, seed: u64, scale: f64, quiet: bool) -> u8 {
    finish((|| {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(DsaError::invalid(format!("scale must be in (0, 1], got {scale}")));
        }
        let names: Vec<&str> = if suite == "all" {
            verify::SUITES.to_vec()
        } else if verify::SUITES.contains(&suite) {
            vec![suite]
        } else {
            return Err(DsaError::invalid(format!(
                "unknown suite '{suite}'; valid names: all, {}",
                verify::SUITES.join(", ")
            )));
        };
        let mut ok = true;
        for name in names {
            let report = verify::run_suite(name, seed, scale).expect("suite name checked");
            ok &= report.passed();
            if !quiet || !report.passed() {
                println!("{report}");
            }
        }
        Ok(if ok { EXIT_OK } else { EXIT_ORACLE_FAILED })
    })())
}

pub fn execute(cli: &Cli) -> u8 {
    match &cli.command {
        Command::Run { scenario, opts } => cmd_run(scenario, opts, cli.quiet),
        Command::Validate { scenario, overrides } => cmd_validate(scenario, overrides, cli.quiet),
        Command::Demo { name, opts } => cmd_demo(name, opts, cli.quiet),
        Command::Oracle { suite, seed, scale } => cmd_oracle(suite, *seed, *scale, cli.quiet),
    }
}
