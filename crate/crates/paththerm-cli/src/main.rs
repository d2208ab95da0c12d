//! paththerm: reaction networks as jump Markov processes. Exact stochastic
//! simulation, truncated master-equation solves, and path-entropy statistics
//! from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use config::Overrides;

/// Exit codes: 0 success, 1 usage or parse error, 2 numerical failure,
/// 3 failed check.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Check(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError::Numerical(msg.into())
    }

    pub fn check(msg: impl Into<String>) -> Self {
        CliError::Check(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Check(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Check(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io error: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "paththerm",
    about = "Jump-process simulation and path-entropy analysis for reaction networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Network description file (see README for the format)
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Built-in model: schlogl | scheme1 | xy_pair | driven_cycle | birth_death
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Model parameter override, repeatable: --param k1=0.006
    #[arg(long = "param", value_name = "K=V", action = ArgAction::Append)]
    params: Vec<String>,
    /// Flat key = value config file; flags take precedence
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Upper truncation bound per species (box [0, xmax]^N)
    #[arg(long, value_name = "INT")]
    xmax: Option<i64>,
    /// Initial composition, comma separated
    #[arg(long, value_name = "A,B,..")]
    x0: Option<String>,
    /// RNG seed (fallback: PATHTHERM_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trajectory ensembles and window analysis
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Simulation horizon
    #[arg(long = "t-final", value_name = "TIME")]
    t_final: Option<f64>,
    /// Window length for stationary sampling
    #[arg(long, value_name = "TIME")]
    window: Option<f64>,
    /// Number of stationary windows
    #[arg(long = "n-windows", value_name = "COUNT")]
    n_windows: Option<usize>,
    /// Channel selection: direct | two_stage
    #[arg(long)]
    mode: Option<String>,
}

impl CommonArgs {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let mut o = Overrides {
            model: self.model.clone(),
            preset: self.preset.clone(),
            xmax: self.xmax,
            seed: self.seed,
            jobs: self.jobs,
            out: self.out.clone(),
            t_final: self.t_final,
            window: self.window,
            n_windows: self.n_windows,
            ..Overrides::default()
        };
        for p in &self.params {
            let (k, v) = config::parse_param(p)?;
            o.params.insert(k, v);
        }
        if let Some(ref text) = self.x0 {
            o.x0 = Some(config::parse_x0(text)?);
        }
        if let Some(ref mode) = self.mode {
            o.mode = Some(mode.parse().map_err(CliError::Usage)?);
        }
        if let Some(ref path) = self.config {
            o = o.or(config::parse_config_file(path)?);
        }
        Ok(o)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Report channel groups by jump vector and flag multigraph groups
    Inspect {
        #[command(flatten)]
        common: CommonArgs,
        /// Exit nonzero when several channels share a jump vector
        #[arg(long)]
        require_simple: bool,
    },
    /// Stationary distribution, detailed-balance residual, entropy rates
    Stationary {
        #[command(flatten)]
        common: CommonArgs,
        /// Fail (exit 3) unless the detailed-balance residual is <= 1e-10
        #[arg(long)]
        check: bool,
    },
    /// Simulate trajectories; write JSONL events and an occupancy histogram
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Stop after this many jump events instead of at --t-final
        #[arg(long)]
        events: Option<u64>,
        /// Number of independent trajectories (streams 0..n)
        #[arg(long)]
        trajectories: Option<usize>,
        /// Compare the empirical occupancy against the master-equation solve
        #[arg(long)]
        compare_cme: bool,
    },
    /// Windowed path-entropy samples: fluctuation-theorem fit and symmetry test
    Ft {
        #[command(flatten)]
        common: CommonArgs,
        /// Rate resolution of the path functional: lumped | channel
        #[arg(long)]
        kind: Option<String>,
        /// Bin count for the fluctuation-theorem fit
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Exhaustive forward/reverse path comparison on a small box
    Reversibility {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of grid steps per path (at most 6)
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn run() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors"; keep exit 0 there
            // and map real usage problems to exit 1.
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            e.print().ok();
            if benign {
                return Ok(());
            }
            return Err(CliError::usage("invalid command line"));
        }
    };
    match cli.command {
        Command::Inspect {
            common,
            require_simple,
        } => {
            let resolved = config::resolve("inspect", common.overrides()?)?;
            commands::inspect(resolved, require_simple)
        }
        Command::Stationary { common, check } => {
            let resolved = config::resolve("stationary", common.overrides()?)?;
            commands::with_pool(resolved.config.jobs, || {
                commands::stationary(&resolved, check)
            })
        }
        Command::Simulate {
            common,
            events,
            trajectories,
            compare_cme,
        } => {
            let mut overrides = common.overrides()?;
            overrides.events = events.or(overrides.events);
            overrides.trajectories = trajectories.or(overrides.trajectories);
            let resolved = config::resolve("simulate", overrides)?;
            commands::with_pool(resolved.config.jobs, || {
                commands::simulate(&resolved, compare_cme)
            })
        }
        Command::Ft { common, kind, bins } => {
            let mut overrides = common.overrides()?;
            overrides.kind = kind.or(overrides.kind);
            overrides.bins = bins.or(overrides.bins);
            let resolved = config::resolve("ft", overrides)?;
            commands::with_pool(resolved.config.jobs, || commands::ft(&resolved))
        }
        Command::Reversibility { common, steps } => {
            let mut overrides = common.overrides()?;
            overrides.steps = steps.or(overrides.steps);
            let resolved = config::resolve("reversibility", overrides)?;
            commands::with_pool(resolved.config.jobs, || {
                commands::reversibility(&resolved)
            })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
