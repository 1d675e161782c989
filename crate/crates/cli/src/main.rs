use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use annular_dyn::report::{is_hypothesis_failure, Report, Status};

mod commands;
mod config;

#[derive(Parser, Debug)]
#[command(name = "annular-dyn", version, about = "Annular itineraries and point construction for entire functions")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Flat `key = value` file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Function token: exp, sin, cosh, zexp, affexp[:a,b], monomial:c,d, series:PATH.
    #[arg(long = "fn", global = true)]
    pub function: Option<String>,
    /// paper-strict or desk-relaxed.
    #[arg(long, global = true)]
    pub profile: Option<String>,
    /// Working precision in bits for radii given on the command line.
    #[arg(long, global = true)]
    pub prec: Option<u32>,
    /// Oracle tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Constant C0 of the disc-cover radius.
    #[arg(long, global = true)]
    pub c0: Option<f64>,
    /// Constant C1 of the disc-cover radius.
    #[arg(long, global = true)]
    pub c1: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Table of log M and log m over a grid of log-radii.
    Moduli {
        /// `start:stop:step`, inclusive.
        #[arg(long)]
        t_grid: String,
    },
    /// Levels of the annular partition.
    Partition {
        #[arg(long, allow_hyphen_values = true)]
        log_r: String,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Annulus symbols along the orbit of one point.
    Itinerary {
        #[arg(long, allow_hyphen_values = true)]
        log_r: String,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, default_value_t = 8)]
        steps: usize,
    },
    /// Covering certificate between two annuli, or the grid cover test at one radius.
    Covering {
        /// `t_in,t_out` in log-modulus.
        #[arg(long, requires = "target", conflicts_with = "bohr_t", allow_hyphen_values = true)]
        source: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        target: Option<String>,
        /// Log-radius for the disc cover test.
        #[arg(long, allow_hyphen_values = true)]
        bohr_t: Option<String>,
        /// Grid points per side.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// CSV of the uncovered grid values.
        #[arg(long)]
        uncovered_csv: Option<PathBuf>,
    },
    /// Chain of covering annuli from `t0`.
    Annuli {
        #[arg(long, allow_hyphen_values = true)]
        t0: Option<String>,
        #[arg(long)]
        n_max: Option<usize>,
        /// Take the far splice candidate whenever it is covered.
        #[arg(long)]
        prefer_t: bool,
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Admissible symbol sequences.
    Synthesize(SynthArgs),
    /// A point whose orbit follows a symbol sequence through a chain.
    Realize {
        #[arg(long)]
        chain: PathBuf,
        /// Comma-separated symbols, or `@file` holding a JSON array.
        #[arg(long)]
        seq: String,
        #[arg(long)]
        depth: usize,
        #[arg(long, allow_hyphen_values = true)]
        log_r: Option<String>,
        #[arg(long, default_value_t = 6)]
        retries: usize,
    },
    /// Plan (and optionally realize) an orbit escaping at a prescribed rate.
    Prescribed {
        #[arg(long)]
        chain: PathBuf,
        /// Lines `n log_a_n`.
        #[arg(long)]
        rate: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        log_r0: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Mc)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// Realize the plan to this depth.
        #[arg(long)]
        depth: Option<usize>,
        /// Also list 2^N distinct target sequences.
        #[arg(long)]
        branching: Option<usize>,
    },
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Chain JSON whose backjumps define the transitions.
    #[arg(long, conflicts_with = "ts")]
    pub chain: Option<PathBuf>,
    /// Transition system JSON.
    #[arg(long)]
    pub ts: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 8)]
    pub horizon: usize,
    /// How backjump indices are read when loading a chain.
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long, default_value_t = 0)]
    pub s0: usize,
    #[arg(long, default_value_t = 5)]
    pub cap: usize,
    #[arg(long, default_value_t = 3)]
    pub period: usize,
    #[arg(long, default_value_t = 0)]
    pub s_min: usize,
    #[arg(long, default_value_t = 3)]
    pub s_max: usize,
    #[arg(long, default_value_t = 4)]
    pub count: usize,
    /// Comma-separated peak levels.
    #[arg(long)]
    pub peaks: Option<String>,
    /// Rate file for slow-escape.
    #[arg(long)]
    pub rate: Option<PathBuf>,
    /// Partition radius for slow-escape.
    #[arg(long, allow_hyphen_values = true)]
    pub log_r: Option<String>,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindArg {
    Count,
    Periodic,
    Bounded,
    Oscillating,
    SlowEscape,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleArg {
    Level,
    Time,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Mc,
    Nomc,
}

/// Success, or a report whose hypotheses did not all hold.
pub enum Outcome {
    Ok,
    Unmet,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let name = commands::name(&cli.command);
    match commands::run(&cli.global, &cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Unmet) => ExitCode::from(2),
        Err(e) if is_hypothesis_failure(&e) => {
            eprintln!("annular-dyn {name}: {e}");
            let body = serde_json::json!({ "error": e.to_string() });
            let written = Report::new(name, Status::HypothesisFailed, body)
                .to_json()
                .and_then(|s| commands::emit(cli.global.out.as_deref(), &s));
            match written {
                Ok(()) => ExitCode::from(2),
                Err(w) => {
                    eprintln!("annular-dyn {name}: {w}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("annular-dyn {name}: {e}");
            ExitCode::from(1)
        }
    }
}
