//! The `nbe` command-line front end.

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

pub use commands::Outcome;
pub use config::{Overrides, RunConfig};
pub use output::{ResultRecord, Written};

use crate::error::{Error, Result};
use crate::scalar::Precision;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Entropy,
    Katok,
    BrinKatok,
    Spanning,
    Frostman,
    Sandwich,
    OracleCheck,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Entropy => "entropy",
            Command::Katok => "katok",
            Command::BrinKatok => "brin-katok",
            Command::Spanning => "spanning",
            Command::Frostman => "frostman",
            Command::Sandwich => "sandwich",
            Command::OracleCheck => "oracle-check",
            Command::Sweep => "sweep",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        <Command as ValueEnum>::from_str(s, false).map_err(|_| Error::Config(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Parser)]
#[command(name = "nbe", version, about = "Neutralized Bowen entropy of subsets of shift spaces")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML config, or a JSON sidecar from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report entropies as logarithms in this base (2 gives bits).
    #[arg(long)]
    pub display_base: Option<f64>,
}

fn parse_precision(s: &str) -> std::result::Result<Precision, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Args {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            epsilon: self.epsilon.clone(),
            n_min: self.n_min,
            n_max: self.n_max,
            precision: self.precision,
            seed: self.seed,
            out: self.out.as_ref().map(|p| p.display().to_string()),
            display_base: self.display_base,
        }
    }
}

/// Checks that only need the config, so malformed runs fail before any work.
fn precheck(command: Command, cfg: &RunConfig) -> Result<()> {
    match command {
        Command::Katok => cfg.require_measure().map(drop),
        Command::BrinKatok => {
            cfg.require_measure()?;
            if cfg.compute.bk_mode == config::BkModeConfig::MonteCarlo {
                cfg.require_seed()?;
            }
            Ok(())
        }
        Command::Sandwich | Command::OracleCheck => cfg.require_seed().map(drop),
        Command::Sweep => sweep::validate(cfg),
        _ => Ok(()),
    }
}

/// Runs `command` without writing anything.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    precheck(command, cfg)?;
    match command {
        Command::Entropy => commands::entropy(cfg),
        Command::Katok => commands::katok(cfg),
        Command::BrinKatok => commands::brin_katok(cfg),
        Command::Spanning => commands::spanning(cfg),
        Command::Frostman => commands::frostman(cfg),
        Command::Sandwich => commands::sandwich(cfg),
        Command::OracleCheck => commands::oracle_check(cfg),
        Command::Sweep => sweep::sweep(cfg),
    }
}

/// Runs `command` and writes its outputs; returns the exit code.
///
/// Configuration errors, wherever they surface, leave no output behind.
pub fn run(command: Command, cfg: &RunConfig) -> (i32, Written, Vec<String>) {
    let outcome = match execute(command, cfg) {
        Ok(o) => o,
        Err(e) if e.exit_code() == 2 => return (2, Written::default(), vec![e.to_string()]),
        Err(e) => {
            let mut o = Outcome::default();
            o.fail(ResultRecord::new(command.name(), cfg.compute.n_min, cfg.compute.n_max), &e);
            o
        }
    };
    if outcome.exit_code == 2 {
        return (2, Written::default(), outcome.messages);
    }
    let stem = cfg.output.stem.clone().unwrap_or_else(|| command.name().to_string());
    match output::write_outputs(Path::new(&cfg.output.dir), &stem, command.name(), cfg, &outcome.records, outcome.exit_code) {
        Ok(w) => (outcome.exit_code, w, outcome.messages),
        Err(e) => {
            let mut m = outcome.messages;
            m.push(e.to_string());
            (1, Written::default(), m)
        }
    }
}

/// Entry point behind the binary.
pub fn main_with_args(args: Args) -> i32 {
    let cfg = RunConfig::load(&args.config).and_then(|mut c| c.apply(&args.overrides()).map(|_| c));
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let (code, written, messages) = run(args.command, &cfg);
    for m in &messages {
        eprintln!("{m}");
    }
    for p in written.csv.iter().chain(written.json.iter()) {
        println!("wrote {}", p.display());
    }
    code
}
