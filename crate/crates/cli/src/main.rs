//! Command-line front end for the arbitrage and deflator analyses.
//!
//! Exit status is 0 whenever the analysis ran, including when it finds that a
//! deflator, numeraire or hedge does not exist. Bad input exits with 1, a
//! command-line usage error with 2 and a numerical failure with 3.

mod commands;
mod render;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use deflator_lab::arbitrage::ArbitrageKind;
use deflator_lab::Error;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "deflator-lab", version, about = "Arbitrage, deflators and hedging on finite scenario trees")]
struct Cli {
    /// Print a JSON report instead of text
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ic,
    Tc,
    Pi,
}

impl From<Kind> for ArbitrageKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Ic => ArbitrageKind::InvestmentConsumption,
            Kind::Tc => ArbitrageKind::TerminalConsumption,
            Kind::Pi => ArbitrageKind::PureInvestment,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Rogers,
    Lp,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against the schema and the tree rules
    Validate { model: PathBuf },
    /// Search for arbitrage of one kind, or all three
    Arbitrage {
        model: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Last date considered (default: the tree horizon)
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Construct a strictly positive martingale deflator
    Deflator {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "rogers")]
        method: Method,
        /// Target field giving a node-wise upper bound for the deflator
        #[arg(long)]
        bound: Option<String>,
    },
    /// Super-replication price and hedge of a payoff or target
    Superrep {
        model: PathBuf,
        #[arg(long)]
        payoff: String,
        /// Also compute the exponential risk-averse hedge with this risk aversion
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Exact replication of a terminal payoff
    Replicate {
        model: PathBuf,
        #[arg(long)]
        payoff: String,
    },
    /// Node ranks and deflator uniqueness
    Complete { model: PathBuf },
    /// Find a numeraire strategy, or the risk-free one in a complete market
    Numeraire {
        model: PathBuf,
        #[arg(long)]
        riskfree: bool,
    },
    /// Equivalent martingale measure for a numeraire
    Emm {
        model: PathBuf,
        /// Asset name or index held buy-and-hold, or `auto` to search for one
        #[arg(long, default_value = "auto")]
        numeraire: String,
    },
    /// Optimal consumption for a utility specification, with its certificate
    Utility {
        model: PathBuf,
        #[arg(long)]
        x0: f64,
        #[arg(long)]
        spec: String,
    },
    /// Classify the market: no-arbitrage, bubble, tc-arbitrage-only or full-arbitrage
    BubbleReport {
        model: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Generate a random model
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        branching: usize,
        #[arg(long, default_value_t = 2)]
        assets: usize,
        /// planted or adversarial
        #[arg(long, default_value = "planted")]
        mode: String,
        /// Write the model here instead of printing it
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Arbitrage { .. } => "arbitrage",
            Command::Deflator { .. } => "deflator",
            Command::Superrep { .. } => "superrep",
            Command::Replicate { .. } => "replicate",
            Command::Complete { .. } => "complete",
            Command::Numeraire { .. } => "numeraire",
            Command::Emm { .. } => "emm",
            Command::Utility { .. } => "utility",
            Command::BubbleReport { .. } => "bubble-report",
            Command::Gen { .. } => "gen",
        }
    }
}

enum Output {
    Report(Value),
    /// Printed verbatim whatever the output format.
    Document(String),
}

fn run(command: &Command) -> anyhow::Result<Output> {
    let report = match command {
        Command::Validate { model } => commands::validate(model),
        Command::Arbitrage { model, kind, horizon } => {
            commands::arbitrage(model, kind.map(ArbitrageKind::from), *horizon)
        }
        Command::Deflator { model, method, bound } => {
            let method = match method {
                Method::Rogers => "rogers",
                Method::Lp => "lp",
            };
            commands::deflator(model, method, bound.as_deref())
        }
        Command::Superrep { model, payoff, gamma } => commands::superrep(model, payoff, *gamma),
        Command::Replicate { model, payoff } => commands::replicate_cmd(model, payoff),
        Command::Complete { model } => commands::complete(model),
        Command::Numeraire { model, riskfree } => commands::numeraire(model, *riskfree),
        Command::Emm { model, numeraire } => commands::emm(model, numeraire),
        Command::Utility { model, x0, spec } => commands::utility(model, *x0, spec),
        Command::BubbleReport { model, horizon } => commands::bubble(model, *horizon),
        Command::Gen { seed, depth, branching, assets, mode, out } => {
            let doc = commands::gen(*seed, *depth, *branching, *assets, mode)?;
            match out {
                Some(path) => commands::write_model(&doc, path),
                None => return Ok(Output::Document(doc.to_json())),
            }
        }
    }?;
    Ok(Output::Report(report))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Lp(_) | Error::Numerical(_)) => 3,
        _ => 1,
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> ExitCode {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        _ => ExitCode::SUCCESS,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(Output::Document(text)) => emit(&(text + "\n")),
        Ok(Output::Report(mut report)) => {
            if let Value::Object(map) = &mut report {
                map.insert("command".into(), Value::from(cli.command.name()));
            }
            if cli.json {
                emit(&(serde_json::to_string_pretty(&report).expect("reports serialize") + "\n"))
            } else {
                emit(&render::text(&report))
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
