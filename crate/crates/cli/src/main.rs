use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod errors;
mod output;

use config::{Format, RunConfig};
use errors::Kind;

#[derive(Parser, Debug)]
#[command(name = "stokeslab", version, about = "Formal, Stokes and monodromy computations for irregular connections")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// JSON run configuration; flags given here override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the command's main artifact here as JSON.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generalized exponent tuples.
    #[command(subcommand)]
    Exponents(ExponentsCmd),
    /// Singular directions.
    #[command(subcommand)]
    Stokes(StokesCmd),
    /// Formal connections over truncated power series.
    #[command(subcommand)]
    Formal(FormalCmd),
    /// Generalized monodromy data.
    #[command(subcommand)]
    Monodromy(MonodromyCmd),
    /// Numerical Riemann-Hilbert map.
    #[command(subcommand)]
    Rh(RhCmd),
    /// Isomonodromic flows.
    #[command(subcommand)]
    Iso(IsoCmd),
}

#[derive(Subcommand, Debug)]
pub enum ExponentsCmd {
    /// Validate the shape and the Fuchs relation.
    Check { file: PathBuf },
    /// Genericity, resonance, reducibility and simpleness.
    Classify { file: PathBuf },
    /// Split into top, middle and residue parts, with formal monodromy.
    Decompose { file: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum StokesCmd {
    /// Singular directions at one point.
    Directions {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum FormalCmd {
    /// Diagonalize a connection with generic leading term.
    Diagonalize { file: PathBuf },
    /// Look for an invertible intertwiner modulo z^N.
    MatchDepth { first: PathBuf, second: PathBuf },
    /// The pair of presentations whose exponents disagree at low depth.
    Counterexample {
        #[arg(long, default_value_t = 6)]
        depth: i64,
    },
}

#[derive(Subcommand, Debug)]
pub enum MonodromyCmd {
    /// Residual of the defining relation.
    Residual { file: PathBuf },
    /// Canonical representative of the group orbit.
    Normalize { file: PathBuf },
    /// Numerical rank of the derivative of the relation map.
    Rank { file: PathBuf },
    /// Expected dimensions from the genus, rank and pole orders.
    Dim {
        #[arg(long)]
        g: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        /// Print all three counts instead of the moduli dimension.
        #[arg(long)]
        all: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum RhCmd {
    /// Monodromy data of a rational connection.
    Compute {
        file: PathBuf,
        /// Largest accepted relation residual.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Re-verify stored monodromy data, optionally against its connection.
    Check {
        file: PathBuf,
        #[arg(long)]
        conn: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Bound on the two-route local monodromy mismatch.
        #[arg(long, default_value_t = 1e-6)]
        top_tol: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum IsoCmd {
    /// Carry a connection along a deformation path.
    Flow {
        conn: PathBuf,
        path: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Per-sample conserved quantities; CSV when the name ends in .csv.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Distance between the normalized monodromy data of two connections.
    Drift { first: PathBuf, second: PathBuf },
}

fn run(cli: Cli) -> Result<(output::Report, Option<(Kind, String)>, Format)> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p).map_err(errors::usage)?,
        None => RunConfig::default(),
    };
    if let Some(f) = cli.global.format {
        cfg.format = f;
    }
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    let ctx = commands::Ctx {
        cfg: cfg.clone(),
        out: cli.global.out.clone(),
    };
    let outcome = match cli.command {
        Command::Exponents(c) => commands::exponents(&ctx, c),
        Command::Stokes(c) => commands::stokes(&ctx, c),
        Command::Formal(c) => commands::formal(&ctx, c),
        Command::Monodromy(c) => commands::monodromy(&ctx, c),
        Command::Rh(c) => commands::rh(&ctx, c),
        Command::Iso(c) => commands::iso(&ctx, c),
    }?;
    Ok((outcome.report, outcome.failure, cfg.format))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok((report, failure, format)) => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            if let Err(e) = report.render(format, &mut lock).and_then(|_| Ok(lock.flush()?)) {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            match failure {
                Some((kind, msg)) => {
                    eprintln!("{kind}: {msg}");
                    ExitCode::from(kind.code())
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            let kind = errors::kind_of(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(kind.code())
        }
    }
}
