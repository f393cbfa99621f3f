//! `flatt` — flat linear transports on a coordinate chart, from scenario
//! files to JSON/CSV reports. See `docs/scenario-format.md` for the input
//! format and `docs/report-schema.json` for the outputs.

mod commands;
mod error;
mod reports;
mod scenario;

use clap::{Parser, Subcommand};
use error::CliError;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "flatt",
    version,
    about = "Flat linear transports in tensor bundles over a coordinate chart"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the transport axiom suite, flatness, torsion and closedness
    /// checks; exit 0 iff all asserted tolerances pass.
    Check {
        scenario: PathBuf,
        /// Random trials for the axiom suite.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Also write the report values as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the transport matrix H(to, from) and optionally move a tensor.
    Transport {
        scenario: PathBuf,
        /// Start point, comma separated: "0,0".
        #[arg(long)]
        from: String,
        /// End point, comma separated.
        #[arg(long)]
        to: String,
        /// JSON tensor file to transport.
        #[arg(long)]
        tensor: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the connection matrices Γ_k at a point.
    Connection {
        scenario: PathBuf,
        /// Evaluation point, comma separated.
        #[arg(long)]
        at: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Max |R| over a uniform grid (CSV sweep via --out).
    Curvature {
        scenario: PathBuf,
        /// Grid resolution per axis.
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Max |T| and per-component torsion table over a uniform grid.
    Torsion {
        scenario: PathBuf,
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate parallel transport along a path and compare with the
    /// closed-form transport.
    Parallel {
        scenario: PathBuf,
        /// Path as comma-separated expressions in t, e.g. "t,sin(2*t)".
        #[arg(long)]
        path: String,
        #[arg(long)]
        t0: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// JSON tensor file with the initial tensor at the path start.
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct the frame field from the connection (curvature permitting)
    /// and report round-trip residuals.
    Reconstruct {
        scenario: PathBuf,
        /// Base point (defaults to the scenario base).
        #[arg(long)]
        base: Option<String>,
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closedness verdict and recovered holonomic coordinates.
    Holonomize {
        scenario: PathBuf,
        #[arg(long)]
        base: Option<String>,
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the adapted frame and verify its delta transport components.
    AdaptedFrame {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("{}", err.to_stderr_json());
            std::process::exit(err.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let seed_override = match std::env::var("FLATT_SAMPLE_SEED") {
        Ok(text) => Some(text.parse::<u64>().map_err(|_| {
            CliError::validation(format!(
                "FLATT_SAMPLE_SEED must be an integer, got '{text}'"
            ))
        })?),
        Err(_) => None,
    };
    let load = |path: &PathBuf| scenario::load_scenario(path, seed_override);

    match &cli.command {
        Command::Check {
            scenario,
            trials,
            out,
        } => {
            let sc = load(scenario)?;
            let pass = commands::cmd_check(&sc, *trials, out.as_deref())?;
            if pass {
                Ok(0)
            } else {
                Err(CliError::tolerance(format!(
                    "scenario '{}' failed one or more asserted tolerances (see the report)",
                    sc.name
                )))
            }
        }
        Command::Transport {
            scenario,
            from,
            to,
            tensor,
            out,
        } => {
            let sc = load(scenario)?;
            commands::cmd_transport(&sc, from, to, tensor.as_deref(), out.as_deref())?;
            Ok(0)
        }
        Command::Connection { scenario, at, out } => {
            let sc = load(scenario)?;
            commands::cmd_connection(&sc, at, out.as_deref())?;
            Ok(0)
        }
        Command::Curvature {
            scenario,
            grid,
            out,
        } => {
            let sc = load(scenario)?;
            commands::cmd_curvature(&sc, *grid, out.as_deref())?;
            Ok(0)
        }
        Command::Torsion {
            scenario,
            grid,
            out,
        } => {
            let sc = load(scenario)?;
            commands::cmd_torsion(&sc, *grid, out.as_deref())?;
            Ok(0)
        }
        Command::Parallel {
            scenario,
            path,
            t0,
            t1,
            steps,
            tensor,
            out,
        } => {
            let sc = load(scenario)?;
            commands::cmd_parallel(&sc, path, *t0, *t1, *steps, tensor, out.as_deref())?;
            Ok(0)
        }
        Command::Reconstruct {
            scenario,
            base,
            grid,
            out,
        } => {
            let sc = load(scenario)?;
            commands::cmd_reconstruct(&sc, base.as_deref(), *grid, out.as_deref())?;
            Ok(0)
        }
        Command::Holonomize {
            scenario,
            base,
            grid,
            out,
        } => {
            let sc = load(scenario)?;
            commands::cmd_holonomize(&sc, base.as_deref(), *grid, out.as_deref())?;
            Ok(0)
        }
        Command::AdaptedFrame { scenario, out } => {
            let sc = load(scenario)?;
            commands::cmd_adapted_frame(&sc, out.as_deref())?;
            Ok(0)
        }
    }
}
