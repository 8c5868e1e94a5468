use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linksched_cli::{
    load_config, parse_grid, run_simulate, run_solve, run_sweep, run_verify, write_table, CliError, Command, Overrides,
    RunSpec,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "linksched",
    version,
    about = "Delay-optimal transmission scheduling over a fading link"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Optimal thresholds, delay and power for the configured budget.
    Solve(Common),
    /// Delay-power tradeoff over a grid of budgets, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Budget grid as start:stop:steps, replacing the config's [sweep].
        #[arg(long, value_parser = grid_arg)]
        grid: Option<Grid>,
    },
    /// Slot-level simulation of the optimal policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Cross-checks the LP, the closed form and the simulator.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone)]
struct Grid(Vec<f64>);

fn grid_arg(text: &str) -> Result<Grid, String> {
    parse_grid(text).map(Grid)
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    slots: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(sub: Sub) -> Result<(), CliError> {
    let (common, overrides) = match sub {
        Sub::Solve(common) => (
            common,
            Overrides {
                command: Some(Command::Solve),
                ..Overrides::default()
            },
        ),
        Sub::Sweep { common, grid } => (
            common,
            Overrides {
                command: Some(Command::Sweep),
                grid: grid.map(|g| g.0),
                ..Overrides::default()
            },
        ),
        Sub::Simulate { common, sim } => (
            common,
            Overrides {
                command: Some(Command::Simulate),
                seed: sim.seed,
                slots: sim.slots,
                ..Overrides::default()
            },
        ),
        Sub::Verify { common, sim } => (
            common,
            Overrides {
                command: Some(Command::Verify),
                seed: sim.seed,
                slots: sim.slots,
                ..Overrides::default()
            },
        ),
    };
    let spec = load_config(&common.config)?.with_overrides(Overrides {
        output: common.out,
        ..overrides
    })?;
    match spec.command {
        Command::Solve => emit_json(&spec, &run_solve(&spec)?),
        Command::Simulate => emit_json(&spec, &run_simulate(&spec)?),
        Command::Sweep => {
            let rows = run_sweep(&spec)?;
            emit(&spec, |w| write_table(&rows, w))
        }
        Command::Verify => {
            let report = run_verify(&spec)?;
            for c in &report.checks {
                let verdict = if c.passed { "ok  " } else { "FAIL" };
                eprintln!(
                    "{verdict} {}: {} vs {} (discrepancy {:.3e}, bound {:.0e})",
                    c.pair, c.lhs, c.rhs, c.discrepancy, c.bound
                );
            }
            emit_json(&spec, &report)?;
            let failed: Vec<String> = report.failures().iter().map(|c| c.pair.clone()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Verify(failed.join(", ")))
            }
        }
    }
}

fn emit_json<T: Serialize>(spec: &RunSpec, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    emit(spec, |w| writeln!(w, "{text}"))
}

fn emit(spec: &RunSpec, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    match &spec.output_path {
        Some(path) => {
            let io = |source| CliError::Io {
                path: path.clone(),
                source,
            };
            let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
            write(&mut file).and_then(|()| file.flush()).map_err(io)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|source| CliError::Io {
                path: Path::new("<stdout>").to_path_buf(),
                source,
            })
        }
    }
}
