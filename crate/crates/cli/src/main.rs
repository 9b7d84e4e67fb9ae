use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use poisson_ou::inequalities::CATALOG;
use poisson_ou_cli::config::ModeSpec;
use poisson_ou_cli::example_cmd::{example_table, ExampleParams};
use poisson_ou_cli::runner::EXAMPLE_IDS;
use poisson_ou_cli::{run_file, CliError, Overrides};

#[derive(Parser)]
#[command(
    name = "poisson-ou",
    version,
    about = "Difference-calculus and Ornstein-Uhlenbeck checks on Poisson space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Total Poisson mass allowed outside the truncated box.
    #[arg(long, global = true)]
    tail_mass: Option<f64>,
    /// Maximum number of truncated states.
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Mc,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks listed in a TOML config and write the report.
    Run { config: PathBuf },
    /// Print the checker catalog.
    ListChecks,
    /// Print an example table as CSV.
    Example {
        name: String,
        /// `key=value` or `key=v1,v2,...`
        params: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { config } => {
            let overrides = Overrides {
                seed: cli.seed,
                tail_mass: cli.tail_mass,
                budget: cli.budget,
                mode: cli.mode.map(|m| match m {
                    Mode::Exact => ModeSpec::Exact,
                    Mode::Mc => ModeSpec::Mc,
                }),
                out: cli.out,
            };
            let (outcome, path) = run_file(&config, &overrides)?;
            println!("{}", outcome.summary());
            println!("report: {}", path.display());
            Ok(outcome.exit_code() as u8)
        }
        Command::ListChecks => {
            for c in CATALOG {
                println!(
                    "{}\t{}\thypotheses: {}\tparams: {}",
                    c.id,
                    c.anchor,
                    c.hypotheses,
                    c.params.join(",")
                );
            }
            for id in EXAMPLE_IDS {
                println!("{id}\texample");
            }
            Ok(0)
        }
        Command::Example { name, params } => {
            let table = example_table(&name, ExampleParams::parse(&params)?, cli.seed.unwrap_or(0x5eed))?;
            match cli.out {
                Some(dir) => {
                    let path = dir.join(format!("{name}.csv"));
                    let io = |source| CliError::Io {
                        path: path.display().to_string(),
                        source,
                    };
                    std::fs::create_dir_all(&dir).map_err(io)?;
                    std::fs::write(&path, table.to_string()).map_err(io)?;
                    println!("{}", path.display());
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    match write!(stdout, "{table}").and_then(|()| stdout.flush()) {
                        // a closed pipe (`| head`) is a normal way to stop reading
                        Err(e) if e.kind() != ErrorKind::BrokenPipe => {
                            return Err(CliError::Io {
                                path: "<stdout>".into(),
                                source: e,
                            })
                        }
                        _ => {}
                    }
                }
            }
            Ok(0)
        }
    }
}
