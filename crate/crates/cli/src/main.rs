use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use saproj_cli::config::{parse_unvalidated, ConfigErrors, ExperimentConfig};
use saproj_cli::demos;
use saproj_cli::experiment::{self, CliError, Overrides, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "saproj", version, about = "String-averaging projection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiments (concurrently when several are given).
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Evaluate the configured hypothesis checks without iterating.
    Check {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Re-run a trace from its metadata and compare step norms bit for bit.
    Replay { trace: PathBuf },
    /// Run a built-in configuration.
    Demo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(demos::NAMES))]
        name: String,
        /// Print the configuration instead of running it.
        #[arg(long)]
        print: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated indices, e.g. `1,2,5`.
    #[arg(long, value_delimiter = ',')]
    watch: Option<Vec<usize>>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides { max_iters: a.max_iters, seed: a.seed, out_dir: a.out_dir, watch: a.watch }
    }
}

/// Parses a configuration and applies the overrides before validating.
fn load(text: &str, source: &str, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut config = parse_unvalidated(text).map_err(|e| CliError::Config(prefix(e, source)))?;
    overrides.apply(&mut config);
    config.validate().map_err(|e| CliError::Config(prefix(e, source)))?;
    Ok(config)
}

fn prefix(mut errors: ConfigErrors, source: &str) -> ConfigErrors {
    for e in &mut errors.0 {
        e.path = format!("{source}: {}", e.path);
    }
    errors
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(anyhow::anyhow!("reading {}: {e}", path.display())))
}

fn run(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Run { configs, overrides } => {
            let overrides = Overrides::from(overrides);
            let mut loaded = Vec::with_capacity(configs.len());
            for path in &configs {
                loaded.push(load(&read(path)?, &path.display().to_string(), &overrides)?);
            }
            let mut code = 0;
            for outcome in experiment::run_batch(&loaded) {
                match outcome {
                    Ok(o) => {
                        print!("{}", o.summary);
                        code = code.max(o.exit_code);
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        code = code.max(e.exit_code());
                    }
                }
            }
            Ok(code)
        }
        Command::Check { config, overrides } => {
            let cfg = load(&read(&config)?, &config.display().to_string(), &overrides.into())?;
            let (_, text) = experiment::check_experiment(&cfg)?;
            print!("{text}");
            Ok(0)
        }
        Command::Replay { trace } => {
            let report = experiment::replay(&trace)?;
            match &report.divergence {
                None => println!("replay identical: {} recorded steps match bit for bit", report.compared),
                Some(d) => println!("replay {d}"),
            }
            Ok(report.exit_code())
        }
        Command::Demo { name, print, overrides } => {
            let text = demos::demo_config(&name).expect("validated by clap");
            if print {
                print!("{text}");
                return Ok(0);
            }
            let cfg = load(text, &name, &overrides.into())?;
            let outcome = experiment::run_experiment(&cfg)?;
            print!("{}", outcome.summary);
            Ok(outcome.exit_code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_VALIDATION as u8))
}
