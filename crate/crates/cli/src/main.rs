use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use zeno_dark_cli::{design, run_scenario, run_sweep, spectrum, CliError, Options, Scenario};

#[derive(Parser)]
#[command(name = "zeno-dark", version, about = "Dark evolution under time-varying monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory; overrides the scenario's output.directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Profile::Default)]
    tolerance_profile: Profile,

    /// Print nothing on success; errors still go to stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Default,
    Strict,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's configured mode.
    Run { config: PathBuf },
    /// Sweep one parameter and fit the convergence slope.
    Sweep { config: PathBuf },
    /// Zeno spectrum and cyclic return of a generator path.
    Spectrum { config: PathBuf },
    /// Sample the monitored state designed for a target trajectory.
    Design { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let opts = Options {
        out: cli.out,
        strict: matches!(cli.tolerance_profile, Profile::Strict),
    };
    let result = (|| -> Result<_, CliError> {
        let (config, run): (_, fn(&Scenario, &Options) -> _) = match &cli.command {
            Command::Run { config } => (config, run_scenario),
            Command::Sweep { config } => (config, run_sweep),
            Command::Spectrum { config } => (config, spectrum),
            Command::Design { config } => (config, design),
        };
        let scenario = Scenario::load(config)?;
        run(&scenario, &opts)
    })();

    match result {
        Ok(report) => {
            if !cli.quiet {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
