use std::path::PathBuf;
use std::process::ExitCode;

use apids_cli::{run, Command, RunConfig, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "apids",
    version,
    about = "Integrated density of states for almost-periodic perturbations"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Run configuration (TOML).
    #[arg(long, short, global = true, default_value = "apids.toml")]
    config: PathBuf,

    /// Output directory.
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override a configuration value, e.g. `operator.eps=0.05`. Repeatable.
    #[arg(
        long = "override",
        short = 'O',
        global = true,
        value_name = "KEY=VALUE"
    )]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Check the frequency conditions on the configured truncations.
    Conditions,
    /// Classify the energy shell into zones.
    Zones,
    /// Run the gauge chains for every zone.
    Gauge,
    /// Pipeline IDS at each energy.
    Ids,
    /// Reference IDS by direct diagonalization.
    Oracle,
    /// Pipeline against oracle over a grid of h and step counts.
    Converge,
    /// Propagation norms between phase-space cutoffs.
    Propagate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Conditions => Command::Conditions,
            Cmd::Zones => Command::Zones,
            Cmd::Gauge => Command::Gauge,
            Cmd::Ids => Command::Ids,
            Cmd::Oracle => Command::Oracle,
            Cmd::Converge => Command::Converge,
            Cmd::Propagate => Command::Propagate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", cli.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<Vec<String>, apids_cli::CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| apids_cli::CliError::Parse(format!("thread pool: {e}")))?;
    }
    let text = std::fs::read_to_string(&cli.config).map_err(|source| apids_cli::CliError::Io {
        path: cli.config.clone(),
        source,
    })?;
    let cfg = RunConfig::parse_with_overrides(&text, &cli.overrides)?;
    let opts = RunOptions {
        out: cli.out.clone(),
        threads: cli.threads,
    };
    run(cli.command.into(), &cfg, &opts)
}
