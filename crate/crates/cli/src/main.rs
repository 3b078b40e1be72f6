use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing::{error, info};
use triage_cli::commands::{self, Layout};
use triage_cli::{CliError, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "triage",
    version,
    about = "Special-care triage models from sparse lab exams"
)]
struct Cli {
    /// TOML run configuration; the bundled demo config when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic cohort into data.csv.
    Synth,
    /// Per-feature summary table.
    Explore,
    /// Cross-validated baseline leaderboard.
    Screen,
    /// Bayesian optimisation of the boosting parameters.
    Tune,
    /// Fit, calibrate and save the model artifacts.
    Train,
    /// Held-out metrics and curve data.
    Evaluate,
    /// Global feature importance from tree Shapley values.
    Explain,
    /// Check every output exists and write the hashed manifest.
    Report,
    /// All stages in order.
    Run,
    /// Serve predictions over HTTP.
    Serve {
        /// Directory holding special_care.json and days.json; the run's models directory by default.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Print the bundled demo configuration.
    DemoConfig,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::demo(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Command::DemoConfig = cli.command {
        print!("{}", triage_cli::config::DEMO_CONFIG);
        return Ok(());
    }
    let cfg = resolve_config(cli)?;
    if cli.config.is_none() {
        info!("no --config given; using the bundled demo configuration");
    }
    let written = match &cli.command {
        Command::Synth => commands::cmd_synth(&cfg)?,
        Command::Explore => commands::cmd_explore(&cfg)?,
        Command::Screen => commands::cmd_screen(&cfg)?,
        Command::Tune => commands::cmd_tune(&cfg)?,
        Command::Train => commands::cmd_train(&cfg)?,
        Command::Evaluate => commands::cmd_evaluate(&cfg)?,
        Command::Explain => commands::cmd_explain(&cfg)?,
        Command::Report => commands::cmd_report(&cfg)?,
        Command::Run => commands::cmd_run(&cfg)?,
        Command::Serve { models, addr } => {
            let dir = models
                .clone()
                .unwrap_or_else(|| Layout::new(&cfg.out_dir).models_dir());
            // Load once up front so a bad artifact is reported as a data error.
            triage_serve::Snapshot::load_dir(&dir)?;
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
            return runtime
                .block_on(triage_serve::run(*addr, &dir))
                .map_err(|e| CliError::Internal(e.to_string()));
        }
        Command::DemoConfig => unreachable!(),
    };
    for path in written {
        info!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet {
        tracing::Level::ERROR
    } else {
        tracing::Level::INFO
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_target(false)
        .with_writer(std::io::stderr)
        .init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
