use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

#[derive(Parser)]
#[command(name = "csmac", version, about = "Compressive-sensing MAC experiments")]
struct Cli {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// `section.key=VALUE`, value in TOML syntax. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Synthesize a field and write it as CSV.
    Generate,
    /// Measure success curves and derive (m_S, m_T).
    Calibrate,
    /// Analytic sufficiency and energy curves.
    Analyze,
    /// Delay-optimal configurations, group sizes and channel counts.
    Optimize,
    /// Run a full sampling campaign in the simulator.
    Simulate,
    /// Analytic model against the simulator.
    Compare,
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(error::Invalid("--jobs must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    let cfg = config::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    let out = output::Output::new(&cli.out, cfg.hash())?;
    let resolved = toml::to_string(&cfg)?;
    out.text("config.toml", &resolved)?;
    log::info!("config_sha256={}", cfg.hash());
    match cli.command {
        Command::Generate => commands::generate(&cfg, &out),
        Command::Calibrate => commands::calibrate(&cfg, &out),
        Command::Analyze => commands::analyze(&cfg, &out),
        Command::Optimize => commands::optimize(&cfg, &out),
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Compare => commands::compare(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::from(error::EXIT_OK as u8),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(error::exit_code(&e) as u8)
        }
    }
}
