use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cryptorisk_cli::commands::run_command;
use cryptorisk_cli::config::RunConfig;

/// Crypto-asset risk toolkit: GARCH calibration, tail-risk backtesting,
/// minimum-risk portfolios, risk budgeting and option pricing.
#[derive(Parser)]
#[command(name = "cryptorisk", version, about)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the joint innovation model (e.g. mvt5, tcopula0.8, mvg).
    #[arg(long, global = true)]
    model: Option<String>,

    /// Override the tail level alpha.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Override the in-sample window length.
    #[arg(long, global = true)]
    window: Option<usize>,

    /// Override the scenario count per roll.
    #[arg(long, global = true)]
    scenarios: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align input prices and export the log-return panel plus summary stats.
    Ingest,
    /// Run the VaR/CVaR backtest grid and write the report and traces.
    Backtest,
    /// Rolling minimum-variance / minimum-CVaR optimization and horse race.
    Optimize,
    /// Equal-weight risk budgeting: in-sample table and rolling contributions.
    Riskbudget,
    /// Out-of-sample risk-adjusted-return ratios.
    Ratios,
    /// Price the option surfaces on both optimal portfolios.
    Price,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Backtest => "backtest",
            Command::Optimize => "optimize",
            Command::Riskbudget => "riskbudget",
            Command::Ratios => "ratios",
            Command::Price => "price",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            // Single machine-readable error line on stderr.
            let line = serde_json::json!({
                "command": name,
                "error": format!("{e:#}"),
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<Vec<PathBuf>> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(model) = &cli.model {
        config.model = model.clone();
        // A command-line model also narrows the backtest grid.
        config.backtest_models = Some(vec![model.clone()]);
    }
    if let Some(alpha) = cli.alpha {
        config.alpha = alpha;
    }
    if let Some(window) = cli.window {
        config.window = window;
    }
    if let Some(scenarios) = cli.scenarios {
        config.scenarios = scenarios;
    }
    config.validate()?;
    run_command(cli.command.name(), &config)
}
