use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use selfheal_cli::{cmd_bench, cmd_gen, cmd_run, cmd_verify, Config, Ctx, Overrides, EXIT_IO};

#[derive(Parser)]
#[command(name = "selfheal", version, about = "Self-healing network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides SELFHEAL_SEED and the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// null, star, ring, rebuild or haft.
    #[arg(long, global = true)]
    healer: Option<String>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate an initial graph and an adversarial trace.
    Gen,
    /// Run a healer and write metrics, DOT snapshots and a summary.
    Run,
    /// Check a metrics CSV or a fresh run against the thresholds.
    Verify,
    /// Sweep sizes and healers, writing bench.csv.
    Bench,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let config = match &cli.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let ctx = Ctx::resolve(
            config,
            cli.out.clone(),
            Overrides {
                seed: cli.seed,
                env_seed: std::env::var("SELFHEAL_SEED").ok(),
                healer: cli.healer.clone(),
                trials: cli.trials,
                quiet: cli.quiet,
            },
        )?;
        match cli.command {
            Command::Gen => cmd_gen(&ctx),
            Command::Run => cmd_run(&ctx),
            Command::Verify => cmd_verify(&ctx),
            Command::Bench => cmd_bench(&ctx),
        }
    })();
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("selfheal: {e:#}");
            ExitCode::from(EXIT_IO)
        }
    }
}
