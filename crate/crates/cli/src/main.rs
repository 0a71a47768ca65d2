//! `ares`: deterministic robustness-evaluation runs driven by TOML configs.

mod commands;
mod config;
mod manifest;
mod svg;

use anyhow::{bail, Context, Result};
use clap::Parser;
use config::RunConfig;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "ares",
    version,
    about = "Adversarial robustness evaluation suite",
    after_help = "Subcommands: gen-data | train | attack | curve | corrupt | mce | transfer | freq | report"
)]
struct Cli {
    /// Subcommand to run.
    command: String,
    /// Path to the run's TOML config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config file and ARES_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread count (results are identical for any value).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed override for the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("building worker pool")?;
    }
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    // Resolution order for the output directory: --out, ARES_OUT, config.
    if let Some(out) = cli.out {
        config.out = Some(out);
    } else if let Ok(out) = std::env::var("ARES_OUT") {
        config.out = Some(PathBuf::from(out));
    }
    let Some(out) = config.out.clone() else {
        bail!("no output directory: set `out` in the config, ARES_OUT, or --out");
    };

    match cli.command.as_str() {
        "gen-data" => commands::gen_data::run(&config, &out),
        "train" => commands::train_cmd::run(&config, &out),
        "attack" => commands::attack_cmd::run(&config, &out),
        "curve" => commands::curve_cmd::run(&config, &out),
        "corrupt" => commands::corrupt_cmd::run(&config, &out),
        "mce" => commands::mce_cmd::run(&config, &out),
        "transfer" => commands::transfer_cmd::run(&config, &out),
        "freq" => commands::freq_cmd::run(&config, &out),
        "report" => commands::report_cmd::run(&config, &out),
        other => bail!("unknown subcommand '{other}'"),
    }
}
