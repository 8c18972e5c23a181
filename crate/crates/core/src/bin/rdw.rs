use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rdw_core::experiment::{self, ExperimentConfig, Manifest};

#[derive(Parser)]
#[command(name = "rdw", version, about = "Multiuser redirected-walking simulation and trajectory prediction")]
struct Cli {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config worker count.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate users in the room and write traces and resets.
    Simulate,
    /// Window a trace into a train/test dataset.
    BuildDataset,
    /// Train one approach.
    Train,
    /// Sweep hyperparameters one axis at a time.
    Tune,
    /// Train and evaluate every configured approach on one scenario.
    Compare,
    /// Evaluate two-user models on growing user counts.
    ScaleStudy,
    /// Print the default config as TOML.
    DefaultConfig,
    /// Re-hash the artifacts listed in `<out>/manifest.json`.
    Verify,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn done(out: &Path, m: &Manifest) {
    println!("{}: {} artifacts in {}", m.command, m.artifacts.len(), out.display());
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let out = cli.out.clone();
    match cli.command {
        Command::DefaultConfig => print!("{}", ExperimentConfig::default().to_toml()?),
        Command::Verify => {
            let bad = experiment::verify_manifest(&out)?;
            if bad.is_empty() {
                println!("all artifacts match");
            } else {
                anyhow::bail!("mismatched artifacts: {}", bad.join(", "));
            }
        }
        Command::Simulate => done(&out, &experiment::cmd_simulate(&load(&cli)?, &out)?),
        Command::BuildDataset => done(&out, &experiment::cmd_build_dataset(&load(&cli)?, &out)?),
        Command::Train => done(&out, &experiment::cmd_train(&load(&cli)?, &out)?),
        Command::Tune => done(&out, &experiment::cmd_tune(&load(&cli)?, &out)?),
        Command::Compare => {
            let (m, report) = experiment::cmd_compare(&load(&cli)?, &out)?;
            for a in &report.approaches {
                println!("{:<14} mean SE {:.4e} m^2  median {:.4e}", a.approach, a.test.mean, a.test.quantiles[3]);
            }
            done(&out, &m);
        }
        Command::ScaleStudy => {
            let (m, report) = experiment::cmd_scale_study(&load(&cli)?, &out)?;
            for p in &report.points {
                println!("users {}: resets/user {:.2}, SE {:?}", p.users, p.mean_resets_per_user, p.mean_se);
            }
            done(&out, &m);
        }
    }
    Ok(())
}
