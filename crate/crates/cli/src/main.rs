use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use cdt_lab::commands::{cmd_diagnose, cmd_eval, cmd_gen, cmd_sweep, cmd_train};
use cdt_lab::ExperimentConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cdtlab", version, about = "Class-imbalanced classification lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the imbalanced train set and the balanced test set.
    Gen(Common),
    /// Train a model and record per-epoch metrics.
    Train(Common),
    /// Evaluate a trained checkpoint with argmax, τ-normalized and NCM rules.
    Eval(Common),
    /// Select γ on a held-out split, then retrain on the full training set.
    Sweep(Common),
    /// Feature deviation, decision-value matrices and norm trajectories.
    Diagnose(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the configuration and $CDTLAB_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<()> {
    let (Command::Gen(common)
    | Command::Train(common)
    | Command::Eval(common)
    | Command::Sweep(common)
    | Command::Diagnose(common)) = &cli.command;
    let cfg = ExperimentConfig::load(&common.config)?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let out = cfg.resolve_out_dir(common.out.as_deref(), &common.config);
    std::fs::create_dir_all(&out)?;
    let out: &Path = &out;
    match &cli.command {
        Command::Gen(_) => {
            let m = cmd_gen(&cfg, seed, out)?;
            println!("train counts {:?}, test counts {:?}", m.train_counts, m.test_counts);
        }
        Command::Train(_) => {
            let r = cmd_train(&cfg, seed, out)?;
            println!("macro test accuracy {:.4}", r.final_macro_test_accuracy);
        }
        Command::Eval(_) => {
            let r = cmd_eval(&cfg, seed, out)?;
            println!("argmax macro accuracy {:.4}", r.argmax.macro_accuracy);
        }
        Command::Sweep(_) => {
            let r = cmd_sweep(&cfg, seed, out)?;
            println!(
                "best gamma {}, final macro test accuracy {:.4}",
                r.summary.best_gamma, r.final_test.macro_accuracy
            );
        }
        Command::Diagnose(_) => {
            let r = cmd_diagnose(&cfg, seed, out)?;
            println!("feature deviation {:?}", r.dis);
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
