//! Command-line front end: sample, train, eval, sweep, check.

use clap::{Parser, Subcommand};
use mfg_flow::cli::{self, Overrides};
use mfg_flow::pipeline::DatasetMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mfg-flow",
    version,
    about = "Solve families of finite-state mean-field games and learn their flow map"
)]
struct Cli {
    /// Worker threads for batch solves and evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset by solving sampled game instances.
    Sample {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sampling seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset mode override.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<DatasetMode>,
    },
    /// Train the flow-map network on a generated dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Dataset file (default: <out>/dataset.jsonl).
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Training seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Epoch-count override.
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint against fresh solver runs.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint file (default: <out>/checkpoint.bin).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluation seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of evaluation pairs.
        #[arg(long)]
        pairs: Option<usize>,
        /// Also dump each pair's solver trajectory as JSONL.
        #[arg(long)]
        dump_trajectories: bool,
    },
    /// Retrain across hidden widths and seeds, on one dataset.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated hidden widths, e.g. 32,64,128.
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base training seed override (trial t uses seed + t).
        #[arg(long)]
        seed: Option<u64>,
        /// Epoch-count override.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run model diagnostics (monotonicity, selector gradient, CFL).
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Also report this checkpoint's weight-bound diagnostic.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<DatasetMode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn run(cli: Cli) -> mfg_flow::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| mfg_flow::Error::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Sample { config, out, seed, mode } => {
            cli::cmd_sample(&config, &Overrides { out, seed, mode, ..Default::default() })
        }
        Command::Train { config, dataset, out, seed, epochs, resume } => cli::cmd_train(
            &config,
            dataset.as_deref(),
            resume.as_deref(),
            &Overrides { out, seed, epochs, ..Default::default() },
        ),
        Command::Eval { config, checkpoint, out, seed, pairs, dump_trajectories } => {
            cli::cmd_eval(
                &config,
                checkpoint.as_deref(),
                &Overrides { out, seed, pairs, dump_trajectories, ..Default::default() },
            )
        }
        Command::Sweep { config, widths, trials, dataset, out, seed, epochs } => cli::cmd_sweep(
            &config,
            &widths,
            trials,
            dataset.as_deref(),
            &Overrides { out, seed, epochs, ..Default::default() },
        ),
        Command::Check { config, checkpoint } => cli::cmd_check(&config, checkpoint.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(cli::exit_code_for(&err) as u8)
        }
    }
}
