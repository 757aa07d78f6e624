use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use foldscan_cli::{run_pipeline, run_stage, PipelineConfig, Result, Stage};

#[derive(Parser)]
#[command(name = "foldscan", version, about = "Fold outlier detection pipeline")]
struct Args {
    /// JSON configuration; defaults are used for anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Top-level seed; overrides the value in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override a configuration value, e.g. `--set model.epochs=10`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate the synthetic cohorts.
    Synth,
    /// Learn the region mask and write the cropped inputs.
    Preprocess,
    /// Train the model.
    Train,
    /// Train a grid of models and select by proxy-outlier separation.
    Gridsearch,
    /// Build the deletion and asymmetry benchmarks.
    Benchmark,
    /// Score benchmarks and the rare set.
    Detect,
    /// Latent traversals and interpolations.
    Explore,
    /// Write the markdown report and artifact hashes.
    Report,
    /// Run every stage except the grid search.
    Run,
    /// Print the resolved configuration.
    Config,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Synth => Stage::Synth,
            Command::Preprocess => Stage::Preprocess,
            Command::Train => Stage::Train,
            Command::Gridsearch => Stage::Gridsearch,
            Command::Benchmark => Stage::Benchmark,
            Command::Detect => Stage::Detect,
            Command::Explore => Stage::Explore,
            Command::Report => Stage::Report,
            Command::Run | Command::Config => return None,
        })
    }
}

fn run(args: &Args) -> Result<()> {
    let config = PipelineConfig::load(args.config.as_deref(), &args.sets, args.seed)?;
    let mut log = |msg: &str| eprintln!("{msg}");
    match (args.command, args.command.stage()) {
        (_, Some(stage)) => run_stage(&config, stage, &mut log),
        (Command::Run, None) => run_pipeline(&config, &mut log),
        _ => {
            print!("{}", config.to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
