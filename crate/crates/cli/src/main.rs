use std::path::PathBuf;
use std::process::ExitCode;

use beamlearn::experiment::{exit_code, run, ExperimentConfig, Task};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "beamlearn",
    version,
    about = "Learn analog beams and beam codebooks from receive-power feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic channel set and the array geometry behind it.
    GenerateScenario(Common),
    /// Train a single beam on all users of the scenario.
    LearnBeam(Common),
    /// Cluster users and learn one beam per cluster.
    LearnCodebook(Common),
    /// Score a saved codebook against beamsteering baselines.
    Evaluate(Common),
    /// Write beam patterns of a saved codebook.
    ExportPatterns(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file. Unset keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; replaces the config's seed and all derived seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = match cli.command {
        Command::GenerateScenario(a) => (Task::GenerateScenario, a),
        Command::LearnBeam(a) => (Task::LearnBeam, a),
        Command::LearnCodebook(a) => (Task::LearnCodebook, a),
        Command::Evaluate(a) => (Task::Evaluate, a),
        Command::ExportPatterns(a) => (Task::ExportPatterns, a),
    };

    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    let config = match ExperimentConfig::parse_for(&text, args.seed, Some(task)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let result = run(&config, &args.out);
    match &result {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                println!("{}", args.out.join(a).display());
            }
            if let Some(report) = &outcome.report {
                let l = report.learned();
                println!("objective {:.6}  egc ratio {:.4}", l.objective, l.egc_ratio);
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
