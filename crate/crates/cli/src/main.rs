use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riskaware::harness::{
    crash_speed_summary, default_thresholds, group_by_point, read_metrics_csv, run_experiment,
    task_performance_curve, ExperimentConfig,
};
use riskaware::rl::RolloutLog;

#[derive(Parser)]
#[command(name = "riskaware", version, about = "Risk-aware collision prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) every grid point × seed of an experiment file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print crash counts and final task speed per grid point.
    Summarize {
        #[arg(long)]
        metrics: PathBuf,
        /// Comma-separated crash-speed thresholds, m/s.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
    },
    /// Re-simulate a rollout log and check it against the recorded states.
    Replay {
        #[arg(long)]
        rollout_log: PathBuf,
    },
}

fn run(cli: Cli) -> riskaware::Result<()> {
    match cli.command {
        Command::Run { config, out, jobs } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| riskaware::Error::Config("no --out and no output_dir in config".into()))?;
            let records = run_experiment(&cfg, &out, jobs)?;
            println!("{} metrics records written to {}", records.len(), out.join("metrics.csv").display());
        }
        Command::Summarize { metrics, thresholds } => {
            let records = read_metrics_csv(&metrics)?;
            let thresholds = thresholds.unwrap_or_else(default_thresholds);
            let header: Vec<String> = thresholds.iter().map(|t| format!(">={t}")).collect();
            println!("point\tfinal_speed\t{}", header.join("\t"));
            for (point, recs) in group_by_point(&records) {
                let counts = crash_speed_summary(&recs, &thresholds)?;
                let curve = task_performance_curve(&recs)?;
                let last = curve.last().expect("nonempty curve");
                let counts: Vec<String> = counts.iter().map(|c| format!("{c:.1}")).collect();
                println!("{point}\t{:.3}±{:.3}\t{}", last.mean, last.std, counts.join("\t"));
            }
        }
        Command::Replay { rollout_log } => {
            let log = RolloutLog::load(&rollout_log)?;
            let n = log.verify()?;
            let crashes = log.rollouts.iter().filter(|r| r.collided).count();
            println!("iteration {}: {n} rollouts replayed, {crashes} collisions, all consistent", log.iteration);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
