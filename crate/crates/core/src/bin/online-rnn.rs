use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use online_rnn::harness::{grid_search, run_experiment, ExperimentConfig};
use online_rnn::verify::{self, Status, VerifyOptions};
use online_rnn::Error;

/// Online recurrent regression experiments.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config over its seeds and write the result tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Pick the learning rate with the lowest mean error over the tuning seeds.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lr_grid: Vec<f64>,
        /// Tuning seeds; defaults to the first `tuning_runs` seeds of the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the numerical self-checks.
    Verify {
        /// Directory with the regression tables; defaults to $ONLINE_RNN_DATA.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Only these check numbers.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<usize>>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

const EXIT_CHECK_FAILED: u8 = 1;

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 2,
        "numeric" => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{} error: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(command: Command) -> online_rnn::Result<u8> {
    match command {
        Command::Run {
            config,
            seeds,
            out,
            workers,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let exp = run_experiment(&cfg, seeds.as_deref(), out.as_deref(), workers)?;
            let s = &exp.summary;
            println!(
                "{}: {} runs, {} diverged, mean mse {:.6}",
                s.label,
                s.runs,
                s.diverged.len(),
                s.mean_mse
            );
            if let Some((hits, at)) = s.sustained {
                println!(
                    "sustained prediction on {hits} runs, mean step {}",
                    at.map_or("-".into(), |t| format!("{t:.0}"))
                );
            }
            for f in &exp.files {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
        Command::Grid {
            config,
            lr_grid,
            seeds,
            workers,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seeds =
                seeds.unwrap_or_else(|| cfg.seeds.iter().copied().take(cfg.tuning_runs).collect());
            let outcome = grid_search(&cfg, &lr_grid, &seeds, workers.unwrap_or(cfg.workers))?;
            println!("lr,mean_mse,diverged");
            for p in &outcome.points {
                println!(
                    "{},{},{}",
                    p.lr,
                    p.mean_mse.map_or("".into(), |m| m.to_string()),
                    p.diverged
                );
            }
            println!("best lr {}", outcome.best_lr);
            Ok(0)
        }
        Command::Verify {
            data_dir,
            only,
            workers,
        } => {
            let mut opts = VerifyOptions::default();
            if data_dir.is_some() {
                opts.data_dir = data_dir;
            }
            if let Some(w) = workers {
                opts.workers = w.max(1);
            }
            let checks: [fn(&VerifyOptions) -> verify::CheckReport; 9] = [
                |_| verify::gradient_check(),
                |_| verify::state_sensitivity_check(),
                verify::smoothness_check,
                |_| verify::regret_bound_check(),
                verify::regret_trend_check,
                verify::table_check,
                verify::binary_addition_check,
                |_| verify::projection_check(),
                |_| verify::runtime_check(),
            ];
            let mut failed = false;
            for (i, check) in checks.iter().enumerate() {
                if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
                    continue;
                }
                let r = check(&opts);
                println!("{r}");
                failed |= r.status == Status::Fail;
            }
            Ok(if failed { EXIT_CHECK_FAILED } else { 0 })
        }
    }
}
