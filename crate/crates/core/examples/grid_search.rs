//! Learning-rate selection over tuning seeds, then evaluation of the chosen
//! rate on held-out seeds with all result tables written to disk.
//!
//! cargo run --release --example grid_search -- [out_dir]

use std::path::PathBuf;

use online_rnn::harness::{
    grid_search, run_experiment, BaselineParams, ExperimentConfig, ModelKind, OptimizerConfig,
    TaskConfig,
};
use online_rnn::optim::WogdConfig;
use online_rnn::verify::wogd_experiment;

fn main() -> online_rnn::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("online-rnn-grid"));
    let task = TaskConfig::Synthetic {
        features: 4,
        steps: 1000,
        data_seed: 3,
    };
    let cfg = ExperimentConfig {
        model: ModelKind::Lstm,
        optimizer: OptimizerConfig::Adam(BaselineParams::default()),
        ..wogd_experiment(task, 8, WogdConfig::default())
    };

    let tuning = [1, 2, 3];
    let grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
    let outcome = grid_search(&cfg, &grid, &tuning, 1)?;
    for p in &outcome.points {
        match p.mean_mse {
            Some(m) => println!("lr {:<7} mean mse {m:.5}", p.lr),
            None => println!("lr {:<7} excluded, {} seeds diverged", p.lr, p.diverged),
        }
    }
    println!("selected lr {}", outcome.best_lr);

    let tuned = ExperimentConfig {
        optimizer: cfg.optimizer.with_learning_rate(outcome.best_lr),
        ..cfg
    };
    let exp = run_experiment(&tuned, Some(&[11, 12, 13]), Some(&out), None)?;
    println!(
        "held-out mean mse {:.5} over {} runs",
        exp.summary.mean_mse, exp.summary.runs
    );
    for f in &exp.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
