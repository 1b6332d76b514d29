//! Streams a regression table through every model and optimizer pairing and
//! reports the mean squared error over a few seeds.
//!
//! cargo run --release --example regression_comparison -- [table.csv] [n_h]
//!
//! Without a table the bundled synthetic fixture is used.

use std::path::PathBuf;

use online_rnn::harness::{
    aggregate, prepare_task, run_seeds, BaselineParams, ExperimentConfig, ModelKind,
    OptimizerConfig, TaskConfig,
};
use online_rnn::optim::WogdConfig;
use online_rnn::verify::wogd_experiment;

/// Longest prefix of 1, 2, 4, 8 whose block count divides the hidden width.
fn clock_periods(n_h: usize) -> Vec<usize> {
    let blocks = [4, 2, 1]
        .into_iter()
        .find(|b| n_h.is_multiple_of(*b))
        .unwrap_or(1);
    (0..blocks).map(|i| 1 << i).collect()
}

fn main() -> online_rnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic.csv"));
    let n_h: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let task = TaskConfig::Csv {
        path,
        target_column: None,
    };
    let base = wogd_experiment(task, n_h, WogdConfig::default());
    let baseline = |model, opt: fn(BaselineParams) -> OptimizerConfig, lr| ExperimentConfig {
        model,
        optimizer: opt(BaselineParams {
            lr,
            ..BaselineParams::default()
        }),
        ..base.clone()
    };
    let wogd = |w| ExperimentConfig {
        optimizer: OptimizerConfig::Wogd(WogdConfig {
            w,
            ..WogdConfig::default()
        }),
        ..base.clone()
    };

    let configs = [
        wogd(50),
        wogd(100),
        wogd(200),
        baseline(ModelKind::Srnn, OptimizerConfig::Sgd, 0.01),
        baseline(ModelKind::Lstm, OptimizerConfig::Adam, 0.01),
        baseline(ModelKind::Lstm, OptimizerConfig::Rmsprop, 0.003),
        ExperimentConfig {
            periods: clock_periods(n_h),
            ..baseline(ModelKind::Cwrnn, OptimizerConfig::Adam, 0.01)
        },
    ];
    let seeds = [1, 2, 3];
    println!(
        "{:<18} {:>10} {:>10} {:>10} {:>8}",
        "config", "mean mse", "min", "max", "sec/run"
    );
    for cfg in &configs {
        let task = prepare_task(cfg)?;
        let batch = run_seeds(cfg, &task, &seeds, 1)?;
        let s = aggregate(&cfg.label(), &batch.results, batch.diverged, false)?;
        println!(
            "{:<18} {:>10.5} {:>10.5} {:>10.5} {:>8.3}",
            s.label, s.mean_mse, s.min_mse, s.max_mse, s.mean_seconds
        );
    }
    Ok(())
}
