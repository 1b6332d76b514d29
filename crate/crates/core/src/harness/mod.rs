//! Experiment configuration, multi-seed execution, hyperparameter search and
//! result tables.

mod config;
mod output;
mod run;

pub use config::{
    BaselineParams, ExperimentConfig, InstrumentConfig, ModelKind, OptimizerConfig, TaskConfig,
    SCHEMA_VERSION,
};
pub use output::{aggregate, emit_outputs, Summary};
pub use run::{prepare_task, run_prepared, run_single, PreparedTask, RunResult};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Finished runs and the seeds that overflowed, in seed order.
#[derive(Debug, Clone)]
pub struct SeedBatch {
    pub results: Vec<RunResult>,
    pub diverged: Vec<(u64, usize)>,
}

/// Runs every seed on `workers` threads. Numeric overflows are collected per
/// seed; any other error aborts the batch.
pub fn run_seeds(
    cfg: &ExperimentConfig,
    task: &PreparedTask,
    seeds: &[u64],
    workers: usize,
) -> Result<SeedBatch> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<RunResult>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_prepared(cfg, task, s))
            .collect()
    });
    let mut batch = SeedBatch {
        results: Vec::new(),
        diverged: Vec::new(),
    };
    for (seed, outcome) in seeds.iter().zip(outcomes) {
        match outcome {
            Ok(r) => batch.results.push(r),
            Err(Error::NumericOverflow { t, .. }) => batch.diverged.push((*seed, t)),
            Err(e) => return Err(e),
        }
    }
    Ok(batch)
}

/// Result of running a config over its seeds and writing the tables.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub summary: Summary,
    pub batch: SeedBatch,
    pub files: Vec<std::path::PathBuf>,
}

/// Runs `seeds` (default: the config's seeds) and writes all outputs.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    seeds: Option<&[u64]>,
    out: Option<&std::path::Path>,
    workers: Option<usize>,
) -> Result<Experiment> {
    cfg.validate()?;
    let seeds = seeds.unwrap_or(&cfg.seeds);
    let task = prepare_task(cfg)?;
    let batch = run_seeds(cfg, &task, seeds, workers.unwrap_or(cfg.workers))?;
    if batch.results.is_empty() {
        let t = batch.diverged.first().map_or(0, |d| d.1);
        return Err(Error::NumericOverflow {
            t,
            context: "every seed",
        });
    }
    let binary = matches!(task, PreparedTask::BinaryAdd { .. });
    let summary = aggregate(&cfg.label(), &batch.results, batch.diverged.clone(), binary)?;
    let files = emit_outputs(
        cfg,
        seeds,
        &summary,
        &batch.results,
        out.unwrap_or(&cfg.output_dir),
    )?;
    Ok(Experiment {
        summary,
        batch,
        files,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub lr: f64,
    /// Mean MSE over the tuning seeds, `None` if any seed diverged.
    pub mean_mse: Option<f64>,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best_lr: f64,
    pub points: Vec<GridPoint>,
}

/// Picks the learning rate with the lowest mean MSE over `tuning_seeds`.
/// Points where any seed diverged are excluded; ties go to the smaller rate.
pub fn grid_search(
    cfg: &ExperimentConfig,
    grid: &[f64],
    tuning_seeds: &[u64],
    workers: usize,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("the learning-rate grid is empty".into()));
    }
    if tuning_seeds.is_empty() {
        return Err(Error::Config(
            "grid search needs at least one tuning seed".into(),
        ));
    }
    if let Some(bad) = grid.iter().find(|lr| !(**lr > 0.0 && lr.is_finite())) {
        return Err(Error::Config(format!(
            "learning rate {bad} is not positive"
        )));
    }
    let task = prepare_task(cfg)?;
    let mut points = Vec::with_capacity(grid.len());
    for &lr in grid {
        let point_cfg = ExperimentConfig {
            optimizer: cfg.optimizer.with_learning_rate(lr),
            ..cfg.clone()
        };
        point_cfg.validate()?;
        let batch = run_seeds(&point_cfg, &task, tuning_seeds, workers)?;
        let mean_mse = batch
            .diverged
            .is_empty()
            .then(|| batch.results.iter().map(|r| r.mse).sum::<f64>() / batch.results.len() as f64);
        points.push(GridPoint {
            lr,
            mean_mse: mean_mse.filter(|m| m.is_finite()),
            diverged: batch.diverged.len(),
        });
    }
    let best = points
        .iter()
        .filter_map(|p| p.mean_mse.map(|m| (m, p.lr)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .ok_or(Error::NumericOverflow {
            t: 0,
            context: "every grid point diverged",
        })?;
    Ok(GridOutcome {
        best_lr: best.1,
        points,
    })
}
