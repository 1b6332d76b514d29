use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::RunResult;
use crate::error::{Error, Result};

/// Across-seed statistics for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub label: String,
    pub runs: usize,
    /// Seeds that aborted with a numeric overflow, with the failing timestep.
    pub diverged: Vec<(u64, usize)>,
    pub mean_mse: f64,
    pub min_mse: f64,
    pub max_mse: f64,
    pub mean_seconds: f64,
    /// Binary addition: how many runs reached sustained prediction, and their mean step.
    pub sustained: Option<(usize, Option<f64>)>,
    pub mean_projections: f64,
    /// Per-step mean of the cumulative error curves, with the number of runs that reached each step.
    pub curve: Vec<(f64, usize)>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Summarizes finished runs; `binary` selects the sustained-prediction columns.
pub fn aggregate(
    label: &str,
    results: &[RunResult],
    diverged: Vec<(u64, usize)>,
    binary: bool,
) -> Result<Summary> {
    if results.is_empty() {
        return Err(Error::Contract(format!(
            "no finished runs to aggregate for {label}"
        )));
    }
    let longest = results.iter().map(|r| r.curve.len()).max().unwrap_or(0);
    let curve = (0..longest)
        .map(|k| {
            let vals: Vec<f64> = results
                .iter()
                .filter_map(|r| r.curve.get(k).copied())
                .collect();
            (mean(vals.iter().copied()), vals.len())
        })
        .collect();
    let sustained = binary.then(|| {
        let hits: Vec<f64> = results
            .iter()
            .filter_map(|r| r.sustained_at.map(|t| t as f64))
            .collect();
        (
            hits.len(),
            (!hits.is_empty()).then(|| mean(hits.iter().copied())),
        )
    });
    Ok(Summary {
        label: label.to_owned(),
        runs: results.len(),
        diverged,
        mean_mse: mean(results.iter().map(|r| r.mse)),
        min_mse: results.iter().map(|r| r.mse).fold(f64::INFINITY, f64::min),
        max_mse: results
            .iter()
            .map(|r| r.mse)
            .fold(f64::NEG_INFINITY, f64::max),
        mean_seconds: mean(results.iter().map(|r| r.wall_seconds)),
        sustained,
        mean_projections: mean(results.iter().map(|r| r.projections as f64)),
        curve,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    label: &'a str,
    seeds: &'a [u64],
    diverged_seeds: Vec<u64>,
    files: Vec<String>,
    notes: Vec<String>,
    config: &'a ExperimentConfig,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| to_io(path, e))
}

fn to_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Writes the result tables and a manifest into `dir`. All files except
/// `timing.csv` depend only on the config and seeds.
pub fn emit_outputs(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    summary: &Summary,
    results: &[RunResult],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut notes = Vec::new();
    let write = |name: &str,
                 rows: &mut dyn FnMut(&mut csv::Writer<fs::File>) -> csv::Result<()>|
     -> Result<PathBuf> {
        let path = dir.join(name);
        let mut w = csv_writer(&path)?;
        rows(&mut w).map_err(|e| to_io(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };

    written.push(write("summary.csv", &mut |w| {
        w.write_record([
            "label",
            "runs",
            "diverged",
            "mean_mse",
            "min_mse",
            "max_mse",
            "sustained_runs",
            "mean_sustained_at",
            "mean_projections",
        ])?;
        let (hits, at) = summary
            .sustained
            .map_or((String::new(), String::new()), |(n, t)| {
                (n.to_string(), opt(t))
            });
        w.write_record([
            summary.label.clone(),
            summary.runs.to_string(),
            summary.diverged.len().to_string(),
            summary.mean_mse.to_string(),
            summary.min_mse.to_string(),
            summary.max_mse.to_string(),
            hits,
            at,
            summary.mean_projections.to_string(),
        ])
    })?);

    written.push(write("runs.csv", &mut |w| {
        w.write_record([
            "seed",
            "steps",
            "mse",
            "sustained_at",
            "projections",
            "clamped",
        ])?;
        for r in results {
            w.write_record([
                r.seed.to_string(),
                r.steps.to_string(),
                r.mse.to_string(),
                r.sustained_at.map_or(String::new(), |t| t.to_string()),
                r.projections.to_string(),
                r.clamped.to_string(),
            ])?;
        }
        for (seed, t) in &summary.diverged {
            w.write_record([
                seed.to_string(),
                t.to_string(),
                "diverged".into(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        Ok(())
    })?);

    written.push(write("curves.csv", &mut |w| {
        w.write_record(["t", "label", "mean_cumulative_loss", "runs"])?;
        for (k, (v, n)) in summary.curve.iter().enumerate() {
            w.write_record([
                (k + 1).to_string(),
                summary.label.clone(),
                v.to_string(),
                n.to_string(),
            ])?;
        }
        Ok(())
    })?);

    if results.iter().any(|r| r.regret.is_some()) {
        written.push(write("regret.csv", &mut |w| {
            w.write_record([
                "seed",
                "t",
                "grad_sq_theta",
                "grad_sq_mu",
                "regret",
                "normalized_regret",
                "beta_exp",
            ])?;
            for r in results {
                for row in r.regret.iter().flat_map(|l| l.rows()) {
                    w.write_record([
                        r.seed.to_string(),
                        row.t.to_string(),
                        row.grad_sq_theta.to_string(),
                        row.grad_sq_mu.to_string(),
                        row.regret.to_string(),
                        row.normalized_regret.to_string(),
                        opt(row.beta_exp),
                    ])?;
                }
            }
            Ok(())
        })?);
    } else {
        notes.push("regret.csv omitted: regret instrumentation disabled".into());
    }

    if results.iter().any(|r| r.smoothness.is_some()) {
        written.push(write("smoothness.csv", &mut |w| {
            w.write_record(["seed", "t", "beta_theta", "beta_mu", "beta"])?;
            for r in results {
                for (t, e) in r.smoothness.iter().flat_map(|s| &s.entries) {
                    w.write_record([
                        r.seed.to_string(),
                        t.to_string(),
                        opt(e.beta_theta),
                        opt(e.beta_mu),
                        opt(e.beta()),
                    ])?;
                }
            }
            Ok(())
        })?);
    } else {
        notes.push("smoothness.csv omitted: smoothness instrumentation disabled".into());
    }

    written.push(write("timing.csv", &mut |w| {
        w.write_record(["seed", "wall_seconds"])?;
        for r in results {
            w.write_record([r.seed.to_string(), r.wall_seconds.to_string()])?;
        }
        Ok(())
    })?);

    let manifest_path = dir.join("manifest.toml");
    let mut files: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    files.push("manifest.toml".into());
    let manifest = Manifest {
        schema_version: super::config::SCHEMA_VERSION,
        label: &summary.label,
        seeds,
        diverged_seeds: summary.diverged.iter().map(|(s, _)| *s).collect(),
        files,
        notes,
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    written.push(manifest_path);
    Ok(written)
}
