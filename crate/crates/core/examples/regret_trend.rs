//! Local regret of the windowed optimizer for several window sizes. Larger
//! windows smooth the loss more and the normalized regret falls faster.
//!
//! cargo run --release --example regret_trend -- [out_dir]

use std::path::PathBuf;

use online_rnn::analysis::quarter_means;
use online_rnn::harness::{run_single, InstrumentConfig, TaskConfig};
use online_rnn::optim::WogdConfig;
use online_rnn::verify::wogd_experiment;

fn main() -> online_rnn::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir).map_err(|e| online_rnn::Error::io(dir, e))?;
    }
    let task = TaskConfig::Synthetic {
        features: 8,
        steps: 2000,
        data_seed: 0,
    };
    println!("   w   first quarter   last quarter   final R/T      bound");
    for w in [50, 100, 200] {
        let wogd = WogdConfig {
            w,
            alpha: 0.0,
            ..WogdConfig::default()
        };
        let mut cfg = wogd_experiment(task.clone(), 10, wogd);
        cfg.instrument = InstrumentConfig {
            regret: true,
            ..InstrumentConfig::default()
        };
        let run = run_single(&cfg, 1)?;
        let ledger = run.regret.expect("regret was requested");
        let series = ledger.normalized();
        let (first, last) = quarter_means(&series).unwrap_or((f64::NAN, f64::NAN));
        println!(
            "{w:>4}   {first:>13.4}   {last:>12.4}   {:>9.4}   {:>8.0}",
            series.last().copied().unwrap_or(f64::NAN),
            ledger.bound()
        );
        if let Some(dir) = &out {
            ledger.save(&dir.join(format!("regret_w{w}.csv")))?;
        }
    }
    Ok(())
}
