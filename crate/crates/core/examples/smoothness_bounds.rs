//! Analytic smoothness constants next to finite-difference estimates taken
//! along a real training run.
//!
//! cargo run --release --example smoothness_bounds

use online_rnn::analysis::smoothness_bounds;
use online_rnn::harness::{run_single, InstrumentConfig, TaskConfig};
use online_rnn::optim::WogdConfig;
use online_rnn::verify::wogd_experiment;

fn main() -> online_rnn::Result<()> {
    println!("analytic constants, n_x = 9");
    println!(" n_h  lambda     beta_theta        beta_mu");
    for n_h in [2, 10, 30] {
        for lambda in [0.5, 0.9, 0.95] {
            let b = smoothness_bounds(n_h, 9, lambda)?;
            println!(
                "{n_h:>4}  {lambda:>6}  {:>13.1}  {:>13.1}",
                b.beta_theta, b.beta_mu
            );
        }
    }

    let task = TaskConfig::Synthetic {
        features: 8,
        steps: 1500,
        data_seed: 0,
    };
    let mut cfg = wogd_experiment(task, 10, WogdConfig::default());
    cfg.instrument = InstrumentConfig {
        regret: false,
        smoothness: true,
        every: 10,
    };
    let run = run_single(&cfg, 1)?;
    let trace = run.smoothness.expect("smoothness was requested");
    let b = smoothness_bounds(10, 9, 0.95)?;
    println!("\nalong a 1500-step run with n_h = 10, lambda = 0.95");
    println!(
        "theta: max estimate {:.3} vs bound {:.0}",
        trace.max_theta().unwrap_or(f64::NAN),
        b.beta_theta
    );
    println!(
        "mu:    max estimate {:.3} vs bound {:.0}",
        trace.max_mu().unwrap_or(f64::NAN),
        b.beta_mu
    );
    println!("steps without movement: {}", trace.skipped());
    Ok(())
}
