//! Online addition of random bit streams. Each step the network sees one bit
//! of every stream and must emit the matching bit of their sum, which needs
//! the carry held in its state.
//!
//! cargo run --release --example binary_addition -- [streams] [seeds]

use online_rnn::harness::{prepare_task, run_prepared, BaselineParams, ModelKind, OptimizerConfig};
use online_rnn::verify::binary_addition_config;

fn main() -> online_rnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);
    let cutoff = if n <= 2 { 10_000 } else { 50_000 };

    let wogd = binary_addition_config(n, cutoff);
    let adam = {
        let mut cfg = wogd.clone();
        cfg.model = ModelKind::Lstm;
        cfg.optimizer = OptimizerConfig::Adam(BaselineParams {
            lr: 0.01,
            ..BaselineParams::default()
        });
        cfg
    };

    for cfg in [&wogd, &adam] {
        let task = prepare_task(cfg)?;
        print!("{:<16}", cfg.label());
        for seed in 1..=seeds {
            let run = run_prepared(cfg, &task, seed)?;
            match run.sustained_at {
                Some(t) => print!("  seed {seed}: from step {t}"),
                None => print!("  seed {seed}: not within {cutoff}"),
            }
        }
        println!();
    }
    Ok(())
}
