//! Windowed replay gradients against central finite differences, for every
//! architecture and loss.
//!
//! cargo run --release --example gradient_check [instances]

use online_rnn::harness::ModelKind;
use online_rnn::tasks::LossKind;
use online_rnn::verify::{gradient_sweep, GRADIENT_TOLERANCE};

fn main() -> online_rnn::Result<()> {
    let instances = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(20);
    println!("model  loss           w   worst relative error");
    let mut seed = 0;
    for model in [ModelKind::Srnn, ModelKind::Lstm, ModelKind::Cwrnn] {
        for kind in [LossKind::Squared, LossKind::CrossEntropy] {
            for w in [1, 5, 20] {
                seed += 1;
                let worst = gradient_sweep(model, kind, w, instances, seed)?;
                let mark = if worst <= GRADIENT_TOLERANCE {
                    ""
                } else {
                    "  <-- over tolerance"
                };
                println!(
                    "{:<6} {:<14} {w:>2}   {worst:.2e}{mark}",
                    format!("{model:?}"),
                    format!("{kind:?}")
                );
            }
        }
    }
    Ok(())
}
