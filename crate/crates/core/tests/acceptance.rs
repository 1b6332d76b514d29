//! End-to-end acceptance criteria. Each check prints one status line; the
//! regression-table check is skipped when the data directory is absent.

use std::process::ExitCode;

use online_rnn::verify::{run_all, Status, VerifyOptions};

fn main() -> ExitCode {
    let reports = run_all(&VerifyOptions::default());
    for r in &reports {
        println!("{r}");
    }
    let failed: Vec<_> = reports
        .iter()
        .filter(|r| r.status == Status::Fail)
        .map(|r| r.id)
        .collect();
    if reports.len() != 9 || !failed.is_empty() {
        eprintln!("acceptance failed: criteria {failed:?}");
        return ExitCode::FAILURE;
    }
    println!("acceptance: {} checks, none failed", reports.len());
    ExitCode::SUCCESS
}
