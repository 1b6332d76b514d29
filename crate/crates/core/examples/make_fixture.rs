//! Writes a synthetic regression table that the CSV task can stream.
//!
//! cargo run --example make_fixture -- [out.csv] [steps] [features] [seed]

use std::fs::File;
use std::io::BufWriter;

use online_rnn::tasks::{synthetic_regression, write_records, SyntheticSpec};
use online_rnn::Error;

fn main() -> online_rnn::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().map_or("synthetic.csv", String::as_str);
    let parse = |i: usize, default: usize| -> online_rnn::Result<usize> {
        args.get(i).map_or(Ok(default), |a| {
            a.parse()
                .map_err(|_| Error::Config(format!("not a count: {a}")))
        })
    };
    let spec = SyntheticSpec {
        steps: parse(1, 2000)?,
        features: parse(2, 8)?,
        ..SyntheticSpec::default()
    };
    let seed = parse(3, 0)? as u64;
    let records = synthetic_regression(&spec, seed)?;
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    write_records(&records, BufWriter::new(file))?;
    println!(
        "wrote {} rows with {} features to {out}",
        records.len(),
        records.num_features()
    );
    Ok(())
}
