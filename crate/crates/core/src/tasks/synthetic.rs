use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{data_rng, RawRecords};
use crate::error::{Error, Result};
use crate::linalg::{clip_singular_values, Mat};

/// Regression stream with temporal structure: AR(1) features drive a random
/// contractive tanh network whose readout plus noise is the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub features: usize,
    pub teacher_hidden: usize,
    pub steps: usize,
    /// AR(1) coefficient of every feature.
    pub persistence: f64,
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            features: 8,
            teacher_hidden: 6,
            steps: 7000,
            persistence: 0.9,
            noise: 0.05,
        }
    }
}

pub fn synthetic_regression(spec: &SyntheticSpec, seed: u64) -> Result<RawRecords> {
    if spec.features == 0 || spec.teacher_hidden == 0 || spec.steps < 2 {
        return Err(Error::contract(
            "synthetic stream needs features, hidden units and at least two steps",
        ));
    }
    let mut rng = data_rng(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (n_f, n_h) = (spec.features, spec.teacher_hidden);
    let w = Mat::from_fn(n_h, n_h, |_, _| normal.sample(&mut rng));
    let w = clip_singular_values(&w, 0.8)?;
    let u = Mat::from_fn(n_h, n_f, |_, _| {
        normal.sample(&mut rng) / (n_f as f64).sqrt()
    });
    let readout: Vec<f64> = (0..n_h).map(|_| rng.random_range(-1.0..1.0)).collect();
    let innovation = (1.0 - spec.persistence * spec.persistence).max(0.0).sqrt();

    let mut x = vec![0.0; n_f];
    let mut h = vec![0.0; n_h];
    let mut features = Vec::with_capacity(spec.steps);
    let mut targets = Vec::with_capacity(spec.steps);
    for _ in 0..spec.steps {
        for v in &mut x {
            *v = spec.persistence * *v + innovation * normal.sample(&mut rng);
        }
        let (wh, ux) = (w.matvec(&h), u.matvec(&x));
        for (i, v) in h.iter_mut().enumerate() {
            *v = (wh[i] + ux[i]).tanh();
        }
        let y: f64 = readout.iter().zip(&h).map(|(a, b)| a * b).sum();
        features.push(x.clone());
        targets.push(y + spec.noise * normal.sample(&mut rng));
    }
    let mut header: Vec<String> = (1..=n_f).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    Ok(RawRecords {
        header: Some(header),
        features,
        targets,
    })
}

/// Writes records as a comma-separated table with a header.
pub fn write_records(records: &RawRecords, out: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Config(format!("writing table: {e}"));
    if let Some(h) = &records.header {
        wtr.write_record(h).map_err(csv_err)?;
    }
    for (row, d) in records.features.iter().zip(&records.targets) {
        wtr.write_record(row.iter().chain([d]).map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<table>", e))
}
