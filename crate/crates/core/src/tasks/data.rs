use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Vec64;

/// One step of an online stream: scaled inputs with the bias appended, and the target.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSample {
    pub x: Vec64,
    pub d: f64,
    /// 1-based position in the stream.
    pub t: usize,
}

/// Unscaled rows of a regression file, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecords {
    pub header: Option<Vec<String>>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl RawRecords {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}

/// Reads a rectangular numeric table. Cells are comma-separated; files with
/// no comma on the first line are split on whitespace instead. A first line
/// with any non-numeric cell is taken as a header. `target_column` defaults
/// to the last column.
pub fn load_csv_stream(path: &Path, target_column: Option<usize>) -> Result<RawRecords> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, path, target_column)
}

pub(crate) fn parse_table(
    text: &str,
    path: &Path,
    target_column: Option<usize>,
) -> Result<RawRecords> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let comma = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.contains(','));

    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    if comma {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.iter().all(str::is_empty) {
                continue;
            }
            rows.push((line, rec.iter().map(str::to_owned).collect()));
        }
    } else {
        for (i, l) in text.lines().enumerate() {
            if !l.trim().is_empty() {
                rows.push((i + 1, l.split_whitespace().map(str::to_owned).collect()));
            }
        }
    }

    let mut iter = rows.into_iter().peekable();
    let header = match iter.peek() {
        Some((_, cells)) if cells.iter().any(|c| c.parse::<f64>().is_err()) => {
            Some(iter.next().unwrap().1)
        }
        _ => None,
    };
    let mut width = header.as_ref().map(Vec::len);
    let mut table = Vec::new();
    for (line, cells) in iter {
        let expected = *width.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(parse_err(
                line,
                format!("expected {expected} columns, found {}", cells.len()),
            ));
        }
        let mut values = Vec::with_capacity(cells.len());
        for c in &cells {
            let v: f64 = c
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric cell {c:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite cell {c:?}")));
            }
            values.push(v);
        }
        table.push(values);
    }
    let width = width.unwrap_or(0);
    if width < 2 {
        return Err(parse_err(
            1,
            "need at least one feature column and one target column".into(),
        ));
    }
    let target = target_column.unwrap_or(width - 1);
    if target >= width {
        return Err(Error::Config(format!(
            "target column {target} out of range for {width} columns"
        )));
    }
    let mut features = Vec::with_capacity(table.len());
    let mut targets = Vec::with_capacity(table.len());
    for mut row in table {
        targets.push(row.remove(target));
        features.push(row);
    }
    Ok(RawRecords {
        header,
        features,
        targets,
    })
}

/// Affine min-max maps fitted over a whole file: features to `[-1, 1]`,
/// target to `[-target_bound, target_bound]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSpec {
    pub feature_ranges: Vec<(f64, f64)>,
    pub target_range: (f64, f64),
    pub target_bound: f64,
    /// Columns with a single value; they map to 0.
    pub constant_features: Vec<usize>,
    pub constant_target: bool,
}

fn to_unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

fn from_unit(u: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + (u + 1.0) * (hi - lo) / 2.0
}

/// Fits the maps; the target bound is `√n_h`.
pub fn fit_scaling(records: &RawRecords, n_h: usize) -> Result<ScalingSpec> {
    if records.len() < 2 {
        return Err(Error::contract("scaling needs at least two records"));
    }
    let range = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    };
    let feature_ranges: Vec<(f64, f64)> = (0..records.num_features())
        .map(|j| range(&mut records.features.iter().map(|r| r[j])))
        .collect();
    let target_range = range(&mut records.targets.iter().copied());
    let constant_features = feature_ranges
        .iter()
        .enumerate()
        .filter(|(_, (lo, hi))| lo >= hi)
        .map(|(j, _)| j)
        .collect();
    Ok(ScalingSpec {
        feature_ranges,
        target_range,
        target_bound: (n_h as f64).sqrt(),
        constant_features,
        constant_target: target_range.0 >= target_range.1,
    })
}

impl ScalingSpec {
    pub fn scale_features(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.feature_ranges)
            .map(|(v, r)| to_unit(*v, *r))
            .collect()
    }

    pub fn scale_target(&self, d: f64) -> f64 {
        self.target_bound * to_unit(d, self.target_range)
    }

    pub fn unscale_target(&self, d: f64) -> f64 {
        from_unit(d / self.target_bound, self.target_range)
    }

    pub fn unscale_feature(&self, j: usize, v: f64) -> f64 {
        from_unit(v, self.feature_ranges[j])
    }

    /// Scaled stream with a constant 1.0 appended to every input.
    pub fn apply(&self, records: &RawRecords) -> Vec<StreamSample> {
        records
            .features
            .iter()
            .zip(&records.targets)
            .enumerate()
            .map(|(i, (row, d))| {
                let mut x = self.scale_features(row);
                x.push(1.0);
                StreamSample {
                    x: x.into(),
                    d: self.scale_target(*d),
                    t: i + 1,
                }
            })
            .collect()
    }
}
