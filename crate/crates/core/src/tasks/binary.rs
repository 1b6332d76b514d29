use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{data_rng, StreamSample};
use crate::error::{Error, Result};

/// Default run of consecutive correct symbols that counts as sustained.
pub const SUSTAIN_HORIZON: usize = 1000;
/// Default number of steps before giving up.
pub const SUSTAIN_CUTOFF: usize = 50_000;

/// How input bits are presented to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitEncoding {
    /// 0 → -1, 1 → +1. Zero-mean inputs keep the learned weights small.
    #[default]
    Signed,
    /// Bits as 0 and 1.
    Unit,
}

impl BitEncoding {
    pub fn encode(self, bit: bool) -> f64 {
        match (self, bit) {
            (_, true) => 1.0,
            (Self::Signed, false) => -1.0,
            (Self::Unit, false) => 0.0,
        }
    }
}

/// Online generator for the sum of `n` random bit streams, least significant
/// bit first. The carry is the only temporal dependency.
#[derive(Debug, Clone)]
pub struct BinaryAddState {
    n: usize,
    carry: usize,
    t: usize,
    encoding: BitEncoding,
    rng: ChaCha8Rng,
}

impl BinaryAddState {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::Config(format!(
                "binary addition supports 2 or 3 summands, got {n}"
            )));
        }
        Ok(Self {
            n,
            carry: 0,
            t: 0,
            encoding: BitEncoding::default(),
            rng: data_rng(seed),
        })
    }

    pub fn with_encoding(mut self, encoding: BitEncoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn carry(&self) -> usize {
        self.carry
    }

    /// Input width including the bias entry.
    pub fn input_size(&self) -> usize {
        self.n + 1
    }

    /// Draws the next `n` bits and emits the output bit of their sum plus the carry.
    pub fn next_sample(&mut self) -> StreamSample {
        let mut x = Vec::with_capacity(self.n + 1);
        let mut s = self.carry;
        for _ in 0..self.n {
            let bit = self.rng.random_bool(0.5);
            s += bit as usize;
            x.push(self.encoding.encode(bit));
        }
        x.push(1.0);
        self.carry = s / 2;
        self.t += 1;
        debug_assert!(self.carry < self.n);
        StreamSample {
            x: x.into(),
            d: (s % 2) as f64,
            t: self.t,
        }
    }
}

/// `steps` consecutive samples from the state.
pub fn binary_add_stream(state: &mut BinaryAddState, steps: usize) -> Vec<StreamSample> {
    (0..steps).map(|_| state.next_sample()).collect()
}

/// Tracks the first step that begins a run of `horizon` correct predictions.
#[derive(Debug, Clone)]
pub struct SustainTracker {
    horizon: usize,
    cutoff: usize,
    run_start: usize,
    run_len: usize,
    found: Option<usize>,
}

impl SustainTracker {
    pub fn new(horizon: usize, cutoff: usize) -> Self {
        Self {
            horizon: horizon.max(1),
            cutoff,
            run_start: 1,
            run_len: 0,
            found: None,
        }
    }

    /// Feeds step `t` (1-based, consecutive). Returns the answer once known.
    pub fn push(&mut self, t: usize, correct: bool) -> Option<usize> {
        if self.found.is_some() {
            return self.found;
        }
        if correct {
            if self.run_len == 0 {
                self.run_start = t;
            }
            self.run_len += 1;
            if self.run_len >= self.horizon && self.run_start <= self.cutoff {
                self.found = Some(self.run_start);
            }
        } else {
            self.run_len = 0;
        }
        self.found
    }

    pub fn result(&self) -> Option<usize> {
        self.found
    }

    /// No run can start at or before the cutoff any more.
    pub fn gave_up(&self, t: usize) -> bool {
        self.found.is_none()
            && t >= self.cutoff
            && (self.run_len == 0 || self.run_start > self.cutoff)
    }
}

/// The prediction counts as 1 when it exceeds 0.5.
pub fn decide(prediction: f64) -> f64 {
    if prediction > 0.5 {
        1.0
    } else {
        0.0
    }
}

/// First 1-based `t ≤ cutoff` such that steps `t..t+horizon-1` are all
/// predicted correctly, or `None`.
pub fn sustainable_prediction(
    predictions: &[f64],
    targets: &[f64],
    horizon: usize,
    cutoff: usize,
) -> Result<Option<usize>> {
    if predictions.len() != targets.len() {
        return Err(Error::contract(
            "prediction and target streams differ in length",
        ));
    }
    let mut tracker = SustainTracker::new(horizon, cutoff);
    for (i, (p, d)) in predictions.iter().zip(targets).enumerate() {
        if let Some(t) = tracker.push(i + 1, decide(*p) == *d) {
            return Ok(Some(t));
        }
    }
    Ok(None)
}
