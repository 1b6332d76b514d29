//! Streams, scaling and losses for the online tasks.
//!
//! Randomness is split into named streams of one ChaCha8 generator per seed:
//! stream 0 initializes weights, stream 1 generates data. The same seed
//! therefore gives the same data regardless of the model being trained.

mod binary;
pub(crate) mod data;
mod loss;
mod synthetic;

pub use binary::{
    binary_add_stream, decide, sustainable_prediction, BinaryAddState, BitEncoding, SustainTracker,
    SUSTAIN_CUTOFF, SUSTAIN_HORIZON,
};
pub use data::{fit_scaling, load_csv_stream, RawRecords, ScalingSpec, StreamSample};
pub use loss::{loss_and_residual, LossKind, LossValue, CE_CLAMP};
pub use synthetic::{synthetic_regression, write_records, SyntheticSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const INIT_STREAM: u64 = 0;
pub const DATA_STREAM: u64 = 1;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn init_rng(seed: u64) -> ChaCha8Rng {
    seeded_rng(seed, INIT_STREAM)
}

pub fn data_rng(seed: u64) -> ChaCha8Rng {
    seeded_rng(seed, DATA_STREAM)
}
