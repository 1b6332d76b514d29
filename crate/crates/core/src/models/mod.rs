//! Forward passes and hand-written adjoints for the three recurrent
//! architectures: the Elman network (SRNN), a peephole-free LSTM and the
//! clockwork RNN (CWRNN). All of them share a linear readout `ϑᵀh`, optionally
//! followed by a sigmoid.

mod cwrnn;
mod lstm;
mod srnn;

pub use cwrnn::{cwrnn_step, CwrnnParams};
pub use lstm::{lstm_step, LstmGate, LstmParams};
pub use srnn::{srnn_predict, srnn_step, SrnnParams};

use std::fmt::Debug;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat, Vec64};

/// Recurrent state after `t` steps. `c` holds the LSTM cell state and is
/// `None` for the other architectures.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Vec64,
    pub c: Option<Vec64>,
    pub t: usize,
}

impl HiddenState {
    pub fn zeros(n_h: usize, with_cell: bool) -> Self {
        Self {
            h: Vec64::zeros(n_h),
            c: with_cell.then(|| Vec64::zeros(n_h)),
            t: 0,
        }
    }
}

/// Intermediate activations a backward pass needs beyond the two hidden states.
#[derive(Debug, Clone, PartialEq)]
pub enum GateCache {
    None,
    Lstm {
        input: Vec<f64>,
        forget: Vec<f64>,
        output: Vec<f64>,
        candidate: Vec<f64>,
        tanh_c: Vec<f64>,
    },
    Cwrnn {
        active: Vec<bool>,
    },
}

/// One observed step of the online stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub x: Vec64,
    pub d: f64,
    pub h_prev: HiddenState,
    pub h_new: HiddenState,
    pub cache: GateCache,
    pub prediction: f64,
}

/// Access to a parameter set as a fixed sequence of flat blocks. Gradients use
/// the same block order as the parameters they differentiate.
pub trait Params {
    fn blocks(&self) -> Vec<&[f64]>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    fn squared_norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum()
    }
}

/// A recurrent architecture with a linear readout.
pub trait Recurrent: Params + Clone + Debug + Send + Sync {
    type Grad: Params + Clone + Debug + Send;

    fn hidden_size(&self) -> usize;
    fn input_size(&self) -> usize;
    fn readout(&self) -> &Vec64;
    fn readout_mut(&mut self) -> &mut Vec64;
    fn initial_state(&self) -> HiddenState;
    fn zero_grad(&self) -> Self::Grad;
    fn readout_grad_mut(grad: &mut Self::Grad) -> &mut [f64];

    /// Advances `prev` by one input; the returned state has timestep `prev.t + 1`.
    fn step(&self, prev: &HiddenState, x: &[f64]) -> Result<(HiddenState, GateCache)>;

    /// Accumulates parameter gradients for one step into `grad` and overwrites
    /// `dh_prev` / `dc_prev` with the adjoints flowing into `prev`. `dc` and
    /// `dc_prev` are empty for architectures without a cell state.
    #[allow(clippy::too_many_arguments)]
    fn backward_step(
        &self,
        x: &[f64],
        prev: &HiddenState,
        next: &HiddenState,
        cache: &GateCache,
        dh: &[f64],
        dc: &[f64],
        grad: &mut Self::Grad,
        dh_prev: &mut [f64],
        dc_prev: &mut [f64],
    );

    fn has_cell(&self) -> bool {
        false
    }

    /// `ϑᵀh`.
    fn linear_output(&self, s: &HiddenState) -> f64 {
        dot(self.readout(), &s.h)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `σ(ϑᵀh)`, the readout used with the cross-entropy loss.
pub fn predict_sigmoid<M: Recurrent>(p: &M, s: &HiddenState) -> f64 {
    sigmoid(p.linear_output(s))
}

pub(crate) fn check_step_dims(n_h: usize, n_x: usize, s: &HiddenState, x: &[f64]) -> Result<()> {
    if s.h.len() != n_h {
        return Err(Error::contract(format!(
            "hidden state has {} entries, expected {n_h}",
            s.h.len()
        )));
    }
    if x.len() != n_x {
        return Err(Error::contract(format!(
            "input has {} entries, expected {n_x}",
            x.len()
        )));
    }
    Ok(())
}

pub(crate) fn gaussian_mat<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Mat {
    let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
    Mat::from_fn(rows, cols, |_, _| normal.sample(rng))
}

pub(crate) fn gaussian_vec<R: Rng>(len: usize, std: f64, rng: &mut R) -> Vec64 {
    let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
    Vec64::from_fn(len, |_| normal.sample(rng))
}
