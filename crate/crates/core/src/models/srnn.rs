use rand::Rng;

use super::{
    check_step_dims, gaussian_mat, gaussian_vec, GateCache, HiddenState, Params, Recurrent,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat, Vec64};
use crate::wingrad::GradientTriple;

/// Elman network `h_t = tanh(W h_{t-1} + U x_t)`, `d̂_t = ϑᵀh_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SrnnParams {
    /// Hidden-to-hidden weights, `n_h × n_h`.
    pub w: Mat,
    /// Input weights, `n_h × n_x`.
    pub u: Mat,
    pub theta_out: Vec64,
}

impl SrnnParams {
    pub fn new(w: Mat, u: Mat, theta_out: Vec64) -> Result<Self> {
        let n_h = w.rows();
        if w.cols() != n_h || u.rows() != n_h || theta_out.len() != n_h {
            return Err(Error::contract(format!(
                "inconsistent SRNN shapes: W {}x{}, U {}x{}, ϑ {}",
                w.rows(),
                w.cols(),
                u.rows(),
                u.cols(),
                theta_out.len()
            )));
        }
        if !w.is_finite() || !u.is_finite() || !theta_out.is_finite() {
            return Err(Error::contract("non-finite SRNN parameter"));
        }
        Ok(Self { w, u, theta_out })
    }

    pub fn zeros(n_h: usize, n_x: usize) -> Self {
        Self {
            w: Mat::zeros(n_h, n_h),
            u: Mat::zeros(n_h, n_x),
            theta_out: Vec64::zeros(n_h),
        }
    }

    /// Every entry drawn from `N(0, std²)`.
    pub fn gaussian<R: Rng>(n_h: usize, n_x: usize, std: f64, rng: &mut R) -> Self {
        let w = gaussian_mat(n_h, n_h, std, rng);
        let u = gaussian_mat(n_h, n_x, std, rng);
        let theta_out = gaussian_vec(n_h, std, rng);
        Self { w, u, theta_out }
    }
}

/// `tanh(W h + U x)`; the timestep advances by one.
pub fn srnn_step(p: &SrnnParams, s: &HiddenState, x: &[f64]) -> Result<HiddenState> {
    check_step_dims(p.w.rows(), p.u.cols(), s, x)?;
    let n_h = p.w.rows();
    let mut h = Vec64::zeros(n_h);
    for (i, hi) in h.iter_mut().enumerate() {
        *hi = (dot(p.w.row(i), &s.h) + dot(p.u.row(i), x)).tanh();
    }
    Ok(HiddenState {
        h,
        c: None,
        t: s.t + 1,
    })
}

/// `ϑᵀh`.
pub fn srnn_predict(p: &SrnnParams, s: &HiddenState) -> f64 {
    dot(&p.theta_out, &s.h)
}

impl Params for SrnnParams {
    fn blocks(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice(), self.u.as_slice(), &self.theta_out]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w.as_mut_slice(),
            self.u.as_mut_slice(),
            &mut self.theta_out,
        ]
    }
}

impl Recurrent for SrnnParams {
    type Grad = GradientTriple;

    fn hidden_size(&self) -> usize {
        self.w.rows()
    }

    fn input_size(&self) -> usize {
        self.u.cols()
    }

    fn readout(&self) -> &Vec64 {
        &self.theta_out
    }

    fn readout_mut(&mut self) -> &mut Vec64 {
        &mut self.theta_out
    }

    fn initial_state(&self) -> HiddenState {
        HiddenState::zeros(self.hidden_size(), false)
    }

    fn zero_grad(&self) -> GradientTriple {
        GradientTriple::zeros(self.hidden_size(), self.input_size())
    }

    fn readout_grad_mut(grad: &mut GradientTriple) -> &mut [f64] {
        &mut grad.g_out
    }

    fn step(&self, prev: &HiddenState, x: &[f64]) -> Result<(HiddenState, GateCache)> {
        Ok((srnn_step(self, prev, x)?, GateCache::None))
    }

    fn backward_step(
        &self,
        x: &[f64],
        prev: &HiddenState,
        next: &HiddenState,
        _cache: &GateCache,
        dh: &[f64],
        _dc: &[f64],
        grad: &mut GradientTriple,
        dh_prev: &mut [f64],
        _dc_prev: &mut [f64],
    ) {
        let da: Vec<f64> = dh
            .iter()
            .zip(next.h.iter())
            .map(|(g, h)| g * (1.0 - h * h))
            .collect();
        grad.g_w.add_outer(&da, &prev.h, 1.0);
        grad.g_u.add_outer(&da, x, 1.0);
        dh_prev.iter_mut().for_each(|v| *v = 0.0);
        self.w.add_transpose_matvec(&da, dh_prev);
    }
}
