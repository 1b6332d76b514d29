use rand::Rng;

use super::{
    check_step_dims, gaussian_mat, gaussian_vec, sigmoid, GateCache, HiddenState, Params, Recurrent,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat, Vec64};

/// Affine map feeding one gate: `w h + u x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGate {
    pub w: Mat,
    pub u: Mat,
    pub b: Vec64,
}

impl LstmGate {
    fn zeros(n_h: usize, n_x: usize) -> Self {
        Self {
            w: Mat::zeros(n_h, n_h),
            u: Mat::zeros(n_h, n_x),
            b: Vec64::zeros(n_h),
        }
    }

    fn gaussian<R: Rng>(n_h: usize, n_x: usize, std: f64, rng: &mut R) -> Self {
        Self {
            w: gaussian_mat(n_h, n_h, std, rng),
            u: gaussian_mat(n_h, n_x, std, rng),
            b: gaussian_vec(n_h, std, rng),
        }
    }

    fn pre_activation(&self, i: usize, h: &[f64], x: &[f64]) -> f64 {
        dot(self.w.row(i), h) + dot(self.u.row(i), x) + self.b[i]
    }

    fn accumulate(&mut self, da: &[f64], h: &[f64], x: &[f64]) {
        self.w.add_outer(da, h, 1.0);
        self.u.add_outer(da, x, 1.0);
        for (b, d) in self.b.iter_mut().zip(da) {
            *b += d;
        }
    }
}

/// LSTM without peephole connections:
///
/// ```text
/// i, f, o = σ(affine)      g = tanh(affine)
/// c' = f ⊙ c + i ⊙ g       h' = o ⊙ tanh(c')
/// ```
///
/// The gradient of an `LstmParams` is itself an `LstmParams`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input: LstmGate,
    pub forget: LstmGate,
    pub output: LstmGate,
    pub candidate: LstmGate,
    pub theta_out: Vec64,
}

impl LstmParams {
    pub fn zeros(n_h: usize, n_x: usize) -> Self {
        Self {
            input: LstmGate::zeros(n_h, n_x),
            forget: LstmGate::zeros(n_h, n_x),
            output: LstmGate::zeros(n_h, n_x),
            candidate: LstmGate::zeros(n_h, n_x),
            theta_out: Vec64::zeros(n_h),
        }
    }

    /// Weights and biases alike drawn from `N(0, std²)`.
    pub fn gaussian<R: Rng>(n_h: usize, n_x: usize, std: f64, rng: &mut R) -> Self {
        Self {
            input: LstmGate::gaussian(n_h, n_x, std, rng),
            forget: LstmGate::gaussian(n_h, n_x, std, rng),
            output: LstmGate::gaussian(n_h, n_x, std, rng),
            candidate: LstmGate::gaussian(n_h, n_x, std, rng),
            theta_out: gaussian_vec(n_h, std, rng),
        }
    }

    fn gates(&self) -> [&LstmGate; 4] {
        [&self.input, &self.forget, &self.output, &self.candidate]
    }

    fn gates_mut(&mut self) -> [&mut LstmGate; 4] {
        [
            &mut self.input,
            &mut self.forget,
            &mut self.output,
            &mut self.candidate,
        ]
    }
}

/// One LSTM step; the gate activations are returned for the backward pass.
pub fn lstm_step(p: &LstmParams, s: &HiddenState, x: &[f64]) -> Result<(HiddenState, GateCache)> {
    let n_h = p.theta_out.len();
    check_step_dims(n_h, p.input.u.cols(), s, x)?;
    let c_prev =
        s.c.as_ref()
            .ok_or_else(|| Error::contract("LSTM state without a cell vector"))?;
    let gate = |g: &LstmGate, act: fn(f64) -> f64| -> Vec<f64> {
        (0..n_h)
            .map(|i| act(g.pre_activation(i, &s.h, x)))
            .collect()
    };
    let input = gate(&p.input, sigmoid);
    let forget = gate(&p.forget, sigmoid);
    let output = gate(&p.output, sigmoid);
    let candidate = gate(&p.candidate, f64::tanh);
    let c: Vec<f64> = (0..n_h)
        .map(|i| forget[i] * c_prev[i] + input[i] * candidate[i])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = output.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    Ok((
        HiddenState {
            h: h.into(),
            c: Some(c.into()),
            t: s.t + 1,
        },
        GateCache::Lstm {
            input,
            forget,
            output,
            candidate,
            tanh_c,
        },
    ))
}

impl Params for LstmParams {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(13);
        for g in self.gates() {
            out.extend([g.w.as_slice(), g.u.as_slice(), &g.b[..]]);
        }
        out.push(&self.theta_out[..]);
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(13);
        let LstmParams {
            input,
            forget,
            output,
            candidate,
            theta_out,
        } = self;
        for g in [input, forget, output, candidate] {
            out.push(g.w.as_mut_slice());
            out.push(g.u.as_mut_slice());
            out.push(&mut g.b[..]);
        }
        out.push(&mut theta_out[..]);
        out
    }
}

impl Recurrent for LstmParams {
    type Grad = LstmParams;

    fn hidden_size(&self) -> usize {
        self.theta_out.len()
    }

    fn input_size(&self) -> usize {
        self.input.u.cols()
    }

    fn readout(&self) -> &Vec64 {
        &self.theta_out
    }

    fn readout_mut(&mut self) -> &mut Vec64 {
        &mut self.theta_out
    }

    fn initial_state(&self) -> HiddenState {
        HiddenState::zeros(self.hidden_size(), true)
    }

    fn zero_grad(&self) -> LstmParams {
        LstmParams::zeros(self.hidden_size(), self.input_size())
    }

    fn readout_grad_mut(grad: &mut LstmParams) -> &mut [f64] {
        &mut grad.theta_out
    }

    fn has_cell(&self) -> bool {
        true
    }

    fn step(&self, prev: &HiddenState, x: &[f64]) -> Result<(HiddenState, GateCache)> {
        lstm_step(self, prev, x)
    }

    fn backward_step(
        &self,
        x: &[f64],
        prev: &HiddenState,
        _next: &HiddenState,
        cache: &GateCache,
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmParams,
        dh_prev: &mut [f64],
        dc_prev: &mut [f64],
    ) {
        let GateCache::Lstm {
            input,
            forget,
            output,
            candidate,
            tanh_c,
        } = cache
        else {
            panic!("LSTM backward step needs an LSTM gate cache");
        };
        let c_prev = prev.c.as_ref().expect("LSTM state without a cell vector");
        let n_h = dh.len();
        let mut da = [
            vec![0.0; n_h],
            vec![0.0; n_h],
            vec![0.0; n_h],
            vec![0.0; n_h],
        ];
        for k in 0..n_h {
            let dc_total = dc[k] + dh[k] * output[k] * (1.0 - tanh_c[k] * tanh_c[k]);
            let d_out = dh[k] * tanh_c[k];
            da[0][k] = dc_total * candidate[k] * input[k] * (1.0 - input[k]);
            da[1][k] = dc_total * c_prev[k] * forget[k] * (1.0 - forget[k]);
            da[2][k] = d_out * output[k] * (1.0 - output[k]);
            da[3][k] = dc_total * input[k] * (1.0 - candidate[k] * candidate[k]);
            dc_prev[k] = dc_total * forget[k];
        }
        dh_prev.iter_mut().for_each(|v| *v = 0.0);
        for ((g, gg), d) in self.gates().into_iter().zip(grad.gates_mut()).zip(&da) {
            gg.accumulate(d, &prev.h, x);
            g.w.add_transpose_matvec(d, dh_prev);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params() {
        let p = LstmParams::zeros(3, 2);
        let (s, cache) = lstm_step(&p, &p.initial_state(), &[0.4, -0.9]).unwrap();
        assert_eq!(&*s.h, &[0.0; 3]);
        assert_eq!(&**s.c.as_ref().unwrap(), &[0.0; 3]);
        let GateCache::Lstm {
            input,
            forget,
            output,
            ..
        } = cache
        else {
            panic!()
        };
        assert!(input
            .iter()
            .chain(&forget)
            .chain(&output)
            .all(|&g| g == 0.5));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut p = LstmParams::zeros(2, 1);
        p.forget.b = vec![50.0, 50.0].into();
        let s = HiddenState {
            h: Vec64::zeros(2),
            c: Some(vec![1.0, 1.0].into()),
            t: 0,
        };
        let (next, _) = lstm_step(&p, &s, &[0.0]).unwrap();
        for c in next.c.unwrap().iter() {
            assert!((c - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = LstmParams::gaussian(3, 2, 0.7, &mut rng);
        let s = HiddenState {
            h: vec![0.1, -0.4, 0.6].into(),
            c: Some(vec![0.3, -1.2, 0.05].into()),
            t: 2,
        };
        let x = [0.8, -0.3];
        let (next, _) = lstm_step(&p, &s, &x).unwrap();
        let affine = |g: &LstmGate, i: usize| {
            let mut a = g.b[i];
            for j in 0..3 {
                a += g.w[(i, j)] * s.h[j];
            }
            for j in 0..2 {
                a += g.u[(i, j)] * x[j];
            }
            a
        };
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        for i in 0..3 {
            let c = sig(affine(&p.forget, i)) * s.c.as_ref().unwrap()[i]
                + sig(affine(&p.input, i)) * affine(&p.candidate, i).tanh();
            let h = sig(affine(&p.output, i)) * c.tanh();
            assert!((next.c.as_ref().unwrap()[i] - c).abs() < 1e-14);
            assert!((next.h[i] - h).abs() < 1e-14);
        }
    }

    #[test]
    fn block_layout_is_consistent() {
        let p = LstmParams::zeros(3, 2);
        assert_eq!(p.num_params(), 4 * (9 + 6 + 3) + 3);
        let mut q = p.clone();
        assert_eq!(q.blocks_mut().len(), p.blocks().len());
    }
}
