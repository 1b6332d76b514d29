use rand::Rng;

use super::{
    check_step_dims, gaussian_mat, gaussian_vec, GateCache, HiddenState, Params, Recurrent,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat, Vec64};
use crate::wingrad::GradientTriple;

/// Clockwork RNN. The hidden units are split into equal blocks, block `i`
/// ticking every `periods[i]` steps. A block only reads recurrent input from
/// blocks with an equal or longer period, so `W` is block upper-triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct CwrnnParams {
    pub w: Mat,
    pub u: Mat,
    pub theta_out: Vec64,
    periods: Vec<usize>,
    block_size: usize,
}

impl CwrnnParams {
    /// Entries of `w` outside the allowed connectivity are zeroed.
    pub fn new(mut w: Mat, u: Mat, theta_out: Vec64, periods: Vec<usize>) -> Result<Self> {
        let n_h = w.rows();
        if w.cols() != n_h || u.rows() != n_h || theta_out.len() != n_h {
            return Err(Error::contract("inconsistent CWRNN shapes"));
        }
        if periods.is_empty() || periods[0] == 0 || periods.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::contract(format!(
                "periods must be positive and strictly ascending: {periods:?}"
            )));
        }
        if !n_h.is_multiple_of(periods.len()) {
            return Err(Error::contract(format!(
                "n_h = {n_h} is not divisible by {} clock blocks",
                periods.len()
            )));
        }
        let block_size = n_h / periods.len();
        for r in 0..n_h {
            for c in 0..n_h {
                if c / block_size < r / block_size {
                    w[(r, c)] = 0.0;
                }
            }
        }
        Ok(Self {
            w,
            u,
            theta_out,
            periods,
            block_size,
        })
    }

    pub fn zeros(n_h: usize, n_x: usize, periods: Vec<usize>) -> Result<Self> {
        Self::new(
            Mat::zeros(n_h, n_h),
            Mat::zeros(n_h, n_x),
            Vec64::zeros(n_h),
            periods,
        )
    }

    pub fn gaussian<R: Rng>(
        n_h: usize,
        n_x: usize,
        periods: Vec<usize>,
        std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let w = gaussian_mat(n_h, n_h, std, rng);
        let u = gaussian_mat(n_h, n_x, std, rng);
        let theta_out = gaussian_vec(n_h, std, rng);
        Self::new(w, u, theta_out, periods)
    }

    pub fn periods(&self) -> &[usize] {
        &self.periods
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Whether hidden unit `r` may read hidden unit `c`.
    pub fn connected(&self, r: usize, c: usize) -> bool {
        c / self.block_size >= r / self.block_size
    }

    /// Which blocks recompute at timestep `t`.
    pub fn active_blocks(&self, t: usize) -> Vec<bool> {
        self.periods.iter().map(|p| t.is_multiple_of(*p)).collect()
    }
}

/// One clockwork step at timestep `t ≥ 1`: active blocks recompute
/// `tanh` of their rows of `W h + U x`, idle blocks copy their previous values.
pub fn cwrnn_step(
    p: &CwrnnParams,
    s: &HiddenState,
    x: &[f64],
    t: usize,
) -> Result<(HiddenState, GateCache)> {
    check_step_dims(p.w.rows(), p.u.cols(), s, x)?;
    if t == 0 {
        return Err(Error::contract("clockwork timesteps start at 1"));
    }
    let active = p.active_blocks(t);
    let n_h = p.w.rows();
    let bs = p.block_size;
    let mut h = s.h.clone();
    for (blk, _) in active.iter().enumerate().filter(|(_, a)| **a) {
        // Row r only reads columns from its own block onward.
        let start = blk * bs;
        for r in start..start + bs {
            let a = dot(&p.w.row(r)[start..], &s.h[start..n_h]) + dot(p.u.row(r), x);
            h[r] = a.tanh();
        }
    }
    Ok((HiddenState { h, c: None, t }, GateCache::Cwrnn { active }))
}

impl Params for CwrnnParams {
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

impl Recurrent for CwrnnParams {
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
        cwrnn_step(self, prev, x, prev.t + 1)
    }

    fn backward_step(
        &self,
        x: &[f64],
        prev: &HiddenState,
        next: &HiddenState,
        cache: &GateCache,
        dh: &[f64],
        _dc: &[f64],
        grad: &mut GradientTriple,
        dh_prev: &mut [f64],
        _dc_prev: &mut [f64],
    ) {
        let GateCache::Cwrnn { active } = cache else {
            panic!("CWRNN backward step needs a clockwork cache");
        };
        let bs = self.block_size;
        dh_prev.iter_mut().for_each(|v| *v = 0.0);
        for (blk, &is_active) in active.iter().enumerate() {
            let rows = blk * bs..(blk + 1) * bs;
            if !is_active {
                // Copy path: identity Jacobian.
                for r in rows {
                    dh_prev[r] += dh[r];
                }
                continue;
            }
            let start = blk * bs;
            for r in rows {
                let da = dh[r] * (1.0 - next.h[r] * next.h[r]);
                if da == 0.0 {
                    continue;
                }
                let w_row = &self.w.row(r)[start..];
                let gw_row = &mut grad.g_w.row_mut(r)[start..];
                for ((g, hp), (dp, wv)) in gw_row
                    .iter_mut()
                    .zip(&prev.h[start..])
                    .zip(dh_prev[start..].iter_mut().zip(w_row))
                {
                    *g += da * hp;
                    *dp += da * wv;
                }
                for (g, xv) in grad.g_u.row_mut(r).iter_mut().zip(x) {
                    *g += da * xv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::srnn_step;
    use crate::models::SrnnParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_examples() {
        let p = CwrnnParams::zeros(4, 1, vec![1, 2]).unwrap();
        assert_eq!(p.active_blocks(1), vec![true, false]);
        let q = CwrnnParams::zeros(3, 1, vec![1, 2, 4]).unwrap();
        assert_eq!(q.active_blocks(4), vec![true, true, true]);
    }

    #[test]
    fn rejects_bad_periods() {
        assert!(CwrnnParams::zeros(4, 1, vec![2, 1]).is_err());
        assert!(CwrnnParams::zeros(4, 1, vec![1, 1]).is_err());
        assert!(CwrnnParams::zeros(5, 1, vec![1, 2]).is_err());
        assert!(CwrnnParams::zeros(4, 1, vec![0, 2]).is_err());
    }

    #[test]
    fn connectivity_is_block_upper_triangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = CwrnnParams::gaussian(6, 2, vec![1, 2, 4], 1.0, &mut rng).unwrap();
        for r in 0..6 {
            for c in 0..6 {
                if c / 2 < r / 2 {
                    assert_eq!(p.w[(r, c)], 0.0);
                } else {
                    assert_ne!(p.w[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn matches_masked_srnn() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for t in 1..=8 {
            let p = CwrnnParams::gaussian(6, 3, vec![1, 2, 4], 0.8, &mut rng).unwrap();
            let prev = HiddenState {
                h: vec![0.3, -0.2, 0.9, -0.6, 0.1, 0.4].into(),
                c: None,
                t: t - 1,
            };
            let x = [0.5, -1.0, 1.0];
            let (next, _) = cwrnn_step(&p, &prev, &x, t).unwrap();
            let srnn = SrnnParams::new(p.w.clone(), p.u.clone(), p.theta_out.clone()).unwrap();
            let full = srnn_step(&srnn, &prev, &x).unwrap();
            let active = p.active_blocks(t);
            for r in 0..6 {
                let expected = if active[r / 2] { full.h[r] } else { prev.h[r] };
                assert!((next.h[r] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_unit_period_reproduces_srnn() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = CwrnnParams::gaussian(4, 2, vec![1], 0.6, &mut rng).unwrap();
        let srnn = SrnnParams::new(p.w.clone(), p.u.clone(), p.theta_out.clone()).unwrap();
        let (mut a, mut b) = (p.initial_state(), srnn.initial_state());
        for k in 0..20 {
            let x = [(k as f64 * 0.3).sin(), 1.0];
            a = p.step(&a, &x).unwrap().0;
            b = srnn_step(&srnn, &b, &x).unwrap();
            assert_eq!(a.h, b.h);
        }
    }
}
