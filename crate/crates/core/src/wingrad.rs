//! Gradients of the time-smoothed loss
//!
//! ```text
//! L_{t,w} = (1/w) Σ_{i=0}^{w-1} ℓ_{t-i}
//! ```
//!
//! by truncated backpropagation over the last `w` steps, plus a central
//! finite-difference oracle over the same loss.
//!
//! The tape keeps the last `w` step records and the hidden state just before
//! the oldest one (the anchor). Backpropagation stops at the anchor. Before the
//! tape has filled, the missing terms count as zero losses, so the divisor is
//! always the window size `w`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vec64};
use crate::models::{GateCache, HiddenState, Params, Recurrent, StepRecord};
use crate::tasks::{loss_and_residual, LossKind};

/// `∂L/∂W`, `∂L/∂U` and `∂L/∂ϑ` for the SRNN and CWRNN parameter sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTriple {
    pub g_w: Mat,
    pub g_u: Mat,
    pub g_out: Vec64,
}

impl GradientTriple {
    pub fn zeros(n_h: usize, n_x: usize) -> Self {
        Self {
            g_w: Mat::zeros(n_h, n_h),
            g_u: Mat::zeros(n_h, n_x),
            g_out: Vec64::zeros(n_h),
        }
    }
}

impl Params for GradientTriple {
    fn blocks(&self) -> Vec<&[f64]> {
        vec![self.g_w.as_slice(), self.g_u.as_slice(), &self.g_out]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.g_w.as_mut_slice(),
            self.g_u.as_mut_slice(),
            &mut self.g_out,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    /// Re-run the window forward from the anchor under the current parameters,
    /// then backpropagate. Differentiates `L_{t,w}` exactly up to truncation.
    #[default]
    Replay,
    /// Backpropagate through the stored activations, which were produced by
    /// earlier parameter values. Cheaper, approximate.
    Cached,
}

/// Ring buffer of the most recent `capacity` step records.
#[derive(Debug, Clone)]
pub struct ActivationTape {
    capacity: usize,
    records: VecDeque<StepRecord>,
    anchor: Option<HiddenState>,
}

impl ActivationTape {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::contract("window size must be at least 1"));
        }
        Ok(Self {
            capacity,
            records: VecDeque::with_capacity(capacity + 1),
            anchor: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Hidden state at the left edge of the window.
    pub fn anchor(&self) -> Option<&HiddenState> {
        self.anchor.as_ref()
    }

    pub fn records(&self) -> impl DoubleEndedIterator<Item = &StepRecord> + ExactSizeIterator {
        self.records.iter()
    }

    pub fn newest(&self) -> Option<&StepRecord> {
        self.records.back()
    }

    /// Appends a record, evicting the oldest one once the tape is full.
    pub fn push_step(&mut self, record: StepRecord) -> Result<()> {
        if record.h_prev.t + 1 != record.h_new.t {
            return Err(Error::contract(format!(
                "record spans timesteps {} -> {}",
                record.h_prev.t, record.h_new.t
            )));
        }
        match self.records.back() {
            Some(last) if last.h_new.t + 1 != record.h_new.t => {
                return Err(Error::contract(format!(
                    "non-contiguous push: newest timestep {}, got {}",
                    last.h_new.t, record.h_new.t
                )));
            }
            None => self.anchor = Some(record.h_prev.clone()),
            _ => {}
        }
        self.records.push_back(record);
        if self.records.len() > self.capacity {
            let evicted = self.records.pop_front().expect("tape is non-empty");
            self.anchor = Some(evicted.h_new);
        }
        Ok(())
    }
}

/// One step as seen by the backward pass.
struct StepView<'a> {
    x: &'a [f64],
    d: f64,
    prev: &'a HiddenState,
    next: &'a HiddenState,
    cache: &'a GateCache,
}

/// Forward pass over the tape's inputs from its anchor under `params`.
fn replay<M: Recurrent>(
    tape: &ActivationTape,
    params: &M,
) -> Result<Vec<(HiddenState, GateCache)>> {
    let anchor = tape.anchor().ok_or_else(|| Error::contract("empty tape"))?;
    let mut out: Vec<(HiddenState, GateCache)> = Vec::with_capacity(tape.len());
    for rec in tape.records() {
        let prev = out.last().map_or(anchor, |(s, _)| s);
        let next = params.step(prev, &rec.x)?;
        if !next.0.h.is_finite() {
            return Err(Error::NumericOverflow {
                t: next.0.t,
                context: "replay forward pass",
            });
        }
        out.push(next);
    }
    Ok(out)
}

/// `L_{t,w}` re-evaluated under `params` by replaying the window from the anchor.
pub fn smoothed_loss<M: Recurrent>(
    tape: &ActivationTape,
    params: &M,
    kind: LossKind,
) -> Result<f64> {
    let trace = replay(tape, params)?;
    let mut total = 0.0;
    for (rec, (state, _)) in tape.records().zip(&trace) {
        total += loss_and_residual(kind.output(params.linear_output(state)), rec.d, kind)?.loss;
    }
    Ok(total / tape.capacity() as f64)
}

/// Which per-step losses enter the differentiated objective.
#[derive(Clone, Copy)]
enum Objective {
    /// Mean over the window, `L_{t,w}`.
    Smoothed,
    /// Only the newest loss `ℓ_t`, backpropagated through the whole tape.
    Latest,
}

fn backprop<M: Recurrent>(
    params: &M,
    steps: &[StepView<'_>],
    kind: LossKind,
    objective: Objective,
    w: usize,
) -> Result<M::Grad> {
    let n_h = params.hidden_size();
    let cell = if params.has_cell() { n_h } else { 0 };
    let mut grad = params.zero_grad();
    let mut dh_carry = vec![0.0; n_h];
    let mut dc_carry = vec![0.0; cell];
    let mut dh = vec![0.0; n_h];
    let mut dh_prev = vec![0.0; n_h];
    let mut dc_prev = vec![0.0; cell];
    let theta = params.readout();
    let last = steps.len() - 1;
    for (i, step) in steps.iter().enumerate().rev() {
        let weight = match objective {
            Objective::Smoothed => 1.0 / w as f64,
            Objective::Latest if i == last => 1.0,
            Objective::Latest => 0.0,
        };
        let dz = if weight == 0.0 {
            0.0
        } else {
            let z = params.linear_output(step.next);
            weight * loss_and_residual(kind.output(z), step.d, kind)?.residual
        };
        if dz != 0.0 {
            for (g, h) in M::readout_grad_mut(&mut grad)
                .iter_mut()
                .zip(step.next.h.iter())
            {
                *g += dz * h;
            }
        }
        for k in 0..n_h {
            dh[k] = dh_carry[k] + dz * theta[k];
        }
        params.backward_step(
            step.x,
            step.prev,
            step.next,
            step.cache,
            &dh,
            &dc_carry,
            &mut grad,
            &mut dh_prev,
            &mut dc_prev,
        );
        if dh_prev.iter().chain(&dc_prev).any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow {
                t: step.next.t,
                context: "backward pass",
            });
        }
        std::mem::swap(&mut dh_carry, &mut dh_prev);
        std::mem::swap(&mut dc_carry, &mut dc_prev);
    }
    if !grad.is_finite() {
        return Err(Error::NumericOverflow {
            t: steps[last].next.t,
            context: "gradient",
        });
    }
    Ok(grad)
}

fn gradient<M: Recurrent>(
    tape: &ActivationTape,
    params: &M,
    kind: LossKind,
    mode: GradMode,
    objective: Objective,
) -> Result<M::Grad> {
    let anchor = tape.anchor().ok_or_else(|| Error::contract("empty tape"))?;
    check_dims(tape, params)?;
    match mode {
        GradMode::Replay => {
            let trace = replay(tape, params)?;
            let views: Vec<StepView<'_>> = tape
                .records()
                .zip(&trace)
                .enumerate()
                .map(|(i, (rec, (next, cache)))| StepView {
                    x: &rec.x,
                    d: rec.d,
                    prev: if i == 0 { anchor } else { &trace[i - 1].0 },
                    next,
                    cache,
                })
                .collect();
            backprop(params, &views, kind, objective, tape.capacity())
        }
        GradMode::Cached => {
            let views: Vec<StepView<'_>> = tape
                .records()
                .map(|rec| StepView {
                    x: &rec.x,
                    d: rec.d,
                    prev: &rec.h_prev,
                    next: &rec.h_new,
                    cache: &rec.cache,
                })
                .collect();
            backprop(params, &views, kind, objective, tape.capacity())
        }
    }
}

fn check_dims<M: Recurrent>(tape: &ActivationTape, params: &M) -> Result<()> {
    let rec = tape.newest().ok_or_else(|| Error::contract("empty tape"))?;
    if rec.x.len() != params.input_size() || rec.h_new.h.len() != params.hidden_size() {
        return Err(Error::contract(format!(
            "tape records (n_x = {}, n_h = {}) do not match parameters (n_x = {}, n_h = {})",
            rec.x.len(),
            rec.h_new.h.len(),
            params.input_size(),
            params.hidden_size()
        )));
    }
    Ok(())
}

/// Gradient of `L_{t,w}` with respect to every parameter, truncated at the anchor.
pub fn tbptt_gradient<M: Recurrent>(
    tape: &ActivationTape,
    params: &M,
    kind: LossKind,
    mode: GradMode,
) -> Result<M::Grad> {
    gradient(tape, params, kind, mode, Objective::Smoothed)
}

/// Gradient of the newest instantaneous loss only, backpropagated through the
/// whole tape. This is the classical online TBPTT gradient used by the
/// first-order baselines, with the tape capacity as truncation length.
pub fn instantaneous_gradient<M: Recurrent>(
    tape: &ActivationTape,
    params: &M,
    kind: LossKind,
    mode: GradMode,
) -> Result<M::Grad> {
    gradient(tape, params, kind, mode, Objective::Latest)
}

/// Central finite differences of [`smoothed_loss`] over every parameter entry.
pub fn fd_gradient<M: Recurrent>(
    tape: &ActivationTape,
    params: &M,
    kind: LossKind,
    eps: f64,
) -> Result<M::Grad> {
    if !(1e-8..=1e-3).contains(&eps) {
        return Err(Error::Domain(format!(
            "finite-difference step {eps} outside [1e-8, 1e-3]"
        )));
    }
    let mut grad = params.zero_grad();
    let mut probe = params.clone();
    let n_blocks = params.blocks().len();
    for b in 0..n_blocks {
        let len = params.blocks()[b].len();
        for k in 0..len {
            let orig = params.blocks()[b][k];
            probe.blocks_mut()[b][k] = orig + eps;
            let plus = smoothed_loss(tape, &probe, kind)?;
            probe.blocks_mut()[b][k] = orig - eps;
            let minus = smoothed_loss(tape, &probe, kind)?;
            probe.blocks_mut()[b][k] = orig;
            grad.blocks_mut()[b][k] = (plus - minus) / (2.0 * eps);
        }
    }
    Ok(grad)
}

/// Largest entrywise relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error<P: Params>(a: &P, b: &P, floor: f64) -> f64 {
    a.flat()
        .iter()
        .zip(b.flat())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::clip_singular_values;
    use crate::models::{SrnnParams, StepRecord};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Runs `params` over `(x, d)` pairs, pushing every step onto a tape.
    fn fill_tape(params: &SrnnParams, w: usize, data: &[(Vec<f64>, f64)]) -> ActivationTape {
        let mut tape = ActivationTape::new(w).unwrap();
        let mut state = params.initial_state();
        for (x, d) in data {
            let (next, cache) = params.step(&state, x).unwrap();
            let prediction = params.linear_output(&next);
            tape.push_step(StepRecord {
                x: x.clone().into(),
                d: *d,
                h_prev: state,
                h_new: next.clone(),
                cache,
                prediction,
            })
            .unwrap();
            state = next;
        }
        tape
    }

    fn random_data(rng: &mut ChaCha8Rng, n: usize, n_x: usize) -> Vec<(Vec<f64>, f64)> {
        (0..n)
            .map(|_| {
                (
                    (0..n_x).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn push_semantics() {
        let p = SrnnParams::zeros(2, 1);
        let data = vec![(vec![0.5], 0.1); 4];
        let tape = fill_tape(&p, 3, &data[..1]);
        assert_eq!(tape.len(), 1);
        assert_eq!(tape.anchor().unwrap().t, 0);
        let tape = fill_tape(&p, 3, &data);
        assert_eq!(tape.len(), 3);
        assert_eq!(tape.anchor().unwrap().t, 1);
        assert_eq!(tape.records().next().unwrap().h_prev.t, 1);
    }

    #[test]
    fn non_contiguous_push_fails() {
        let p = SrnnParams::zeros(1, 1);
        let mut tape = fill_tape(&p, 4, &[(vec![0.0], 0.0)]);
        let mut rec = tape.newest().unwrap().clone();
        rec.h_prev.t = 5;
        rec.h_new.t = 6;
        assert!(matches!(tape.push_step(rec), Err(Error::Contract(_))));
        assert!(ActivationTape::new(0).is_err());
    }

    #[test]
    fn smoothed_loss_arithmetic() {
        // Zero weights give h = 0 and d̂ = 0, so residuals are the targets.
        let p = SrnnParams::zeros(1, 1);
        let tape = fill_tape(&p, 2, &[(vec![0.0], 1.0), (vec![0.0], 3.0)]);
        assert_eq!(smoothed_loss(&tape, &p, LossKind::Squared).unwrap(), 2.5);
        let tape = fill_tape(&p, 1, &[(vec![0.0], 0.0)]);
        assert_eq!(smoothed_loss(&tape, &p, LossKind::Squared).unwrap(), 0.0);
    }

    #[test]
    fn smoothed_loss_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = SrnnParams::gaussian(3, 2, 0.5, &mut rng);
        let data = random_data(&mut rng, 12, 2);
        let w = 5;
        let tape = fill_tape(&p, w, &data);
        // Naive: replay the last w inputs from the state reached after the first n - w steps.
        let mut h = vec![0.0; 3];
        let mut total = 0.0;
        for (t, (x, d)) in data.iter().enumerate() {
            let mut next = vec![0.0; 3];
            for i in 0..3 {
                let mut a = 0.0;
                for j in 0..3 {
                    a += p.w[(i, j)] * h[j];
                }
                for j in 0..2 {
                    a += p.u[(i, j)] * x[j];
                }
                next[i] = f64::tanh(a);
            }
            h = next;
            if t >= data.len() - w {
                let y: f64 = (0..3).map(|i| p.theta_out[i] * h[i]).sum();
                total += 0.5 * (d - y) * (d - y);
            }
        }
        let naive = total / w as f64;
        assert!((smoothed_loss(&tape, &p, LossKind::Squared).unwrap() - naive).abs() < 1e-14);
    }

    #[test]
    fn zero_readout_kills_hidden_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = SrnnParams::gaussian(3, 2, 0.5, &mut rng);
        p.theta_out = Vec64::zeros(3);
        let data = random_data(&mut rng, 6, 2);
        let tape = fill_tape(&p, 4, &data);
        let g = tbptt_gradient(&tape, &p, LossKind::Squared, GradMode::Replay).unwrap();
        assert!(g
            .g_w
            .as_slice()
            .iter()
            .chain(g.g_u.as_slice())
            .all(|v| *v == 0.0));
        let mut expected = [0.0; 3];
        for rec in tape.records() {
            for i in 0..3 {
                expected[i] -= rec.d * rec.h_new.h[i] / 4.0;
            }
        }
        for i in 0..3 {
            assert!((g.g_out[i] - expected[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn single_step_closed_form() {
        // n_h = n_x = 1, h0 = 0: ℓ = 0.5 (d - ϑ tanh(u x))², so
        // ∂ℓ/∂u = (ϑ h - d) ϑ (1 - h²) x, ∂ℓ/∂w = 0 (h0 = 0), ∂ℓ/∂ϑ = (ϑ h - d) h.
        let (w, u, th, x, d) = (0.4, -0.7, 0.9, 0.6, 0.3);
        let p = SrnnParams::new(Mat::diag(&[w]), Mat::diag(&[u]), vec![th].into()).unwrap();
        let tape = fill_tape(&p, 1, &[(vec![x], d)]);
        let g = tbptt_gradient(&tape, &p, LossKind::Squared, GradMode::Replay).unwrap();
        let h = f64::tanh(u * x);
        let r = th * h - d;
        assert!((g.g_u[(0, 0)] - r * th * (1.0 - h * h) * x).abs() < 1e-12);
        assert_eq!(g.g_w[(0, 0)], 0.0);
        assert!((g.g_out[0] - r * h).abs() < 1e-12);
    }

    #[test]
    fn replay_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &w in &[1, 3, 7] {
            let p = SrnnParams::gaussian(3, 2, 0.6, &mut rng);
            let data = random_data(&mut rng, 10, 2);
            let tape = fill_tape(&p, w, &data);
            let q = SrnnParams::gaussian(3, 2, 0.6, &mut rng);
            let g = tbptt_gradient(&tape, &q, LossKind::Squared, GradMode::Replay).unwrap();
            let fd = fd_gradient(&tape, &q, LossKind::Squared, 1e-6).unwrap();
            assert!(max_relative_error(&g, &fd, 1e-4) < 1e-5);
        }
    }

    #[test]
    fn readout_gradient_exact_for_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = SrnnParams::gaussian(4, 2, 0.5, &mut rng);
        let tape = fill_tape(&p, 5, &random_data(&mut rng, 7, 2));
        let g = tbptt_gradient(&tape, &p, LossKind::Squared, GradMode::Replay).unwrap();
        let fd = fd_gradient(&tape, &p, LossKind::Squared, 1e-6).unwrap();
        for (a, b) in g.g_out.iter().zip(fd.g_out.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_network_has_zero_w_gradient() {
        let p = SrnnParams::zeros(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tape = fill_tape(&p, 3, &random_data(&mut rng, 4, 2));
        let fd = fd_gradient(&tape, &p, LossKind::Squared, 1e-6).unwrap();
        assert!(fd.g_w.as_slice().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn window_one_equals_instantaneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = SrnnParams::gaussian(3, 2, 0.5, &mut rng);
        let data = random_data(&mut rng, 5, 2);
        let tape1 = fill_tape(&p, 1, &data);
        let smoothed = tbptt_gradient(&tape1, &p, LossKind::Squared, GradMode::Replay).unwrap();
        let inst = instantaneous_gradient(&tape1, &p, LossKind::Squared, GradMode::Replay).unwrap();
        assert_eq!(smoothed, inst);
    }

    #[test]
    fn cached_equals_replay_when_params_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = SrnnParams::gaussian(3, 2, 0.5, &mut rng);
        let tape = fill_tape(&p, 4, &random_data(&mut rng, 9, 2));
        let a = tbptt_gradient(&tape, &p, LossKind::Squared, GradMode::Replay).unwrap();
        let b = tbptt_gradient(&tape, &p, LossKind::Squared, GradMode::Cached).unwrap();
        assert!(max_relative_error(&a, &b, 1e-12) < 1e-12);
    }

    #[test]
    fn fd_step_domain() {
        let p = SrnnParams::zeros(1, 1);
        let tape = fill_tape(&p, 1, &[(vec![0.0], 0.0)]);
        assert!(fd_gradient(&tape, &p, LossKind::Squared, 1e-2).is_err());
    }

    #[test]
    fn empty_tape_is_a_contract_error() {
        let p = SrnnParams::zeros(1, 1);
        let tape = ActivationTape::new(2).unwrap();
        assert!(matches!(
            smoothed_loss(&tape, &p, LossKind::Squared),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            tbptt_gradient(&tape, &p, LossKind::Squared, GradMode::Replay),
            Err(Error::Contract(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Inside the constraint set the window gradient obeys the Lipschitz bounds.
        #[test]
        fn gradient_norms_bounded_in_the_ball(
            seed in 0u64..10_000,
            n_h in 1usize..7,
            n_x in 1usize..5,
            w in 1usize..30,
            scale in 0.1f64..5.0,
        ) {
            let lambda = 0.95;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = SrnnParams::gaussian(n_h, n_x, scale, &mut rng);
            p.w = clip_singular_values(&p.w, lambda).unwrap();
            p.u = clip_singular_values(&p.u, lambda).unwrap();
            let norm = p.theta_out.norm();
            if norm > 1.0 {
                p.theta_out = p.theta_out.scaled(1.0 / norm);
            }
            let bound_d = (n_h as f64).sqrt();
            let data: Vec<(Vec<f64>, f64)> = (0..w + 5)
                .map(|_| {
                    let x = (0..n_x).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    (x, rng.random_range(-bound_d..=bound_d))
                })
                .collect();
            let tape = fill_tape(&p, w, &data);
            let g = tbptt_gradient(&tape, &p, LossKind::Squared, GradMode::Replay).unwrap();
            let (nh, nx) = (n_h as f64, n_x as f64);
            prop_assert!(g.g_w.frobenius_norm() <= 2.0 * nh.sqrt() * nh.sqrt() / (1.0 - lambda));
            prop_assert!(g.g_u.frobenius_norm() <= 2.0 * nh.sqrt() * nx.sqrt() / (1.0 - lambda));
        }
    }
}
