use std::sync::Arc;
use std::time::Instant;

use super::config::{ExperimentConfig, ModelKind, OptimizerConfig, TaskConfig};
use crate::analysis::{estimate_smoothness, RegretLedger, SmoothnessTrace};
use crate::error::{Error, Result};
use crate::models::{CwrnnParams, LstmParams, Recurrent, SrnnParams, StepRecord};
use crate::optim::{projected_gradient, Baseline, BaselineConfig, Wogd, WogdConfig};
use crate::tasks::{
    decide, fit_scaling, init_rng, load_csv_stream, loss_and_residual, synthetic_regression,
    BinaryAddState, BitEncoding, LossKind, ScalingSpec, StreamSample, SustainTracker,
    SyntheticSpec,
};
use crate::wingrad::{instantaneous_gradient, tbptt_gradient, ActivationTape, GradMode};

/// Data shared by every seed of an experiment.
#[derive(Debug, Clone)]
pub enum PreparedTask {
    Regression {
        samples: Arc<Vec<StreamSample>>,
        scaling: ScalingSpec,
    },
    BinaryAdd {
        n: usize,
        horizon: usize,
        cutoff: usize,
        encoding: BitEncoding,
    },
}

impl PreparedTask {
    pub fn input_size(&self) -> usize {
        match self {
            Self::Regression { samples, .. } => samples.first().map_or(0, |s| s.x.len()),
            Self::BinaryAdd { n, .. } => n + 1,
        }
    }
}

/// Loads or generates the data and fits the scaling.
pub fn prepare_task(cfg: &ExperimentConfig) -> Result<PreparedTask> {
    let records = match &cfg.task {
        TaskConfig::Csv {
            path,
            target_column,
        } => load_csv_stream(path, *target_column)?,
        TaskConfig::Synthetic {
            features,
            steps,
            data_seed,
        } => {
            let spec = SyntheticSpec {
                features: *features,
                steps: *steps,
                ..SyntheticSpec::default()
            };
            synthetic_regression(&spec, *data_seed)?
        }
        TaskConfig::BinaryAdd {
            n,
            horizon,
            cutoff,
            encoding,
        } => {
            return Ok(PreparedTask::BinaryAdd {
                n: *n,
                horizon: *horizon,
                cutoff: *cutoff,
                encoding: *encoding,
            });
        }
    };
    if records.is_empty() {
        return Err(Error::Config("the data stream is empty".into()));
    }
    let scaling = fit_scaling(&records, cfg.n_h)?;
    Ok(PreparedTask::Regression {
        samples: Arc::new(scaling.apply(&records)),
        scaling,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub steps: usize,
    /// Mean of `(d − d̂)²` over the stream, using the prediction made before each update.
    pub mse: f64,
    /// Binary addition only: first step of the sustained run, if reached.
    pub sustained_at: Option<usize>,
    pub wall_seconds: f64,
    /// Cumulative mean squared error after each step.
    pub curve: Vec<f64>,
    pub regret: Option<RegretLedger>,
    pub smoothness: Option<SmoothnessTrace>,
    pub projections: usize,
    /// Steps whose cross-entropy prediction had to be clamped.
    pub clamped: usize,
}

/// One learning-rule update per step, given the tape that ends at that step.
trait Learner<M: Recurrent> {
    fn tape_len(&self) -> usize;
    fn learn(
        &mut self,
        params: &mut M,
        tape: &ActivationTape,
        kind: LossKind,
        t: usize,
    ) -> Result<()>;
    fn finish(self) -> (usize, Option<RegretLedger>, Option<SmoothnessTrace>);
}

struct WogdLearner {
    cfg: WogdConfig,
    opt: Wogd,
    ledger: Option<RegretLedger>,
    trace: Option<SmoothnessTrace>,
    every: usize,
}

impl Learner<SrnnParams> for WogdLearner {
    fn tape_len(&self) -> usize {
        self.cfg.w
    }

    fn learn(
        &mut self,
        params: &mut SrnnParams,
        tape: &ActivationTape,
        kind: LossKind,
        t: usize,
    ) -> Result<()> {
        let grads = tbptt_gradient(tape, params, kind, self.cfg.grad_mode)?;
        if let Some(ledger) = &mut self.ledger {
            ledger.record(t, &projected_gradient(params, &grads, &self.cfg)?)?;
        }
        let probe = self.trace.is_some() && t.is_multiple_of(self.every);
        let before = probe.then(|| params.clone());
        self.opt.step(&self.cfg, params, &grads, t)?;
        if let (Some(before), Some(trace)) = (before, &mut self.trace) {
            // Both gradients must be of the same window loss, so replay at both points.
            let g0 = match self.cfg.grad_mode {
                GradMode::Replay => grads,
                GradMode::Cached => tbptt_gradient(tape, &before, kind, GradMode::Replay)?,
            };
            let g1 = tbptt_gradient(tape, params, kind, GradMode::Replay)?;
            let est = estimate_smoothness(&g0, &g1, &before, params);
            trace.push(t, est);
            if let Some(ledger) = &mut self.ledger {
                ledger.set_beta_exp(est.beta());
            }
        }
        Ok(())
    }

    fn finish(self) -> (usize, Option<RegretLedger>, Option<SmoothnessTrace>) {
        (self.opt.projections, self.ledger, self.trace)
    }
}

struct BaselineLearner {
    state: Baseline,
}

impl<M: Recurrent> Learner<M> for BaselineLearner {
    fn tape_len(&self) -> usize {
        self.state.config().bptt_len
    }

    fn learn(
        &mut self,
        params: &mut M,
        tape: &ActivationTape,
        kind: LossKind,
        t: usize,
    ) -> Result<()> {
        let grads = instantaneous_gradient(tape, params, kind, GradMode::Cached)?;
        self.state.step(params, &grads, t)
    }

    fn finish(self) -> (usize, Option<RegretLedger>, Option<SmoothnessTrace>) {
        (0, None, None)
    }
}

enum Source<'a> {
    Fixed(std::slice::Iter<'a, StreamSample>),
    Binary {
        state: BinaryAddState,
        tracker: SustainTracker,
        limit: usize,
    },
}

/// The predict, observe, update loop over one stream.
fn online_loop<M: Recurrent, L: Learner<M>>(
    mut params: M,
    mut learner: L,
    mut source: Source<'_>,
    kind: LossKind,
    seed: u64,
) -> Result<RunResult> {
    let start = Instant::now();
    let mut tape = ActivationTape::new(learner.tape_len())?;
    let mut state = params.initial_state();
    let mut curve = Vec::new();
    let mut sq_sum = 0.0;
    let mut clamped = 0;
    let mut t = 0;
    loop {
        let sample = match &mut source {
            Source::Fixed(it) => match it.next() {
                Some(s) => s.clone(),
                None => break,
            },
            Source::Binary {
                state,
                tracker,
                limit,
            } => {
                if t >= *limit || tracker.result().is_some() || tracker.gave_up(t) {
                    break;
                }
                state.next_sample()
            }
        };
        t += 1;
        let (next, cache) = params.step(&state, &sample.x)?;
        let prediction = kind.output(params.linear_output(&next));
        if !prediction.is_finite() {
            return Err(Error::NumericOverflow {
                t,
                context: "prediction",
            });
        }
        clamped += loss_and_residual(prediction, sample.d, kind)?.clamped as usize;
        let err = sample.d - prediction;
        sq_sum += err * err;
        curve.push(sq_sum / t as f64);
        if let Source::Binary { tracker, .. } = &mut source {
            tracker.push(t, decide(prediction) == sample.d);
        }
        tape.push_step(StepRecord {
            x: sample.x,
            d: sample.d,
            h_prev: state,
            h_new: next.clone(),
            cache,
            prediction,
        })?;
        learner.learn(&mut params, &tape, kind, t)?;
        state = next;
    }
    if t == 0 {
        return Err(Error::Config("the data stream is empty".into()));
    }
    let wall_seconds = start.elapsed().as_secs_f64();
    let sustained_at = match &source {
        Source::Binary { tracker, .. } => tracker.result(),
        Source::Fixed(_) => None,
    };
    let (projections, regret, smoothness) = learner.finish();
    Ok(RunResult {
        seed,
        steps: t,
        mse: sq_sum / t as f64,
        sustained_at,
        wall_seconds,
        curve,
        regret,
        smoothness,
        projections,
        clamped,
    })
}

fn run_with<M: Recurrent, L: Learner<M>>(
    cfg: &ExperimentConfig,
    task: &PreparedTask,
    seed: u64,
    params: M,
    learner: L,
) -> Result<RunResult> {
    let source = match task {
        PreparedTask::Regression { samples, .. } => Source::Fixed(samples.iter()),
        PreparedTask::BinaryAdd {
            n,
            horizon,
            cutoff,
            encoding,
        } => Source::Binary {
            state: BinaryAddState::new(*n, seed)?.with_encoding(*encoding),
            tracker: SustainTracker::new(*horizon, *cutoff),
            limit: cutoff + horizon - 1,
        },
    };
    online_loop(params, learner, source, cfg.loss_kind(), seed)
}

fn baseline_learner<M: Recurrent>(cfg: BaselineConfig, params: &M) -> Result<BaselineLearner> {
    Ok(BaselineLearner {
        state: Baseline::new(cfg, params)?,
    })
}

/// Runs one seed on an already prepared task.
pub fn run_prepared(cfg: &ExperimentConfig, task: &PreparedTask, seed: u64) -> Result<RunResult> {
    if let PreparedTask::Regression { samples, .. } = task {
        if samples.is_empty() {
            return Err(Error::Config("the data stream is empty".into()));
        }
    }
    let (n_h, n_x) = (cfg.n_h, task.input_size());
    let mut rng = init_rng(seed);
    match (cfg.model, cfg.optimizer) {
        (ModelKind::Srnn, OptimizerConfig::Wogd(w)) => {
            let params = SrnnParams::gaussian(n_h, n_x, cfg.init_std, &mut rng);
            let ledger = cfg
                .instrument
                .regret
                .then(|| RegretLedger::new(w.eta, w.w, w.lambda, n_h, n_x));
            let trace = cfg.instrument.smoothness.then(SmoothnessTrace::default);
            let learner = WogdLearner {
                cfg: w,
                opt: Wogd::default(),
                ledger,
                trace,
                every: cfg.instrument.every,
            };
            run_with(cfg, task, seed, params, learner)
        }
        (_, OptimizerConfig::Wogd(_)) => Err(Error::Config(
            "the windowed optimizer trains the srnn model only".into(),
        )),
        (model, opt) => {
            let b = opt.baseline().expect("baseline optimizer");
            match model {
                ModelKind::Srnn => {
                    let params = SrnnParams::gaussian(n_h, n_x, cfg.init_std, &mut rng);
                    let learner = baseline_learner(b, &params)?;
                    run_with(cfg, task, seed, params, learner)
                }
                ModelKind::Lstm => {
                    let params = LstmParams::gaussian(n_h, n_x, cfg.init_std, &mut rng);
                    let learner = baseline_learner(b, &params)?;
                    run_with(cfg, task, seed, params, learner)
                }
                ModelKind::Cwrnn => {
                    let params = CwrnnParams::gaussian(
                        n_h,
                        n_x,
                        cfg.periods.clone(),
                        cfg.init_std,
                        &mut rng,
                    )?;
                    let learner = baseline_learner(b, &params)?;
                    run_with(cfg, task, seed, params, learner)
                }
            }
        }
    }
}

/// Full online run for one seed. Deterministic given `(cfg, seed)` apart from `wall_seconds`.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    let task = prepare_task(cfg)?;
    run_prepared(cfg, &task, seed)
}
