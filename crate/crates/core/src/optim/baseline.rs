use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Sgd,
    Rmsprop,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub lr: f64,
    /// Decay of the squared-gradient average (RMSprop).
    pub rho: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Truncation length for backpropagation through time.
    pub bptt_len: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            kind: BaselineKind::Adam,
            lr: 1e-3,
            rho: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            bptt_len: 200,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.epsilon > 0.0) {
            return Err(Error::Config(
                "learning rate and epsilon must be positive".into(),
            ));
        }
        for (name, v) in [
            ("rho", self.rho),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.bptt_len == 0 {
            return Err(Error::Config("bptt_len must be at least 1".into()));
        }
        Ok(())
    }
}

/// First- and second-moment accumulators, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    cfg: BaselineConfig,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Baseline {
    pub fn new<P: Params>(cfg: BaselineConfig, params: &P) -> Result<Self> {
        cfg.validate()?;
        let n = params.num_params();
        Ok(Self {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
        })
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.cfg
    }

    pub fn step<P: Params, G: Params>(
        &mut self,
        params: &mut P,
        grads: &G,
        t: usize,
    ) -> Result<()> {
        baseline_step(self, params, grads, t)
    }
}

/// Plain, unprojected update of every parameter block at timestep `t ≥ 1`.
pub fn baseline_step<P: Params, G: Params>(
    state: &mut Baseline,
    params: &mut P,
    grads: &G,
    t: usize,
) -> Result<()> {
    if t == 0 {
        return Err(Error::contract("timesteps start at 1"));
    }
    let g = grads.flat();
    if g.len() != state.m.len() || params.num_params() != g.len() {
        return Err(Error::contract(
            "gradient and accumulator shapes differ from the parameters",
        ));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow {
            t,
            context: "gradient",
        });
    }
    let cfg = state.cfg;
    let mut k = 0;
    let (bc1, bc2) = (
        1.0 - cfg.beta1.powi(t as i32),
        1.0 - cfg.beta2.powi(t as i32),
    );
    for block in params.blocks_mut() {
        for p in block.iter_mut() {
            let gi = g[k];
            let delta = match cfg.kind {
                BaselineKind::Sgd => cfg.lr * gi,
                BaselineKind::Rmsprop => {
                    state.v[k] = cfg.rho * state.v[k] + (1.0 - cfg.rho) * gi * gi;
                    cfg.lr * gi / (state.v[k].sqrt() + cfg.epsilon)
                }
                BaselineKind::Adam => {
                    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * gi;
                    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * gi * gi;
                    cfg.lr * (state.m[k] / bc1) / ((state.v[k] / bc2).sqrt() + cfg.epsilon)
                }
            };
            *p -= delta;
            if !p.is_finite() {
                return Err(Error::NumericOverflow {
                    t,
                    context: "parameter update",
                });
            }
            k += 1;
        }
    }
    Ok(())
}
