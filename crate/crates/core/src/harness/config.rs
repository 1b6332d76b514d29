use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{BaselineConfig, BaselineKind, WogdConfig};
use crate::tasks::{BitEncoding, LossKind, SyntheticSpec, SUSTAIN_CUTOFF, SUSTAIN_HORIZON};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Srnn,
    Lstm,
    Cwrnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    /// Regression table; relative paths resolve against the config file.
    Csv {
        path: PathBuf,
        #[serde(default)]
        target_column: Option<usize>,
    },
    /// Online sum of `n` random bit streams. The run seed picks the stream.
    BinaryAdd {
        n: usize,
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_cutoff")]
        cutoff: usize,
        #[serde(default)]
        encoding: BitEncoding,
    },
    /// Generated regression stream, identical for every run seed.
    Synthetic {
        #[serde(default = "default_features")]
        features: usize,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default)]
        data_seed: u64,
    },
}

fn default_horizon() -> usize {
    SUSTAIN_HORIZON
}
fn default_cutoff() -> usize {
    SUSTAIN_CUTOFF
}
fn default_features() -> usize {
    SyntheticSpec::default().features
}
fn default_steps() -> usize {
    SyntheticSpec::default().steps
}

/// Baseline hyperparameters without the algorithm tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineParams {
    pub lr: f64,
    pub rho: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub bptt_len: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        let d = BaselineConfig::default();
        Self {
            lr: d.lr,
            rho: d.rho,
            beta1: d.beta1,
            beta2: d.beta2,
            epsilon: d.epsilon,
            bptt_len: d.bptt_len,
        }
    }
}

impl BaselineParams {
    pub fn with_kind(self, kind: BaselineKind) -> BaselineConfig {
        BaselineConfig {
            kind,
            lr: self.lr,
            rho: self.rho,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            bptt_len: self.bptt_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Wogd(WogdConfig),
    Sgd(BaselineParams),
    Rmsprop(BaselineParams),
    Adam(BaselineParams),
}

impl OptimizerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Wogd(_) => "wogd",
            Self::Sgd(_) => "sgd",
            Self::Rmsprop(_) => "rmsprop",
            Self::Adam(_) => "adam",
        }
    }

    pub fn baseline(&self) -> Option<BaselineConfig> {
        match *self {
            Self::Wogd(_) => None,
            Self::Sgd(p) => Some(p.with_kind(BaselineKind::Sgd)),
            Self::Rmsprop(p) => Some(p.with_kind(BaselineKind::Rmsprop)),
            Self::Adam(p) => Some(p.with_kind(BaselineKind::Adam)),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            Self::Wogd(c) => c.eta,
            Self::Sgd(p) | Self::Rmsprop(p) | Self::Adam(p) => p.lr,
        }
    }

    /// Same optimizer with the hidden-layer learning rate replaced.
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        match &mut self {
            Self::Wogd(c) => c.eta = lr,
            Self::Sgd(p) | Self::Rmsprop(p) | Self::Adam(p) => p.lr = lr,
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstrumentConfig {
    /// Record the local regret every step (windowed optimizer only).
    pub regret: bool,
    /// Estimate smoothness by finite differences along the update.
    pub smoothness: bool,
    /// Smoothness is estimated every `every`-th step.
    pub every: usize,
}

impl Default for InstrumentConfig {
    fn default() -> Self {
        Self {
            regret: false,
            smoothness: false,
            every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelKind,
    pub n_h: usize,
    #[serde(default = "default_init_std")]
    pub init_std: f64,
    /// Defaults to cross-entropy for binary addition and squared loss otherwise.
    #[serde(default)]
    pub loss: Option<LossKind>,
    /// Clock periods of the clockwork model.
    #[serde(default = "default_periods")]
    pub periods: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_tuning_runs")]
    pub tuning_runs: usize,
    #[serde(default = "default_eval_runs")]
    pub eval_runs: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub task: TaskConfig,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub instrument: InstrumentConfig,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_init_std() -> f64 {
    0.1
}
fn default_periods() -> Vec<usize> {
    vec![1, 2, 4, 8]
}
fn default_seeds() -> Vec<u64> {
    (1..=30).collect()
}
fn default_tuning_runs() -> usize {
    10
}
fn default_eval_runs() -> usize {
    30
}
fn default_workers() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    /// Parses and validates a config file; task paths become relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let TaskConfig::Csv { path: data, .. } = &mut cfg.task {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss.unwrap_or(match self.task {
            TaskConfig::BinaryAdd { .. } => LossKind::CrossEntropy,
            _ => LossKind::Squared,
        })
    }

    /// Label used in output tables, e.g. `srnn-wogd(w=200)`.
    pub fn label(&self) -> String {
        let model = match self.model {
            ModelKind::Srnn => "srnn",
            ModelKind::Lstm => "lstm",
            ModelKind::Cwrnn => "cwrnn",
        };
        match self.optimizer {
            OptimizerConfig::Wogd(c) => format!("{model}-wogd(w={})", c.w),
            o => format!("{model}-{}", o.name()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_h == 0 {
            return Err(Error::Config("n_h must be at least 1".into()));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::Config(
                "init_std must be a non-negative number".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.tuning_runs == 0 || self.eval_runs == 0 || self.workers == 0 {
            return Err(Error::Config(
                "tuning_runs, eval_runs and workers must be at least 1".into(),
            ));
        }
        if self.instrument.every == 0 {
            return Err(Error::Config("instrument.every must be at least 1".into()));
        }
        match &self.optimizer {
            OptimizerConfig::Wogd(c) => {
                c.validate()?;
                if self.model != ModelKind::Srnn {
                    return Err(Error::Config(
                        "the windowed optimizer trains the srnn model only".into(),
                    ));
                }
            }
            o => o.baseline().expect("baseline").validate()?,
        }
        if (self.instrument.regret || self.instrument.smoothness)
            && !matches!(self.optimizer, OptimizerConfig::Wogd(_))
        {
            return Err(Error::Config(
                "regret and smoothness instrumentation need the windowed optimizer".into(),
            ));
        }
        if self.model == ModelKind::Cwrnn {
            if self.periods.is_empty() || !self.n_h.is_multiple_of(self.periods.len()) {
                return Err(Error::Config(format!(
                    "n_h = {} is not divisible into {} clock blocks",
                    self.n_h,
                    self.periods.len()
                )));
            }
            if self.periods[0] == 0 || self.periods.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::Config(
                    "periods must be positive and strictly ascending".into(),
                ));
            }
        }
        match &self.task {
            TaskConfig::BinaryAdd {
                n, horizon, cutoff, ..
            } => {
                if !(2..=3).contains(n) || *horizon == 0 || *cutoff == 0 {
                    return Err(Error::Config(
                        "binary_add needs n in {2, 3} and positive horizon and cutoff".into(),
                    ));
                }
            }
            TaskConfig::Synthetic {
                features, steps, ..
            } if *features == 0 || *steps < 2 => {
                return Err(Error::Config(
                    "synthetic task needs features >= 1 and steps >= 2".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema_version = 1
name = "puma"
model = "srnn"
n_h = 10
seeds = [1, 2, 3]

[task]
kind = "csv"
path = "puma8nh.csv"

[optimizer]
algorithm = "wogd"
eta = 0.03
w = 200
"#;

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.n_h, 10);
        assert_eq!(cfg.init_std, 0.1);
        let OptimizerConfig::Wogd(w) = cfg.optimizer else {
            panic!()
        };
        assert_eq!((w.eta, w.w, w.alpha, w.lambda), (0.03, 200, 7.5, 0.95));
        assert_eq!(cfg.loss_kind(), LossKind::Squared);
        assert_eq!(cfg.label(), "srnn-wogd(w=200)");
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn baseline_section() {
        let text = SAMPLE
            .replace("model = \"srnn\"", "model = \"lstm\"")
            .replace(
                "algorithm = \"wogd\"\neta = 0.03\nw = 200",
                "algorithm = \"adam\"\nlr = 0.002",
            );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let b = cfg.optimizer.baseline().unwrap();
        assert_eq!((b.kind, b.lr, b.bptt_len), (BaselineKind::Adam, 0.002, 200));
        assert_eq!(cfg.optimizer.with_learning_rate(0.5).learning_rate(), 0.5);
    }

    #[test]
    fn rejects_invalid() {
        for (from, to) in [
            ("schema_version = 1", "schema_version = 2"),
            ("n_h = 10", "n_h = 0"),
            ("seeds = [1, 2, 3]", "seeds = [1, 1]"),
            ("model = \"srnn\"", "model = \"lstm\""),
            ("eta = 0.03", "eta = 0.03\nlambda = 1.5"),
            ("eta = 0.03", "eta = 0.03\nbogus = 1"),
        ] {
            let text = SAMPLE.replace(from, to);
            assert!(
                matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))),
                "{to}"
            );
        }
    }

    #[test]
    fn binary_defaults() {
        let text = SAMPLE.replace(
            "kind = \"csv\"\npath = \"puma8nh.csv\"",
            "kind = \"binary_add\"\nn = 3",
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.loss_kind(), LossKind::CrossEntropy);
        assert_eq!(
            cfg.task,
            TaskConfig::BinaryAdd {
                n: 3,
                horizon: 1000,
                cutoff: 50_000,
                encoding: BitEncoding::Signed,
            }
        );
    }
}
