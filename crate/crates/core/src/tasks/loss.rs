use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::sigmoid;

/// Probabilities are clamped to `[CE_CLAMP, 1 - CE_CLAMP]` before taking logs.
pub const CE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `0.5 (d - d̂)²` on the linear readout.
    Squared,
    /// Binary relative entropy on `σ(ϑᵀh)`.
    CrossEntropy,
}

impl LossKind {
    /// Maps the linear readout `ϑᵀh` to the model prediction.
    pub fn output(self, z: f64) -> f64 {
        match self {
            Self::Squared => z,
            Self::CrossEntropy => sigmoid(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    /// Derivative of the loss with respect to the linear readout, `d̂ - d`.
    pub residual: f64,
    /// The prediction sat on 0 or 1 and was clamped before the log.
    pub clamped: bool,
}

/// Loss and readout residual. Both kinds share the residual form `prediction - target`.
pub fn loss_and_residual(prediction: f64, target: f64, kind: LossKind) -> Result<LossValue> {
    match kind {
        LossKind::Squared => {
            let r = prediction - target;
            Ok(LossValue {
                loss: 0.5 * r * r,
                residual: r,
                clamped: false,
            })
        }
        LossKind::CrossEntropy => {
            if !(0.0..=1.0).contains(&prediction) {
                return Err(Error::Domain(format!(
                    "cross-entropy prediction {prediction} outside (0, 1)"
                )));
            }
            let p = prediction.clamp(CE_CLAMP, 1.0 - CE_CLAMP);
            let loss = -target * p.ln() - (1.0 - target) * (1.0 - p).ln();
            Ok(LossValue {
                loss,
                residual: prediction - target,
                clamped: p != prediction,
            })
        }
    }
}
