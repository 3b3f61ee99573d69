use serde::{Deserialize, Serialize};

use crate::classifier::{LossKind, MatcherModel, SoftTarget};
use crate::error::{Error, Result};
use crate::riskmodel::RiskScore;

/// Per-pair `(1 − VaR⁺, 1 − VaR⁻)` frozen for one risk iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskWeights {
    pub iteration: usize,
    pub values: Vec<(f64, f64)>,
}

impl RiskWeights {
    pub fn from_scores(iteration: usize, scores: &[RiskScore]) -> Self {
        Self {
            iteration,
            values: scores
                .iter()
                .map(|s| (1.0 - s.var_plus, 1.0 - s.var_minus))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn targets(&self) -> Vec<SoftTarget> {
        self.values
            .iter()
            .map(|&(pos, neg)| SoftTarget { pos, neg })
            .collect()
    }
}

/// Mean of `−(1−VaR⁺)·ln g − (1−VaR⁻)·ln(1−g)` over the target workload.
pub fn risk_loss(model: &MatcherModel, xs: &[&[f64]], weights: &RiskWeights) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("target workload"));
    }
    if xs.len() != weights.len() {
        return Err(Error::Dimension {
            expected: xs.len(),
            actual: weights.len(),
        });
    }
    model.loss(xs, LossKind::Risk(&weights.targets()))
}
