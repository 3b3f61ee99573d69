use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound on a bin's label variance.
pub const SIGMA2_FLOOR: f64 = 1e-4;
pub const DEFAULT_BINS: usize = 10;
/// Keeps the classifier feature's weight strictly positive.
pub const DNN_WEIGHT_FLOOR: f64 = 1e-3;

/// The classifier's own output treated as a risk feature, with per-confidence-bin variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnnRiskFeature {
    pub sigma2_hat: Vec<f64>,
    pub u: f64,
}

impl DnnRiskFeature {
    /// Uncalibrated feature: every bin at the floor is too optimistic, so use Bernoulli(0.5).
    pub fn uniform(bins: usize) -> Self {
        Self {
            sigma2_hat: vec![0.25; bins.max(1)],
            u: 1.0,
        }
    }

    pub fn bins(&self) -> usize {
        self.sigma2_hat.len()
    }

    pub fn bin_of(&self, mu_hat: f64) -> usize {
        let b = self.bins();
        ((mu_hat * b as f64).floor().max(0.0) as usize).min(b - 1)
    }

    pub fn sigma2_at(&self, mu_hat: f64) -> f64 {
        self.sigma2_hat[self.bin_of(mu_hat)]
    }

    /// `ŵ = u·2|μ̂ − 0.5| + floor`.
    pub fn weight(&self, mu_hat: f64) -> f64 {
        self.u * confidence(mu_hat) + DNN_WEIGHT_FLOOR
    }
}

pub(crate) fn confidence(mu_hat: f64) -> f64 {
    2.0 * (mu_hat - 0.5).abs()
}

/// Calibrates per-bin label variance from classifier outputs and true labels.
pub fn dnn_feature_fit(mu_hat: &[f64], labels: &[bool], bins: usize) -> Result<DnnRiskFeature> {
    if mu_hat.is_empty() {
        return Err(Error::Empty("calibration predictions"));
    }
    if mu_hat.len() != labels.len() {
        return Err(Error::Dimension {
            expected: mu_hat.len(),
            actual: labels.len(),
        });
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bin count must be positive".into()));
    }
    let mut feature = DnnRiskFeature {
        sigma2_hat: vec![0.0; bins],
        u: 1.0,
    };
    let mut n = vec![0usize; bins];
    let mut pos = vec![0usize; bins];
    for (&g, &y) in mu_hat.iter().zip(labels) {
        let b = feature.bin_of(g);
        n[b] += 1;
        pos[b] += usize::from(y);
    }
    let filled: Vec<Option<f64>> = (0..bins)
        .map(|b| {
            (n[b] > 0).then(|| {
                let p = pos[b] as f64 / n[b] as f64;
                (p * (1.0 - p)).max(SIGMA2_FLOOR)
            })
        })
        .collect();
    for b in 0..bins {
        feature.sigma2_hat[b] = match filled[b] {
            Some(v) => v,
            None => {
                let left = filled[..b].iter().rev().find_map(|v| *v);
                let right = filled[b + 1..].iter().find_map(|v| *v);
                match (left, right) {
                    (Some(l), Some(r)) => 0.5 * (l + r),
                    (Some(v), None) | (None, Some(v)) => v,
                    (None, None) => unreachable!("at least one bin is populated"),
                }
            }
        };
    }
    Ok(feature)
}
