use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::dnn::DnnRiskFeature;
use crate::error::{Error, Result};
use crate::riskfeat::{ActivationVector, RiskFeature};

pub const DEFAULT_THETA: f64 = 0.975;

/// Per-pair normal belief over the probability that the pair is equivalent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceDistribution {
    pub mu: f64,
    pub sigma2: f64,
}

impl EquivalenceDistribution {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub var_plus: f64,
    pub var_minus: f64,
}

impl RiskScore {
    /// Risk of the label the classifier assigned.
    pub fn of_prediction(&self, predicted_match: bool) -> f64 {
        if predicted_match {
            self.var_plus
        } else {
            self.var_minus
        }
    }
}

/// Quantile multiplier for confidence `theta`; the 0.975 level uses exactly 2.
pub fn quantile_multiplier(theta: f64) -> Result<f64> {
    if !(theta > 0.5 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must lie in (0.5, 1), got {theta}"
        )));
    }
    if theta == DEFAULT_THETA {
        return Ok(2.0);
    }
    Ok(Normal::standard().inverse_cdf(theta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskModel {
    pub features: Vec<RiskFeature>,
    pub weights: Vec<f64>,
    pub dnn: DnnRiskFeature,
    pub theta: f64,
    pub k: f64,
}

/// Evidence a risk model needs about one pair.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskInput {
    pub id: String,
    pub activation: ActivationVector,
    pub mu_hat: f64,
}

impl RiskInput {
    pub fn predicted_match(&self) -> bool {
        self.mu_hat >= 0.5
    }
}

impl RiskModel {
    /// Unit weights on every rule.
    pub fn new(features: Vec<RiskFeature>, dnn: DnnRiskFeature, theta: f64) -> Result<Self> {
        let k = quantile_multiplier(theta)?;
        let weights = vec![1.0; features.len()];
        Ok(Self {
            features,
            weights,
            dnn,
            theta,
            k,
        })
    }

    pub fn rule_count(&self) -> usize {
        self.features.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.features.len() {
            return Err(Error::Dimension {
                expected: self.features.len(),
                actual: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || !(self.dnn.u >= 0.0) {
            return Err(Error::InvalidArgument(
                "risk weights must be non-negative".into(),
            ));
        }
        if self.features.iter().any(|f| !(f.sigma2 >= 0.0))
            || self.dnn.sigma2_hat.iter().any(|s| !(*s > 0.0))
        {
            return Err(Error::InvalidArgument("variances must be positive".into()));
        }
        Ok(())
    }

    pub fn aggregate(&self, z: &ActivationVector, mu_hat: f64) -> Result<EquivalenceDistribution> {
        let w_hat = self.dnn.weight(mu_hat);
        self.aggregate_with_dnn_weight(z, mu_hat, w_hat)
    }

    /// Normalized weighted average of active rules and the classifier output.
    pub fn aggregate_with_dnn_weight(
        &self,
        z: &ActivationVector,
        mu_hat: f64,
        w_hat: f64,
    ) -> Result<EquivalenceDistribution> {
        if z.len() != self.features.len() {
            return Err(Error::Dimension {
                expected: self.features.len(),
                actual: z.len(),
            });
        }
        let s_hat = self.dnn.sigma2_at(mu_hat);
        let (mut mass, mut num, mut var) = (w_hat, w_hat * mu_hat, w_hat * w_hat * s_hat);
        for j in z.active() {
            let (w, f) = (self.weights[j], &self.features[j]);
            mass += w;
            num += w * f.mu;
            var += w * w * f.sigma2;
        }
        if !(mass > 0.0) {
            return Err(Error::Domain("total evidence weight is zero".into()));
        }
        Ok(EquivalenceDistribution {
            mu: (num / mass).clamp(0.0, 1.0),
            sigma2: var / (mass * mass),
        })
    }

    /// Classifier-feature weight divided by the pair's total evidence weight.
    pub fn dnn_share(&self, z: &ActivationVector, mu_hat: f64) -> f64 {
        let w_hat = self.dnn.weight(mu_hat);
        let mass: f64 = w_hat + z.active().map(|j| self.weights[j]).sum::<f64>();
        w_hat / mass
    }

    pub fn score_var(&self, dist: &EquivalenceDistribution) -> RiskScore {
        score_var(dist, self.k)
    }

    pub fn risk(&self, input: &RiskInput) -> Result<(EquivalenceDistribution, f64)> {
        let dist = self.aggregate(&input.activation, input.mu_hat)?;
        Ok((
            dist,
            self.score_var(&dist).of_prediction(input.predicted_match()),
        ))
    }
}

/// `VaR⁺ = 1 − (μ − kσ)`, `VaR⁻ = μ + kσ`, both clamped to `[0, 1]`.
pub fn score_var(dist: &EquivalenceDistribution, k: f64) -> RiskScore {
    let spread = k * dist.sigma();
    RiskScore {
        var_plus: ((1.0 - dist.mu) + spread).clamp(0.0, 1.0),
        var_minus: (dist.mu + spread).clamp(0.0, 1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedRisk {
    pub id: String,
    pub predicted_match: bool,
    pub risk: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Pairs in descending risk of their predicted label; ties by pair id.
pub fn rank_by_risk(model: &RiskModel, inputs: &[RiskInput]) -> Result<Vec<RankedRisk>> {
    use rayon::prelude::*;
    let mut ranked = inputs
        .par_iter()
        .map(|input| {
            let (dist, risk) = model.risk(input)?;
            Ok(RankedRisk {
                id: input.id.clone(),
                predicted_match: input.predicted_match(),
                risk,
                mu: dist.mu,
                sigma: dist.sigma(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.risk.total_cmp(&a.risk).then_with(|| a.id.cmp(&b.id)));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riskfeat::{RuleClass, INITIAL_SIGMA2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rule(mu: f64, sigma2: f64) -> RiskFeature {
        RiskFeature {
            id: String::new(),
            conjunction: Vec::new(),
            class: if mu >= 0.5 {
                RuleClass::Equivalent
            } else {
                RuleClass::Inequivalent
            },
            coverage: 1,
            mu,
            sigma2,
        }
    }

    fn z(bits: &[bool]) -> ActivationVector {
        ActivationVector {
            bits: bits.to_vec(),
        }
    }

    #[test]
    fn hand_worked_aggregate() {
        let mut m = RiskModel::new(
            vec![rule(0.9, 0.01), rule(0.3, 0.5), rule(0.1, 0.04)],
            DnnRiskFeature {
                sigma2_hat: vec![0.01; 10],
                u: 1.0,
            },
            DEFAULT_THETA,
        )
        .unwrap();
        m.weights = vec![2.0, 1.0, 1.0];
        let d = m
            .aggregate_with_dnn_weight(&z(&[true, false, true]), 0.5, 1.0)
            .unwrap();
        assert!((d.mu - 0.6).abs() < 1e-15);
        assert!((d.sigma2 - 0.005625).abs() < 1e-15);
        let only = m.aggregate(&z(&[false, false, false]), 0.8).unwrap();
        assert!((only.mu - 0.8).abs() < 1e-15);
        assert!((only.sigma2 - 0.01).abs() < 1e-15);
        assert!(m.aggregate(&z(&[true]), 0.5).is_err());
    }

    #[test]
    fn var_substitution() {
        let r = score_var(
            &EquivalenceDistribution {
                mu: 0.8,
                sigma2: 0.0025,
            },
            2.0,
        );
        assert!((r.var_plus - 0.3).abs() < 1e-15);
        assert!((r.var_minus - 0.9).abs() < 1e-15);
        let point = score_var(
            &EquivalenceDistribution {
                mu: 0.7,
                sigma2: 0.0,
            },
            2.0,
        );
        assert_eq!(point.var_plus, 1.0 - 0.7);
        assert_eq!(point.var_minus, 0.7);
    }

    #[test]
    fn multiplier() {
        assert_eq!(quantile_multiplier(0.975).unwrap(), 2.0);
        assert!((quantile_multiplier(0.95).unwrap() - 1.6448536269514722).abs() < 1e-9);
        assert!(quantile_multiplier(0.4).is_err());
        assert!(quantile_multiplier(1.0).is_err());
    }

    #[test]
    fn ranking_matches_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let feats: Vec<RiskFeature> = (0..6)
            .map(|_| rule(rng.gen_range(0.0..1.0), INITIAL_SIGMA2))
            .collect();
        let m = RiskModel::new(feats, DnnRiskFeature::uniform(10), DEFAULT_THETA).unwrap();
        let inputs: Vec<RiskInput> = (0..200)
            .map(|i| RiskInput {
                id: format!("p{i:03}"),
                activation: z(&(0..6).map(|_| rng.gen_bool(0.3)).collect::<Vec<_>>()),
                mu_hat: rng.gen_range(0.0..1.0),
            })
            .collect();
        let ranked = rank_by_risk(&m, &inputs).unwrap();
        let mut oracle: Vec<(f64, String)> = inputs
            .iter()
            .map(|i| {
                let d = m.aggregate(&i.activation, i.mu_hat).unwrap();
                let s = d.sigma2.sqrt();
                let r = if i.mu_hat >= 0.5 {
                    1.0 - d.mu + 2.0 * s
                } else {
                    d.mu + 2.0 * s
                };
                (r.clamp(0.0, 1.0), i.id.clone())
            })
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for (r, (risk, id)) in ranked.iter().zip(&oracle) {
            assert_eq!(&r.id, id);
            assert_eq!(r.risk, *risk);
        }
        let single = rank_by_risk(&m, &inputs[..1]).unwrap();
        assert_eq!(single.len(), 1);
    }

    proptest! {
        #[test]
        fn mu_is_convex_combination(
            mus in prop::collection::vec(0.0..=1.0f64, 1..8),
            ws in prop::collection::vec(0.0..5.0f64, 8),
            bits in prop::collection::vec(any::<bool>(), 8),
            mu_hat in 0.0..=1.0f64,
        ) {
            let m = mus.len();
            let mut model = RiskModel::new(
                mus.iter().map(|&u| rule(u, 0.02)).collect(),
                DnnRiskFeature::uniform(10),
                DEFAULT_THETA,
            ).unwrap();
            model.weights = ws[..m].to_vec();
            let zv = z(&bits[..m]);
            let d = model.aggregate(&zv, mu_hat).unwrap();
            let inputs: Vec<f64> = zv.active().map(|j| mus[j]).chain([mu_hat]).collect();
            let lo = inputs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = inputs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(d.mu >= lo - 1e-12 && d.mu <= hi + 1e-12);
            prop_assert!(d.sigma2 >= 0.0 && d.sigma2.is_finite());
        }

        #[test]
        fn var_duality(mu in 0.0..=1.0f64, sigma2 in 0.0..0.3f64) {
            let a = score_var(&EquivalenceDistribution { mu, sigma2 }, 2.0);
            let b = score_var(&EquivalenceDistribution { mu: 1.0 - mu, sigma2 }, 2.0);
            prop_assert_eq!(a.var_plus, b.var_minus);
        }

        /// The ordering follows μ unless both values saturate at 1, where the clamp ties them.
        #[test]
        fn var_sign_outside_saturation(mu in 0.0..=1.0f64, sigma in 0.0..=0.5f64) {
            let s = score_var(&EquivalenceDistribution { mu, sigma2: sigma * sigma }, 2.0);
            if s.var_plus == 1.0 && s.var_minus == 1.0 {
                prop_assert!(2.0 * sigma >= mu.max(1.0 - mu) - 1e-12);
            } else {
                prop_assert_eq!(s.var_plus < s.var_minus, mu > 0.5);
            }
        }
    }
}
