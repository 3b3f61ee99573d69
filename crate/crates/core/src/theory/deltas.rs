use serde::{Deserialize, Serialize};

use super::bound::Direction;
use crate::error::{Error, Result};
use crate::riskmodel::{RiskInput, RiskModel};

/// Classifier evidence of one pair: normalized weight share, output and its spread.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnnEvidence {
    pub weight: f64,
    pub mu_hat: f64,
    pub sigma_hat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub direction: Direction,
    /// Mean `ΔVaR` over correct opposite-type instances ranked below the pair.
    pub delta_var: f64,
    pub delta_c_lemma: f64,
    pub delta_c_simple: f64,
    /// Correct opposite-type instances with `ΔVaR > delta_c_simple`.
    pub supporters: usize,
    pub candidates: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// `max{E w⁺(μ̂⁺ − 2σ̂⁺) − E w⁻(μ̂⁻ − 2σ̂⁻), E w⁺μ̂⁺ − E w⁻μ̂⁻}` with `+` the correct
/// population and `−` the mispredicted one, outputs oriented towards the true class.
pub fn delta_c_lemma(correct: &[DnnEvidence], mispredicted: &[DnnEvidence]) -> Result<f64> {
    if correct.is_empty() || mispredicted.is_empty() {
        return Err(Error::Empty("populations for the ΔC bound"));
    }
    let low = |e: &DnnEvidence| e.weight * (e.mu_hat - 2.0 * e.sigma_hat);
    let mid = |e: &DnnEvidence| e.weight * e.mu_hat;
    let a = mean(correct.iter().map(low)) - mean(mispredicted.iter().map(low));
    let b = mean(correct.iter().map(mid)) - mean(mispredicted.iter().map(mid));
    Ok(a.max(b))
}

/// Mean weight share of the correct population.
pub fn delta_c_simple(correct: &[DnnEvidence]) -> Result<f64> {
    if correct.is_empty() {
        return Err(Error::Empty("correct population for the ΔC bound"));
    }
    Ok(mean(correct.iter().map(|e| e.weight)))
}

/// ΔVaR and ΔC estimates for the mispredicted pair at `index`.
///
/// `truth` is evaluation-only ground truth aligned with `inputs`.
pub fn estimate_deltas(
    model: &RiskModel,
    inputs: &[RiskInput],
    truth: &[bool],
    index: usize,
) -> Result<DeltaEstimate> {
    if inputs.len() != truth.len() {
        return Err(Error::Dimension {
            expected: inputs.len(),
            actual: truth.len(),
        });
    }
    let pair = inputs
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("pair index {index} out of range")))?;
    let target = truth[index];
    if pair.predicted_match() == target {
        return Err(Error::InvalidArgument(format!(
            "pair `{}` is not mispredicted",
            pair.id
        )));
    }
    let direction = if target {
        Direction::FalseNegative
    } else {
        Direction::FalsePositive
    };

    // Orient every output so that larger means "closer to the pair's true class".
    let orient = |p: f64| if target { p } else { 1.0 - p };
    let mut correct = Vec::new();
    let mut mispredicted = Vec::new();
    let mut correct_risk = Vec::new();
    for (x, &t) in inputs.iter().zip(truth) {
        if t != target {
            continue;
        }
        let ev = DnnEvidence {
            weight: model.dnn_share(&x.activation, x.mu_hat),
            mu_hat: orient(x.mu_hat),
            sigma_hat: model.dnn.sigma2_at(x.mu_hat).sqrt(),
        };
        if x.predicted_match() == t {
            correct.push(ev);
            let d = model.aggregate(&x.activation, x.mu_hat)?;
            correct_risk.push(model.score_var(&d).of_prediction(t));
        } else {
            mispredicted.push(ev);
        }
    }
    let dist = model.aggregate(&pair.activation, pair.mu_hat)?;
    let own = model.score_var(&dist).of_prediction(pair.predicted_match());
    let simple = delta_c_simple(&correct)?;
    let lemma = delta_c_lemma(&correct, &mispredicted)?;
    let below: Vec<f64> = correct_risk
        .iter()
        .map(|r| own - r)
        .filter(|d| *d > 0.0)
        .collect();
    Ok(DeltaEstimate {
        direction,
        delta_var: mean(below.iter().copied()),
        delta_c_lemma: lemma,
        delta_c_simple: simple,
        supporters: below.iter().filter(|d| **d > simple).count(),
        candidates: correct.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::{supporter_counts, PairRisk, Snapshot};
    use crate::riskfeat::{ActivationVector, RiskFeature, RuleClass};
    use crate::riskmodel::{DnnRiskFeature, DEFAULT_THETA};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture(seed: u64, n: usize) -> (RiskModel, Vec<RiskInput>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<RiskFeature> = (0..4)
            .map(|j| RiskFeature {
                id: format!("r{j}"),
                conjunction: Vec::new(),
                class: if j % 2 == 0 {
                    RuleClass::Equivalent
                } else {
                    RuleClass::Inequivalent
                },
                coverage: 1,
                mu: if j % 2 == 0 { 0.9 } else { 0.1 },
                sigma2: 0.01,
            })
            .collect();
        let mut model =
            RiskModel::new(features, DnnRiskFeature::uniform(10), DEFAULT_THETA).unwrap();
        model.dnn.u = 1.5;
        let mut inputs = Vec::new();
        let mut truth = Vec::new();
        for i in 0..n {
            let t = rng.gen_bool(0.4);
            let bits = (0..4)
                .map(|j| rng.gen_bool(if (j % 2 == 0) == t { 0.6 } else { 0.1 }))
                .collect();
            let noisy = rng.gen_bool(0.2);
            let mu_hat: f64 = if t != noisy {
                rng.gen_range(0.5..1.0)
            } else {
                rng.gen_range(0.0..0.5)
            };
            inputs.push(RiskInput {
                id: format!("p{i:03}"),
                activation: ActivationVector { bits },
                mu_hat,
            });
            truth.push(t);
        }
        (model, inputs, truth)
    }

    #[test]
    fn zero_weight_gives_zero_simple_bound() {
        let ev = [DnnEvidence {
            weight: 0.0,
            mu_hat: 0.8,
            sigma_hat: 0.1,
        }; 3];
        assert_eq!(delta_c_simple(&ev).unwrap(), 0.0);
    }

    #[test]
    fn lemma_below_simple_when_premise_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let mut draw = |k: usize| -> Vec<DnnEvidence> {
                (0..k)
                    .map(|_| {
                        let mu_hat: f64 = rng.gen_range(0.0..1.0);
                        let room = mu_hat.min(1.0 - mu_hat) / 2.0;
                        DnnEvidence {
                            weight: rng.gen_range(0.0..1.0),
                            mu_hat,
                            sigma_hat: rng.gen_range(0.0..=room),
                        }
                    })
                    .collect()
            };
            let (c, m) = (draw(7), draw(5));
            assert!(delta_c_lemma(&c, &m).unwrap() <= delta_c_simple(&c).unwrap() + 1e-12);
        }
    }

    #[test]
    fn lemma_can_exceed_simple_without_premise() {
        let c = [DnnEvidence {
            weight: 0.5,
            mu_hat: 1.0,
            sigma_hat: 0.0,
        }];
        let m = [DnnEvidence {
            weight: 0.5,
            mu_hat: 0.0,
            sigma_hat: 0.5,
        }];
        assert!(delta_c_lemma(&c, &m).unwrap() > delta_c_simple(&c).unwrap());
    }

    #[test]
    fn lemma_matches_hand_computation() {
        let c = [
            DnnEvidence {
                weight: 0.4,
                mu_hat: 0.9,
                sigma_hat: 0.1,
            },
            DnnEvidence {
                weight: 0.2,
                mu_hat: 0.7,
                sigma_hat: 0.05,
            },
        ];
        let m = [DnnEvidence {
            weight: 0.3,
            mu_hat: 0.3,
            sigma_hat: 0.1,
        }];
        // low: (0.4*0.7 + 0.2*0.6)/2 − 0.3*0.1 = 0.2 − 0.03 = 0.17
        // mid: (0.36 + 0.14)/2 − 0.09 = 0.25 − 0.09 = 0.16
        assert!((delta_c_lemma(&c, &m).unwrap() - 0.17).abs() < 1e-12);
        assert!((delta_c_simple(&c).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn supporters_agree_with_ledger_counts() {
        let (model, inputs, truth) = fixture(11, 300);
        let mut risk = Vec::new();
        for x in &inputs {
            let d = model.aggregate(&x.activation, x.mu_hat).unwrap();
            let s = model.score_var(&d);
            risk.push(PairRisk {
                var_plus: s.var_plus,
                var_minus: s.var_minus,
                dnn_share: model.dnn_share(&x.activation, x.mu_hat),
            });
        }
        let snap = Snapshot {
            predictions: inputs.iter().map(|x| x.predicted_match()).collect(),
            risk: Some(risk),
        };
        let (counts, dc_fn, dc_fp) = supporter_counts(&snap, &truth).unwrap();
        let mut seen = 0;
        for i in 0..inputs.len() {
            if let Some(c) = counts[i] {
                let est = estimate_deltas(&model, &inputs, &truth, i).unwrap();
                assert_eq!(est.supporters, c);
                let dc = if truth[i] { dc_fn } else { dc_fp };
                assert!((est.delta_c_simple - dc).abs() < 1e-12);
                assert!(est.delta_var >= 0.0);
                seen += 1;
            } else {
                assert!(estimate_deltas(&model, &inputs, &truth, i).is_err());
            }
        }
        assert!(seen > 10);
    }
}
