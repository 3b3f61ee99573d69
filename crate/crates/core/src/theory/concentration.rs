use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riskfeat::{ActivationVector, RiskFeature, RuleClass};
use crate::riskmodel::{DnnRiskFeature, RiskModel, DEFAULT_THETA};

pub const MIN_SAMPLES: usize = 1000;
const BLOCK: usize = 4096;

/// How the classifier output is drawn in each sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuHatDraw {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl MuHatDraw {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            MuHatDraw::Fixed { value } => value,
            MuHatDraw::Uniform { low, high } if high > low => rng.gen_range(low..high),
            MuHatDraw::Uniform { low, .. } => low,
        }
    }
}

/// Independent Bernoulli rule activations feeding one aggregated distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTrial {
    pub probabilities: Vec<f64>,
    pub weights: Vec<f64>,
    pub mu_f: Vec<f64>,
    pub sigma2_f: Vec<f64>,
    pub dnn: DnnRiskFeature,
    pub mu_hat: MuHatDraw,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub epsilon: f64,
    pub empirical_tail: f64,
    pub bound: f64,
    /// Three binomial standard deviations of a tail estimate at probability `bound`.
    pub slack: f64,
}

impl ConcentrationRow {
    pub fn within_bound(&self) -> bool {
        self.empirical_tail <= self.bound + self.slack
    }
}

impl ConcentrationTrial {
    pub fn m(&self) -> usize {
        self.probabilities.len()
    }

    /// A trial with `m` rules whose parameters are drawn from `seed`.
    pub fn random(m: usize, samples: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let probabilities = (0..m).map(|_| draw(0.05, 0.95)).collect();
        let weights = (0..m).map(|_| draw(0.1, 3.0)).collect();
        let mu_f = (0..m).map(|_| draw(0.0, 1.0)).collect();
        let sigma2_f = (0..m).map(|_| draw(0.001, 0.05)).collect();
        let u = draw(0.2, 3.0);
        Self {
            probabilities,
            weights,
            mu_f,
            sigma2_f,
            dnn: DnnRiskFeature {
                u,
                ..DnnRiskFeature::uniform(10)
            },
            mu_hat: MuHatDraw::Uniform {
                low: 0.0,
                high: 1.0,
            },
            samples,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        for (name, len) in [
            ("weights", self.weights.len()),
            ("mu_f", self.mu_f.len()),
            ("sigma2_f", self.sigma2_f.len()),
        ] {
            if len != m {
                return Err(Error::InvalidArgument(format!(
                    "{name} has {len} entries, expected {m}"
                )));
            }
        }
        if self
            .probabilities
            .iter()
            .chain(&self.mu_f)
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::InvalidArgument(
                "probabilities and rule means must lie in [0, 1]".into(),
            ));
        }
        if self.samples < MIN_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "at least {MIN_SAMPLES} samples are required, got {}",
                self.samples
            )));
        }
        match self.mu_hat {
            MuHatDraw::Fixed { value } if !(0.0..=1.0).contains(&value) => {
                return Err(Error::InvalidArgument(
                    "fixed classifier output must lie in [0, 1]".into(),
                ))
            }
            MuHatDraw::Uniform { low, high } if !(0.0 <= low && low <= high && high <= 1.0) => {
                return Err(Error::InvalidArgument(
                    "classifier output range must satisfy 0 <= low <= high <= 1".into(),
                ))
            }
            _ => {}
        }
        self.model()?.validate()
    }

    fn model(&self) -> Result<RiskModel> {
        let features = self
            .mu_f
            .iter()
            .zip(&self.sigma2_f)
            .enumerate()
            .map(|(j, (&mu, &sigma2))| RiskFeature {
                id: format!("z{j:03}"),
                conjunction: Vec::new(),
                class: if mu >= 0.5 {
                    RuleClass::Equivalent
                } else {
                    RuleClass::Inequivalent
                },
                coverage: 0,
                mu,
                sigma2,
            })
            .collect();
        let mut model = RiskModel::new(features, self.dnn.clone(), DEFAULT_THETA)?;
        model.weights = self.weights.clone();
        Ok(model)
    }

    /// Draws of `μ − kσ`, in sample order.
    pub fn sample_f(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let model = self.model()?;
        let blocks = self.samples.div_ceil(BLOCK);
        let parts = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(b as u64);
                let len = BLOCK.min(self.samples - b * BLOCK);
                (0..len)
                    .map(|_| {
                        let bits = self
                            .probabilities
                            .iter()
                            .map(|&p| rng.gen::<f64>() < p)
                            .collect();
                        let mu_hat = self.mu_hat.sample(&mut rng);
                        let d = model.aggregate(&ActivationVector { bits }, mu_hat)?;
                        Ok(d.mu - model.k * d.sigma())
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.concat())
    }
}

/// Empirical upper tail `P(f − E f ≥ ε)` next to `exp(−2ε²/(m+1))`.
pub fn mcdiarmid_trial(
    trial: &ConcentrationTrial,
    eps_grid: &[f64],
) -> Result<Vec<ConcentrationRow>> {
    if eps_grid.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument(
            "epsilon grid values must be finite and non-negative".into(),
        ));
    }
    let f = trial.sample_f()?;
    let n = f.len() as f64;
    let mean = f.iter().sum::<f64>() / n;
    let vars = trial.m() as f64 + 1.0;
    Ok(eps_grid
        .iter()
        .map(|&epsilon| {
            let hits = f.iter().filter(|&&v| v - mean >= epsilon).count();
            let bound = (-2.0 * epsilon * epsilon / vars).exp();
            ConcentrationRow {
                epsilon,
                empirical_tail: hits as f64 / n,
                bound,
                slack: 3.0 * (bound * (1.0 - bound) / n).sqrt(),
            }
        })
        .collect())
}

pub fn concentration_table(rows: &[ConcentrationRow]) -> String {
    let mut out = String::from("epsilon,empirical_tail,bound,slack\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            r.epsilon, r.empirical_tail, r.bound, r.slack
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: [f64; 6] = [0.0, 0.02, 0.05, 0.1, 0.2, 0.4];

    #[test]
    fn zero_epsilon_row() {
        let rows = mcdiarmid_trial(&ConcentrationTrial::random(8, 2000, 1), &[0.0]).unwrap();
        assert_eq!(rows[0].bound, 1.0);
        assert!(rows[0].empirical_tail <= 1.0);
    }

    #[test]
    fn deterministic_activations_have_no_tail() {
        let mut t = ConcentrationTrial::random(6, 2000, 2);
        t.probabilities = vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        t.mu_hat = MuHatDraw::Fixed { value: 0.3 };
        for r in mcdiarmid_trial(&t, &GRID[1..]).unwrap() {
            assert_eq!(r.empirical_tail, 0.0, "eps {}", r.epsilon);
        }
    }

    #[test]
    fn tail_within_bound() {
        for seed in 0..3 {
            let t = ConcentrationTrial::random(10, 20_000, seed);
            for r in mcdiarmid_trial(&t, &GRID).unwrap() {
                assert!(r.within_bound(), "{r:?}");
            }
        }
    }

    #[test]
    fn samples_are_reproducible_and_block_independent() {
        let t = ConcentrationTrial::random(5, 10_000, 9);
        let a = t.sample_f().unwrap();
        assert_eq!(a, t.sample_f().unwrap());
        assert_eq!(a.len(), 10_000);
        let short = ConcentrationTrial { samples: 5000, ..t };
        assert_eq!(&a[..5000], short.sample_f().unwrap().as_slice());
    }

    #[test]
    fn preconditions() {
        let mut t = ConcentrationTrial::random(4, 999, 0);
        assert!(mcdiarmid_trial(&t, &GRID).is_err());
        t.samples = 1000;
        t.probabilities[0] = 1.5;
        assert!(mcdiarmid_trial(&t, &GRID).is_err());
        t.probabilities[0] = 0.5;
        t.weights.pop();
        assert!(t.validate().is_err());
        let t = ConcentrationTrial::random(4, 1000, 0);
        assert!(mcdiarmid_trial(&t, &[-0.1]).is_err());
    }
}
