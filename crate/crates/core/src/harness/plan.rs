use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adapt::AdaptConfig;
use crate::corpus::{SplitRatios, SyntheticSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SameSource,
    Misaligned,
    Robustness,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::SameSource => "same_source",
            Scenario::Misaligned => "misaligned",
            Scenario::Robustness => "robustness",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenario: Scenario,
    #[serde(default)]
    pub fractions: Vec<f64>,
    #[serde(default)]
    pub validation_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Workload supplying the training split; per-run seed is added to its seed.
    pub source: SyntheticSpec,
    /// Workload supplying validation and test pairs when distributions are misaligned.
    #[serde(default)]
    pub target: Option<SyntheticSpec>,
    pub min_shared_tokens: usize,
    pub ratios: SplitRatios,
    #[serde(default)]
    pub adapt: AdaptConfig,
}

pub const SUFFICIENCY_LEVELS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 1.0];
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn spec(corruption: [f64; 2], sibling_rate: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_entities: 300,
        duplicates_per_entity: 4,
        corruption: corruption.to_vec(),
        sibling_rate,
        attribute_corruption: BTreeMap::new(),
        seed,
    }
}

fn fixture_adapt() -> AdaptConfig {
    let mut adapt = AdaptConfig::default();
    adapt.train.risk_lr_scale = 10.0;
    adapt
}

impl ExperimentPlan {
    /// Clean source with few near-duplicate siblings against a target dominated by them.
    pub fn standard_misaligned() -> Self {
        Self {
            scenario: Scenario::Misaligned,
            fractions: Vec::new(),
            validation_sizes: Vec::new(),
            seeds: DEFAULT_SEEDS.to_vec(),
            source: spec([0.1, 0.1], 0.1, 0),
            target: Some(spec([0.1, 0.1], 0.8, 1000)),
            min_shared_tokens: 2,
            ratios: SplitRatios::STANDARD,
            adapt: fixture_adapt(),
        }
    }

    pub fn standard_same_source() -> Self {
        Self {
            scenario: Scenario::SameSource,
            fractions: SUFFICIENCY_LEVELS.to_vec(),
            source: spec([0.1, 0.3], 0.1, 0),
            target: None,
            ..Self::standard_misaligned()
        }
    }

    pub fn standard_robustness() -> Self {
        Self {
            scenario: Scenario::Robustness,
            validation_sizes: vec![100, 500, 2000],
            ..Self::standard_misaligned()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.seeds.is_empty() {
            return bad("an experiment plan needs at least one seed".into());
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return bad(format!("sufficiency fraction {f} outside (0, 1]"));
        }
        match self.scenario {
            Scenario::SameSource if self.fractions.is_empty() => {
                return bad("same-source plan lists no fractions".into())
            }
            Scenario::Misaligned if self.target.is_none() => {
                return bad("misaligned plan needs a target workload".into())
            }
            Scenario::Robustness if self.validation_sizes.is_empty() => {
                return bad("robustness plan lists no validation sizes".into())
            }
            _ => {}
        }
        if self.validation_sizes.contains(&0) {
            return bad("validation sizes must be positive".into());
        }
        self.ratios.validate()?;
        self.source.validate()?;
        if let Some(t) = &self.target {
            t.validate()?;
        }
        self.adapt.train.validate()?;
        self.adapt.rules.validate()?;
        self.adapt.rank.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_plans_validate_and_round_trip() {
        for p in [
            ExperimentPlan::standard_misaligned(),
            ExperimentPlan::standard_same_source(),
            ExperimentPlan::standard_robustness(),
        ] {
            p.validate().unwrap();
            let back: ExperimentPlan = serde_json::from_str(&p.to_json()).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn rejects_bad_plans() {
        let mut p = ExperimentPlan::standard_same_source();
        p.fractions = vec![0.0];
        assert!(p.validate().is_err());
        p.fractions = vec![1.5];
        assert!(p.validate().is_err());
        let mut p = ExperimentPlan::standard_misaligned();
        p.seeds.clear();
        assert!(p.validate().is_err());
        let mut p = ExperimentPlan::standard_misaligned();
        p.target = None;
        assert!(p.validate().is_err());
    }
}
