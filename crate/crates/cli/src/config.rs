use std::path::{Path, PathBuf};

use riskadapt::adapt::AdaptConfig;
use riskadapt::classifier::TrainConfig;
use riskadapt::corpus::{AttributeSpec, Schema, SplitRatios, SyntheticSpec};
use riskadapt::riskfeat::RuleParams;
use riskadapt::riskmodel::{RankFitConfig, DEFAULT_BINS, DEFAULT_THETA};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Record files of a two-source workload plus labeled candidate pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSources {
    pub left: PathBuf,
    pub right: PathBuf,
    pub pairs: PathBuf,
    pub schema: Vec<AttributeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_min_shared")]
    pub min_shared_tokens: usize,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub files: Option<FileSources>,
}

fn default_min_shared() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskSettings {
    pub theta: f64,
    pub bins: usize,
}

impl Default for RiskSettings {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            bins: DEFAULT_BINS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default = "standard_ratios")]
    pub split: SplitRatios,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub rules: RuleParams,
    #[serde(default)]
    pub rank: RankFitConfig,
    #[serde(default)]
    pub risk: RiskSettings,
}

fn standard_ratios() -> SplitRatios {
    SplitRatios::STANDARD
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(files) = &mut cfg.data.files {
            for p in [&mut files.left, &mut files.right, &mut files.pairs] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        if let Some(out) = &mut cfg.out {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.data.synthetic, &self.data.files) {
            (Some(s), None) => s.validate()?,
            (None, Some(f)) => {
                Schema::new(f.schema.clone())?;
            }
            _ => {
                return Err(CliError::Usage(
                    "[data] needs exactly one of a `synthetic` spec or `files` sources".into(),
                ))
            }
        }
        if self.data.min_shared_tokens == 0 {
            return Err(CliError::Usage(
                "data.min_shared_tokens must be at least 1".into(),
            ));
        }
        self.split.validate()?;
        self.adapt().train.validate()?;
        self.rules.validate()?;
        self.rank.validate()?;
        riskadapt::riskmodel::quantile_multiplier(self.risk.theta)?;
        if self.risk.bins == 0 {
            return Err(CliError::Usage("risk.bins must be positive".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<Schema, CliError> {
        Ok(match &self.data.files {
            Some(f) => Schema::new(f.schema.clone())?,
            None => riskadapt::corpus::bibliographic_schema(),
        })
    }

    /// Training configuration with every component seed set to the run seed.
    pub fn adapt(&self) -> AdaptConfig {
        AdaptConfig {
            train: self.train.clone(),
            rules: self.rules.clone(),
            rank: self.rank.clone(),
            theta: self.risk.theta,
            bins: self.risk.bins,
        }
        .reseeded(self.seed)
    }

    /// Identity of everything `prepare` consumes.
    pub fn data_key(&self) -> String {
        let v = serde_json::json!({ "seed": self.seed, "data": self.data, "split": self.split });
        crate::artifacts::sha256_hex(v.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
[data.synthetic]
n_entities = 40
duplicates_per_entity = 2
corruption = [0.1, 0.2]
seed = 1
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.split, SplitRatios::STANDARD);
        assert_eq!(cfg.adapt().train.seed, 3);
        assert_eq!(cfg.data.min_shared_tokens, 2);
    }

    #[test]
    fn both_or_neither_source_rejected() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.data.files = Some(FileSources {
            left: "a".into(),
            right: "b".into(),
            pairs: "c".into(),
            schema: vec![AttributeSpec::text("title")],
        });
        assert!(cfg.validate().is_err());
        cfg.data.files = None;
        cfg.data.synthetic = None;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>(&format!("{MINIMAL}\n[bogus]\nx = 1\n")).is_err());
    }

    #[test]
    fn data_key_tracks_data_inputs_only() {
        let a: RunConfig = toml::from_str(MINIMAL).unwrap();
        let mut b = a.clone();
        b.train.learning_rate = 0.5;
        assert_eq!(a.data_key(), b.data_key());
        b.seed = 4;
        assert_ne!(a.data_key(), b.data_key());
    }
}
