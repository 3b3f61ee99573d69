use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ledger::{FlipLedger, PairRisk};
use super::loss::RiskWeights;
use crate::classifier::{
    evaluate_f1, pretrain, run_epoch, MatcherModel, OptimizerState, TrainConfig,
};
use crate::corpus::{DatasetSplit, FeatureVector, LabeledPair};
use crate::error::{Error, Result};
use crate::metrics;
use crate::riskfeat::{induce_rules, RuleParams};
use crate::riskmodel::{
    dnn_feature_fit, fit_ranking, risk_inputs, RankFitConfig, RiskInput, RiskModel, RiskScore,
    DEFAULT_BINS, DEFAULT_THETA,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    /// `train.risk_epochs` sets the number of risk iterations.
    pub train: TrainConfig,
    pub rules: RuleParams,
    pub rank: RankFitConfig,
    pub theta: f64,
    pub bins: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            rules: RuleParams::default(),
            rank: RankFitConfig::default(),
            theta: DEFAULT_THETA,
            bins: DEFAULT_BINS,
        }
    }
}

impl AdaptConfig {
    /// Same config with every component seed replaced by `seed`.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.train.seed = seed;
        c.rules.seed = seed;
        c.rank.seed = seed;
        c
    }
}

/// A target-workload pair as the optimizer sees it: no label.
#[derive(Clone, Debug, PartialEq)]
pub struct UnlabeledPair {
    pub id: String,
    pub features: FeatureVector,
}

/// Separates a labeled workload into its training view and the held-back truth.
pub fn unlabeled(pairs: &[LabeledPair]) -> (Vec<UnlabeledPair>, Vec<bool>) {
    pairs
        .iter()
        .map(|p| {
            (
                UnlabeledPair {
                    id: p.id.clone(),
                    features: p.features.clone(),
                },
                p.equivalent,
            )
        })
        .unzip()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Risk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub phase: Phase,
    pub index: usize,
    pub train_loss: f64,
    pub validation_f1: f64,
    pub test_f1: Option<f64>,
}

pub fn write_metrics_log(path: impl AsRef<Path>, log: &[MetricsRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in log {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Format(e.to_string()))?;
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Mutable state carried between risk iterations.
#[derive(Clone, Debug)]
pub struct AdaptState {
    pub classifier: MatcherModel,
    pub risk_model: RiskModel,
    optimizer: OptimizerState,
    pub iteration: usize,
}

impl AdaptState {
    pub fn new(classifier: MatcherModel, risk_model: RiskModel) -> Self {
        let optimizer = OptimizerState::new(classifier.params().len());
        Self {
            classifier,
            risk_model,
            optimizer,
            iteration: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IterationOutcome {
    /// Weights used for this iteration's update, computed before it.
    pub weights: RiskWeights,
    pub risks: Vec<PairRisk>,
    pub refit: bool,
    pub train_loss: f64,
    pub predictions: Vec<bool>,
}

/// Rules induced on the training split and an unfitted risk model around them.
pub fn initial_risk_model(
    train: &[LabeledPair],
    classifier: &MatcherModel,
    risk_validation: &[LabeledPair],
    config: &AdaptConfig,
) -> Result<RiskModel> {
    let rules = induce_rules(train, &config.rules)?;
    let inputs = risk_inputs(&rules, classifier, risk_validation)?;
    let mu_hat: Vec<f64> = inputs.iter().map(|i| i.mu_hat).collect();
    let truth: Vec<bool> = risk_validation.iter().map(|p| p.equivalent).collect();
    let dnn = dnn_feature_fit(&mu_hat, &truth, config.bins)?;
    RiskModel::new(rules, dnn, config.theta)
}

fn target_inputs(
    model: &RiskModel,
    classifier: &MatcherModel,
    test: &[UnlabeledPair],
) -> Result<Vec<RiskInput>> {
    use rayon::prelude::*;
    test.par_iter()
        .map(|p| {
            Ok(RiskInput {
                id: p.id.clone(),
                activation: crate::riskfeat::activate(&model.features, &p.features),
                mu_hat: classifier.predict_proba(p.features.as_slice())?,
            })
        })
        .collect()
}

/// Refit the risk model on validation, freeze risk weights on the target workload,
/// then run one epoch of risk-weighted training.
pub fn risk_iteration(
    state: &mut AdaptState,
    risk_validation: &[LabeledPair],
    test: &[UnlabeledPair],
    config: &AdaptConfig,
) -> Result<IterationOutcome> {
    if test.is_empty() {
        return Err(Error::Empty("target workload"));
    }
    let k = state.iteration;
    let val_inputs = risk_inputs(
        &state.risk_model.features,
        &state.classifier,
        risk_validation,
    )?;
    let truth: Vec<bool> = risk_validation.iter().map(|p| p.equivalent).collect();
    let mu_hat: Vec<f64> = val_inputs.iter().map(|i| i.mu_hat).collect();
    let mut candidate = state.risk_model.clone();
    let u = candidate.dnn.u;
    candidate.dnn = dnn_feature_fit(&mu_hat, &truth, config.bins)?;
    candidate.dnn.u = u;
    let rank = RankFitConfig {
        seed: config.rank.seed.wrapping_add(k as u64),
        ..config.rank.clone()
    };
    let refit = match fit_ranking(&candidate, &val_inputs, &truth, &rank) {
        Ok(m) => {
            state.risk_model = m;
            true
        }
        Err(Error::DegenerateRanking { .. }) => false,
        Err(e) => return Err(e),
    };

    let model = &state.risk_model;
    let inputs = target_inputs(model, &state.classifier, test)?;
    let mut scores: Vec<RiskScore> = Vec::with_capacity(inputs.len());
    let mut risks = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let dist = model.aggregate(&input.activation, input.mu_hat)?;
        let s = model.score_var(&dist);
        scores.push(s);
        risks.push(PairRisk {
            var_plus: s.var_plus,
            var_minus: s.var_minus,
            dnn_share: model.dnn_share(&input.activation, input.mu_hat),
        });
    }
    let weights = RiskWeights::from_scores(k, &scores);

    let xs: Vec<&[f64]> = test.iter().map(|p| p.features.as_slice()).collect();
    let mut rng = config.train.shuffle_rng(1 + k as u64);
    let train_loss = run_epoch(
        &mut state.classifier,
        &mut state.optimizer,
        &xs,
        &weights.targets(),
        &config.train.risk_adam(),
        config.train.batch_size,
        &mut rng,
    )?;
    state.iteration += 1;
    let predictions = state
        .classifier
        .predict_many(xs.iter().copied())?
        .into_iter()
        .map(|g| g >= 0.5)
        .collect();
    Ok(IterationOutcome {
        weights,
        risks,
        refit,
        train_loss,
        predictions,
    })
}

#[derive(Clone, Debug)]
pub struct AdaptOutcome {
    pub pretrained: MatcherModel,
    /// Last phase-2 iterate.
    pub classifier: MatcherModel,
    pub risk_model: RiskModel,
    pub ledger: FlipLedger,
    pub log: Vec<MetricsRecord>,
}

fn labels_of(model: &MatcherModel, xs: &[&[f64]]) -> Result<Vec<bool>> {
    Ok(model
        .predict_many(xs.iter().copied())?
        .into_iter()
        .map(|g| g >= 0.5)
        .collect())
}

/// Phase 2 from a pre-trained classifier; `train` supplies the rules, `risk_validation`
/// fits the risk model and `test` truth reaches only the ledger and log.
pub fn finetune(
    pretrained: MatcherModel,
    train: &[LabeledPair],
    risk_validation: &[LabeledPair],
    test: &[LabeledPair],
    config: &AdaptConfig,
) -> Result<AdaptOutcome> {
    config.train.validate()?;
    let (target, truth) = unlabeled(test);
    let risk_model = initial_risk_model(train, &pretrained, risk_validation, config)?;
    let mut ledger = FlipLedger::new(target.iter().map(|p| p.id.clone()).collect(), truth)?;
    let xs: Vec<&[f64]> = target.iter().map(|p| p.features.as_slice()).collect();
    ledger.record(labels_of(&pretrained, &xs)?)?;
    let mut state = AdaptState::new(pretrained.clone(), risk_model);
    let mut log = Vec::with_capacity(config.train.risk_epochs);
    for k in 0..config.train.risk_epochs {
        let out = risk_iteration(&mut state, risk_validation, &target, config)?;
        ledger.attach_risk(out.risks)?;
        let test_f1 = metrics::f1(&out.predictions, ledger.truth())?.f1;
        ledger.record(out.predictions)?;
        log.push(MetricsRecord {
            phase: Phase::Risk,
            index: k + 1,
            train_loss: out.train_loss,
            validation_f1: evaluate_f1(&state.classifier, risk_validation)?,
            test_f1: Some(test_f1),
        });
    }
    Ok(AdaptOutcome {
        pretrained,
        classifier: state.classifier,
        risk_model: state.risk_model,
        ledger,
        log,
    })
}

pub fn adaptive_train(split: &DatasetSplit, config: &AdaptConfig) -> Result<AdaptOutcome> {
    adaptive_train_with(split, None, config)
}

/// Full two-phase run; `risk_validation` replaces the validation split for risk fitting only.
pub fn adaptive_train_with(
    split: &DatasetSplit,
    risk_validation: Option<&[LabeledPair]>,
    config: &AdaptConfig,
) -> Result<AdaptOutcome> {
    let dim = split
        .train
        .first()
        .ok_or(Error::Empty("training split"))?
        .features
        .len();
    let init = MatcherModel::init(dim, config.train.hidden_units, config.train.seed);
    let pre = pretrain(init, &split.train, &split.validation, &config.train)?;
    let mut log: Vec<MetricsRecord> = pre
        .log
        .iter()
        .map(|e| MetricsRecord {
            phase: Phase::Pretrain,
            index: e.epoch,
            train_loss: e.train_loss,
            validation_f1: e.validation_f1,
            test_f1: None,
        })
        .collect();
    let mut out = finetune(
        pre.model,
        &split.train,
        risk_validation.unwrap_or(&split.validation),
        &split.test,
        config,
    )?;
    log.append(&mut out.log);
    out.log = log;
    Ok(out)
}
