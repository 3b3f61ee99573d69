use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{LossKind, MatcherModel, SoftTarget};
use super::optim::{adam_step, AdamConfig, OptimizerState};
use crate::corpus::LabeledPair;
use crate::error::{Error, Result};
use crate::metrics;

const SHUFFLE_SALT: u64 = 0x5bd1_e995;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub pretrain_epochs: usize,
    pub risk_epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub hidden_units: usize,
    /// Phase-2 learning rate as a multiple of `learning_rate`.
    pub risk_lr_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            pretrain_epochs: 20,
            risk_epochs: 10,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            hidden_units: 32,
            risk_lr_scale: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.risk_lr_scale.is_finite() && self.risk_lr_scale > 0.0) {
            return bad("risk_lr_scale must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.pretrain_epochs == 0 || self.batch_size == 0 || self.hidden_units == 0 {
            return bad("pretrain_epochs, batch_size and hidden_units must be at least 1");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn risk_adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate * self.risk_lr_scale,
            ..self.adam()
        }
    }

    pub fn shuffle_rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ SHUFFLE_SALT);
        rng.set_stream(stream);
        rng
    }
}

/// One shuffled pass of mini-batch updates; returns the mean batch loss.
pub fn run_epoch(
    model: &mut MatcherModel,
    state: &mut OptimizerState,
    xs: &[&[f64]],
    targets: &[SoftTarget],
    adam: &AdamConfig,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if xs.len() != targets.len() {
        return Err(Error::Dimension {
            expected: xs.len(),
            actual: targets.len(),
        });
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(batch_size.max(1)) {
        let bx: Vec<&[f64]> = chunk.iter().map(|&i| xs[i]).collect();
        let bt: Vec<SoftTarget> = chunk.iter().map(|&i| targets[i]).collect();
        let (loss, grads) = model.backward(&bx, LossKind::Risk(&bt))?;
        adam_step(model.params_mut(), state, &grads.values, adam)?;
        total += loss;
        batches += 1;
    }
    Ok(total / batches as f64)
}

pub fn predict_labels(model: &MatcherModel, pairs: &[LabeledPair]) -> Result<Vec<bool>> {
    pairs
        .iter()
        .map(|p| Ok(model.predict_proba(p.features.as_slice())? >= 0.5))
        .collect()
}

pub fn evaluate_f1(model: &MatcherModel, pairs: &[LabeledPair]) -> Result<f64> {
    let predicted = predict_labels(model, pairs)?;
    let truth: Vec<bool> = pairs.iter().map(|p| p.equivalent).collect();
    Ok(metrics::f1(&predicted, &truth)?.f1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_f1: f64,
}

#[derive(Clone, Debug)]
pub struct PretrainOutcome {
    /// Checkpoint with the highest validation F1 (earliest on ties).
    pub model: MatcherModel,
    pub best_epoch: usize,
    pub final_model: MatcherModel,
    pub log: Vec<EpochLog>,
}

/// Cross-entropy training on `train` for `pretrain_epochs` epochs, selecting the best
/// epoch by validation F1.
pub fn pretrain(
    model: MatcherModel,
    train: &[LabeledPair],
    validation: &[LabeledPair],
    config: &TrainConfig,
) -> Result<PretrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if validation.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    let xs: Vec<&[f64]> = train.iter().map(|p| p.features.as_slice()).collect();
    let targets: Vec<SoftTarget> = train
        .iter()
        .map(|p| SoftTarget::label(p.equivalent))
        .collect();
    let adam = config.adam();
    let mut rng = config.shuffle_rng(0);
    let mut state = OptimizerState::new(model.params().len());
    let mut model = model;
    let mut best: Option<(f64, usize, MatcherModel)> = None;
    let mut log = Vec::with_capacity(config.pretrain_epochs);
    for epoch in 1..=config.pretrain_epochs {
        let train_loss = run_epoch(
            &mut model,
            &mut state,
            &xs,
            &targets,
            &adam,
            config.batch_size,
            &mut rng,
        )?;
        let validation_f1 = evaluate_f1(&model, validation)?;
        log.push(EpochLog {
            epoch,
            train_loss,
            validation_f1,
        });
        if best.as_ref().is_none_or(|(f, _, _)| validation_f1 > *f) {
            best = Some((validation_f1, epoch, model.clone()));
        }
    }
    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    Ok(PretrainOutcome {
        model: best_model,
        best_epoch,
        final_model: model,
        log,
    })
}
