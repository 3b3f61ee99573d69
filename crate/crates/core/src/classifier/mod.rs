//! Small differentiable matcher, its losses, the adaptive-moment optimizer and
//! cross-entropy pre-training with best-on-validation selection.

mod model;
mod optim;
mod train;

pub use model::{
    log_loss, log_loss_grad, Gradients, LossKind, MatcherModel, SoftTarget, LOGIT_CLAMP, PROB_CLAMP,
};
pub use optim::{adam_step, AdamConfig, OptimizerState};
pub use train::{
    evaluate_f1, predict_labels, pretrain, run_epoch, EpochLog, PretrainOutcome, TrainConfig,
};
