//! Risk-based adaptive training: pre-training, per-iteration risk refits and
//! risk-weighted fine-tuning on the unlabeled target workload, with flip tracking.

mod ledger;
mod loss;
mod train;

pub use ledger::{
    flip_report, flip_report_table, supporter_counts, write_flip_report, FlipCount, FlipLedger,
    FlipReport, MispredictionRow, PairRisk, Snapshot, Status, SUPPORTER_THRESHOLD,
};
pub use loss::{risk_loss, RiskWeights};
pub use train::{
    adaptive_train, adaptive_train_with, finetune, initial_risk_model, risk_iteration, unlabeled,
    write_metrics_log, AdaptConfig, AdaptOutcome, AdaptState, IterationOutcome, MetricsRecord,
    Phase, UnlabeledPair,
};
