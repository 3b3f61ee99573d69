//! Risk-based adaptive training for entity-resolution matchers.
//!
//! A small matcher is pre-trained on labeled pairs, then fine-tuned on an
//! unlabeled target workload by minimizing misprediction risk estimated by an
//! interpretable risk model (one-sided rules plus the matcher's own output).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod riskfeat;
pub mod riskmodel;
pub mod theory;

pub use error::{Error, Result};
