//! Flip-guarantee bounds, ΔC estimators, concentration trials and the
//! risk-feature identicalness diagnostic.

mod assumption;
mod bound;
mod concentration;
mod deltas;

pub use assumption::{
    assumption1_diagnostic, assumption1_table, Assumption1Report, FeatureDivergence,
    GroupComparison,
};
pub use bound::{bound_table, radical, theorem_bound, BoundQuery, Direction};
pub use concentration::{
    concentration_table, mcdiarmid_trial, ConcentrationRow, ConcentrationTrial, MuHatDraw,
    MIN_SAMPLES,
};
pub use deltas::{delta_c_lemma, delta_c_simple, estimate_deltas, DeltaEstimate, DnnEvidence};
