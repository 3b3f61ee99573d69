//! Risk model: aggregation of rule and classifier evidence, VaR scoring and ranking fit.

mod dnn;
mod fit;
mod io;
mod model;

pub use dnn::{dnn_feature_fit, DnnRiskFeature, DEFAULT_BINS, DNN_WEIGHT_FLOOR, SIGMA2_FLOOR};
pub use fit::{
    apply_ranking_params, fit_ranking, ranking_objective, ranking_params, RankFitConfig,
};
pub use io::{
    load_risk_model, ranked_report_table, read_risk_model, save_risk_model, write_ranked_report,
    write_risk_model,
};
pub use model::{
    quantile_multiplier, rank_by_risk, score_var, EquivalenceDistribution, RankedRisk, RiskInput,
    RiskModel, RiskScore, DEFAULT_THETA,
};

use crate::classifier::MatcherModel;
use crate::corpus::LabeledPair;
use crate::error::Result;
use crate::riskfeat::{activate, RiskFeature};

/// Rule activations and classifier outputs for a batch of pairs.
pub fn risk_inputs(
    rules: &[RiskFeature],
    classifier: &MatcherModel,
    pairs: &[LabeledPair],
) -> Result<Vec<RiskInput>> {
    use rayon::prelude::*;
    pairs
        .par_iter()
        .map(|p| {
            Ok(RiskInput {
                id: p.id.clone(),
                activation: activate(rules, &p.features),
                mu_hat: classifier.predict_proba(p.features.as_slice())?,
            })
        })
        .collect()
}
