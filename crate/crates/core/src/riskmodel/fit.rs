use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dnn::confidence;
use super::model::{RiskInput, RiskModel};
use crate::classifier::{adam_step, AdamConfig, OptimizerState};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankFitConfig {
    pub margin: f64,
    pub pair_samples: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for RankFitConfig {
    fn default() -> Self {
        Self {
            margin: 0.3,
            pair_samples: 64,
            steps: 200,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

impl RankFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::InvalidArgument(
                "ranking margin must be positive".into(),
            ));
        }
        if self.pair_samples == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "pair_samples and learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn softplus_inv(y: f64) -> f64 {
    let y = y.max(1e-12);
    if y > 30.0 {
        y
    } else {
        y + (-(-y).exp_m1()).ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Unconstrained parameters `[ρ_1..ρ_m | τ_1..τ_m | ρ_u]` with `w = softplus(ρ)`,
/// `σ²_f = exp(τ)` and `u = softplus(ρ_u)`.
pub fn ranking_params(model: &RiskModel) -> Vec<f64> {
    model
        .weights
        .iter()
        .map(|&w| softplus_inv(w))
        .chain(model.features.iter().map(|f| f.sigma2.max(1e-300).ln()))
        .chain([softplus_inv(model.dnn.u)])
        .collect()
}

pub fn apply_ranking_params(model: &mut RiskModel, params: &[f64]) {
    let m = model.rule_count();
    for j in 0..m {
        model.weights[j] = softplus(params[j]);
        model.features[j].sigma2 = params[m + j].exp();
    }
    model.dnn.u = softplus(params[2 * m]);
}

/// Risk of the predicted label and its gradient with respect to the ranking parameters.
fn risk_and_grad(model: &RiskModel, params: &[f64], input: &RiskInput, grad: &mut [f64]) -> f64 {
    let m = model.rule_count();
    let g = input.mu_hat;
    let conf = confidence(g);
    let w_hat = model.dnn.weight(g);
    let s_hat = model.dnn.sigma2_at(g);
    let active: Vec<usize> = input.activation.active().collect();

    let mut mass = w_hat;
    let mut num = w_hat * g;
    let mut ssum = w_hat * w_hat * s_hat;
    for &j in &active {
        let (w, f) = (model.weights[j], &model.features[j]);
        mass += w;
        num += w * f.mu;
        ssum += w * w * f.sigma2;
    }
    let mu = num / mass;
    let var = ssum / (mass * mass);
    let sigma = var.sqrt();
    let matching = input.predicted_match();
    let raw = if matching { 1.0 - mu } else { mu } + model.k * sigma;
    grad.iter_mut().for_each(|v| *v = 0.0);
    if !(0.0..=1.0).contains(&raw) {
        return raw.clamp(0.0, 1.0);
    }
    let sign = if matching { -1.0 } else { 1.0 };
    let dsig = model.k / (2.0 * sigma);
    let n2 = mass * mass;
    // d risk / d w for each evidence source, then chained into raw parameters
    let d_source = |w: f64, mu_s: f64, s: f64| {
        let dmu = (mu_s - mu) / mass;
        let dvar = 2.0 * w * s / n2 - 2.0 * var / mass;
        sign * dmu + dsig * dvar
    };
    for &j in &active {
        let (w, f) = (model.weights[j], &model.features[j]);
        grad[j] = d_source(w, f.mu, f.sigma2) * sigmoid(params[j]);
        grad[m + j] = dsig * w * w * f.sigma2 / n2;
    }
    grad[2 * m] = d_source(w_hat, g, s_hat) * conf * sigmoid(params[2 * m]);
    raw
}

/// Mean pairwise hinge `max(0, γ − (risk(a) − risk(b)))` over index pairs `(a, b)` and its gradient.
pub fn ranking_objective(
    model: &RiskModel,
    params: &[f64],
    inputs: &[RiskInput],
    pairs: &[(usize, usize)],
    margin: f64,
) -> (f64, Vec<f64>) {
    let mut m = model.clone();
    apply_ranking_params(&mut m, params);
    let mut grad = vec![0.0; params.len()];
    let mut ga = vec![0.0; params.len()];
    let mut gb = vec![0.0; params.len()];
    let mut loss = 0.0;
    for &(a, b) in pairs {
        let ra = risk_and_grad(&m, params, &inputs[a], &mut ga);
        let rb = risk_and_grad(&m, params, &inputs[b], &mut gb);
        let slack = margin - (ra - rb);
        if slack > 0.0 {
            loss += slack;
            for (g, (x, y)) in grad.iter_mut().zip(ga.iter().zip(&gb)) {
                *g -= x - y;
            }
        }
    }
    let scale = 1.0 / pairs.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    (loss * scale, grad)
}

/// Trains rule weights, rule variances and the classifier-feature scale so that
/// mispredicted validation pairs outrank correct ones; rule priors stay fixed.
pub fn fit_ranking(
    model: &RiskModel,
    validation: &[RiskInput],
    truth: &[bool],
    config: &RankFitConfig,
) -> Result<RiskModel> {
    config.validate()?;
    model.validate()?;
    if validation.len() != truth.len() {
        return Err(Error::Dimension {
            expected: validation.len(),
            actual: truth.len(),
        });
    }
    let (mispredicted, correct): (Vec<usize>, Vec<usize>) =
        (0..validation.len()).partition(|&i| validation[i].predicted_match() != truth[i]);
    if mispredicted.is_empty() || correct.is_empty() {
        return Err(Error::DegenerateRanking {
            mispredicted: mispredicted.len(),
            correct: correct.len(),
        });
    }
    let mut params = ranking_params(model);
    let mut state = OptimizerState::new(params.len());
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pairs = Vec::with_capacity(config.pair_samples);
    for _ in 0..config.steps {
        pairs.clear();
        for _ in 0..config.pair_samples {
            pairs.push((
                mispredicted[rng.gen_range(0..mispredicted.len())],
                correct[rng.gen_range(0..correct.len())],
            ));
        }
        let (_, grad) = ranking_objective(model, &params, validation, &pairs, config.margin);
        adam_step(&mut params, &mut state, &grad, &adam)?;
    }
    let mut fitted = model.clone();
    apply_ranking_params(&mut fitted, &params);
    Ok(fitted)
}
