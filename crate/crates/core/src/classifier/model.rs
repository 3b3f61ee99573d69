use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability clamp applied inside every log-loss.
pub const PROB_CLAMP: f64 = 1e-7;
/// Largest logit magnitude fed to the logistic output.
pub const LOGIT_CLAMP: f64 = 30.0;

const CHECKPOINT_FORMAT: &str = "riskadapt-matcher";
const CHECKPOINT_VERSION: u32 = 1;

/// One-hidden-layer matcher: `d -> H (ReLU) -> 1 (logistic)`.
///
/// Parameters live in one flat buffer laid out as `[W1 (H x d, row-major) | b1 (H) | w2 (H) | b2]`;
/// [`Gradients`] uses the same layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatcherModel {
    input_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
}

/// Per-instance log-loss weights: `-pos * ln g - neg * ln(1 - g)`.
///
/// Cross-entropy is `(y, 1 - y)`; the risk loss uses `(1 - VaR+, 1 - VaR-)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftTarget {
    pub pos: f64,
    pub neg: f64,
}

impl SoftTarget {
    pub fn label(equivalent: bool) -> Self {
        if equivalent {
            SoftTarget { pos: 1.0, neg: 0.0 }
        } else {
            SoftTarget { pos: 0.0, neg: 1.0 }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum LossKind<'a> {
    CrossEntropy(&'a [bool]),
    Risk(&'a [SoftTarget]),
}

impl LossKind<'_> {
    fn len(&self) -> usize {
        match self {
            LossKind::CrossEntropy(y) => y.len(),
            LossKind::Risk(t) => t.len(),
        }
    }

    fn target(&self, i: usize) -> SoftTarget {
        match self {
            LossKind::CrossEntropy(y) => SoftTarget::label(y[i]),
            LossKind::Risk(t) => t[i],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    input_dim: usize,
    hidden_dim: usize,
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn w1(&self) -> &[f64] {
        &self.values[..self.hidden_dim * self.input_dim]
    }
    pub fn b1(&self) -> &[f64] {
        let o = self.hidden_dim * self.input_dim;
        &self.values[o..o + self.hidden_dim]
    }
    pub fn w2(&self) -> &[f64] {
        let o = self.hidden_dim * (self.input_dim + 1);
        &self.values[o..o + self.hidden_dim]
    }
    pub fn b2(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `-pos ln g - neg ln(1 - g)` with g clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn log_loss(g: f64, t: SoftTarget) -> f64 {
    let g = g.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -t.pos * g.ln() - t.neg * (1.0 - g).ln()
}

/// Derivative of [`log_loss`] with respect to g (zero inside the clamped tails).
pub fn log_loss_grad(g: f64, t: SoftTarget) -> f64 {
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&g) {
        return 0.0;
    }
    -t.pos / g + t.neg / (1.0 - g)
}

impl MatcherModel {
    pub fn parameter_count(input_dim: usize, hidden_dim: usize) -> usize {
        input_dim * hidden_dim + 2 * hidden_dim + 1
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            params: vec![0.0; Self::parameter_count(input_dim, hidden_dim)],
        }
    }

    /// Uniform He initialization for the hidden layer, Glorot for the output; zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut model = Self::zeros(input_dim, hidden_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = (6.0 / input_dim.max(1) as f64).sqrt();
        let a2 = (6.0 / (hidden_dim + 1) as f64).sqrt();
        let (w1_len, h) = (input_dim * hidden_dim, hidden_dim);
        for p in &mut model.params[..w1_len] {
            *p = rng.gen_range(-a1..a1);
        }
        for p in &mut model.params[w1_len + h..w1_len + 2 * h] {
            *p = rng.gen_range(-a2..a2);
        }
        model
    }

    pub fn from_params(input_dim: usize, hidden_dim: usize, params: Vec<f64>) -> Result<Self> {
        let expected = Self::parameter_count(input_dim, hidden_dim);
        if params.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: params.len(),
            });
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn w1_row(&self, k: usize) -> &[f64] {
        &self.params[k * self.input_dim..(k + 1) * self.input_dim]
    }
    fn b1(&self, k: usize) -> f64 {
        self.params[self.hidden_dim * self.input_dim + k]
    }
    fn w2(&self, k: usize) -> f64 {
        self.params[self.hidden_dim * (self.input_dim + 1) + k]
    }
    fn b2(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Hidden activations and the (unclamped) output logit.
    fn forward(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let mut z = self.b2();
        for (k, h) in hidden.iter_mut().enumerate() {
            let a: f64 = self.b1(k)
                + self
                    .w1_row(k)
                    .iter()
                    .zip(x)
                    .map(|(w, xi)| w * xi)
                    .sum::<f64>();
            *h = a.max(0.0);
            z += self.w2(k) * *h;
        }
        z
    }

    /// Matching probability in (0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut hidden = vec![0.0; self.hidden_dim];
        let z = self.forward(x, &mut hidden);
        Ok(logistic(z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)))
    }

    pub fn predict_many<'a, I>(&self, xs: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        xs.into_iter().map(|x| self.predict_proba(x)).collect()
    }

    /// Mean loss over the batch.
    pub fn loss(&self, xs: &[&[f64]], kind: LossKind<'_>) -> Result<f64> {
        if xs.is_empty() {
            return Err(Error::Empty("batch"));
        }
        if kind.len() != xs.len() {
            return Err(Error::Dimension {
                expected: xs.len(),
                actual: kind.len(),
            });
        }
        let mut total = 0.0;
        for (i, x) in xs.iter().enumerate() {
            total += log_loss(self.predict_proba(x)?, kind.target(i));
        }
        Ok(total / xs.len() as f64)
    }

    /// Mean loss and its exact gradient with respect to every parameter.
    pub fn backward(&self, xs: &[&[f64]], kind: LossKind<'_>) -> Result<(f64, Gradients)> {
        if xs.is_empty() {
            return Err(Error::Empty("batch"));
        }
        if kind.len() != xs.len() {
            return Err(Error::Dimension {
                expected: xs.len(),
                actual: kind.len(),
            });
        }
        let (d, h) = (self.input_dim, self.hidden_dim);
        let n = xs.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut hidden = vec![0.0; h];
        let mut total = 0.0;
        let (b1_at, w2_at) = (h * d, h * (d + 1));
        let b2_at = grad.len() - 1;
        for (i, x) in xs.iter().enumerate() {
            self.check(x)?;
            let t = kind.target(i);
            let z = self.forward(x, &mut hidden);
            let g = logistic(z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP));
            total += log_loss(g, t);
            let dg_dz = if z.abs() > LOGIT_CLAMP {
                0.0
            } else {
                g * (1.0 - g)
            };
            let dz = log_loss_grad(g, t) * dg_dz / n;
            if dz == 0.0 {
                continue;
            }
            grad[b2_at] += dz;
            for k in 0..h {
                grad[w2_at + k] += dz * hidden[k];
                if hidden[k] > 0.0 {
                    let da = dz * self.w2(k);
                    grad[b1_at + k] += da;
                    for (gw, xi) in grad[k * d..(k + 1) * d].iter_mut().zip(x.iter()) {
                        *gw += da * xi;
                    }
                }
            }
        }
        Ok((
            total / n,
            Gradients {
                input_dim: d,
                hidden_dim: h,
                values: grad,
            },
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_checkpoint_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&text)
    }

    pub fn to_checkpoint_string(&self) -> String {
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            params: self.params.clone(),
        };
        serde_json::to_string_pretty(&ckpt).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        Self::from_params(ckpt.input_dim, ckpt.hidden_dim, ckpt.params)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    input_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
}
