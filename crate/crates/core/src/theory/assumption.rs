use serde::{Deserialize, Serialize};

use crate::adapt::Status;
use crate::error::{Error, Result};
use crate::riskfeat::ActivationVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDivergence {
    pub feature: String,
    pub correct_frequency: f64,
    pub mispredicted_frequency: f64,
    pub difference: f64,
}

/// One correct group against the mispredicted group sharing its true class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub correct: Status,
    pub mispredicted: Status,
    pub correct_size: usize,
    pub mispredicted_size: usize,
    pub features: Vec<FeatureDivergence>,
    /// Mean per-feature absolute frequency difference.
    pub divergence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assumption1Report {
    pub comparisons: Vec<GroupComparison>,
}

fn frequencies(group: &[&ActivationVector], m: usize) -> Vec<f64> {
    let mut counts = vec![0usize; m];
    for z in group {
        for j in z.active() {
            counts[j] += 1;
        }
    }
    counts
        .into_iter()
        .map(|c| c as f64 / group.len() as f64)
        .collect()
}

fn compare(
    feature_ids: &[String],
    activations: &[ActivationVector],
    statuses: &[Status],
    correct: Status,
    mispredicted: Status,
) -> Result<GroupComparison> {
    let pick = |s: Status| -> Vec<&ActivationVector> {
        activations
            .iter()
            .zip(statuses)
            .filter(|(_, st)| **st == s)
            .map(|(z, _)| z)
            .collect()
    };
    let (a, b) = (pick(correct), pick(mispredicted));
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "group {} has {} members and group {} has {}; both must be non-empty",
            correct.name(),
            a.len(),
            mispredicted.name(),
            b.len()
        )));
    }
    let m = feature_ids.len();
    let (fa, fb) = (frequencies(&a, m), frequencies(&b, m));
    let features: Vec<FeatureDivergence> = feature_ids
        .iter()
        .zip(fa.iter().zip(&fb))
        .map(|(id, (&x, &y))| FeatureDivergence {
            feature: id.clone(),
            correct_frequency: x,
            mispredicted_frequency: y,
            difference: (x - y).abs(),
        })
        .collect();
    let divergence = if m == 0 {
        0.0
    } else {
        features.iter().map(|f| f.difference).sum::<f64>() / m as f64
    };
    Ok(GroupComparison {
        correct,
        mispredicted,
        correct_size: a.len(),
        mispredicted_size: b.len(),
        features,
        divergence,
    })
}

/// Rule activation frequencies of TP against FN and TN against FP.
pub fn assumption1_diagnostic(
    feature_ids: &[String],
    activations: &[ActivationVector],
    statuses: &[Status],
) -> Result<Assumption1Report> {
    if activations.len() != statuses.len() {
        return Err(Error::Dimension {
            expected: activations.len(),
            actual: statuses.len(),
        });
    }
    if let Some(z) = activations.iter().find(|z| z.len() != feature_ids.len()) {
        return Err(Error::Dimension {
            expected: feature_ids.len(),
            actual: z.len(),
        });
    }
    Ok(Assumption1Report {
        comparisons: vec![
            compare(feature_ids, activations, statuses, Status::TP, Status::FN)?,
            compare(feature_ids, activations, statuses, Status::TN, Status::FP)?,
        ],
    })
}

pub fn assumption1_table(report: &Assumption1Report) -> String {
    let mut out = String::from(
        "correct,mispredicted,feature,correct_frequency,mispredicted_frequency,difference\n",
    );
    for c in &report.comparisons {
        for f in &c.features {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6}\n",
                c.correct.name(),
                c.mispredicted.name(),
                f.feature,
                f.correct_frequency,
                f.mispredicted_frequency,
                f.difference
            ));
        }
        out.push_str(&format!(
            "{},{},*divergence*,{},{},{:.6}\n",
            c.correct.name(),
            c.mispredicted.name(),
            c.correct_size,
            c.mispredicted_size,
            c.divergence
        ));
    }
    out
}
