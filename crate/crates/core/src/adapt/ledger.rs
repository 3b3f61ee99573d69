use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supporter count separating the two misprediction buckets.
pub const SUPPORTER_THRESHOLD: usize = 100;

/// Risk evidence for one target pair at the start of an iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRisk {
    pub var_plus: f64,
    pub var_minus: f64,
    /// Classifier-feature weight as a share of the pair's total evidence weight.
    pub dnn_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub predictions: Vec<bool>,
    /// Risk scores computed from this snapshot's classifier; absent on the last one.
    pub risk: Option<Vec<PairRisk>>,
}

/// Per-iteration predictions on the target workload with the truth kept aside for evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipLedger {
    pub ids: Vec<String>,
    truth: Vec<bool>,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    TP,
    TN,
    FP,
    FN,
}

impl Status {
    pub fn of(predicted: bool, truth: bool) -> Self {
        match (predicted, truth) {
            (true, true) => Status::TP,
            (false, false) => Status::TN,
            (true, false) => Status::FP,
            (false, true) => Status::FN,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::TP => "TP",
            Status::TN => "TN",
            Status::FP => "FP",
            Status::FN => "FN",
        }
    }
}

impl FlipLedger {
    pub fn new(ids: Vec<String>, truth: Vec<bool>) -> Result<Self> {
        if ids.len() != truth.len() {
            return Err(Error::Dimension {
                expected: ids.len(),
                actual: truth.len(),
            });
        }
        Ok(Self {
            ids,
            truth,
            snapshots: Vec::new(),
        })
    }

    pub fn truth(&self) -> &[bool] {
        &self.truth
    }

    pub fn record(&mut self, predictions: Vec<bool>) -> Result<()> {
        if predictions.len() != self.ids.len() {
            return Err(Error::Dimension {
                expected: self.ids.len(),
                actual: predictions.len(),
            });
        }
        self.snapshots.push(Snapshot {
            predictions,
            risk: None,
        });
        Ok(())
    }

    /// Attaches risk evidence to the latest snapshot.
    pub fn attach_risk(&mut self, risk: Vec<PairRisk>) -> Result<()> {
        let n = self.ids.len();
        let last = self
            .snapshots
            .last_mut()
            .ok_or(Error::Empty("flip ledger snapshots"))?;
        if risk.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: risk.len(),
            });
        }
        last.risk = Some(risk);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipCount {
    pub total: usize,
    pub flipped: usize,
}

impl FlipCount {
    fn add(&mut self, flipped: bool) {
        self.total += 1;
        self.flipped += usize::from(flipped);
    }

    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.flipped as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MispredictionRow {
    pub all: FlipCount,
    pub few_supporters: FlipCount,
    pub many_supporters: FlipCount,
    /// Mean classifier-weight share over the candidate supporter population.
    pub delta_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipReport {
    pub iteration: usize,
    pub tp: FlipCount,
    pub tn: FlipCount,
    pub fn_: MispredictionRow,
    pub fp: MispredictionRow,
}

/// For each query VaR, the number of sorted `others` strictly below `query − delta_c`.
fn count_supporters(query: f64, sorted_others: &[f64], delta_c: f64) -> usize {
    sorted_others.partition_point(|&o| query - o > delta_c)
}

/// Supporters of every mispredicted pair in `snapshot`, keyed by position; correct pairs get `None`.
pub fn supporter_counts(
    snapshot: &Snapshot,
    truth: &[bool],
) -> Result<(Vec<Option<usize>>, f64, f64)> {
    let risk = snapshot
        .risk
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("snapshot carries no risk evidence".into()))?;
    let status: Vec<Status> = snapshot
        .predictions
        .iter()
        .zip(truth)
        .map(|(&p, &t)| Status::of(p, t))
        .collect();
    let collect = |s: Status, f: fn(&PairRisk) -> f64| -> (Vec<f64>, f64) {
        let members: Vec<&PairRisk> = status
            .iter()
            .zip(risk)
            .filter(|(st, _)| **st == s)
            .map(|(_, r)| r)
            .collect();
        let mut v: Vec<f64> = members.iter().map(|r| f(r)).collect();
        v.sort_by(f64::total_cmp);
        let dc = if members.is_empty() {
            0.0
        } else {
            members.iter().map(|r| r.dnn_share).sum::<f64>() / members.len() as f64
        };
        (v, dc)
    };
    let (tp_var_plus, dc_fn) = collect(Status::TP, |r| r.var_plus);
    let (tn_var_minus, dc_fp) = collect(Status::TN, |r| r.var_minus);
    let counts = status
        .iter()
        .zip(risk)
        .map(|(s, r)| match s {
            Status::FN => Some(count_supporters(r.var_minus, &tp_var_plus, dc_fn)),
            Status::FP => Some(count_supporters(r.var_plus, &tn_var_minus, dc_fp)),
            _ => None,
        })
        .collect();
    Ok((counts, dc_fn, dc_fp))
}

/// Flip counts between snapshots `k` and `k + 1`, grouped by status at `k`.
pub fn flip_report(ledger: &FlipLedger, k: usize) -> Result<FlipReport> {
    if k + 1 >= ledger.snapshots.len() {
        return Err(Error::InvalidArgument(format!(
            "flip report needs snapshots {k} and {}, ledger has {}",
            k + 1,
            ledger.snapshots.len()
        )));
    }
    let (before, after) = (&ledger.snapshots[k], &ledger.snapshots[k + 1]);
    let (supporters, dc_fn, dc_fp) = supporter_counts(before, &ledger.truth)?;
    let mut report = FlipReport {
        iteration: k,
        tp: FlipCount::default(),
        tn: FlipCount::default(),
        fn_: MispredictionRow {
            delta_c: dc_fn,
            ..Default::default()
        },
        fp: MispredictionRow {
            delta_c: dc_fp,
            ..Default::default()
        },
    };
    #[allow(clippy::needless_range_loop)]
    for i in 0..ledger.ids.len() {
        let flipped = before.predictions[i] != after.predictions[i];
        let row = match Status::of(before.predictions[i], ledger.truth[i]) {
            Status::TP => {
                report.tp.add(flipped);
                continue;
            }
            Status::TN => {
                report.tn.add(flipped);
                continue;
            }
            Status::FN => &mut report.fn_,
            Status::FP => &mut report.fp,
        };
        row.all.add(flipped);
        if supporters[i].unwrap_or(0) >= SUPPORTER_THRESHOLD {
            row.many_supporters.add(flipped);
        } else {
            row.few_supporters.add(flipped);
        }
    }
    Ok(report)
}

/// Two panels: correct predictions, then mispredictions split by supporter count.
pub fn flip_report_table(report: &FlipReport) -> Result<String> {
    let err = |e: csv::Error| Error::Format(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["panel", "status", "supporters", "total", "flipped"])
        .map_err(err)?;
    let lt = format!("<{SUPPORTER_THRESHOLD}");
    let ge = format!(">={SUPPORTER_THRESHOLD}");
    let mut row = |panel: &str, status: &str, bucket: &str, c: FlipCount| {
        w.write_record([
            panel,
            status,
            bucket,
            &c.total.to_string(),
            &c.flipped.to_string(),
        ])
        .map_err(err)
    };
    row("correct", "TP", "all", report.tp)?;
    row("correct", "TN", "all", report.tn)?;
    for (name, r) in [("FN", &report.fn_), ("FP", &report.fp)] {
        row("mispredicted", name, "all", r.all)?;
        row("mispredicted", name, &lt, r.few_supporters)?;
        row("mispredicted", name, &ge, r.many_supporters)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_flip_report(path: impl AsRef<Path>, report: &FlipReport) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, flip_report_table(report)?).map_err(|e| Error::io(path, e))
}
