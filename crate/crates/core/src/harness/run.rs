use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{ExperimentPlan, Scenario};
use crate::adapt::{adaptive_train_with, flip_report, FlipReport};
use crate::classifier::evaluate_f1;
use crate::corpus::{
    generate_workload, split_dataset, stratified_sample, DatasetSplit, LabeledPair, SplitRatios,
    SyntheticSpec,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tradition,
    Risk,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tradition => "tradition",
            Method::Risk => "risk",
        }
    }
}

/// One (condition, seed) run. Tradition is the pre-trained model of the same run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub condition: String,
    pub seed: u64,
    pub tradition_f1: f64,
    pub risk_f1: f64,
    /// Flip counts of the first risk iteration.
    pub first_flips: Option<FlipReport>,
}

impl RunRecord {
    pub fn f1(&self, method: Method) -> f64 {
        match method {
            Method::Tradition => self.tradition_f1,
            Method::Risk => self.risk_f1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub condition: String,
    pub method: Method,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub plan: ExperimentPlan,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<MetricsSummary>,
}

impl ExperimentOutcome {
    pub fn summary_for(&self, condition: &str, method: Method) -> Option<&MetricsSummary> {
        self.summary
            .iter()
            .find(|s| s.condition == condition && s.method == method)
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn reseed(spec: &SyntheticSpec, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        seed: spec.seed.wrapping_add(seed),
        ..spec.clone()
    }
}

fn candidates(spec: &SyntheticSpec, min_shared: usize) -> Result<Vec<LabeledPair>> {
    generate_workload(spec)?.labeled_candidates(min_shared)
}

/// Target-workload partition in the misaligned setting; only validation and test are used.
pub const TARGET_RATIOS: SplitRatios = SplitRatios {
    train: 0.6,
    validation: 0.2,
    test: 0.2,
};

/// The split of one seed: source train split, plus target validation/test when a target is set.
pub fn base_split(plan: &ExperimentPlan, seed: u64) -> Result<DatasetSplit> {
    let source = candidates(&reseed(&plan.source, seed), plan.min_shared_tokens)?;
    let split = split_dataset(&source, plan.ratios, seed)?;
    let Some(target) = &plan.target else {
        return Ok(split);
    };
    let target = candidates(&reseed(target, seed), plan.min_shared_tokens)?;
    let t = split_dataset(&target, TARGET_RATIOS, seed)?;
    Ok(DatasetSplit {
        train: split.train,
        validation: t.validation,
        test: t.test,
        seed,
    })
}

fn run_one(
    condition: String,
    split: &DatasetSplit,
    risk_validation: Option<&[LabeledPair]>,
    plan: &ExperimentPlan,
    seed: u64,
) -> Result<RunRecord> {
    let config = plan.adapt.reseeded(seed);
    let out = adaptive_train_with(split, risk_validation, &config)?;
    let first_flips = if out.ledger.snapshots.len() >= 2 {
        Some(flip_report(&out.ledger, 0)?)
    } else {
        None
    };
    Ok(RunRecord {
        condition,
        seed,
        tradition_f1: evaluate_f1(&out.pretrained, &split.test)?,
        risk_f1: evaluate_f1(&out.classifier, &split.test)?,
        first_flips,
    })
}

fn summarize(runs: &[RunRecord]) -> Vec<MetricsSummary> {
    let mut conditions: Vec<&str> = Vec::new();
    for r in runs {
        if !conditions.contains(&r.condition.as_str()) {
            conditions.push(&r.condition);
        }
    }
    let mut out = Vec::new();
    for c in conditions {
        for method in [Method::Tradition, Method::Risk] {
            let f1s: Vec<f64> = runs
                .iter()
                .filter(|r| r.condition == c)
                .map(|r| r.f1(method))
                .collect();
            let (mean, std) = mean_std(&f1s);
            out.push(MetricsSummary {
                condition: c.to_string(),
                method,
                mean,
                std,
                runs: f1s.len(),
            });
        }
    }
    out
}

fn splits(plan: &ExperimentPlan) -> Result<Vec<(u64, DatasetSplit)>> {
    plan.seeds
        .par_iter()
        .map(|&s| Ok((s, base_split(plan, s)?)))
        .collect()
}

fn finish(plan: &ExperimentPlan, runs: Vec<RunRecord>) -> ExperimentOutcome {
    ExperimentOutcome {
        plan: plan.clone(),
        summary: summarize(&runs),
        runs,
    }
}

fn expect(plan: &ExperimentPlan, scenario: Scenario) -> Result<()> {
    plan.validate()?;
    if plan.scenario != scenario {
        return Err(Error::InvalidArgument(format!(
            "plan scenario is {}, expected {}",
            plan.scenario.name(),
            scenario.name()
        )));
    }
    Ok(())
}

pub fn fraction_label(f: f64) -> String {
    format!("fraction={f}")
}

/// Tradition and Risk at each share of the training split.
pub fn run_sufficiency_sweep(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    expect(plan, Scenario::SameSource)?;
    let bases = splits(plan)?;
    let jobs: Vec<(f64, usize)> = plan
        .fractions
        .iter()
        .flat_map(|&f| (0..bases.len()).map(move |i| (f, i)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(f, i)| {
            let (seed, base) = &bases[i];
            let k = ((base.train.len() as f64) * f).round().max(1.0) as usize;
            let split = DatasetSplit {
                train: stratified_sample(&base.train, k, *seed)?,
                ..base.clone()
            };
            run_one(fraction_label(f), &split, None, plan, *seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(plan, runs))
}

pub const MISALIGNED: &str = "misaligned";

/// Train on the source workload, validate and test on the target workload.
pub fn run_misaligned(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    expect(plan, Scenario::Misaligned)?;
    let bases = splits(plan)?;
    let runs = bases
        .par_iter()
        .map(|(seed, split)| run_one(MISALIGNED.to_string(), split, None, plan, *seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(plan, runs))
}

pub const FULL_VALIDATION: &str = "validation=full";

pub fn validation_label(size: usize) -> String {
    format!("validation={size}")
}

/// Risk fitted on subsampled validation sets; the full-validation run is the reference.
pub fn run_robustness(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    expect(plan, Scenario::Robustness)?;
    let bases = splits(plan)?;
    for (_, b) in &bases {
        if let Some(&s) = plan
            .validation_sizes
            .iter()
            .find(|&&s| s > b.validation.len())
        {
            return Err(Error::InvalidArgument(format!(
                "validation size {s} exceeds the {} available validation pairs",
                b.validation.len()
            )));
        }
    }
    let mut jobs: Vec<(Option<usize>, usize)> = (0..bases.len()).map(|i| (None, i)).collect();
    for &s in &plan.validation_sizes {
        jobs.extend((0..bases.len()).map(|i| (Some(s), i)));
    }
    let runs = jobs
        .par_iter()
        .map(|&(size, i)| {
            let (seed, base) = &bases[i];
            match size {
                None => run_one(FULL_VALIDATION.to_string(), base, None, plan, *seed),
                Some(s) if s == base.validation.len() => {
                    run_one(validation_label(s), base, None, plan, *seed)
                }
                Some(s) => {
                    let sub = stratified_sample(&base.validation, s, *seed)?;
                    run_one(validation_label(s), base, Some(&sub), plan, *seed)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(plan, runs))
}

pub fn run_plan(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    match plan.scenario {
        Scenario::SameSource => run_sufficiency_sweep(plan),
        Scenario::Misaligned => run_misaligned(plan),
        Scenario::Robustness => run_robustness(plan),
    }
}

fn header(plan: &ExperimentPlan) -> String {
    format!("# plan: {}\n", plan.to_json())
}

/// Aggregate rows only: one per (condition, method).
pub fn summary_table(outcome: &ExperimentOutcome) -> String {
    let mut out = header(&outcome.plan);
    out.push_str("condition,method,seed,f1,std\n");
    for s in &outcome.summary {
        out.push_str(&format!(
            "{},{},aggregate,{:.6},{:.6}\n",
            s.condition,
            s.method.name(),
            s.mean,
            s.std
        ));
    }
    out
}

/// Per-seed rows followed by the aggregate rows.
pub fn runs_table(outcome: &ExperimentOutcome) -> String {
    let mut out = header(&outcome.plan);
    out.push_str("condition,method,seed,f1,std\n");
    for r in &outcome.runs {
        for m in [Method::Tradition, Method::Risk] {
            out.push_str(&format!(
                "{},{},{},{:.6},\n",
                r.condition,
                m.name(),
                r.seed,
                r.f1(m)
            ));
        }
    }
    for s in &outcome.summary {
        out.push_str(&format!(
            "{},{},aggregate,{:.6},{:.6}\n",
            s.condition,
            s.method.name(),
            s.mean,
            s.std
        ));
    }
    out
}

/// First-iteration flip counts of every run.
pub fn flips_table(outcome: &ExperimentOutcome) -> String {
    let mut out = header(&outcome.plan);
    out.push_str("condition,seed,status,supporters,total,flipped\n");
    for r in &outcome.runs {
        let Some(f) = &r.first_flips else { continue };
        let rows = [
            ("TP", "all", f.tp),
            ("TN", "all", f.tn),
            ("FN", "all", f.fn_.all),
            ("FN", "lt100", f.fn_.few_supporters),
            ("FN", "ge100", f.fn_.many_supporters),
            ("FP", "all", f.fp.all),
            ("FP", "lt100", f.fp.few_supporters),
            ("FP", "ge100", f.fp.many_supporters),
        ];
        for (status, bucket, c) in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.condition, r.seed, status, bucket, c.total, c.flipped
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn population_std_hand_value() {
        let (m, s) = mean_std(&[0.5, 0.7, 0.9]);
        assert!((m - 0.7).abs() < 1e-12);
        assert!((s - (0.08f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[0.4]), (0.4, 0.0));
    }

    proptest! {
        #[test]
        fn population_std_matches_two_pass_oracle(xs in prop::collection::vec(0.0f64..1.0, 1..20)) {
            let (m, s) = mean_std(&xs);
            let n = xs.len() as f64;
            let oracle_mean = xs.iter().fold(0.0, |a, x| a + x) / n;
            let sq = xs.iter().fold(0.0, |a, x| a + x * x) / n;
            let oracle_var = (sq - oracle_mean * oracle_mean).max(0.0);
            prop_assert!((m - oracle_mean).abs() < 1e-12);
            prop_assert!((s * s - oracle_var).abs() < 1e-9);
            prop_assert!(s >= 0.0);
        }
    }

    fn record(c: &str, seed: u64, t: f64, r: f64) -> RunRecord {
        RunRecord {
            condition: c.into(),
            seed,
            tradition_f1: t,
            risk_f1: r,
            first_flips: None,
        }
    }

    #[test]
    fn summary_groups_by_condition_in_order() {
        let runs = vec![
            record("a", 0, 0.5, 0.6),
            record("b", 0, 0.1, 0.2),
            record("a", 1, 0.7, 0.8),
        ];
        let s = summarize(&runs);
        assert_eq!(s.len(), 4);
        assert_eq!(
            (s[0].condition.as_str(), s[0].method),
            ("a", Method::Tradition)
        );
        assert!((s[0].mean - 0.6).abs() < 1e-12 && (s[0].std - 0.1).abs() < 1e-12);
        assert!((s[1].mean - 0.7).abs() < 1e-12);
        assert_eq!(s[2].condition, "b");
    }

    #[test]
    fn tables_echo_plan_and_have_expected_rows() {
        let plan = ExperimentPlan::standard_same_source();
        let runs = vec![
            record("fraction=0.1", 0, 0.5, 0.6),
            record("fraction=0.1", 1, 0.7, 0.8),
        ];
        let outcome = finish(&plan, runs);
        let t = summary_table(&outcome);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("# plan: {"));
        assert_eq!(lines.len(), 2 + 2);
        assert_eq!(runs_table(&outcome).lines().count(), 2 + 4 + 2);
        let echoed: ExperimentPlan =
            serde_json::from_str(lines[0].trim_start_matches("# plan: ")).unwrap();
        assert_eq!(echoed, plan);
    }

    #[test]
    fn scenario_mismatch_is_rejected() {
        assert!(run_misaligned(&ExperimentPlan::standard_same_source()).is_err());
        assert!(run_sufficiency_sweep(&ExperimentPlan::standard_misaligned()).is_err());
    }

    #[test]
    fn misaligned_split_draws_evaluation_from_target() {
        let mut plan = ExperimentPlan::standard_misaligned();
        plan.source.n_entities = 60;
        plan.target.as_mut().unwrap().n_entities = 60;
        let split = base_split(&plan, 3).unwrap();
        let source = candidates(&reseed(&plan.source, 3), plan.min_shared_tokens).unwrap();
        let target = candidates(
            &reseed(plan.target.as_ref().unwrap(), 3),
            plan.min_shared_tokens,
        )
        .unwrap();
        let in_pool = |pool: &[LabeledPair], p: &LabeledPair| pool.iter().any(|q| q == p);
        assert!(split.train.iter().all(|p| in_pool(&source, p)));
        assert!(split.test.iter().all(|p| in_pool(&target, p)));
        let want = (target.len() as f64 * 0.2).round() as i64;
        assert!((split.test.len() as i64 - want).abs() <= 2);
        assert!((split.validation.len() as i64 - want).abs() <= 2);
    }
}
