use std::path::{Path, PathBuf};

use riskadapt::adapt::{
    finetune, flip_report_table, initial_risk_model, MetricsRecord, Phase, Status,
};
use riskadapt::classifier::{predict_labels, pretrain, MatcherModel};
use riskadapt::corpus::{
    featurize_pairs, generate_workload, load_pairs, load_records, read_feature_cache,
    split_dataset, write_feature_cache, DatasetSplit, FeatureSchema, LabeledPair, Schema,
};
use riskadapt::harness::{flips_table, run_plan, runs_table, summary_table, ExperimentPlan};
use riskadapt::metrics;
use riskadapt::riskfeat::{activate, induce_rules};
use riskadapt::riskmodel::{
    fit_ranking, rank_by_risk, ranked_report_table, risk_inputs, write_risk_model, RiskModel,
};
use riskadapt::theory::{
    assumption1_diagnostic, assumption1_table, bound_table, concentration_table, estimate_deltas,
    mcdiarmid_trial, BoundQuery, ConcentrationTrial, Direction,
};
use riskadapt::Error;

use crate::artifacts::{read_checked, read_manifest, sha256_hex, ArtifactWriter};
use crate::config::RunConfig;
use crate::error::CliError;

pub const DEFAULT_OUT: &str = "riskadapt-out";

const SPLIT_FILES: [&str; 3] = ["data/train.csv", "data/validation.csv", "data/test.csv"];
const SCHEMA_FILE: &str = "data/schema.json";
const PRETRAINED: &str = "models/pretrained.ckpt";
const FINETUNED: &str = "models/finetuned.ckpt";

/// Resolved global options.
pub struct Context {
    pub out: PathBuf,
    pub quiet: bool,
    pub seed: Option<u64>,
    config: Option<(RunConfig, String)>,
}

impl Context {
    pub fn new(
        config_path: Option<&Path>,
        out: Option<PathBuf>,
        seed: Option<u64>,
        quiet: bool,
    ) -> Result<Self, CliError> {
        let config = match config_path {
            Some(p) => {
                let mut cfg = RunConfig::load(p)?;
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                let sha = sha256_hex(
                    serde_json::to_string(&cfg)
                        .expect("config serializes")
                        .as_bytes(),
                );
                Some((cfg, sha))
            }
            None => None,
        };
        let out = out
            .or_else(|| config.as_ref().and_then(|(c, _)| c.out.clone()))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok(Self {
            out,
            quiet,
            seed,
            config,
        })
    }

    pub fn has_config(&self) -> bool {
        self.config.is_some()
    }

    fn config(&self) -> Result<&RunConfig, CliError> {
        self.config
            .as_ref()
            .map(|(c, _)| c)
            .ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))
    }

    fn writer(&self, command: &str) -> Result<ArtifactWriter, CliError> {
        let (cfg, sha) = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))?;
        Ok(ArtifactWriter::new(
            &self.out,
            command,
            cfg.seed,
            sha.clone(),
            cfg.data_key(),
        ))
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

fn labeled_pairs(cfg: &RunConfig, schema: &Schema) -> Result<Vec<LabeledPair>, CliError> {
    if let Some(spec) = &cfg.data.synthetic {
        return Ok(generate_workload(spec)?.labeled_candidates(cfg.data.min_shared_tokens)?);
    }
    let files = cfg
        .data
        .files
        .as_ref()
        .expect("validated config has a data source");
    for p in [&files.left, &files.right, &files.pairs] {
        if !p.exists() {
            return Err(CliError::Usage(format!(
                "input path {} does not exist",
                p.display()
            )));
        }
    }
    let left = load_records(&files.left, schema)?;
    let right = load_records(&files.right, schema)?;
    let pairs = load_pairs(&files.pairs)?;
    Ok(featurize_pairs(&pairs, &left, &right, schema)?)
}

pub fn prepare(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config()?;
    let schema = cfg.schema()?;
    let fs = FeatureSchema::from_schema(&schema);
    let pairs = labeled_pairs(cfg, &schema)?;
    let split = split_dataset(&pairs, cfg.split, cfg.seed)?;
    let mut w = ctx.writer("prepare")?;
    let schema_json = serde_json::to_string_pretty(&schema).expect("schema serializes");
    w.write(SCHEMA_FILE, schema_json.as_bytes())?;
    for (rel, part) in SPLIT_FILES
        .iter()
        .zip([&split.train, &split.validation, &split.test])
    {
        w.write(rel, write_feature_cache(part, &fs)?.as_bytes())?;
    }
    w.finish()?;
    ctx.say(format!(
        "prepared {} pairs: train {}, validation {}, test {} -> {}",
        pairs.len(),
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        ctx.out.display()
    ));
    Ok(())
}

struct Prepared {
    features: FeatureSchema,
    split: DatasetSplit,
}

fn load_prepared(ctx: &Context) -> Result<Prepared, CliError> {
    let cfg = ctx.config()?;
    let manifest = read_manifest(&ctx.out, "prepare")?.ok_or_else(|| {
        CliError::Runtime(format!(
            "no prepared data in {}; run prepare first",
            ctx.out.display()
        ))
    })?;
    if manifest.data_key != cfg.data_key() {
        return Err(CliError::Runtime(
            "data, split or seed settings changed since prepare; run prepare again".into(),
        ));
    }
    let text = |rel: &str| -> Result<String, CliError> {
        String::from_utf8(read_checked(&ctx.out, &manifest, rel)?)
            .map_err(|e| CliError::Runtime(format!("{rel}: {e}")))
    };
    let schema: Schema = serde_json::from_str(&text(SCHEMA_FILE)?)
        .map_err(|e| CliError::Runtime(format!("{SCHEMA_FILE}: {e}")))?;
    let features = FeatureSchema::from_schema(&schema);
    let mut parts = Vec::new();
    for rel in SPLIT_FILES {
        parts.push(read_feature_cache(
            &text(rel)?,
            &features,
            &ctx.out.join(rel),
        )?);
    }
    let test = parts.pop().unwrap();
    let validation = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok(Prepared {
        features,
        split: DatasetSplit {
            train,
            validation,
            test,
            seed: cfg.seed,
        },
    })
}

fn load_model(ctx: &Context, rel: &str, producer: &str) -> Result<MatcherModel, CliError> {
    let manifest = read_manifest(&ctx.out, producer)?
        .filter(|m| m.artifacts.contains_key(rel))
        .ok_or_else(|| {
            CliError::Runtime(format!(
                "no checkpoint {rel} in {}; run {producer} first",
                ctx.out.display()
            ))
        })?;
    let bytes = read_checked(&ctx.out, &manifest, rel)?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
    Ok(MatcherModel::from_checkpoint_str(&text)?)
}

fn jsonl(log: &[MetricsRecord]) -> String {
    log.iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

pub fn pretrain_cmd(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config()?;
    let data = load_prepared(ctx)?;
    let adapt = cfg.adapt();
    let init = MatcherModel::init(
        data.features.len(),
        adapt.train.hidden_units,
        adapt.train.seed,
    );
    let out = pretrain(
        init,
        &data.split.train,
        &data.split.validation,
        &adapt.train,
    )?;
    let log: Vec<MetricsRecord> = out
        .log
        .iter()
        .map(|e| MetricsRecord {
            phase: Phase::Pretrain,
            index: e.epoch,
            train_loss: e.train_loss,
            validation_f1: e.validation_f1,
            test_f1: None,
        })
        .collect();
    let mut w = ctx.writer("pretrain")?;
    w.write(PRETRAINED, out.model.to_checkpoint_string().as_bytes())?;
    w.write("logs/pretrain.jsonl", jsonl(&log).as_bytes())?;
    w.finish()?;
    ctx.say(format!(
        "pretrained {} epochs, best epoch {} (validation F1 {:.4})",
        out.log.len(),
        out.best_epoch,
        out.log
            .iter()
            .find(|e| e.epoch == out.best_epoch)
            .map_or(0.0, |e| e.validation_f1)
    ));
    Ok(())
}

pub fn finetune_cmd(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config()?;
    let data = load_prepared(ctx)?;
    let pretrained = load_model(ctx, PRETRAINED, "pretrain")?;
    let s = &data.split;
    let out = finetune(pretrained, &s.train, &s.validation, &s.test, &cfg.adapt())?;
    let inputs = risk_inputs(&out.risk_model.features, &out.classifier, &s.test)?;
    let ranked = rank_by_risk(&out.risk_model, &inputs)?;
    let mut w = ctx.writer("finetune")?;
    w.write(FINETUNED, out.classifier.to_checkpoint_string().as_bytes())?;
    w.write(
        "models/risk_model.txt",
        write_risk_model(&out.risk_model, &data.features).as_bytes(),
    )?;
    w.write("logs/finetune.jsonl", jsonl(&out.log).as_bytes())?;
    if out.ledger.snapshots.len() >= 2 {
        let report = riskadapt::adapt::flip_report(&out.ledger, 0)?;
        w.write("reports/flips.csv", flip_report_table(&report)?.as_bytes())?;
    }
    w.write(
        "reports/ranked.csv",
        ranked_report_table(&ranked)?.as_bytes(),
    )?;
    w.finish()?;
    ctx.say(format!(
        "fine-tuned {} risk iterations with {} rules",
        out.log.len(),
        out.risk_model.rule_count()
    ));
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelChoice {
    Pretrained,
    Finetuned,
}

impl ModelChoice {
    fn name(self) -> &'static str {
        match self {
            ModelChoice::Pretrained => "pretrained",
            ModelChoice::Finetuned => "finetuned",
        }
    }
}

fn choose_model(ctx: &Context, choice: ModelChoice) -> Result<MatcherModel, CliError> {
    match choice {
        ModelChoice::Pretrained => load_model(ctx, PRETRAINED, "pretrain"),
        ModelChoice::Finetuned => load_model(ctx, FINETUNED, "finetune"),
    }
}

pub fn eval_cmd(ctx: &Context, choice: ModelChoice) -> Result<(), CliError> {
    let data = load_prepared(ctx)?;
    let model = choose_model(ctx, choice)?;
    let predicted = predict_labels(&model, &data.split.test)?;
    let truth: Vec<bool> = data.split.test.iter().map(|p| p.equivalent).collect();
    let score = metrics::f1(&predicted, &truth)?;
    let line = format!(
        "precision={:.6} recall={:.6} f1={:.6}",
        score.precision, score.recall, score.f1
    );
    let mut w = ctx.writer(&format!("eval-{}", choice.name()))?;
    w.write(
        &format!("reports/eval_{}.csv", choice.name()),
        format!(
            "model,precision,recall,f1\n{},{},{},{}\n",
            choice.name(),
            score.precision,
            score.recall,
            score.f1
        )
        .as_bytes(),
    )?;
    w.finish()?;
    println!("{line}");
    Ok(())
}

fn emit(ctx: &Context, name: &str, table: &str) -> Result<(), CliError> {
    if !ctx.quiet {
        print!("{table}");
    }
    if ctx.has_config() {
        let mut w = ctx.writer(&format!("theory-{name}"))?;
        w.write(&format!("theory/{name}.csv"), table.as_bytes())?;
        w.finish()?;
    } else {
        crate::artifacts::write_versioned(
            &ctx.out.join(format!("theory/{name}.csv")),
            table.as_bytes(),
        )?;
    }
    Ok(())
}

pub fn theory_bounds(
    ctx: &Context,
    m: usize,
    ns: &[u64],
    delta: f64,
    epsilon: f64,
    direction: &str,
) -> Result<(), CliError> {
    let direction = Direction::parse(direction)?;
    let queries: Vec<BoundQuery> = ns
        .iter()
        .map(|&n| BoundQuery {
            m,
            n,
            delta,
            epsilon,
            direction,
        })
        .collect();
    emit(ctx, "bounds", &bound_table(&queries)?)
}

pub fn theory_mcdiarmid(
    ctx: &Context,
    m: usize,
    samples: usize,
    eps: &[f64],
) -> Result<(), CliError> {
    let trial = ConcentrationTrial::random(m, samples, ctx.seed.unwrap_or(0));
    let rows = mcdiarmid_trial(&trial, eps)?;
    emit(ctx, "mcdiarmid", &concentration_table(&rows))
}

pub fn theory_assumption1(ctx: &Context, choice: ModelChoice) -> Result<(), CliError> {
    let cfg = ctx.config()?;
    let data = load_prepared(ctx)?;
    let model = choose_model(ctx, choice)?;
    let rules = induce_rules(&data.split.train, &cfg.adapt().rules)?;
    let predicted = predict_labels(&model, &data.split.test)?;
    let statuses: Vec<Status> = predicted
        .iter()
        .zip(&data.split.test)
        .map(|(&p, x)| Status::of(p, x.equivalent))
        .collect();
    let activations: Vec<_> = data
        .split
        .test
        .iter()
        .map(|p| activate(&rules, &p.features))
        .collect();
    let ids: Vec<String> = rules.iter().map(|r| r.id.clone()).collect();
    let report = assumption1_diagnostic(&ids, &activations, &statuses)?;
    emit(ctx, "assumption1", &assumption1_table(&report))
}

/// Risk model for `classifier` fitted on validation; the unfitted model is kept when
/// validation has no mispredictions to rank.
fn fitted_risk_model(
    cfg: &RunConfig,
    data: &Prepared,
    classifier: &MatcherModel,
) -> Result<RiskModel, CliError> {
    let adapt = cfg.adapt();
    let s = &data.split;
    let initial = initial_risk_model(&s.train, classifier, &s.validation, &adapt)?;
    let inputs = risk_inputs(&initial.features, classifier, &s.validation)?;
    let truth: Vec<bool> = s.validation.iter().map(|p| p.equivalent).collect();
    match fit_ranking(&initial, &inputs, &truth, &adapt.rank) {
        Ok(m) => Ok(m),
        Err(Error::DegenerateRanking { .. }) => Ok(initial),
        Err(e) => Err(e.into()),
    }
}

pub fn theory_deltas(ctx: &Context, choice: ModelChoice) -> Result<(), CliError> {
    let cfg = ctx.config()?;
    let data = load_prepared(ctx)?;
    let classifier = choose_model(ctx, choice)?;
    let model = fitted_risk_model(cfg, &data, &classifier)?;
    let test = &data.split.test;
    let inputs = risk_inputs(&model.features, &classifier, test)?;
    let truth: Vec<bool> = test.iter().map(|p| p.equivalent).collect();
    let mut table = String::from(
        "pair_id,direction,delta_var,delta_c_lemma,delta_c_simple,supporters,candidates\n",
    );
    let mut shares = Vec::new();
    for (i, x) in inputs.iter().enumerate() {
        shares.push(model.dnn_share(&x.activation, x.mu_hat));
        if x.predicted_match() == truth[i] {
            continue;
        }
        match estimate_deltas(&model, &inputs, &truth, i) {
            Ok(d) => table.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{},{}\n",
                x.id,
                d.direction.name(),
                d.delta_var,
                d.delta_c_lemma,
                d.delta_c_simple,
                d.supporters,
                d.candidates
            )),
            // no correct instance of the opposite type to compare against
            Err(Error::Empty(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    let mean_share = shares.iter().sum::<f64>() / shares.len().max(1) as f64;
    if !(0.2..=0.6).contains(&mean_share) && !ctx.quiet {
        eprintln!("warning: mean classifier weight share {mean_share:.3} lies outside [0.2, 0.6]");
    }
    emit(ctx, "deltas", &table)
}

pub fn load_plan(path: &Path) -> Result<ExperimentPlan, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read plan {}: {e}", path.display())))?;
    let plan: ExperimentPlan = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    };
    plan.validate()?;
    Ok(plan)
}

pub fn experiment_cmd(ctx: &Context, mut plan: ExperimentPlan) -> Result<(), CliError> {
    if let Some(s) = ctx.seed {
        plan.seeds = vec![s];
    }
    plan.validate()?;
    let outcome = run_plan(&plan)?;
    let name = plan.scenario.name();
    let summary = summary_table(&outcome);
    let plan_sha = sha256_hex(plan.to_json().as_bytes());
    let seed = plan.seeds.first().copied().unwrap_or(0);
    let mut w = ArtifactWriter::new(
        &ctx.out,
        &format!("experiment-{name}"),
        seed,
        plan_sha.clone(),
        plan_sha,
    );
    w.write(
        &format!("experiment/{name}.summary.csv"),
        summary.as_bytes(),
    )?;
    w.write(
        &format!("experiment/{name}.runs.csv"),
        runs_table(&outcome).as_bytes(),
    )?;
    w.write(
        &format!("experiment/{name}.flips.csv"),
        flips_table(&outcome).as_bytes(),
    )?;
    w.finish()?;
    if !ctx.quiet {
        print!("{summary}");
    }
    Ok(())
}
