use std::fmt::Write as _;
use std::path::Path;

use super::dnn::DnnRiskFeature;
use super::model::{RankedRisk, RiskModel};
use crate::corpus::FeatureSchema;
use crate::error::{Error, Result};
use crate::riskfeat::{read_ruleset, write_ruleset};

const HEADER: &str = "# riskadapt risk model v1";

pub fn write_risk_model(model: &RiskModel, schema: &FeatureSchema) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "theta\t{}", model.theta).unwrap();
    writeln!(out, "k\t{}", model.k).unwrap();
    writeln!(out, "[rules]").unwrap();
    out.push_str(&write_ruleset(&model.features, schema));
    writeln!(out, "[weights]").unwrap();
    for (f, w) in model.features.iter().zip(&model.weights) {
        writeln!(out, "{}\t{}", f.id, w).unwrap();
    }
    writeln!(out, "[dnn]").unwrap();
    writeln!(out, "u\t{}", model.dnn.u).unwrap();
    let bins: Vec<String> = model.dnn.sigma2_hat.iter().map(f64::to_string).collect();
    writeln!(out, "sigma2_hat\t{}", bins.join(",")).unwrap();
    out
}

fn num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("bad number `{s}` in risk model")))
}

fn keyed<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('\t'))
        .ok_or_else(|| Error::Format(format!("expected `{key}` line, found `{line}`")))
}

pub fn read_risk_model(text: &str, schema: &FeatureSchema) -> Result<RiskModel> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(Error::Format("missing risk model header".into()));
    }
    let theta = num(keyed(lines.next().unwrap_or(""), "theta")?)?;
    let k = num(keyed(lines.next().unwrap_or(""), "k")?)?;
    if lines.next() != Some("[rules]") {
        return Err(Error::Format("missing [rules] section".into()));
    }
    let mut rules_text = String::new();
    for line in lines.by_ref() {
        if line == "[weights]" {
            break;
        }
        rules_text.push_str(line);
        rules_text.push('\n');
    }
    let features = read_ruleset(&rules_text, schema)?;
    let mut weights = Vec::with_capacity(features.len());
    for f in &features {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format("truncated [weights] section".into()))?;
        weights.push(num(keyed(line, &f.id)?)?);
    }
    if lines.next() != Some("[dnn]") {
        return Err(Error::Format("missing [dnn] section".into()));
    }
    let u = num(keyed(lines.next().unwrap_or(""), "u")?)?;
    let sigma2_hat = keyed(lines.next().unwrap_or(""), "sigma2_hat")?
        .split(',')
        .map(num)
        .collect::<Result<Vec<_>>>()?;
    let model = RiskModel {
        features,
        weights,
        dnn: DnnRiskFeature { sigma2_hat, u },
        theta,
        k,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_risk_model(
    path: impl AsRef<Path>,
    model: &RiskModel,
    schema: &FeatureSchema,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_risk_model(model, schema)).map_err(|e| Error::io(path, e))
}

pub fn load_risk_model(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<RiskModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_risk_model(&text, schema)
}

/// CSV with columns `pair_id, predicted, risk, mu, sigma`.
pub fn ranked_report_table(ranked: &[RankedRisk]) -> Result<String> {
    let err = |e: csv::Error| Error::Format(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pair_id", "predicted", "risk", "mu", "sigma"])
        .map_err(err)?;
    for r in ranked {
        w.write_record([
            r.id.clone(),
            u8::from(r.predicted_match).to_string(),
            r.risk.to_string(),
            r.mu.to_string(),
            r.sigma.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_ranked_report(path: impl AsRef<Path>, ranked: &[RankedRisk]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ranked_report_table(ranked)?).map_err(|e| Error::io(path, e))
}
