use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{FeatureSchema, FeatureVector};
use crate::error::{Error, Result};

/// Variance assigned to a freshly induced rule before any ranking fit.
pub const INITIAL_SIGMA2: f64 = 0.01;

const RULESET_HEADER: &str = "# riskadapt rules v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "le")]
    Le,
    #[serde(rename = "gt")]
    Gt,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "≤",
            Comparator::Gt => ">",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub channel: usize,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl Predicate {
    pub fn holds(&self, x: &[f64]) -> bool {
        let v = x[self.channel];
        match self.comparator {
            Comparator::Le => v <= self.threshold,
            Comparator::Gt => v > self.threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleClass {
    Equivalent,
    Inequivalent,
}

impl RuleClass {
    pub fn name(self) -> &'static str {
        match self {
            RuleClass::Equivalent => "equivalent",
            RuleClass::Inequivalent => "inequivalent",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "equivalent" => Ok(RuleClass::Equivalent),
            "inequivalent" => Ok(RuleClass::Inequivalent),
            other => Err(Error::Format(format!("unknown rule class `{other}`"))),
        }
    }
}

/// A one-sided rule: a conjunction of channel predicates asserting one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskFeature {
    pub id: String,
    pub conjunction: Vec<Predicate>,
    pub class: RuleClass,
    /// Covered training instances.
    pub coverage: usize,
    /// Prior equivalence probability, fixed after estimation.
    pub mu: f64,
    /// Learnable variance of the rule's equivalence probability.
    pub sigma2: f64,
}

impl RiskFeature {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.conjunction.iter().all(|p| p.holds(x))
    }
}

/// Multi-hot rule activation of one pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationVector {
    pub bits: Vec<bool>,
}

impl ActivationVector {
    pub fn len(&self) -> usize {
        self.bits.len()
    }
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
    }
}

pub fn activate(features: &[RiskFeature], x: &FeatureVector) -> ActivationVector {
    ActivationVector {
        bits: features.iter().map(|f| f.matches(x.as_slice())).collect(),
    }
}

/// Laplace-smoothed share of equivalent instances among those a rule covers.
pub fn estimate_prior(conjunction: &[Predicate], train: &[(&[f64], bool)]) -> Result<f64> {
    let (mut n, mut pos) = (0usize, 0usize);
    for (x, y) in train {
        if conjunction.iter().all(|p| p.holds(x)) {
            n += 1;
            pos += usize::from(*y);
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "rule covers no training instance".into(),
        ));
    }
    Ok((pos as f64 + 1.0) / (n as f64 + 2.0))
}

pub fn render_conjunction(conjunction: &[Predicate], schema: &FeatureSchema) -> String {
    conjunction
        .iter()
        .map(|p| {
            format!(
                "{} {} {}",
                schema.channels[p.channel].name(),
                p.comparator.symbol(),
                p.threshold
            )
        })
        .collect::<Vec<_>>()
        .join(" ∧ ")
}

/// Canonical text such as `year_eq ≤ 0.5 → inequivalent`.
pub fn render_rule(rule: &RiskFeature, schema: &FeatureSchema) -> String {
    format!(
        "{} → {}",
        render_conjunction(&rule.conjunction, schema),
        rule.class.name()
    )
}

pub fn parse_conjunction(text: &str, schema: &FeatureSchema) -> Result<Vec<Predicate>> {
    text.split(" ∧ ")
        .map(|atom| {
            let parts: Vec<&str> = atom.trim().split(' ').collect();
            let [name, op, threshold] = parts[..] else {
                return Err(Error::Format(format!("malformed predicate `{atom}`")));
            };
            let channel = schema
                .index_of(name)
                .ok_or_else(|| Error::Format(format!("unknown channel `{name}`")))?;
            let comparator = match op {
                "≤" => Comparator::Le,
                ">" => Comparator::Gt,
                _ => return Err(Error::Format(format!("unknown comparator `{op}`"))),
            };
            let threshold = threshold
                .parse()
                .map_err(|_| Error::Format(format!("bad threshold `{threshold}`")))?;
            Ok(Predicate {
                channel,
                comparator,
                threshold,
            })
        })
        .collect()
}

pub fn parse_rule(text: &str, schema: &FeatureSchema) -> Result<(Vec<Predicate>, RuleClass)> {
    let (conj, class) = text
        .split_once(" → ")
        .ok_or_else(|| Error::Format(format!("rule `{text}` lacks ` → `")))?;
    Ok((
        parse_conjunction(conj, schema)?,
        RuleClass::parse(class.trim())?,
    ))
}

/// Tab-separated rule lines (`id, conjunction, class, coverage, mu_f, sigma2_f`).
pub fn write_ruleset(rules: &[RiskFeature], schema: &FeatureSchema) -> String {
    let mut out = String::new();
    writeln!(out, "{RULESET_HEADER}").unwrap();
    writeln!(out, "# channels: {}", schema.names().join(",")).unwrap();
    for r in rules {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.id,
            render_conjunction(&r.conjunction, schema),
            r.class.name(),
            r.coverage,
            r.mu,
            r.sigma2
        )
        .unwrap();
    }
    out
}

/// Parses rule lines until the end of `text`; comment and blank lines are skipped.
pub fn read_ruleset(text: &str, schema: &FeatureSchema) -> Result<Vec<RiskFeature>> {
    let mut rules = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() || line.starts_with('#') {
            if let Some(names) = line.strip_prefix("# channels: ") {
                if names.split(',').collect::<Vec<_>>() != schema.names() {
                    return Err(Error::Schema(
                        "rule set was written for a different channel schema".into(),
                    ));
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, conj, class, coverage, mu, sigma2] = fields[..] else {
            return Err(Error::Format(format!("rule line needs 6 fields: `{line}`")));
        };
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Format(format!("bad number `{s}` in rule `{id}`")))
        };
        rules.push(RiskFeature {
            id: id.to_string(),
            conjunction: parse_conjunction(conj, schema)?,
            class: RuleClass::parse(class)?,
            coverage: coverage
                .parse()
                .map_err(|_| Error::Format(format!("bad coverage `{coverage}`")))?,
            mu: num(mu)?,
            sigma2: num(sigma2)?,
        });
    }
    Ok(rules)
}

pub fn save_ruleset(
    path: impl AsRef<Path>,
    rules: &[RiskFeature],
    schema: &FeatureSchema,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_ruleset(rules, schema)).map_err(|e| Error::io(path, e))
}

pub fn load_ruleset(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Vec<RiskFeature>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_ruleset(&text, schema)
}
