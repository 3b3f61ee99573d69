use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::record::{AttributeKind, Record, Schema, Value};
use crate::error::Result;

/// Channel value used when either side of an attribute is missing.
pub const MISSING_SIMILARITY: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    /// `1 - levenshtein / max_len`
    EditSimilarity,
    TokenJaccard,
    NumericEquality,
    /// `1 - min(1, |a - b| / range)`
    NumericCloseness,
}

impl SimilarityKind {
    fn suffix(self) -> &'static str {
        match self {
            SimilarityKind::EditSimilarity => "edit",
            SimilarityKind::TokenJaccard => "jaccard",
            SimilarityKind::NumericEquality => "eq",
            SimilarityKind::NumericCloseness => "close",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub attribute: String,
    pub kind: SimilarityKind,
}

impl Channel {
    pub fn name(&self) -> String {
        format!("{}_{}", self.attribute, self.kind.suffix())
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.attribute, self.kind.suffix())
    }
}

/// Ordered channel descriptors of a [`FeatureVector`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub channels: Vec<Channel>,
}

impl FeatureSchema {
    pub fn from_schema(schema: &Schema) -> Self {
        let mut channels = Vec::new();
        for attr in &schema.attributes {
            let kinds: [SimilarityKind; 2] = match attr.kind {
                AttributeKind::Text => {
                    [SimilarityKind::EditSimilarity, SimilarityKind::TokenJaccard]
                }
                AttributeKind::Numeric => [
                    SimilarityKind::NumericEquality,
                    SimilarityKind::NumericCloseness,
                ],
            };
            channels.extend(kinds.into_iter().map(|kind| Channel {
                attribute: attr.name.clone(),
                kind,
            }));
        }
        Self { channels }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.channels.iter().map(Channel::name).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// A featurized pair with its ground-truth label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub id: String,
    pub features: FeatureVector,
    pub equivalent: bool,
}

/// Lowercased alphanumeric tokens.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn edit_similarity(a: &str, b: &str) -> f64 {
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / max_len as f64
}

pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokens(a), tokens(b));
    let union = ta.union(&tb).count();
    if union == 0 {
        return 1.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

/// Per-attribute similarity channels for a record pair, in [`FeatureSchema`] order.
pub fn featurize_pair(left: &Record, right: &Record, schema: &Schema) -> Result<FeatureVector> {
    left.conforms_to(schema)?;
    right.conforms_to(schema)?;
    let mut values = Vec::with_capacity(schema.attributes.len() * 2);
    for (i, attr) in schema.attributes.iter().enumerate() {
        let (a, b) = (&left.attributes[i].1, &right.attributes[i].1);
        match (a, b) {
            (Value::Text(a), Value::Text(b)) => {
                values.push(edit_similarity(a, b));
                values.push(token_jaccard(a, b));
            }
            (Value::Number(a), Value::Number(b)) => {
                values.push(if a == b { 1.0 } else { 0.0 });
                values.push(1.0 - ((a - b).abs() / attr.range).min(1.0));
            }
            _ => {
                debug_assert!(a.is_missing() || b.is_missing());
                values.push(MISSING_SIMILARITY);
                values.push(MISSING_SIMILARITY);
            }
        }
    }
    Ok(FeatureVector { values })
}
