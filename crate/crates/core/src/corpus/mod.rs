//! Records, blocking, splits, similarity features and synthetic workloads.

mod blocking;
mod cache;
mod features;
mod record;
mod split;
mod synth;

use std::collections::HashMap;

use rayon::prelude::*;

pub use blocking::{block_candidates, record_tokens};
pub use cache::{read_feature_cache, write_feature_cache};
pub use features::{
    edit_similarity, featurize_pair, token_jaccard, tokens, Channel, FeatureSchema, FeatureVector,
    LabeledPair, SimilarityKind, MISSING_SIMILARITY,
};
pub use record::{
    load_pairs, load_records, pair_id, write_pairs, write_records, AttributeKind, AttributeSpec,
    Label, Record, RecordPair, Schema, Value,
};
pub use split::{split_dataset, stratified_sample, DatasetSplit, Labeled, SplitRatios};
pub use synth::{
    bibliographic_schema, generate_workload, SyntheticSpec, SyntheticWorkload, BLOCKING_ATTRIBUTES,
};

use crate::error::{Error, Result};

/// Resolves and featurizes labeled pairs. Every pair must carry a known label and
/// refer to records present in `left` / `right`.
pub fn featurize_pairs(
    pairs: &[RecordPair],
    left: &[Record],
    right: &[Record],
    schema: &Schema,
) -> Result<Vec<LabeledPair>> {
    let left_ix: HashMap<&str, &Record> = left.iter().map(|r| (r.id.as_str(), r)).collect();
    let right_ix: HashMap<&str, &Record> = right.iter().map(|r| (r.id.as_str(), r)).collect();
    pairs
        .par_iter()
        .map(|p| {
            let l = left_ix
                .get(p.left.as_str())
                .ok_or_else(|| Error::Integrity(format!("unknown left record `{}`", p.left)))?;
            let r = right_ix
                .get(p.right.as_str())
                .ok_or_else(|| Error::Integrity(format!("unknown right record `{}`", p.right)))?;
            let equivalent = p
                .label
                .as_bool()
                .ok_or_else(|| Error::Integrity(format!("pair `{}` has no label", p.id())))?;
            Ok(LabeledPair {
                id: p.id(),
                features: featurize_pair(l, r, schema)?,
                equivalent,
            })
        })
        .collect()
}
