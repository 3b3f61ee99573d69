use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::features::tokens;
use super::record::{Label, Record, RecordPair, Value};
use crate::error::{Error, Result};

/// Union of lowercased tokens over every text attribute of a record.
pub fn record_tokens(record: &Record) -> BTreeSet<String> {
    record
        .attributes
        .iter()
        .filter_map(|(_, v)| match v {
            Value::Text(s) => Some(tokens(s)),
            _ => None,
        })
        .flatten()
        .collect()
}

/// Token blocking: keeps the cross pairs sharing at least `min_shared_tokens` tokens.
///
/// Output is ordered by left id, then right id. Pairs carry [`Label::Unknown`].
pub fn block_candidates(
    left: &[Record],
    right: &[Record],
    min_shared_tokens: usize,
) -> Result<Vec<RecordPair>> {
    if min_shared_tokens == 0 {
        return Err(Error::InvalidArgument(
            "min_shared_tokens must be at least 1".into(),
        ));
    }
    let mut index: HashMap<String, Vec<usize>> = HashMap::new();
    for (j, record) in right.iter().enumerate() {
        for token in record_tokens(record) {
            index.entry(token).or_default().push(j);
        }
    }

    let mut pairs: Vec<RecordPair> = left
        .par_iter()
        .flat_map_iter(|l| {
            let mut shared: HashMap<usize, usize> = HashMap::new();
            for token in record_tokens(l) {
                if let Some(hits) = index.get(&token) {
                    for &j in hits {
                        *shared.entry(j).or_default() += 1;
                    }
                }
            }
            shared
                .into_iter()
                .filter(|&(_, count)| count >= min_shared_tokens)
                .map(|(j, _)| RecordPair::new(l.id.clone(), right[j].id.clone(), Label::Unknown))
                .collect::<Vec<_>>()
        })
        .collect();
    pairs.sort_by(|a, b| (&a.left, &a.right).cmp(&(&b.left, &b.right)));
    Ok(pairs)
}
