use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::LabeledPair;
use super::record::RecordPair;
use crate::error::{Error, Result};

/// Items that carry a known binary label.
pub trait Labeled {
    fn is_equivalent(&self) -> bool;
}

impl Labeled for LabeledPair {
    fn is_equivalent(&self) -> bool {
        self.equivalent
    }
}

impl Labeled for RecordPair {
    /// Unknown labels count as inequivalent; callers filter those out first.
    fn is_equivalent(&self) -> bool {
        self.label.as_bool().unwrap_or(false)
    }
}

/// Training / validation / test partition. Test labels are for scoring only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit<T = LabeledPair> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const STANDARD: SplitRatios = SplitRatios {
        train: 0.2,
        validation: 0.2,
        test: 0.6,
    };

    pub fn new(train: f64, validation: f64, test: f64) -> Self {
        Self {
            train,
            validation,
            test,
        }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.as_array();
        if r.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "split ratios must all be positive, got {r:?}"
            )));
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Hamilton apportionment of `total` over `weights`; ties go to the lower index.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Label-stratified random split, reproducible from `seed`.
pub fn split_dataset<T: Labeled + Clone>(
    items: &[T],
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    ratios.validate()?;
    let weights = ratios.as_array();
    if items.len() < weights.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} items into {} non-empty parts",
            items.len(),
            weights.len()
        )));
    }
    let mut sizes = apportion(items.len(), &weights);
    // every part gets at least one item
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let donor = (0..sizes.len())
            .max_by_key(|&i| (sizes[i], usize::MAX - i))
            .unwrap();
        sizes[donor] -= 1;
        sizes[empty] += 1;
    }

    let mut positives: Vec<usize> = (0..items.len())
        .filter(|&i| items[i].is_equivalent())
        .collect();
    let mut negatives: Vec<usize> = (0..items.len())
        .filter(|&i| !items[i].is_equivalent())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);

    let mut pos_counts = apportion(positives.len(), &weights);
    // keep every part's positive count within its size, moving the excess elsewhere
    for i in 0..pos_counts.len() {
        if pos_counts[i] > sizes[i] {
            let mut excess = pos_counts[i] - sizes[i];
            pos_counts[i] = sizes[i];
            for j in 0..pos_counts.len() {
                let room = sizes[j] - pos_counts[j].min(sizes[j]);
                let moved = room.min(excess);
                pos_counts[j] += moved;
                excess -= moved;
            }
        }
    }
    let neg_counts: Vec<usize> = sizes.iter().zip(&pos_counts).map(|(s, p)| s - p).collect();

    let mut parts: Vec<Vec<T>> = Vec::with_capacity(3);
    let (mut p_at, mut n_at) = (0, 0);
    for (pc, nc) in pos_counts.iter().zip(&neg_counts) {
        let mut idx: Vec<usize> = positives[p_at..p_at + pc]
            .iter()
            .chain(&negatives[n_at..n_at + nc])
            .copied()
            .collect();
        p_at += pc;
        n_at += nc;
        idx.shuffle(&mut rng);
        parts.push(idx.into_iter().map(|i| items[i].clone()).collect());
    }
    let test = parts.pop().unwrap();
    let validation = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok(DatasetSplit {
        train,
        validation,
        test,
        seed,
    })
}

/// Label-stratified random subset of exactly `count` items (order follows the shuffle).
pub fn stratified_sample<T: Labeled + Clone>(
    items: &[T],
    count: usize,
    seed: u64,
) -> Result<Vec<T>> {
    if count > items.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {count} items from a pool of {}",
            items.len()
        )));
    }
    if count == items.len() {
        return Ok(items.to_vec());
    }
    let mut positives: Vec<usize> = (0..items.len())
        .filter(|&i| items[i].is_equivalent())
        .collect();
    let mut negatives: Vec<usize> = (0..items.len())
        .filter(|&i| !items[i].is_equivalent())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);
    let counts = apportion(count, &[positives.len() as f64, negatives.len() as f64]);
    let mut idx: Vec<usize> = positives[..counts[0]]
        .iter()
        .chain(&negatives[..counts[1]])
        .copied()
        .collect();
    idx.shuffle(&mut rng);
    Ok(idx.into_iter().map(|i| items[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::features::FeatureVector;
    use proptest::prelude::*;

    fn items(n: usize, n_pos: usize) -> Vec<LabeledPair> {
        (0..n)
            .map(|i| LabeledPair {
                id: format!("p{i:04}"),
                features: FeatureVector::new(vec![i as f64 / n as f64]),
                equivalent: i < n_pos,
            })
            .collect()
    }

    fn rate(v: &[LabeledPair]) -> f64 {
        v.iter().filter(|p| p.equivalent).count() as f64 / v.len() as f64
    }

    #[test]
    fn standard_ratio_sizes() {
        let split = split_dataset(&items(100, 13), SplitRatios::STANDARD, 5).unwrap();
        assert_eq!(
            (split.train.len(), split.validation.len(), split.test.len()),
            (20, 20, 60)
        );
    }

    #[test]
    fn zero_ratio_rejected() {
        assert!(split_dataset(&items(10, 3), SplitRatios::new(1.0, 0.0, 0.0), 1).is_err());
        assert!(split_dataset(&items(10, 3), SplitRatios::new(0.5, 0.2, 0.2), 1).is_err());
        assert!(split_dataset(&items(2, 1), SplitRatios::STANDARD, 1).is_err());
    }

    #[test]
    fn same_seed_same_membership() {
        let data = items(257, 40);
        let a = split_dataset(&data, SplitRatios::STANDARD, 42).unwrap();
        let b = split_dataset(&data, SplitRatios::STANDARD, 42).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&data, SplitRatios::STANDARD, 43).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn stratified_rates() {
        let data = items(1000, 150);
        let split = split_dataset(&data, SplitRatios::STANDARD, 3).unwrap();
        for part in [&split.train, &split.validation, &split.test] {
            assert!((rate(part) - 0.15).abs() <= 0.02);
        }
    }

    #[test]
    fn sample_is_stratified() {
        let data = items(1000, 200);
        let s = stratified_sample(&data, 100, 9).unwrap();
        assert_eq!(s.len(), 100);
        assert_eq!(s.iter().filter(|p| p.equivalent).count(), 20);
        assert!(stratified_sample(&data, 1001, 9).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_input(n in 3usize..400, pos_frac in 0.0f64..1.0, seed in any::<u64>()) {
            let data = items(n, (n as f64 * pos_frac) as usize);
            let split = split_dataset(&data, SplitRatios::STANDARD, seed).unwrap();
            let mut ids: Vec<&str> = split.train.iter()
                .chain(&split.validation)
                .chain(&split.test)
                .map(|p| p.id.as_str())
                .collect();
            prop_assert_eq!(ids.len(), n);
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
            prop_assert!(!split.train.is_empty() && !split.validation.is_empty() && !split.test.is_empty());
        }
    }
}
