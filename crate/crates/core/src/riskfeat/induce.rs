use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rule::{estimate_prior, Comparator, Predicate, RiskFeature, RuleClass, INITIAL_SIGMA2};
use crate::corpus::LabeledPair;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleParams {
    pub trees: usize,
    pub depth: usize,
    /// Minimum leaf purity for a rule to be emitted.
    pub purity: f64,
    /// Minimum leaf support as a fraction of the training set.
    pub min_coverage: f64,
    /// Fraction of channels considered at every split.
    pub feature_subsample: f64,
    pub seed: u64,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self {
            trees: 10,
            depth: 3,
            purity: 0.95,
            min_coverage: 0.01,
            feature_subsample: 0.6,
            seed: 0,
        }
    }
}

impl RuleParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 || self.depth == 0 {
            return Err(Error::InvalidArgument(
                "trees and depth must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.purity) || !(0.0..=1.0).contains(&self.min_coverage) {
            return Err(Error::InvalidArgument(
                "purity and min_coverage must lie in [0, 1]".into(),
            ));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(Error::InvalidArgument(
                "feature_subsample must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

fn entropy(pos: usize, n: usize) -> f64 {
    if n == 0 || pos == 0 || pos == n {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

struct Leaf {
    conjunction: Vec<Predicate>,
}

struct Grower<'a> {
    data: &'a [(&'a [f64], bool)],
    dims: usize,
    subset: usize,
    max_depth: usize,
    rng: ChaCha8Rng,
    leaves: Vec<Leaf>,
}

impl Grower<'_> {
    /// Best information-gain split among a random channel subset; ties go to the lowest
    /// channel, then the lowest threshold.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let mut channels = sample(&mut self.rng, self.dims, self.subset).into_vec();
        channels.sort_unstable();
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.data[i].1).count();
        let parent = entropy(pos, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut column: Vec<(f64, bool)> = Vec::with_capacity(n);
        for c in channels {
            column.clear();
            column.extend(idx.iter().map(|&i| (self.data[i].0[c], self.data[i].1)));
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for k in 0..n - 1 {
                left_pos += usize::from(column[k].1);
                if column[k].0 == column[k + 1].0 {
                    continue;
                }
                let left_n = k + 1;
                let gain = parent
                    - (left_n as f64 * entropy(left_pos, left_n)
                        + (n - left_n) as f64 * entropy(pos - left_pos, n - left_n))
                        / n as f64;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, c, 0.5 * (column[k].0 + column[k + 1].0)));
                }
            }
        }
        best.map(|(_, c, t)| (c, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, conjunction: Vec<Predicate>) {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.data[i].1).count();
        let split = if depth < self.max_depth && pos > 0 && pos < n {
            self.best_split(&idx)
        } else {
            None
        };
        let Some((channel, threshold)) = split else {
            if !conjunction.is_empty() {
                self.leaves.push(Leaf { conjunction });
            }
            return;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.data[i].0[channel] <= threshold);
        for (part, comparator) in [(left, Comparator::Le), (right, Comparator::Gt)] {
            let mut conj = conjunction.clone();
            conj.push(Predicate {
                channel,
                comparator,
                threshold,
            });
            self.grow(part, depth + 1, conj);
        }
    }
}

/// Merges repeated tests on one channel to the tightest bound and orders predicates
/// by channel, `≤` before `>`.
fn canonical(conjunction: &[Predicate]) -> Vec<Predicate> {
    let mut out: Vec<Predicate> = Vec::new();
    for p in conjunction {
        match out
            .iter_mut()
            .find(|q| q.channel == p.channel && q.comparator == p.comparator)
        {
            Some(q) => {
                q.threshold = match p.comparator {
                    Comparator::Le => q.threshold.min(p.threshold),
                    Comparator::Gt => q.threshold.max(p.threshold),
                }
            }
            None => out.push(*p),
        }
    }
    out.sort_by(|a, b| {
        (a.channel, a.comparator)
            .cmp(&(b.channel, b.comparator))
            .then(a.threshold.total_cmp(&b.threshold))
    });
    out
}

/// Harvests pure, well-supported leaves of bagged shallow random-subspace trees as
/// one-sided rules.
pub fn induce_rules(train: &[LabeledPair], params: &RuleParams) -> Result<Vec<RiskFeature>> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("rule-induction training set"));
    }
    let data: Vec<(&[f64], bool)> = train
        .iter()
        .map(|p| (p.features.as_slice(), p.equivalent))
        .collect();
    let positives = data.iter().filter(|d| d.1).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::SingleClass);
    }
    let dims = data[0].0.len();
    if dims == 0 {
        return Err(Error::InvalidArgument("feature vectors are empty".into()));
    }
    let subset = ((params.feature_subsample * dims as f64).ceil() as usize).clamp(1, dims);
    let min_support = params.min_coverage * data.len() as f64;

    let mut rules: Vec<RiskFeature> = Vec::new();
    for tree in 0..params.trees {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(tree as u64);
        let mut grower = Grower {
            data: &data,
            dims,
            subset,
            max_depth: params.depth,
            rng,
            leaves: Vec::new(),
        };
        let sample: Vec<usize> = (0..data.len())
            .map(|_| grower.rng.gen_range(0..data.len()))
            .collect();
        grower.grow(sample, 0, Vec::new());
        for leaf in grower.leaves {
            // bootstrap leaves are re-scored on the full training set
            let (n, pos) = data
                .iter()
                .filter(|(x, _)| leaf.conjunction.iter().all(|p| p.holds(x)))
                .fold((0usize, 0usize), |(n, pos), (_, y)| {
                    (n + 1, pos + usize::from(*y))
                });
            if n == 0 {
                continue;
            }
            let majority = 2 * pos > n;
            let purity = pos.max(n - pos) as f64 / n as f64;
            if purity < params.purity || (n as f64) < min_support {
                continue;
            }
            let class = if majority {
                RuleClass::Equivalent
            } else {
                RuleClass::Inequivalent
            };
            let conjunction = canonical(&leaf.conjunction);
            if rules
                .iter()
                .any(|r| r.class == class && r.conjunction == conjunction)
            {
                continue;
            }
            let mu = estimate_prior(&conjunction, &data)?;
            rules.push(RiskFeature {
                id: String::new(),
                conjunction,
                class,
                coverage: n,
                mu,
                sigma2: INITIAL_SIGMA2,
            });
        }
    }
    for (i, r) in rules.iter_mut().enumerate() {
        r.id = format!("r{i:03}");
    }
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AttributeSpec, Schema};
    use crate::corpus::{FeatureSchema, FeatureVector};
    use crate::riskfeat::rule::{activate, parse_rule, read_ruleset, render_rule, write_ruleset};
    use proptest::prelude::*;
    use rand::Rng;

    fn schema() -> FeatureSchema {
        FeatureSchema::from_schema(
            &Schema::new(vec![
                AttributeSpec::text("title"),
                AttributeSpec::numeric("year", 10.0),
            ])
            .unwrap(),
        )
    }

    fn pair(i: usize, values: Vec<f64>, equivalent: bool) -> LabeledPair {
        LabeledPair {
            id: format!("p{i:04}"),
            features: FeatureVector::new(values),
            equivalent,
        }
    }

    fn noisy(n: usize, seed: u64) -> Vec<LabeledPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let y = rng.gen_bool(0.4);
                let centre = if y { 0.65 } else { 0.35 };
                let v: Vec<f64> = (0..4)
                    .map(|_| (centre + rng.gen_range(-0.3..0.3f64)).clamp(0.0, 1.0))
                    .collect();
                pair(i, v, y)
            })
            .collect()
    }

    #[test]
    fn year_inequality_rule_emerges() {
        // year_eq separates perfectly; title channels are noise
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let train: Vec<LabeledPair> = (0..200)
            .map(|i| {
                let y = i % 3 == 0;
                let v = vec![
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    if y { 1.0 } else { 0.0 },
                    rng.gen_range(0.0..1.0),
                ];
                pair(i, v, y)
            })
            .collect();
        let params = RuleParams {
            feature_subsample: 1.0,
            ..RuleParams::default()
        };
        let rules = induce_rules(&train, &params).unwrap();
        let s = schema();
        let rendered: Vec<String> = rules.iter().map(|r| render_rule(r, &s)).collect();
        assert!(
            rendered.contains(&"year_eq ≤ 0.5 → inequivalent".to_string()),
            "{rendered:?}"
        );
        let year = rules
            .iter()
            .find(|r| render_rule(r, &s) == "year_eq ≤ 0.5 → inequivalent")
            .unwrap();
        assert_eq!(
            year.coverage,
            train.iter().filter(|p| !p.equivalent).count()
        );
        assert_eq!(year.mu, 1.0 / (year.coverage as f64 + 2.0));
    }

    #[test]
    fn strict_purity_on_noise_gives_no_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let train: Vec<LabeledPair> = (0..200)
            .map(|i| pair(i, vec![rng.gen_range(0.0..1.0); 4], rng.gen_bool(0.5)))
            .collect();
        let params = RuleParams {
            purity: 1.0,
            min_coverage: 0.2,
            ..RuleParams::default()
        };
        assert!(induce_rules(&train, &params).unwrap().is_empty());
    }

    #[test]
    fn single_class_is_error() {
        let train: Vec<LabeledPair> = (0..10).map(|i| pair(i, vec![0.1; 4], true)).collect();
        assert!(matches!(
            induce_rules(&train, &RuleParams::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn emitted_rules_are_sound_by_direct_scan() {
        let train = noisy(200, 7);
        let params = RuleParams {
            purity: 0.9,
            min_coverage: 0.02,
            depth: 4,
            ..RuleParams::default()
        };
        let rules = induce_rules(&train, &params).unwrap();
        assert!(!rules.is_empty());
        for r in &rules {
            let covered: Vec<&LabeledPair> = train
                .iter()
                .filter(|p| {
                    r.conjunction.iter().all(|q| match q.comparator {
                        Comparator::Le => p.features.values[q.channel] <= q.threshold,
                        Comparator::Gt => p.features.values[q.channel] > q.threshold,
                    })
                })
                .collect();
            let pos = covered.iter().filter(|p| p.equivalent).count();
            let n = covered.len();
            assert_eq!(n, r.coverage);
            assert!(n as f64 >= 0.02 * 200.0);
            let agree = if r.class == RuleClass::Equivalent {
                pos
            } else {
                n - pos
            };
            assert!(agree as f64 / n as f64 >= 0.9);
            assert_eq!(r.mu, (pos as f64 + 1.0) / (n as f64 + 2.0));
            match r.class {
                RuleClass::Equivalent => assert!(r.mu > 0.5),
                RuleClass::Inequivalent => assert!(r.mu < 0.5),
            }
        }
    }

    #[test]
    fn prior_formula() {
        let covered: Vec<(&[f64], bool)> = (0..18).map(|i| (&[1.0][..], i < 17)).collect();
        let always = [Predicate {
            channel: 0,
            comparator: Comparator::Gt,
            threshold: 0.5,
        }];
        assert!((estimate_prior(&always, &covered).unwrap() - 0.9).abs() < 1e-15);
        let none: Vec<(&[f64], bool)> = (0..10).map(|_| (&[1.0][..], false)).collect();
        assert!((estimate_prior(&always, &none).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        let never = [Predicate {
            channel: 0,
            comparator: Comparator::Le,
            threshold: 0.5,
        }];
        assert!(estimate_prior(&never, &none).is_err());
    }

    #[test]
    fn activation_matches_predicate_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let rules: Vec<RiskFeature> = (0..50)
            .map(|i| RiskFeature {
                id: format!("r{i}"),
                conjunction: (0..rng.gen_range(1..=3))
                    .map(|_| Predicate {
                        channel: rng.gen_range(0..4),
                        comparator: if rng.gen_bool(0.5) {
                            Comparator::Le
                        } else {
                            Comparator::Gt
                        },
                        threshold: rng.gen_range(0.0..1.0),
                    })
                    .collect(),
                class: RuleClass::Inequivalent,
                coverage: 1,
                mu: 0.1,
                sigma2: 0.01,
            })
            .collect();
        for _ in 0..20 {
            let x = FeatureVector::new((0..4).map(|_| rng.gen_range(0.0..1.0)).collect());
            let z = activate(&rules, &x);
            for (j, r) in rules.iter().enumerate() {
                let mut all = true;
                for p in &r.conjunction {
                    let v = x.values[p.channel];
                    let ok = if p.comparator == Comparator::Le {
                        v <= p.threshold
                    } else {
                        v > p.threshold
                    };
                    all &= ok;
                }
                assert_eq!(z.bits[j], all);
            }
        }
        assert!(activate(&[], &FeatureVector::new(vec![0.2; 4])).is_empty());
        let all_ones = activate(
            &rules[..1],
            &FeatureVector::new(rules[0].conjunction.iter().fold(vec![0.5; 4], |mut v, p| {
                v[p.channel] = if p.comparator == Comparator::Le {
                    -1.0
                } else {
                    2.0
                };
                v
            })),
        );
        // contradictory predicates aside, a point chosen to satisfy each test activates the rule
        let consistent = rules[0].conjunction.iter().all(|p| {
            rules[0]
                .conjunction
                .iter()
                .all(|q| q.channel != p.channel || q.comparator == p.comparator)
        });
        if consistent {
            assert_eq!(all_ones.bits, vec![true]);
        }
    }

    #[test]
    fn render_and_reparse() {
        let s = schema();
        let rule = RiskFeature {
            id: "r000".into(),
            conjunction: vec![
                Predicate {
                    channel: 2,
                    comparator: Comparator::Le,
                    threshold: 0.5,
                },
                Predicate {
                    channel: 1,
                    comparator: Comparator::Le,
                    threshold: 0.3,
                },
            ],
            class: RuleClass::Inequivalent,
            coverage: 40,
            mu: 0.0833,
            sigma2: 0.01,
        };
        let text = render_rule(&rule, &s);
        assert_eq!(text, "year_eq ≤ 0.5 ∧ title_jaccard ≤ 0.3 → inequivalent");
        assert_eq!(render_rule(&rule, &s), text);
        let (conj, class) = parse_rule(&text, &s).unwrap();
        assert_eq!(conj, rule.conjunction);
        assert_eq!(class, rule.class);
        let depth1 = RiskFeature {
            conjunction: vec![rule.conjunction[0]],
            ..rule.clone()
        };
        assert_eq!(render_rule(&depth1, &s), "year_eq ≤ 0.5 → inequivalent");
    }

    #[test]
    fn induction_is_deterministic_and_coverage_monotone() {
        let train = noisy(300, 9);
        let base = RuleParams {
            purity: 0.9,
            min_coverage: 0.005,
            depth: 4,
            ..RuleParams::default()
        };
        let a = induce_rules(&train, &base).unwrap();
        assert_eq!(a, induce_rules(&train, &base).unwrap());
        let mut prev = a.clone();
        for tc in [0.01, 0.02, 0.05, 0.1] {
            let raised = induce_rules(
                &train,
                &RuleParams {
                    min_coverage: tc,
                    ..base.clone()
                },
            )
            .unwrap();
            assert!(raised.len() <= prev.len());
            for r in &raised {
                assert!(prev
                    .iter()
                    .any(|q| q.conjunction == r.conjunction && q.class == r.class));
            }
            prev = raised;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn ruleset_file_round_trips(seed in any::<u64>()) {
            let train = noisy(150, seed);
            let params = RuleParams { purity: 0.85, min_coverage: 0.01, seed, ..RuleParams::default() };
            let mut rules = induce_rules(&train, &params).unwrap();
            for (i, r) in rules.iter_mut().enumerate() {
                r.sigma2 = 0.01 + i as f64 / 7.0;
            }
            let s = FeatureSchema {
                channels: schema().channels,
            };
            let text = write_ruleset(&rules, &s);
            prop_assert_eq!(read_ruleset(&text, &s).unwrap(), rules);
        }
    }
}
