use std::collections::BTreeSet;
use std::path::Path;

use riskadapt::adapt::{adaptive_train, flip_report, AdaptConfig, Phase};
use riskadapt::classifier::{evaluate_f1, pretrain, MatcherModel};
use riskadapt::corpus::{
    bibliographic_schema, generate_workload, read_feature_cache, split_dataset,
    write_feature_cache, DatasetSplit, FeatureSchema, SplitRatios, SyntheticSpec,
};
use riskadapt::riskmodel::{read_risk_model, write_risk_model};

fn split(seed: u64) -> DatasetSplit {
    let spec = SyntheticSpec {
        n_entities: 100,
        duplicates_per_entity: 4,
        corruption: vec![0.1, 0.3],
        sibling_rate: 0.1,
        attribute_corruption: Default::default(),
        seed,
    };
    let pairs = generate_workload(&spec)
        .unwrap()
        .labeled_candidates(2)
        .unwrap();
    split_dataset(&pairs, SplitRatios::STANDARD, seed).unwrap()
}

fn config() -> AdaptConfig {
    let mut c = AdaptConfig::default().reseeded(3);
    c.train.risk_epochs = 3;
    c.train.risk_lr_scale = 10.0;
    c
}

#[test]
fn splits_are_disjoint_and_cover_candidates() {
    let s = split(8);
    let ids = |v: &[riskadapt::corpus::LabeledPair]| -> BTreeSet<String> {
        v.iter().map(|p| p.id.clone()).collect()
    };
    let (a, b, c) = (ids(&s.train), ids(&s.validation), ids(&s.test));
    assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
    assert!(s.train.iter().any(|p| p.equivalent));
    assert!(s.validation.iter().any(|p| p.equivalent));
}

#[test]
fn adaptive_run_is_consistent_and_reproducible() {
    let s = split(8);
    let cfg = config();
    let out = adaptive_train(&s, &cfg).unwrap();

    // phase 1 of the full run is exactly a standalone pre-training run
    let init = MatcherModel::init(
        s.train[0].features.len(),
        cfg.train.hidden_units,
        cfg.train.seed,
    );
    let pre = pretrain(init, &s.train, &s.validation, &cfg.train).unwrap();
    assert_eq!(pre.model, out.pretrained);

    assert_eq!(out.ledger.snapshots.len(), cfg.train.risk_epochs + 1);
    assert!(out.ledger.snapshots.last().unwrap().risk.is_none());
    let risk_rows = out.log.iter().filter(|r| r.phase == Phase::Risk).count();
    assert_eq!(risk_rows, cfg.train.risk_epochs);

    let report = flip_report(&out.ledger, 0).unwrap();
    let counted = report.tp.total + report.tn.total + report.fn_.all.total + report.fp.all.total;
    assert_eq!(counted, s.test.len());
    for row in [report.fn_, report.fp] {
        assert_eq!(
            row.few_supporters.total + row.many_supporters.total,
            row.all.total
        );
    }

    let f1 = evaluate_f1(&out.classifier, &s.test).unwrap();
    assert!((0.0..=1.0).contains(&f1));
    let again = adaptive_train(&s, &cfg).unwrap();
    assert_eq!(again.classifier, out.classifier);
    assert_eq!(again.risk_model, out.risk_model);
    assert_eq!(again.ledger, out.ledger);
    assert_eq!(again.log, out.log);
}

#[test]
fn artifacts_round_trip_through_text() {
    let s = split(9);
    let out = adaptive_train(&s, &config()).unwrap();
    let schema = FeatureSchema::from_schema(&bibliographic_schema());

    let text = write_risk_model(&out.risk_model, &schema);
    assert_eq!(read_risk_model(&text, &schema).unwrap(), out.risk_model);

    let ckpt = out.classifier.to_checkpoint_string();
    assert_eq!(
        MatcherModel::from_checkpoint_str(&ckpt).unwrap(),
        out.classifier
    );

    let cache = write_feature_cache(&s.test, &schema).unwrap();
    let back = read_feature_cache(&cache, &schema, Path::new("test.csv")).unwrap();
    assert_eq!(back, s.test);
}
