mod common;

use std::sync::Arc;

use driftscope_core::feature_space::io::{read_dataset, write_dataset};
use driftscope_core::feature_space::{
    generate_dataset, FeatureKind, FeatureSchema, FeatureSpec, GeneratorConfig, GeneratorParams, WindowLabel,
};
use driftscope_core::model::{predict_batch, ModelConfig, ReferenceModel};

#[test]
fn same_seed_same_bytes() {
    let model = common::small_model();
    let encode = |seed| {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &common::dataset(&model, 100, seed)).unwrap();
        buf
    };
    assert_eq!(encode(7), encode(7));
    assert_ne!(encode(7), encode(8));
}

#[test]
fn missing_rate_one_forces_baseline() {
    let g = GeneratorParams::default;
    let schema = FeatureSchema::new(vec![
        FeatureSpec::new("x", FeatureKind::Numeric, g()),
        FeatureSpec::new(
            "gone",
            FeatureKind::SparseIdList { max_len: 10 },
            GeneratorParams {
                missing_rate: 1.0,
                ..g()
            },
        ),
    ])
    .unwrap();
    let model = ReferenceModel::new(ModelConfig::default(), Arc::new(schema)).unwrap();
    let ds = common::dataset(&model, 300, 1);
    assert!(ds.column(1).all(|v| ds.schema.is_baseline(1, v)));
    assert!(!ds.column(0).all(|v| ds.schema.is_baseline(0, v)));
}

#[test]
fn display_fraction_counts_and_skews_high() {
    let model = common::small_model();
    let ds = common::dataset(&model, 1000, 3);
    assert_eq!(ds.displayed_count(), 200);
    let preds = predict_batch(&model, &ds.examples).unwrap();
    let min_displayed = ds
        .examples
        .iter()
        .zip(&preds)
        .filter(|(e, _)| e.displayed)
        .map(|(_, p)| *p)
        .fold(f64::INFINITY, f64::min);
    let max_hidden = ds
        .examples
        .iter()
        .zip(&preds)
        .filter(|(e, _)| !e.displayed)
        .map(|(_, p)| *p)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(min_displayed >= max_hidden);
}

#[test]
fn generated_values_conform_and_roundtrip() {
    let model = common::small_model();
    let mut cfg = GeneratorConfig::new(250, 4);
    cfg.label = WindowLabel::Anomaly;
    let ds = generate_dataset(&cfg, common::window(), &model).unwrap();
    ds.validate().unwrap();
    assert!(ds.examples.iter().all(|e| ds.window.contains(e.timestamp)));
    let mut buf = Vec::new();
    write_dataset(&mut buf, &ds).unwrap();
    let back = read_dataset(buf.as_slice(), Arc::clone(&ds.schema)).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn zero_examples_rejected() {
    let model = common::small_model();
    let cfg = GeneratorConfig::new(0, 1);
    assert!(generate_dataset(&cfg, common::window(), &model).is_err());
}
