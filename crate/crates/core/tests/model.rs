mod common;

use std::sync::Arc;

use driftscope_core::bench::SchemaMix;
use driftscope_core::feature_space::{decode_encoded_embedding, encode_embedding, quantize_f16, FeatureValue};
use driftscope_core::model::{predict_batch, ModelConfig, ReferenceModel, Scorer, PREDICTION_EPS};

#[test]
fn batch_order_and_splitting() {
    let model = common::small_model();
    let ds = common::dataset(&model, 64, 2);
    let all = predict_batch(&model, &ds.examples).unwrap();
    assert_eq!(predict_batch(&model, &ds.examples[..1]).unwrap(), vec![model.predict(&ds.examples[0]).unwrap()]);
    let mut halves = predict_batch(&model, &ds.examples[..30]).unwrap();
    halves.extend(predict_batch(&model, &ds.examples[30..]).unwrap());
    assert_eq!(halves, all);
    let reversed: Vec<_> = ds.examples.iter().rev().cloned().collect();
    let mut back = predict_batch(&model, &reversed).unwrap();
    back.reverse();
    assert_eq!(back, all);
    assert!(all.iter().all(|p| (PREDICTION_EPS..=1.0 - PREDICTION_EPS).contains(p)));
}

#[test]
fn baseline_point_is_fixed() {
    let model = common::small_model();
    let ex = model.schema().baseline_example("b", 0);
    let p0 = model.predict(&ex).unwrap();
    for _ in 0..3 {
        assert_eq!(model.predict(&ex).unwrap(), p0);
    }
}

/// Scaling an encoded embedding's decoded values by 1000 moves predictions
/// less when layer normalization is on.
#[test]
fn layer_norm_damps_encoded_scale_corruption() {
    let schema = Arc::new(SchemaMix::default().build().unwrap());
    let plain = ReferenceModel::new(ModelConfig::default(), schema).unwrap();
    let normed = plain.with_layer_norm(true).unwrap();
    let ds = common::dataset(&plain, 400, 9);
    let j = ds.schema.index_of("enc_00").unwrap();
    let (mut d_plain, mut d_normed) = (0.0, 0.0);
    for ex in &ds.examples {
        let FeatureValue::EncodedEmbedding(words) = &ex.features[j] else {
            panic!("kind")
        };
        let scaled: Vec<f64> = decode_encoded_embedding(words).iter().map(|v| quantize_f16(v * 1000.0)).collect();
        let mut corrupted = ex.clone();
        corrupted.features[j] = FeatureValue::EncodedEmbedding(encode_embedding(&scaled).unwrap());
        d_plain += (plain.predict(&corrupted).unwrap() - plain.predict(ex).unwrap()).abs();
        d_normed += (normed.predict(&corrupted).unwrap() - normed.predict(ex).unwrap()).abs();
    }
    assert!(d_normed < d_plain, "with layer norm {d_normed}, without {d_plain}");
}
