mod common;

use std::sync::Arc;

use driftscope_core::aggregation::median;
use driftscope_core::attribution::{
    ablate_predict, compute_lfi_matrix, AttributionEngine, LfiMatrix, LfiMethod,
};
use driftscope_core::feature_space::{Example, FeatureKind, FeatureSchema, FeatureSpec, FeatureValue, GeneratorParams};
use driftscope_core::model::{Scorer, PREDICTION_EPS};
use driftscope_core::Result;

/// `p = sigmoid(sum of numeric inputs + bias)`, clamped like the reference model.
struct Logistic {
    schema: Arc<FeatureSchema>,
    bias: f64,
}

impl Logistic {
    fn new(ids: &[&str], bias: f64) -> Self {
        let specs = ids
            .iter()
            .map(|id| FeatureSpec::new(*id, FeatureKind::Numeric, GeneratorParams::default()))
            .collect();
        Logistic {
            schema: Arc::new(FeatureSchema::new(specs).unwrap()),
            bias,
        }
    }

    fn example(&self, id: &str, xs: &[f64]) -> Example {
        let mut ex = self.schema.baseline_example(id, 0);
        ex.features = xs.iter().map(|x| FeatureValue::Numeric(*x)).collect();
        ex
    }
}

fn sigmoid(z: f64) -> f64 {
    (1.0 / (1.0 + (-z).exp())).clamp(PREDICTION_EPS, 1.0 - PREDICTION_EPS)
}

impl Scorer for Logistic {
    fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    fn checkpoint_id(&self) -> &str {
        "logistic"
    }

    fn predict(&self, example: &Example) -> Result<f64> {
        let z: f64 = example
            .features
            .iter()
            .map(|v| match v {
                FeatureValue::Numeric(x) => *x,
                _ => unreachable!(),
            })
            .sum();
        Ok(sigmoid(z + self.bias))
    }
}

#[test]
fn one_feature_toy_ablates_to_sigmoid_of_baseline() {
    let model = Logistic::new(&["x"], 0.0);
    let ex = model.example("e", &[1.3]);
    assert_eq!(model.predict(&ex).unwrap(), sigmoid(1.3));
    assert_eq!(ablate_predict(&model, &ex, "x").unwrap(), sigmoid(0.0));
    assert!(ablate_predict(&model, &ex, "nope").is_err());
}

#[test]
fn small_matrix_matches_cellwise_oracle() {
    let model = Logistic::new(&["a", "b"], -0.2);
    let examples = [
        model.example("e0", &[0.5, -1.0]),
        model.example("e1", &[0.0, 2.0]),
        model.example("e2", &[-0.7, 0.3]),
    ];
    let ds = driftscope_core::feature_space::Dataset {
        schema: Arc::clone(&model.schema),
        examples: examples.to_vec(),
        label: driftscope_core::feature_space::WindowLabel::Control,
        window: common::window(),
    };
    for method in [LfiMethod::default(), LfiMethod::PredictionRatio] {
        let w = compute_lfi_matrix(&model, &ds, method).unwrap();
        for (i, ex) in examples.iter().enumerate() {
            let p = model.predict(ex).unwrap();
            for (j, id) in ["a", "b"].iter().enumerate() {
                let q = ablate_predict(&model, ex, id).unwrap();
                assert_eq!(w.get(i, j), method.lfi(p, q), "{method} cell ({i},{j})");
            }
        }
        assert_eq!(w.get(1, 0), 0.0);
    }
}

#[test]
fn all_baseline_dataset_gives_zero_matrix() {
    let model = common::small_model();
    let mut ds = common::dataset(&model, 20, 1);
    for (i, ex) in ds.examples.iter_mut().enumerate() {
        *ex = model_baseline(&ds.schema, i);
    }
    let w = compute_lfi_matrix(&model, &ds, LfiMethod::default()).unwrap();
    assert!((0..w.n_rows()).all(|i| w.row(i).iter().all(|v| *v == 0.0)));
}

fn model_baseline(schema: &FeatureSchema, i: usize) -> Example {
    schema.baseline_example(format!("b{i}"), i as i64)
}

#[test]
fn zero_at_baseline_and_cost_accounting() {
    let model = common::small_model();
    let ds = common::dataset(&model, 300, 5);
    let a = AttributionEngine::new(2).compute(&model, &ds, LfiMethod::default()).unwrap();
    let mut active = 0u64;
    for (i, ex) in ds.examples.iter().enumerate() {
        for (j, v) in ex.features.iter().enumerate() {
            if ds.schema.is_baseline(j, v) {
                assert_eq!(a.matrix.get(i, j), 0.0);
            } else {
                active += 1;
            }
            assert!(a.matrix.get(i, j).is_finite());
        }
    }
    assert_eq!(a.forward_passes, ds.len() as u64 + active);
    assert!(a.forward_passes <= (ds.len() * (ds.schema.len() + 1)) as u64);
}

#[test]
fn thread_count_and_row_order_do_not_matter() {
    let model = common::small_model();
    let ds = common::dataset(&model, 200, 6);
    let one = AttributionEngine::new(1).compute(&model, &ds, LfiMethod::default()).unwrap();
    let many = AttributionEngine::new(8).compute(&model, &ds, LfiMethod::default()).unwrap();
    assert_eq!(one, many);
    let mut buf1 = Vec::new();
    let mut buf8 = Vec::new();
    one.matrix.write(&mut buf1).unwrap();
    many.matrix.write(&mut buf8).unwrap();
    assert_eq!(buf1, buf8);

    let reversed = ds.with_examples(ds.examples.iter().rev().cloned().collect());
    let r = compute_lfi_matrix(&model, &reversed, LfiMethod::default()).unwrap();
    let n = ds.len();
    for i in 0..n {
        assert_eq!(r.row(n - 1 - i), one.matrix.row(i));
    }
}

#[test]
fn matrix_file_roundtrip() {
    let model = common::small_model();
    let ds = common::dataset(&model, 50, 7);
    let w = compute_lfi_matrix(&model, &ds, LfiMethod::PredictionRatio).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.lfi");
    w.save(&path).unwrap();
    assert_eq!(LfiMatrix::load(&path).unwrap(), w);
}

/// Pseudo-loss importances concentrate closer to zero than prediction-ratio ones.
#[test]
fn pseudo_loss_is_more_concentrated_than_ratio() {
    let model = common::small_model();
    let ds = common::dataset(&model, 1000, 8);
    let med = |method| {
        let w = compute_lfi_matrix(&model, &ds, method).unwrap();
        let mut all: Vec<f64> = (0..w.n_rows())
            .flat_map(|i| w.row(i).to_vec())
            .filter(|v| *v != 0.0)
            .map(f64::abs)
            .collect();
        median(&mut all).unwrap()
    };
    let (pl, pr) = (med(LfiMethod::default()), med(LfiMethod::PredictionRatio));
    assert!(pl < pr, "pseudo-loss median {pl}, ratio median {pr}");
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn lfi_vanishes_when_ablation_is_a_no_op(p in PREDICTION_EPS..1.0 - PREDICTION_EPS) {
            prop_assert_eq!(LfiMethod::default().lfi(p, p), 0.0);
            prop_assert_eq!(LfiMethod::PredictionRatio.lfi(p, p), 0.0);
        }

        #[test]
        fn lfi_is_finite_on_clamped_inputs(
            p in PREDICTION_EPS..=1.0 - PREDICTION_EPS,
            q in PREDICTION_EPS..=1.0 - PREDICTION_EPS,
        ) {
            prop_assert!(LfiMethod::default().lfi(p, q).is_finite());
            prop_assert!(LfiMethod::PredictionRatio.lfi(p, q).is_finite());
        }

        #[test]
        fn generated_rows_are_zero_at_baseline(seed in any::<u64>()) {
            let model = common::small_model();
            let ds = common::dataset(&model, 8, seed);
            let w = compute_lfi_matrix(&model, &ds, LfiMethod::default()).unwrap();
            for (i, ex) in ds.examples.iter().enumerate() {
                for (j, v) in ex.features.iter().enumerate() {
                    if ds.schema.is_baseline(j, v) {
                        prop_assert_eq!(w.get(i, j), 0.0);
                    }
                }
            }
        }
    }
}
