mod common;

use driftscope_core::bench::{
    apply_corruption, emit_benchmark_report, recall_metrics, run_case, BenchConfig, BenchHarness, BenchReport,
    CorruptionSpec, TargetSelector, Transform,
};
use proptest::prelude::*;

fn small_config() -> BenchConfig {
    BenchConfig {
        schema: common::small_mix(),
        pool_size: 600,
        sample_size: 300,
        k: 3,
        parallelism: 2,
        ..BenchConfig::default()
    }
}

fn spec(case_id: u8, targets: &[&str], transform: Transform, fraction: f64) -> CorruptionSpec {
    CorruptionSpec {
        case_id,
        description: format!("case {case_id}"),
        targets: TargetSelector::Explicit {
            features: targets.iter().map(|s| s.to_string()).collect(),
        },
        transform,
        fraction,
        seed: 5,
    }
}

#[test]
fn identity_corruption_shifts_nothing() {
    let h = BenchHarness::new(small_config()).unwrap();
    let r = h.run_case(&spec(1, &["num_00"], Transform::Identity, 1.0)).unwrap();
    assert_eq!(r.avg_prediction_change, 0.0);
    assert!(r.gfi_report.entries.iter().all(|e| e.shift == Some(0.0)));
}

#[test]
fn run_case_is_deterministic_and_reports_roundtrip() {
    let config = small_config();
    let s = spec(1, &["num_01"], Transform::LinearScale { factor: 3.0 }, 1.0);
    let a = run_case(&s, &config).unwrap();
    let b = run_case(&s, &BenchConfig { parallelism: 1, ..config }).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.corrupted, ["num_01"]);
    assert_eq!(a.gfi_report.meta.k, 3);

    let metrics = recall_metrics(std::slice::from_ref(&a)).unwrap();
    let report = emit_benchmark_report(3, 300, &[a], &[], Some(&metrics));
    assert_eq!(BenchReport::from_json(&report.to_json().unwrap()).unwrap(), report);
    assert_eq!(report.to_text().lines().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn encoded_only_case_has_no_mfc_hits() {
    let h = BenchHarness::new(small_config()).unwrap();
    let r = h.run_case(&spec(11, &["enc_00"], Transform::EncodedIntDivide { divisor: 10 }, 1.0)).unwrap();
    assert_eq!(r.mfc_hits, None);
    assert!(r.mfc_report.entries.iter().any(|e| e.feature_id == "enc_00" && e.shift.is_none()));
}

#[test]
fn failing_case_is_tagged_with_its_id() {
    let h = BenchHarness::new(small_config()).unwrap();
    let err = h.run_case(&spec(9, &["cat_00"], Transform::LinearScale { factor: 2.0 }, 1.0)).unwrap_err();
    assert!(err.to_string().contains('9'), "{err}");
}

#[test]
fn half_fraction_touches_ceil_half() {
    let model = common::small_model();
    let ds = common::dataset(&model, 101, 3);
    let s = spec(5, &["num_00", "ids_00"], Transform::ReplaceWithBaseline, 0.5);
    let c = apply_corruption(&ds, &s, None).unwrap();
    assert_eq!(c.affected.len(), 51);
    let changed = ds.examples.iter().zip(&c.dataset.examples).filter(|(a, b)| a != b).count();
    assert!(changed <= 51);
}

fn transforms() -> impl Strategy<Value = (&'static str, Transform)> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|f| ("num_00", Transform::LinearScale { factor: f })),
        (1i32..4).prop_map(|e| ("num_01", Transform::Power { exponent: e })),
        (1u32..4).prop_map(|c| ("cat_00", Transform::SetCategoricalConstant { category: c })),
        Just(("emb_00", Transform::ReplaceWithBaseline)),
        (0.0f64..1.0).prop_map(|f| ("ids_00", Transform::DropRandomIds { fraction: f })),
        (0.0f64..1.0).prop_map(|f| ("ids_01", Transform::DropRecentIds { fraction: f })),
        Just(("wids_00", Transform::ZeroWeights)),
        (2i64..100).prop_map(|d| ("enc_00", Transform::EncodedIntDivide { divisor: d })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Only the targeted column of the affected examples may change.
    #[test]
    fn corruption_is_local(
        (target, transform) in transforms(),
        fraction in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let model = common::small_model();
        let ds = common::dataset(&model, 60, 8);
        let mut s = spec(1, &[target], transform, fraction);
        s.seed = seed;
        let c = apply_corruption(&ds, &s, None).unwrap();
        let j = ds.schema.index_of(target).unwrap();
        prop_assert_eq!(c.affected.len(), (60.0 * fraction).ceil() as usize);
        for (i, (before, after)) in ds.examples.iter().zip(&c.dataset.examples).enumerate() {
            prop_assert_eq!(&before.example_id, &after.example_id);
            for (col, (x, y)) in before.features.iter().zip(&after.features).enumerate() {
                if col != j || c.affected.binary_search(&i).is_err() {
                    prop_assert_eq!(x, y);
                }
            }
        }
    }
}
