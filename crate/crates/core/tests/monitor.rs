mod common;

use driftscope_core::aggregation::gfi;
use driftscope_core::attribution::{compute_lfi_matrix, AttributionEngine, LfiMethod};
use driftscope_core::feature_space::{generate_dataset, GeneratorConfig, TimeWindow};
use driftscope_core::monitor::{Monitor, WindowConfig};

fn config() -> WindowConfig {
    WindowConfig {
        window_size: 120,
        step_size: 40,
        lag: 3,
        ..WindowConfig::default()
    }
}

#[test]
fn snapshot_matches_offline_gfi_every_step() {
    let model = common::small_model();
    let stream = generate_dataset(&GeneratorConfig::new(600, 21), TimeWindow::new(0, 600).unwrap(), &model).unwrap();
    let mut mon = Monitor::new(config(), LfiMethod::default(), AttributionEngine::new(3), &model).unwrap();
    for (s, batch) in stream.examples.chunks(40).enumerate() {
        mon.step(&model, batch.to_vec()).unwrap();
        let (held, cached) = mon.footprint();
        assert!(held <= 120 && cached <= 4);
        if s < 2 {
            assert!(!mon.is_full());
            assert!(mon.snapshot_gfi().is_err());
            continue;
        }
        let window = mon.window_dataset().unwrap();
        assert_eq!(window.examples, stream.examples[(s - 2) * 40..(s + 1) * 40]);
        let offline = gfi(
            &compute_lfi_matrix(&model, &window, LfiMethod::default()).unwrap(),
            mon.current_window_name(),
        );
        assert_eq!(mon.snapshot_gfi().unwrap(), offline, "step {s}");
    }
    assert_eq!(mon.steps(), 15);
}

#[test]
fn rejects_foreign_model() {
    let model = common::small_model();
    let other = common::small_model().with_layer_norm(true).unwrap();
    let batch = common::dataset(&model, 40, 1).examples;
    let mut mon = Monitor::new(config(), LfiMethod::default(), AttributionEngine::new(1), &model).unwrap();
    assert!(mon.step(&other, batch).is_err());
    assert_eq!(mon.steps(), 0);
}
