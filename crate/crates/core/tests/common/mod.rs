#![allow(dead_code)]

use std::sync::Arc;

use driftscope_core::bench::SchemaMix;
use driftscope_core::feature_space::{generate_dataset, Dataset, GeneratorConfig, TimeWindow};
use driftscope_core::model::{ModelConfig, ReferenceModel};

/// Twelve features covering every kind, at unit-test scale.
pub fn small_mix() -> SchemaMix {
    SchemaMix {
        numeric: 4,
        categorical: 2,
        embedding: 1,
        sparse: 2,
        weighted: 2,
        encoded: 1,
        seed: 11,
    }
}

pub fn small_model() -> ReferenceModel {
    ReferenceModel::new(ModelConfig::default(), Arc::new(small_mix().build().unwrap())).unwrap()
}

pub fn window() -> TimeWindow {
    TimeWindow::new(0, 3600).unwrap()
}

pub fn dataset(model: &ReferenceModel, n: usize, seed: u64) -> Dataset {
    generate_dataset(&GeneratorConfig::new(n, seed), window(), model).unwrap()
}
