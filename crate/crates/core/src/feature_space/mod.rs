//! Typed feature universe: kinds, values, static baselines, examples and datasets.
//!
//! Every feature has a baseline that is a pure function of the schema. Missing
//! data is stored as the baseline value itself, so an ablated feature and a
//! missing feature are indistinguishable to the model.

mod encoding;
mod generator;
pub mod io;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encoding::{decode_encoded_embedding, encode_embedding, quantize_f16, LANES_PER_WORD};
pub use generator::{generate_dataset, GeneratorConfig, GeneratorParams};

/// Category id reserved for "unknown"; real categories are `1..=cardinality`.
pub const UNKNOWN_CATEGORY: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical { cardinality: u32 },
    Embedding { dim: usize },
    SparseIdList { max_len: usize },
    WeightedSparseIdList { max_len: usize },
    EncodedEmbedding { decoded_dim: usize },
}

impl FeatureKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            FeatureKind::Numeric => true,
            FeatureKind::Categorical { cardinality } => cardinality >= 1,
            FeatureKind::Embedding { dim } => dim >= 1,
            FeatureKind::SparseIdList { max_len } | FeatureKind::WeightedSparseIdList { max_len } => {
                max_len >= 1
            }
            FeatureKind::EncodedEmbedding { decoded_dim } => {
                decoded_dim >= LANES_PER_WORD && decoded_dim % LANES_PER_WORD == 0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid feature kind {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureKind::Numeric => "numeric",
            FeatureKind::Categorical { .. } => "categorical",
            FeatureKind::Embedding { .. } => "embedding",
            FeatureKind::SparseIdList { .. } => "sparse_id_list",
            FeatureKind::WeightedSparseIdList { .. } => "weighted_sparse_id_list",
            FeatureKind::EncodedEmbedding { .. } => "encoded_embedding",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureValue {
    Numeric(f64),
    Categorical(u32),
    Embedding(Vec<f64>),
    /// Ids in recency order, most recent last.
    SparseIdList(Vec<u64>),
    WeightedSparseIdList(Vec<(u64, f64)>),
    EncodedEmbedding(Vec<i64>),
}

impl FeatureValue {
    pub fn conforms_to(&self, kind: &FeatureKind) -> bool {
        match (self, kind) {
            (FeatureValue::Numeric(x), FeatureKind::Numeric) => x.is_finite(),
            (FeatureValue::Categorical(c), FeatureKind::Categorical { cardinality }) => {
                *c <= *cardinality
            }
            (FeatureValue::Embedding(v), FeatureKind::Embedding { dim }) => {
                v.len() == *dim && v.iter().all(|x| x.is_finite())
            }
            (FeatureValue::SparseIdList(ids), FeatureKind::SparseIdList { max_len }) => {
                ids.len() <= *max_len
            }
            (FeatureValue::WeightedSparseIdList(ids), FeatureKind::WeightedSparseIdList { max_len }) => {
                ids.len() <= *max_len && ids.iter().all(|(_, w)| w.is_finite())
            }
            (FeatureValue::EncodedEmbedding(words), FeatureKind::EncodedEmbedding { decoded_dim }) => {
                words.len() * LANES_PER_WORD == *decoded_dim
            }
            _ => false,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FeatureValue::Numeric(_) => "numeric",
            FeatureValue::Categorical(_) => "categorical",
            FeatureValue::Embedding(_) => "embedding",
            FeatureValue::SparseIdList(_) => "sparse_id_list",
            FeatureValue::WeightedSparseIdList(_) => "weighted_sparse_id_list",
            FeatureValue::EncodedEmbedding(_) => "encoded_embedding",
        }
    }
}

/// The kind default used for ablation and for missing data.
///
/// Numeric features default to 0.0 here; a schema entry may override it with
/// its own constant (see [`FeatureSchema::baseline`]).
pub fn baseline_value(kind: &FeatureKind) -> FeatureValue {
    match *kind {
        FeatureKind::Numeric => FeatureValue::Numeric(0.0),
        FeatureKind::Categorical { .. } => FeatureValue::Categorical(UNKNOWN_CATEGORY),
        FeatureKind::Embedding { dim } => FeatureValue::Embedding(vec![0.0; dim]),
        FeatureKind::SparseIdList { .. } => FeatureValue::SparseIdList(Vec::new()),
        FeatureKind::WeightedSparseIdList { .. } => FeatureValue::WeightedSparseIdList(Vec::new()),
        FeatureKind::EncodedEmbedding { decoded_dim } => {
            FeatureValue::EncodedEmbedding(vec![0; decoded_dim / LANES_PER_WORD])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub id: String,
    pub kind: FeatureKind,
    pub baseline: FeatureValue,
    #[serde(default)]
    pub generator: GeneratorParams,
}

impl FeatureSpec {
    /// A spec using the kind default baseline.
    pub fn new(id: impl Into<String>, kind: FeatureKind, generator: GeneratorParams) -> Self {
        FeatureSpec {
            id: id.into(),
            baseline: baseline_value(&kind),
            kind,
            generator,
        }
    }

    pub fn with_numeric_baseline(mut self, value: f64) -> Self {
        if self.kind == FeatureKind::Numeric {
            self.baseline = FeatureValue::Numeric(value);
        }
        self
    }
}

/// Ordered feature list; position defines the column index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    entries: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn new(entries: Vec<FeatureSpec>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidConfig("schema has no features".into()));
        }
        let mut seen = HashSet::new();
        for entry in &entries {
            if !seen.insert(entry.id.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate feature id `{}`", entry.id)));
            }
            entry.kind.validate()?;
            if !entry.baseline.conforms_to(&entry.kind) {
                return Err(Error::InvalidConfig(format!(
                    "baseline of `{}` is not a valid {} value",
                    entry.id, entry.kind
                )));
            }
            entry.generator.validate(&entry.id)?;
        }
        Ok(FeatureSchema { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[FeatureSpec] {
        &self.entries
    }

    pub fn entry(&self, column: usize) -> &FeatureSpec {
        &self.entries[column]
    }

    pub fn baseline(&self, column: usize) -> &FeatureValue {
        &self.entries[column].baseline
    }

    pub fn kind(&self, column: usize) -> &FeatureKind {
        &self.entries[column].kind
    }

    pub fn index_of(&self, feature_id: &str) -> Result<usize> {
        self.entries
            .iter()
            .position(|e| e.id == feature_id)
            .ok_or_else(|| Error::UnknownFeature(feature_id.to_string()))
    }

    pub fn feature_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn is_baseline(&self, column: usize, value: &FeatureValue) -> bool {
        self.entries[column].baseline == *value
    }

    /// Check that an example has one conforming value per feature.
    pub fn check_example(&self, example: &Example) -> Result<()> {
        if example.features.len() != self.entries.len() {
            return Err(Error::SchemaMismatch(format!(
                "example `{}` has {} features, schema has {}",
                example.example_id,
                example.features.len(),
                self.entries.len()
            )));
        }
        for (entry, value) in self.entries.iter().zip(&example.features) {
            if !value.conforms_to(&entry.kind) {
                return Err(Error::SchemaMismatch(format!(
                    "example `{}` feature `{}`: {} value does not conform to {}",
                    example.example_id,
                    entry.id,
                    value.kind_name(),
                    entry.kind
                )));
            }
        }
        Ok(())
    }

    /// An example with every feature at its baseline.
    pub fn baseline_example(&self, example_id: impl Into<String>, timestamp: i64) -> Example {
        Example {
            example_id: example_id.into(),
            timestamp,
            displayed: false,
            features: self.entries.iter().map(|e| e.baseline.clone()).collect(),
        }
    }
}

/// One logged input row. `features` is aligned with the schema columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub example_id: String,
    pub timestamp: i64,
    pub displayed: bool,
    pub features: Vec<FeatureValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowLabel {
    Control,
    Anomaly,
}

impl fmt::Display for WindowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowLabel::Control => f.write_str("control"),
            WindowLabel::Anomaly => f.write_str("anomaly"),
        }
    }
}

/// Half-open time range `[start, end)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: i64,
    pub end: i64,
}

impl TimeWindow {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end <= start {
            return Err(Error::InvalidConfig(format!("empty time window [{start}, {end})")));
        }
        Ok(TimeWindow { start, end })
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn shifted(&self, offset: i64) -> TimeWindow {
        TimeWindow {
            start: self.start + offset,
            end: self.end + offset,
        }
    }
}

/// How the control window is positioned relative to the anomaly window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlWindowPolicy {
    PreviousHour,
    #[default]
    SameHourPreviousDay,
}

impl ControlWindowPolicy {
    pub fn control_window(&self, anomaly: TimeWindow) -> TimeWindow {
        match self {
            ControlWindowPolicy::PreviousHour => anomaly.shifted(-3600),
            ControlWindowPolicy::SameHourPreviousDay => anomaly.shifted(-86_400),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Arc<FeatureSchema>,
    pub examples: Vec<Example>,
    pub label: WindowLabel,
    pub window: TimeWindow,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, ex) in self.examples.iter().enumerate() {
            self.schema.check_example(ex).map_err(|e| e.at_example(i))?;
            if !self.window.contains(ex.timestamp) {
                return Err(Error::SchemaMismatch(format!(
                    "timestamp {} outside window [{}, {})",
                    ex.timestamp, self.window.start, self.window.end
                ))
                .at_example(i));
            }
        }
        Ok(())
    }

    pub fn displayed_count(&self) -> usize {
        self.examples.iter().filter(|e| e.displayed).count()
    }

    /// Column view of one feature across all examples.
    pub fn column(&self, column: usize) -> impl Iterator<Item = &FeatureValue> {
        self.examples.iter().map(move |e| &e.features[column])
    }

    pub fn with_examples(&self, examples: Vec<Example>) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            examples,
            label: self.label,
            window: self.window,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureSpec::new("x", FeatureKind::Numeric, GeneratorParams::default()),
            FeatureSpec::new("c", FeatureKind::Categorical { cardinality: 100 }, GeneratorParams::default()),
            FeatureSpec::new("e", FeatureKind::Embedding { dim: 8 }, GeneratorParams::default()),
        ])
        .unwrap()
    }

    #[test]
    fn baselines_per_kind() {
        assert_eq!(
            baseline_value(&FeatureKind::Categorical { cardinality: 100 }),
            FeatureValue::Categorical(UNKNOWN_CATEGORY)
        );
        assert_eq!(
            baseline_value(&FeatureKind::Embedding { dim: 8 }),
            FeatureValue::Embedding(vec![0.0; 8])
        );
        assert_eq!(
            baseline_value(&FeatureKind::SparseIdList { max_len: 50 }),
            FeatureValue::SparseIdList(vec![])
        );
        assert_eq!(
            baseline_value(&FeatureKind::WeightedSparseIdList { max_len: 5 }),
            FeatureValue::WeightedSparseIdList(vec![])
        );
        assert_eq!(
            baseline_value(&FeatureKind::EncodedEmbedding { decoded_dim: 1024 }),
            FeatureValue::EncodedEmbedding(vec![0; 256])
        );
        assert_eq!(baseline_value(&FeatureKind::Numeric), FeatureValue::Numeric(0.0));
    }

    #[test]
    fn baselines_are_pure_functions_of_schema() {
        let a = schema();
        let b = schema();
        for j in 0..a.len() {
            assert_eq!(a.baseline(j), b.baseline(j));
        }
    }

    #[test]
    fn numeric_baseline_override() {
        let spec = FeatureSpec::new("x", FeatureKind::Numeric, GeneratorParams::default())
            .with_numeric_baseline(1.5);
        assert_eq!(spec.baseline, FeatureValue::Numeric(1.5));
    }

    #[test]
    fn invalid_kinds_rejected() {
        assert!(FeatureKind::Embedding { dim: 0 }.validate().is_err());
        assert!(FeatureKind::Categorical { cardinality: 0 }.validate().is_err());
        assert!(FeatureKind::SparseIdList { max_len: 0 }.validate().is_err());
        assert!(FeatureKind::EncodedEmbedding { decoded_dim: 6 }.validate().is_err());
        assert!(FeatureKind::EncodedEmbedding { decoded_dim: 1024 }.validate().is_ok());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = FeatureSchema::new(vec![
            FeatureSpec::new("x", FeatureKind::Numeric, GeneratorParams::default()),
            FeatureSpec::new("x", FeatureKind::Numeric, GeneratorParams::default()),
        ]);
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn check_example_catches_tag_mismatch() {
        let s = schema();
        let mut ex = s.baseline_example("a", 0);
        assert!(s.check_example(&ex).is_ok());
        ex.features[0] = FeatureValue::Categorical(1);
        assert!(matches!(s.check_example(&ex), Err(Error::SchemaMismatch(_))));
        ex.features[0] = FeatureValue::Numeric(1.0);
        ex.features[2] = FeatureValue::Embedding(vec![0.0; 7]);
        assert!(s.check_example(&ex).is_err());
    }

    #[test]
    fn control_window_policies() {
        let w = TimeWindow::new(100_000, 103_600).unwrap();
        assert_eq!(ControlWindowPolicy::default(), ControlWindowPolicy::SameHourPreviousDay);
        assert_eq!(ControlWindowPolicy::PreviousHour.control_window(w).start, 96_400);
        assert_eq!(ControlWindowPolicy::SameHourPreviousDay.control_window(w).start, 13_600);
    }
}
