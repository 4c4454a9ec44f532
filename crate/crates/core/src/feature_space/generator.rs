use std::f64::consts::TAU;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::encoding::{encode_embedding, quantize_f16, LANES_PER_WORD};
use super::{Dataset, Example, FeatureKind, FeatureSchema, FeatureValue, TimeWindow, WindowLabel};
use crate::error::{Error, Result};
use crate::model::Scorer;

/// Per-feature generator knobs. Interpretation depends on the feature kind:
///
/// * numeric: `center + scale * N(0, 1) + seasonal_amplitude * sin(2πt / seasonal_period)`
/// * categorical: Zipf-like over `1..=cardinality` with exponent `skew`
/// * embedding / encoded embedding: i.i.d. `center + scale * N(0, 1)` components
/// * id lists: lengths uniform in `1..=min(max_len, 2 * mean_len - 1)`, ids uniform in `1..=vocab`,
///   weights uniform in `scale * [0.5, 1.5)`
///
/// With probability `missing_rate` the value is replaced by the feature's baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub missing_rate: f64,
    pub center: f64,
    pub scale: f64,
    pub skew: f64,
    pub vocab: u64,
    pub mean_len: f64,
    pub seasonal_amplitude: f64,
    pub seasonal_period: i64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            missing_rate: 0.0,
            center: 0.0,
            scale: 1.0,
            skew: 1.0,
            vocab: 10_000,
            mean_len: 5.0,
            seasonal_amplitude: 0.0,
            seasonal_period: 86_400,
        }
    }
}

impl GeneratorParams {
    pub(crate) fn validate(&self, feature: &str) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("feature `{feature}`: {what}")));
        if !(0.0..=1.0).contains(&self.missing_rate) {
            return bad("missing_rate must be in [0, 1]");
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) || !self.center.is_finite() {
            return bad("center/scale must be finite with scale >= 0");
        }
        if self.vocab == 0 || self.mean_len < 1.0 || self.seasonal_period <= 0 || self.skew < 0.0 {
            return bad("vocab, mean_len, skew and seasonal_period must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub examples: usize,
    pub seed: u64,
    #[serde(default = "default_display_fraction")]
    pub display_fraction: f64,
    #[serde(default = "default_label")]
    pub label: WindowLabel,
}

fn default_display_fraction() -> f64 {
    0.2
}

fn default_label() -> WindowLabel {
    WindowLabel::Control
}

impl GeneratorConfig {
    pub fn new(examples: usize, seed: u64) -> Self {
        GeneratorConfig {
            examples,
            seed,
            display_fraction: default_display_fraction(),
            label: default_label(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.examples == 0 {
            return Err(Error::InvalidConfig("example count must be >= 1".into()));
        }
        if !(self.display_fraction > 0.0 && self.display_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "display fraction {} not in (0, 1]",
                self.display_fraction
            )));
        }
        Ok(())
    }
}

enum Sampler {
    Plain,
    Categorical(WeightedIndex<f64>),
}

fn build_sampler(kind: &FeatureKind, params: &GeneratorParams) -> Result<Sampler> {
    match *kind {
        FeatureKind::Categorical { cardinality } => {
            let weights = (1..=cardinality).map(|k| (k as f64).powf(-params.skew));
            WeightedIndex::new(weights)
                .map(Sampler::Categorical)
                .map_err(|e| Error::InvalidConfig(format!("categorical weights: {e}")))
        }
        _ => Ok(Sampler::Plain),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn list_len(rng: &mut ChaCha8Rng, params: &GeneratorParams, max_len: usize) -> usize {
    let upper = ((2.0 * params.mean_len).round() as usize).saturating_sub(1).clamp(1, max_len);
    rng.random_range(1..=upper)
}

fn sample_value(
    kind: &FeatureKind,
    params: &GeneratorParams,
    sampler: &Sampler,
    timestamp: i64,
    rng: &mut ChaCha8Rng,
) -> Result<FeatureValue> {
    Ok(match (*kind, sampler) {
        (FeatureKind::Numeric, _) => {
            let phase = TAU * timestamp.rem_euclid(params.seasonal_period) as f64
                / params.seasonal_period as f64;
            FeatureValue::Numeric(
                params.center + params.scale * normal(rng) + params.seasonal_amplitude * phase.sin(),
            )
        }
        (FeatureKind::Categorical { .. }, Sampler::Categorical(dist)) => {
            FeatureValue::Categorical(dist.sample(rng) as u32 + 1)
        }
        (FeatureKind::Embedding { dim }, _) => FeatureValue::Embedding(
            (0..dim).map(|_| params.center + params.scale * normal(rng)).collect(),
        ),
        (FeatureKind::SparseIdList { max_len }, _) => {
            let len = list_len(rng, params, max_len);
            FeatureValue::SparseIdList((0..len).map(|_| rng.random_range(1..=params.vocab)).collect())
        }
        (FeatureKind::WeightedSparseIdList { max_len }, _) => {
            let len = list_len(rng, params, max_len);
            FeatureValue::WeightedSparseIdList(
                (0..len)
                    .map(|_| {
                        let id = rng.random_range(1..=params.vocab);
                        (id, params.scale * rng.random_range(0.5..1.5))
                    })
                    .collect(),
            )
        }
        (FeatureKind::EncodedEmbedding { decoded_dim }, _) => {
            debug_assert_eq!(decoded_dim % LANES_PER_WORD, 0);
            let v: Vec<f64> = (0..decoded_dim)
                .map(|_| quantize_f16(params.center + params.scale * normal(rng)))
                .collect();
            FeatureValue::EncodedEmbedding(encode_embedding(&v)?)
        }
        (FeatureKind::Categorical { .. }, Sampler::Plain) => unreachable!("sampler built per kind"),
    })
}

/// Generate a seeded synthetic dataset scored by `teacher`.
///
/// The top `display_fraction` of examples by teacher prediction (ties broken
/// by position) are flagged as displayed.
pub fn generate_dataset(
    config: &GeneratorConfig,
    window: TimeWindow,
    teacher: &dyn Scorer,
) -> Result<Dataset> {
    config.validate()?;
    let schema: Arc<FeatureSchema> = Arc::clone(teacher.schema());
    let samplers = schema
        .entries()
        .iter()
        .map(|e| build_sampler(&e.kind, &e.generator))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.examples;
    let span = (window.end - window.start) as i128;
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let timestamp = window.start + (i as i128 * span / n as i128) as i64;
        let mut features = Vec::with_capacity(schema.len());
        for (entry, sampler) in schema.entries().iter().zip(&samplers) {
            let value = sample_value(&entry.kind, &entry.generator, sampler, timestamp, &mut rng)?;
            // The missing draw happens for every feature so that toggling
            // missing_rate on one feature does not shift the others' streams.
            let missing = rng.random::<f64>() < entry.generator.missing_rate;
            features.push(if missing { entry.baseline.clone() } else { value });
        }
        examples.push(Example {
            example_id: format!("{}-{}-{i:07}", config.label, config.seed),
            timestamp,
            displayed: false,
            features,
        });
    }

    let predictions = examples
        .iter()
        .enumerate()
        .map(|(i, ex)| teacher.predict(ex).map_err(|e| e.at_example(i)))
        .collect::<Result<Vec<f64>>>()?;
    let shown = ((config.display_fraction * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| predictions[b].total_cmp(&predictions[a]).then(a.cmp(&b)));
    for &i in &order[..shown] {
        examples[i].displayed = true;
    }

    Ok(Dataset {
        schema,
        examples,
        label: config.label,
        window,
    })
}
