//! Desk-scale reference scoring model.
//!
//! Numeric features go through a dense tower. Categorical and id-list features
//! are looked up in embedding tables (sum pooling, weighted for weighted id
//! lists). Dense embedding vectors, including decoded encoded embeddings, are
//! projected with a `tanh` layer. The dense output interacts with every
//! embedding vector through dot products before the top MLP. With layer
//! normalization enabled each embedding-derived vector is normalized before it
//! reaches the projection or interaction stage.

mod layers;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_space::{decode_encoded_embedding, Example, FeatureKind, FeatureSchema, FeatureValue};
use layers::{layer_norm, sigmoid, Dense, Mlp};

pub const PREDICTION_EPS: f64 = 1e-6;
pub const LAYER_NORM_VAR_FLOOR: f64 = 1e-5;
pub const MODEL_HEADER: &str = "driftscope-model v1";

/// Anything that maps an example to an event probability.
pub trait Scorer: Sync {
    fn schema(&self) -> &Arc<FeatureSchema>;

    fn checkpoint_id(&self) -> &str;

    fn predict(&self, example: &Example) -> Result<f64>;

    /// The unablated prediction plus one prediction per requested column with
    /// that column replaced by its baseline. Implementations may share work
    /// between the passes but must return exactly what `predict` would return
    /// on the ablated copies.
    fn predict_with_ablations(&self, example: &Example, columns: &[usize]) -> Result<(f64, Vec<f64>)> {
        let p = self.predict(example)?;
        let mut ablated = Vec::with_capacity(columns.len());
        let mut copy = example.clone();
        for &j in columns {
            let saved = std::mem::replace(&mut copy.features[j], self.schema().baseline(j).clone());
            ablated.push(self.predict(&copy)?);
            copy.features[j] = saved;
        }
        Ok((p, ablated))
    }
}

/// Elementwise `predict`, order preserving.
pub fn predict_batch(model: &dyn Scorer, examples: &[Example]) -> Result<Vec<f64>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| model.predict(ex).map_err(|e| e.at_example(i)))
        .collect()
}

/// 1 iff `p >= threshold`.
pub fn pseudo_label(p: f64, threshold: f64) -> u8 {
    u8::from(p >= threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub dense_hidden: Vec<usize>,
    pub top_hidden: Vec<usize>,
    pub id_table_size: usize,
    pub layer_norm_enabled: bool,
    pub weight_seed: u64,
    pub pseudo_label_threshold: f64,
    pub output_bias: f64,
    /// Per-feature weight scales are drawn log-uniformly from this range.
    pub importance_range: (f64, f64),
    /// Weight scale for encoded-embedding projections.
    pub encoded_importance: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 8,
            dense_hidden: vec![16],
            top_hidden: vec![16],
            id_table_size: 1024,
            layer_norm_enabled: false,
            weight_seed: 0,
            pseudo_label_threshold: 0.5,
            output_bias: -0.5,
            importance_range: (0.05, 1.0),
            encoded_importance: 0.05,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("model: {m}")));
        if self.embedding_dim == 0 || self.id_table_size == 0 {
            return bad("embedding_dim and id_table_size must be >= 1");
        }
        if self.dense_hidden.iter().chain(&self.top_hidden).any(|&w| w == 0) {
            return bad("hidden widths must be >= 1");
        }
        if !(self.pseudo_label_threshold > 0.0 && self.pseudo_label_threshold < 1.0) {
            return bad("pseudo_label_threshold must be in (0, 1)");
        }
        let (lo, hi) = self.importance_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) || self.encoded_importance.is_nan() || self.encoded_importance <= 0.0 {
            return bad("importance scales must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Tower {
    Numeric { slot: usize, scale: f64, baseline: f64 },
    Lookup { slot: usize, rows: Vec<f64> },
    Pooled { slot: usize, rows: usize, table: Vec<f64> },
    Projected { slot: usize, proj: Dense },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Weights {
    config: ModelConfig,
    schema: FeatureSchema,
    towers: Vec<Tower>,
    dense: Mlp,
    top: Mlp,
}

/// The reference model. Weights are immutable after construction.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    weights: Weights,
    schema: Arc<FeatureSchema>,
    numeric_slots: usize,
    embed_slots: usize,
    baseline_embeds: Vec<Vec<f64>>,
    checkpoint_id: String,
}

struct Activations {
    numeric: Vec<f64>,
    embeds: Vec<Vec<f64>>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi == lo {
        lo
    } else {
        (rng.random_range(lo.ln()..hi.ln())).exp()
    }
}

fn gaussian(n: usize, std: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

impl ReferenceModel {
    pub fn new(config: ModelConfig, schema: Arc<FeatureSchema>) -> Result<Self> {
        config.validate()?;
        let d = config.embedding_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.weight_seed);
        let mut towers = Vec::with_capacity(schema.len());
        let (mut numeric_slots, mut embed_slots) = (0, 0);
        for entry in schema.entries() {
            let importance = log_uniform(&mut rng, config.importance_range);
            let tower = match entry.kind {
                FeatureKind::Numeric => {
                    let baseline = match entry.baseline {
                        FeatureValue::Numeric(b) => b,
                        _ => unreachable!("schema validated"),
                    };
                    numeric_slots += 1;
                    Tower::Numeric {
                        slot: numeric_slots - 1,
                        scale: importance,
                        baseline,
                    }
                }
                FeatureKind::Categorical { cardinality } => {
                    let mut rows = vec![0.0; d];
                    rows.extend(gaussian(cardinality as usize * d, importance, &mut rng));
                    embed_slots += 1;
                    Tower::Lookup {
                        slot: embed_slots - 1,
                        rows,
                    }
                }
                FeatureKind::SparseIdList { .. } | FeatureKind::WeightedSparseIdList { .. } => {
                    let table = gaussian(config.id_table_size * d, 0.5 * importance, &mut rng);
                    embed_slots += 1;
                    Tower::Pooled {
                        slot: embed_slots - 1,
                        rows: config.id_table_size,
                        table,
                    }
                }
                FeatureKind::Embedding { dim } | FeatureKind::EncodedEmbedding { decoded_dim: dim } => {
                    let scale = if matches!(entry.kind, FeatureKind::EncodedEmbedding { .. }) {
                        config.encoded_importance
                    } else {
                        importance
                    };
                    embed_slots += 1;
                    Tower::Projected {
                        slot: embed_slots - 1,
                        proj: Dense::random(dim, d, scale / (dim as f64).sqrt(), &mut rng),
                    }
                }
            };
            towers.push(tower);
        }
        let dense = Mlp::random(numeric_slots, &config.dense_hidden, d, &mut rng);
        let mut top = Mlp::random(2 * d + embed_slots, &config.top_hidden, 1, &mut rng);
        let last = top.layers.len() - 1;
        top.layers[last].bias[0] = config.output_bias;

        let weights = Weights {
            config,
            schema: (*schema).clone(),
            towers,
            dense,
            top,
        };
        Self::from_weights(weights, schema)
    }

    fn from_weights(weights: Weights, schema: Arc<FeatureSchema>) -> Result<Self> {
        let mut numeric_slots = 0;
        let mut embed_slots = 0;
        for (j, tower) in weights.towers.iter().enumerate() {
            let ok = match (tower, schema.kind(j)) {
                (Tower::Numeric { slot, .. }, FeatureKind::Numeric) => {
                    numeric_slots += 1;
                    *slot == numeric_slots - 1
                }
                (Tower::Lookup { slot, rows }, FeatureKind::Categorical { cardinality }) => {
                    embed_slots += 1;
                    *slot == embed_slots - 1
                        && rows.len() == (*cardinality as usize + 1) * weights.config.embedding_dim
                }
                (
                    Tower::Pooled { slot, rows, table },
                    FeatureKind::SparseIdList { .. } | FeatureKind::WeightedSparseIdList { .. },
                ) => {
                    embed_slots += 1;
                    *slot == embed_slots - 1 && table.len() == rows * weights.config.embedding_dim && *rows > 0
                }
                (
                    Tower::Projected { slot, proj },
                    FeatureKind::Embedding { dim } | FeatureKind::EncodedEmbedding { decoded_dim: dim },
                ) => {
                    embed_slots += 1;
                    *slot == embed_slots - 1
                        && proj.inputs == *dim
                        && proj.outputs == weights.config.embedding_dim
                        && proj.is_well_formed()
                }
                _ => false,
            };
            if !ok {
                return Err(Error::SchemaMismatch(format!("model tower {j} does not match feature kind")));
            }
        }
        let d = weights.config.embedding_dim;
        if weights.towers.len() != schema.len()
            || !weights.dense.is_well_formed()
            || !weights.top.is_well_formed()
            || weights.dense.inputs() != numeric_slots
            || weights.dense.outputs() != d
            || weights.top.inputs() != 2 * d + embed_slots
            || weights.top.outputs() != 1
        {
            return Err(Error::SchemaMismatch("model layer shapes do not match schema".into()));
        }

        let checkpoint_id = format!("ref-{:016x}", fnv1a(serde_json::to_string(&weights)?.as_bytes()));
        let mut model = ReferenceModel {
            weights,
            schema,
            numeric_slots,
            embed_slots,
            baseline_embeds: Vec::new(),
            checkpoint_id,
        };
        model.baseline_embeds = model
            .weights
            .towers
            .iter()
            .enumerate()
            .filter(|(_, t)| !matches!(t, Tower::Numeric { .. }))
            .map(|(j, _)| model.embed(j, model.schema.baseline(j)))
            .collect::<Result<_>>()?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.weights.config
    }

    /// Same weights, with the layer-normalization stage toggled.
    pub fn with_layer_norm(&self, enabled: bool) -> Result<Self> {
        let mut weights = self.weights.clone();
        weights.config.layer_norm_enabled = enabled;
        Self::from_weights(weights, Arc::clone(&self.schema))
    }

    fn mismatch(&self, column: usize, value: &FeatureValue) -> Error {
        Error::SchemaMismatch(format!(
            "feature `{}` expects {}, got {} value",
            self.schema.entry(column).id,
            self.schema.kind(column),
            value.kind_name()
        ))
    }

    fn embed(&self, column: usize, value: &FeatureValue) -> Result<Vec<f64>> {
        let d = self.weights.config.embedding_dim;
        let ln = self.weights.config.layer_norm_enabled;
        let mut out = match (&self.weights.towers[column], value) {
            (Tower::Lookup { rows, .. }, FeatureValue::Categorical(c)) => {
                let start = *c as usize * d;
                rows.get(start..start + d).ok_or_else(|| self.mismatch(column, value))?.to_vec()
            }
            (Tower::Pooled { rows, table, .. }, FeatureValue::SparseIdList(ids)) => {
                let mut acc = vec![0.0; d];
                for &id in ids {
                    let r = (id % *rows as u64) as usize * d;
                    acc.iter_mut().zip(&table[r..r + d]).for_each(|(a, t)| *a += t);
                }
                acc
            }
            (Tower::Pooled { rows, table, .. }, FeatureValue::WeightedSparseIdList(ids)) => {
                let mut acc = vec![0.0; d];
                for &(id, w) in ids {
                    let r = (id % *rows as u64) as usize * d;
                    acc.iter_mut().zip(&table[r..r + d]).for_each(|(a, t)| *a += w * t);
                }
                acc
            }
            (Tower::Projected { proj, .. }, FeatureValue::Embedding(v)) => {
                return self.project(proj, v.clone(), column, value);
            }
            (Tower::Projected { proj, .. }, FeatureValue::EncodedEmbedding(words)) => {
                return self.project(proj, decode_encoded_embedding(words), column, value);
            }
            _ => return Err(self.mismatch(column, value)),
        };
        if ln {
            layer_norm(&mut out, LAYER_NORM_VAR_FLOOR);
        }
        Ok(out)
    }

    fn project(&self, proj: &Dense, mut v: Vec<f64>, column: usize, value: &FeatureValue) -> Result<Vec<f64>> {
        if v.len() != proj.inputs {
            return Err(self.mismatch(column, value));
        }
        if self.weights.config.layer_norm_enabled {
            layer_norm(&mut v, LAYER_NORM_VAR_FLOOR);
        }
        let mut out = Vec::with_capacity(proj.outputs);
        proj.forward(&v, &mut out);
        out.iter_mut().for_each(|x| *x = x.tanh());
        Ok(out)
    }

    fn activations(&self, example: &Example) -> Result<Activations> {
        if example.features.len() != self.schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "example has {} features, model expects {}",
                example.features.len(),
                self.schema.len()
            )));
        }
        let mut numeric = vec![0.0; self.numeric_slots];
        let mut embeds = vec![Vec::new(); self.embed_slots];
        for (j, (tower, value)) in self.weights.towers.iter().zip(&example.features).enumerate() {
            match (tower, value) {
                (Tower::Numeric { slot, scale, .. }, FeatureValue::Numeric(x)) => numeric[*slot] = scale * x,
                (Tower::Numeric { .. }, _) => return Err(self.mismatch(j, value)),
                (Tower::Lookup { slot, .. } | Tower::Pooled { slot, .. } | Tower::Projected { slot, .. }, _) => {
                    embeds[*slot] = self.embed(j, value)?;
                }
            }
        }
        Ok(Activations { numeric, embeds })
    }

    fn head(&self, numeric: &[f64], embeds: &[Vec<f64>], replaced: Option<(usize, &[f64])>) -> f64 {
        let d = self.weights.config.embedding_dim;
        let z0 = self.weights.dense.forward(numeric);
        let mut inter = Vec::with_capacity(2 * d + embeds.len());
        inter.extend_from_slice(&z0);
        let mut pooled = vec![0.0; d];
        for (s, e) in embeds.iter().enumerate() {
            let e: &[f64] = match replaced {
                Some((r, v)) if r == s => v,
                _ => e,
            };
            inter.push(z0.iter().zip(e).map(|(a, b)| a * b).sum());
            pooled.iter_mut().zip(e).for_each(|(p, x)| *p += x);
        }
        inter.extend_from_slice(&pooled);
        let logit = self.weights.top.forward(&inter)[0];
        sigmoid(logit).clamp(PREDICTION_EPS, 1.0 - PREDICTION_EPS)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MODEL_HEADER}")?;
        writeln!(w, "{}", self.checkpoint_id)?;
        serde_json::to_writer(&mut w, &self.weights)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(File::open(path)?)
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        if header.trim_end() != MODEL_HEADER {
            return Err(Error::parse(1, format!("expected `{MODEL_HEADER}` header")));
        }
        let mut id = String::new();
        reader.read_line(&mut id)?;
        let weights: Weights = serde_json::from_reader(reader)?;
        let schema = Arc::new(FeatureSchema::new(weights.schema.entries().to_vec())?);
        let model = Self::from_weights(weights, schema)?;
        if model.checkpoint_id != id.trim_end() {
            return Err(Error::parse(2, "checkpoint id does not match weights"));
        }
        Ok(model)
    }
}

impl Scorer for ReferenceModel {
    fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    fn checkpoint_id(&self) -> &str {
        &self.checkpoint_id
    }

    fn predict(&self, example: &Example) -> Result<f64> {
        let act = self.activations(example)?;
        Ok(self.head(&act.numeric, &act.embeds, None))
    }

    fn predict_with_ablations(&self, example: &Example, columns: &[usize]) -> Result<(f64, Vec<f64>)> {
        let act = self.activations(example)?;
        let p = self.head(&act.numeric, &act.embeds, None);
        let mut numeric = act.numeric.clone();
        let ablated = columns
            .iter()
            .map(|&j| match self.weights.towers.get(j) {
                Some(Tower::Numeric { slot, scale, baseline }) => {
                    numeric[*slot] = scale * baseline;
                    let q = self.head(&numeric, &act.embeds, None);
                    numeric[*slot] = act.numeric[*slot];
                    Ok(q)
                }
                Some(Tower::Lookup { slot, .. } | Tower::Pooled { slot, .. } | Tower::Projected { slot, .. }) => {
                    Ok(self.head(&act.numeric, &act.embeds, Some((*slot, &self.baseline_embeds[*slot]))))
                }
                None => Err(Error::UnknownFeature(format!("column {j}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((p, ablated))
    }
}
