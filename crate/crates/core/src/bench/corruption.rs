//! Declarative feature corruptions.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::GfiVector;
use crate::error::{Error, Result};
use crate::feature_space::{Dataset, FeatureKind, FeatureSchema, FeatureValue, WindowLabel, UNKNOWN_CATEGORY};

/// Which features a corruption targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TargetSelector {
    Explicit { features: Vec<String> },
    /// `k` features drawn uniformly (seeded) among those compatible with the transform.
    Random { k: usize },
    TopByPriorGfi { k: usize },
    BottomByPriorGfi { k: usize },
    ImportantAndUnimportant { important: usize, unimportant: usize },
    /// Every feature whose prior GFI is strictly below the given percentile.
    BelowGfiPercentile { percentile: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    LinearScale { factor: f64 },
    Power { exponent: i32 },
    SetCategoricalConstant { category: u32 },
    ReplaceWithBaseline,
    DropRandomIds { fraction: f64 },
    DropRecentIds { fraction: f64 },
    ZeroWeights,
    EncodedIntDivide { divisor: i64 },
}

impl Transform {
    pub fn compatible_with(&self, kind: &FeatureKind) -> bool {
        match self {
            Transform::Identity | Transform::ReplaceWithBaseline => true,
            Transform::LinearScale { .. } | Transform::Power { .. } => *kind == FeatureKind::Numeric,
            Transform::SetCategoricalConstant { category } => match kind {
                FeatureKind::Categorical { cardinality } => {
                    *category != UNKNOWN_CATEGORY && category <= cardinality
                }
                _ => false,
            },
            Transform::DropRandomIds { .. } | Transform::DropRecentIds { .. } => matches!(
                kind,
                FeatureKind::SparseIdList { .. } | FeatureKind::WeightedSparseIdList { .. }
            ),
            Transform::ZeroWeights => matches!(kind, FeatureKind::WeightedSparseIdList { .. }),
            Transform::EncodedIntDivide { .. } => matches!(kind, FeatureKind::EncodedEmbedding { .. }),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Transform::LinearScale { factor } => factor.is_finite(),
            Transform::DropRandomIds { fraction } | Transform::DropRecentIds { fraction } => {
                fraction > 0.0 && fraction <= 1.0
            }
            Transform::EncodedIntDivide { divisor } => divisor != 0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid transform {self:?}")))
        }
    }

    /// Whether a baseline (missing) value passes through untouched.
    fn skips_baseline(&self) -> bool {
        !matches!(self, Transform::SetCategoricalConstant { .. } | Transform::ReplaceWithBaseline)
    }

    fn apply(&self, value: &mut FeatureValue, baseline: &FeatureValue, rng: &mut ChaCha8Rng) {
        fn drop_count(len: usize, fraction: f64) -> usize {
            ((len as f64 * fraction).ceil() as usize).min(len)
        }
        match (self, value) {
            (Transform::Identity, _) => {}
            (Transform::ReplaceWithBaseline, v) => *v = baseline.clone(),
            (Transform::LinearScale { factor }, FeatureValue::Numeric(x)) => *x *= factor,
            (Transform::Power { exponent }, FeatureValue::Numeric(x)) => *x = x.powi(*exponent),
            (Transform::SetCategoricalConstant { category }, FeatureValue::Categorical(c)) => *c = *category,
            (Transform::DropRandomIds { fraction }, FeatureValue::SparseIdList(ids)) => {
                *ids = drop_random(ids, drop_count(ids.len(), *fraction), rng);
            }
            (Transform::DropRandomIds { fraction }, FeatureValue::WeightedSparseIdList(ids)) => {
                *ids = drop_random(ids, drop_count(ids.len(), *fraction), rng);
            }
            (Transform::DropRecentIds { fraction }, FeatureValue::SparseIdList(ids)) => {
                ids.truncate(ids.len() - drop_count(ids.len(), *fraction));
            }
            (Transform::DropRecentIds { fraction }, FeatureValue::WeightedSparseIdList(ids)) => {
                ids.truncate(ids.len() - drop_count(ids.len(), *fraction));
            }
            (Transform::ZeroWeights, FeatureValue::WeightedSparseIdList(ids)) => {
                ids.iter_mut().for_each(|(_, w)| *w = 0.0);
            }
            (Transform::EncodedIntDivide { divisor }, FeatureValue::EncodedEmbedding(words)) => {
                words.iter_mut().for_each(|w| *w = w.div_euclid(*divisor));
            }
            _ => unreachable!("compatibility checked before applying"),
        }
    }
}

fn drop_random<T: Clone>(items: &[T], count: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut dropped = vec![false; items.len()];
    for i in index::sample(rng, items.len(), count) {
        dropped[i] = true;
    }
    items
        .iter()
        .zip(dropped)
        .filter(|(_, d)| !d)
        .map(|(x, _)| x.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub case_id: u8,
    pub description: String,
    pub targets: TargetSelector,
    pub transform: Transform,
    /// Fraction of examples affected, in (0, 1].
    #[serde(default = "one")]
    pub fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

/// Top `important` plus bottom `unimportant` features by prior GFI, ties by id.
pub fn select_targets_by_prior_gfi(prior: &GfiVector, important: usize, unimportant: usize) -> Result<Vec<String>> {
    let m = prior.entries.len();
    if important + unimportant > m {
        return Err(Error::InvalidConfig(format!(
            "cannot pick {important} + {unimportant} features out of {m}"
        )));
    }
    let ranked = prior.ranked_ids();
    let mut out: Vec<String> = ranked[..important].iter().map(|s| s.to_string()).collect();
    out.extend(ranked[m - unimportant..].iter().map(|s| s.to_string()));
    Ok(out)
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "case {}: affected fraction {} not in (0, 1]",
                self.case_id, self.fraction
            )));
        }
        self.transform.validate()
    }

    /// Resolve the selector to concrete feature ids and check kind compatibility.
    pub fn resolve_targets(&self, schema: &FeatureSchema, prior: Option<&GfiVector>) -> Result<Vec<String>> {
        let need_prior = || {
            prior.ok_or_else(|| {
                Error::InvalidConfig(format!("case {}: selector needs control GFIs", self.case_id))
            })
        };
        let targets = match &self.targets {
            TargetSelector::Explicit { features } => features.clone(),
            TargetSelector::Random { k } => {
                let pool: Vec<&str> = schema
                    .entries()
                    .iter()
                    .filter(|e| self.transform.compatible_with(&e.kind))
                    .map(|e| e.id.as_str())
                    .collect();
                if *k > pool.len() {
                    return Err(Error::InvalidConfig(format!(
                        "case {}: cannot draw {k} of {} compatible features",
                        self.case_id,
                        pool.len()
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x7a29_e2b1);
                let mut picks: Vec<usize> = index::sample(&mut rng, pool.len(), *k).into_vec();
                picks.sort_unstable();
                picks.into_iter().map(|i| pool[i].to_string()).collect()
            }
            TargetSelector::TopByPriorGfi { k } => select_targets_by_prior_gfi(need_prior()?, *k, 0)?,
            TargetSelector::BottomByPriorGfi { k } => select_targets_by_prior_gfi(need_prior()?, 0, *k)?,
            TargetSelector::ImportantAndUnimportant { important, unimportant } => {
                select_targets_by_prior_gfi(need_prior()?, *important, *unimportant)?
            }
            TargetSelector::BelowGfiPercentile { percentile } => {
                let prior = need_prior()?;
                let mut values = prior.values();
                values.sort_by(f64::total_cmp);
                let cut = percentile_value(&values, *percentile);
                prior
                    .entries
                    .iter()
                    .filter(|e| e.gfi < cut)
                    .map(|e| e.feature_id.clone())
                    .collect()
            }
        };
        if targets.is_empty() {
            return Err(Error::InvalidConfig(format!("case {}: empty target selection", self.case_id)));
        }
        for id in &targets {
            let j = schema.index_of(id)?;
            let kind = schema.kind(j);
            if !self.transform.compatible_with(kind) {
                return Err(Error::IncompatibleKind {
                    feature: id.clone(),
                    kind: kind.to_string(),
                    what: format!("{:?}", self.transform),
                });
            }
        }
        Ok(targets)
    }
}

/// Linear-interpolated percentile of sorted values.
fn percentile_value(sorted: &[f64], percentile: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = (percentile / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted {
    pub dataset: Dataset,
    pub targets: Vec<String>,
    /// Indices of the affected examples, ascending.
    pub affected: Vec<usize>,
}

/// Apply `spec` to a copy of `dataset`, labelled as anomaly data. Untargeted
/// features and unaffected examples are left untouched.
pub fn apply_corruption(dataset: &Dataset, spec: &CorruptionSpec, prior: Option<&GfiVector>) -> Result<Corrupted> {
    spec.validate()?;
    let schema = &dataset.schema;
    let targets = spec.resolve_targets(schema, prior)?;
    let columns = targets.iter().map(|id| schema.index_of(id)).collect::<Result<Vec<_>>>()?;

    let n = dataset.len();
    let count = ((n as f64 * spec.fraction).ceil() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut affected = index::sample(&mut rng, n, count).into_vec();
    affected.sort_unstable();

    let mut examples = dataset.examples.clone();
    for &i in &affected {
        for &j in &columns {
            let baseline = schema.baseline(j);
            let value = &mut examples[i].features[j];
            if spec.transform.skips_baseline() && value == baseline {
                continue;
            }
            spec.transform.apply(value, baseline, &mut rng);
        }
    }
    // Guard against NaN from e.g. negative bases with huge exponents.
    if let Some(bad) = examples.iter().position(|e| schema.check_example(e).is_err()) {
        return Err(Error::InvalidConfig(format!(
            "case {}: corruption produced an invalid value in example {bad}",
            spec.case_id
        )));
    }
    let mut out = dataset.with_examples(examples);
    out.label = WindowLabel::Anomaly;
    Ok(Corrupted {
        dataset: out,
        targets,
        affected,
    })
}
