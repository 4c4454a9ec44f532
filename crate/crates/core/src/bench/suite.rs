//! The standard seeded schema and case list.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corruption::{CorruptionSpec, TargetSelector, Transform};
use crate::error::{Error, Result};
use crate::feature_space::{FeatureKind, FeatureSchema, FeatureSpec, GeneratorParams};

/// Feature mix of the synthetic schema. Generator parameters are drawn per
/// feature from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaMix {
    pub numeric: usize,
    pub categorical: usize,
    pub embedding: usize,
    pub sparse: usize,
    pub weighted: usize,
    pub encoded: usize,
    pub seed: u64,
}

impl Default for SchemaMix {
    fn default() -> Self {
        SchemaMix {
            numeric: 22,
            categorical: 10,
            embedding: 6,
            sparse: 10,
            weighted: 8,
            encoded: 4,
            seed: 7,
        }
    }
}

impl SchemaMix {
    pub fn total(&self) -> usize {
        self.numeric + self.categorical + self.embedding + self.sparse + self.weighted + self.encoded
    }

    pub fn build(&self) -> Result<FeatureSchema> {
        if self.total() == 0 {
            return Err(Error::InvalidConfig("schema mix has no features".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut specs = Vec::with_capacity(self.total());
        let missing = |rng: &mut ChaCha8Rng, max: f64| rng.random_range(0.0..max);

        for i in 0..self.numeric {
            let params = GeneratorParams {
                missing_rate: missing(&mut rng, 0.5),
                center: rng.random_range(0.0..1.5),
                scale: rng.random_range(0.3..1.0),
                seasonal_amplitude: if i % 4 == 0 { 0.2 } else { 0.0 },
                ..GeneratorParams::default()
            };
            specs.push(FeatureSpec::new(format!("num_{i:02}"), FeatureKind::Numeric, params));
        }
        for i in 0..self.categorical {
            let cardinality = [5, 20, 100, 1000][rng.random_range(0..4)];
            let params = GeneratorParams {
                missing_rate: missing(&mut rng, 0.5),
                skew: rng.random_range(0.5..1.5),
                ..GeneratorParams::default()
            };
            specs.push(FeatureSpec::new(
                format!("cat_{i:02}"),
                FeatureKind::Categorical { cardinality },
                params,
            ));
        }
        for i in 0..self.embedding {
            let params = GeneratorParams {
                missing_rate: missing(&mut rng, 0.3),
                scale: 0.5,
                ..GeneratorParams::default()
            };
            specs.push(FeatureSpec::new(format!("emb_{i:02}"), FeatureKind::Embedding { dim: 16 }, params));
        }
        for i in 0..self.sparse {
            let params = GeneratorParams {
                missing_rate: missing(&mut rng, 0.5),
                vocab: 100_000,
                mean_len: rng.random_range(3.0..20.0),
                ..GeneratorParams::default()
            };
            specs.push(FeatureSpec::new(
                format!("ids_{i:02}"),
                FeatureKind::SparseIdList { max_len: 50 },
                params,
            ));
        }
        for i in 0..self.weighted {
            let params = GeneratorParams {
                missing_rate: missing(&mut rng, 0.5),
                vocab: 100_000,
                mean_len: rng.random_range(3.0..10.0),
                scale: rng.random_range(0.5..2.0),
                ..GeneratorParams::default()
            };
            specs.push(FeatureSpec::new(
                format!("wids_{i:02}"),
                FeatureKind::WeightedSparseIdList { max_len: 30 },
                params,
            ));
        }
        for i in 0..self.encoded {
            let params = GeneratorParams {
                missing_rate: 0.1,
                scale: 0.5,
                ..GeneratorParams::default()
            };
            specs.push(FeatureSpec::new(
                format!("enc_{i:02}"),
                FeatureKind::EncodedEmbedding { decoded_dim: 1024 },
                params,
            ));
        }
        FeatureSchema::new(specs)
    }
}

fn explicit(ids: &[&str]) -> TargetSelector {
    TargetSelector::Explicit {
        features: ids.iter().map(|s| s.to_string()).collect(),
    }
}

fn case(case_id: u8, description: &str, targets: TargetSelector, transform: Transform, fraction: f64) -> CorruptionSpec {
    CorruptionSpec {
        case_id,
        description: description.into(),
        targets,
        transform,
        fraction,
        seed: 1000 + case_id as u64,
    }
}

/// The eleven corruption cases against the default [`SchemaMix`].
pub fn standard_cases() -> Vec<CorruptionSpec> {
    vec![
        case(
            1,
            "x -> 2x (linear change)",
            explicit(&["num_08"]),
            Transform::LinearScale { factor: 2.0 },
            1.0,
        ),
        case(
            2,
            "x -> x^3 (non-linear change)",
            explicit(&["num_04"]),
            Transform::Power { exponent: 3 },
            1.0,
        ),
        case(
            3,
            "categorical set to a constant other than unknown",
            explicit(&["cat_02"]),
            Transform::SetCategoricalConstant { category: 3 },
            1.0,
        ),
        case(
            4,
            "3 random features replaced by baseline, 100% of examples",
            TargetSelector::Random { k: 3 },
            Transform::ReplaceWithBaseline,
            1.0,
        ),
        case(
            5,
            "3 random features replaced by baseline, 50% of examples",
            TargetSelector::Random { k: 3 },
            Transform::ReplaceWithBaseline,
            0.5,
        ),
        case(
            6,
            "2 important + 2 unimportant features replaced by baseline, 100% of examples",
            TargetSelector::ImportantAndUnimportant {
                important: 2,
                unimportant: 2,
            },
            Transform::ReplaceWithBaseline,
            1.0,
        ),
        case(
            7,
            "2 important + 2 unimportant features replaced by baseline, 50% of examples",
            TargetSelector::ImportantAndUnimportant {
                important: 2,
                unimportant: 2,
            },
            Transform::ReplaceWithBaseline,
            0.5,
        ),
        case(
            8,
            "randomly remove 50% of ids from a sparse id list",
            explicit(&["ids_06"]),
            Transform::DropRandomIds { fraction: 0.5 },
            1.0,
        ),
        case(
            9,
            "remove the most recent 50% of ids from a sparse id list",
            explicit(&["ids_00"]),
            Transform::DropRecentIds { fraction: 0.5 },
            1.0,
        ),
        case(
            10,
            "zero weights in a weighted sparse id list, 100% of examples",
            explicit(&["wids_00"]),
            Transform::ZeroWeights,
            1.0,
        ),
        case(
            11,
            "x -> floor(x/10) in the encoded representation of 2 encoded embeddings",
            explicit(&["enc_00", "enc_01"]),
            Transform::EncodedIntDivide { divisor: 10 },
            1.0,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mix_has_sixty_features() {
        let schema = SchemaMix::default().build().unwrap();
        assert_eq!(schema.len(), 60);
        assert_eq!(schema, SchemaMix::default().build().unwrap());
    }

    #[test]
    fn standard_cases_resolve_against_default_schema() {
        let schema = SchemaMix::default().build().unwrap();
        let cases = standard_cases();
        assert_eq!(cases.len(), 11);
        for (i, c) in cases.iter().enumerate() {
            assert_eq!(c.case_id as usize, i + 1);
            c.validate().unwrap();
            if !matches!(c.targets, TargetSelector::ImportantAndUnimportant { .. }) {
                c.resolve_targets(&schema, None).unwrap();
            }
        }
    }
}
