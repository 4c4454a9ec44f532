//! Synthetic corruption benchmark: seeded control data, declarative
//! corruptions, GFI-shift and MFC-shift rankings, and recall metrics.

mod corruption;
mod metrics;
mod suite;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use corruption::{
    apply_corruption, select_targets_by_prior_gfi, Corrupted, CorruptionSpec, TargetSelector, Transform,
};
pub use metrics::{avg_prediction_change, mean_abs_prediction_delta, recall_metrics, MethodRecall, RecallMetrics};
pub use suite::{standard_cases, SchemaMix};

use crate::aggregation::{gfi, rank_features, sample_for_aggregation, GfiVector};
use crate::attribution::{Attribution, AttributionEngine, LfiMethod};
use crate::error::{Error, Result};
use crate::feature_space::{
    generate_dataset, ControlWindowPolicy, Dataset, FeatureKind, GeneratorConfig, TimeWindow, WindowLabel,
};
use crate::mfc::{mfc_vector, rank_mfc_vectors, MfcVector};
use crate::model::{ModelConfig, ReferenceModel, Scorer};
use crate::report::RankedReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub schema: SchemaMix,
    pub model: ModelConfig,
    pub data_seed: u64,
    /// Examples generated for the control window before sampling.
    pub pool_size: usize,
    /// Aggregation sample size `N`.
    pub sample_size: usize,
    pub sample_seed: u64,
    pub k: usize,
    pub method: LfiMethod,
    pub display_fraction: f64,
    pub anomaly_window: TimeWindow,
    pub control_policy: ControlWindowPolicy,
    /// Attribution threads; 0 uses every core. Results do not depend on it.
    pub parallelism: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            schema: SchemaMix::default(),
            model: ModelConfig::default(),
            data_seed: 20_240_601,
            pool_size: 30_000,
            sample_size: 10_000,
            sample_seed: 17,
            k: 10,
            method: LfiMethod::default(),
            display_fraction: 0.2,
            anomaly_window: TimeWindow {
                start: 1_717_243_200,
                end: 1_717_246_800,
            },
            control_policy: ControlWindowPolicy::default(),
            parallelism: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 || self.pool_size == 0 || self.k == 0 {
            return Err(Error::InvalidConfig("pool_size, sample_size and k must be >= 1".into()));
        }
        if self.anomaly_window.start >= self.anomaly_window.end {
            return Err(Error::InvalidConfig("anomaly window is empty".into()));
        }
        self.method.validate()?;
        self.model.validate()
    }
}

/// Outcome of one corruption case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: u8,
    pub description: String,
    pub corrupted: Vec<String>,
    /// Signed percent change of the mean prediction.
    pub avg_prediction_change: f64,
    pub gfi_hits: usize,
    /// `None` when no corrupted feature has an MFC proxy.
    pub mfc_hits: Option<usize>,
    pub gfi_report: RankedReport,
    pub mfc_report: RankedReport,
}

/// Control-side state shared by every case: model, data and attributions.
pub struct BenchHarness {
    config: BenchConfig,
    engine: AttributionEngine,
    model: ReferenceModel,
    pool: Dataset,
    control: Dataset,
    control_attribution: Attribution,
    control_gfi: GfiVector,
    control_mfc: MfcVector,
}

impl BenchHarness {
    pub fn new(config: BenchConfig) -> Result<Self> {
        config.validate()?;
        let schema = Arc::new(config.schema.build()?);
        let model = ReferenceModel::new(config.model.clone(), schema)?;
        let generator = GeneratorConfig {
            examples: config.pool_size,
            seed: config.data_seed,
            display_fraction: config.display_fraction,
            label: WindowLabel::Control,
        };
        let window = config.control_policy.control_window(config.anomaly_window);
        let engine = AttributionEngine::new(config.parallelism);
        let pool = generate_dataset(&generator, window, &model)?;
        let control = sample_for_aggregation(&pool, config.sample_size, config.sample_seed)?;
        let control_attribution = engine.compute(&model, &control, config.method)?;
        let control_gfi = gfi(&control_attribution.matrix, control.label.to_string());
        let control_mfc = mfc_vector(&control, &control_attribution.predictions)?;
        Ok(BenchHarness {
            config,
            engine,
            model,
            pool,
            control,
            control_attribution,
            control_gfi,
            control_mfc,
        })
    }

    pub fn config(&self) -> &BenchConfig {
        &self.config
    }

    pub fn model(&self) -> &ReferenceModel {
        &self.model
    }

    pub fn engine(&self) -> AttributionEngine {
        self.engine
    }

    /// Every generated control example, before sampling.
    pub fn pool(&self) -> &Dataset {
        &self.pool
    }

    /// The aggregation sample of the control window.
    pub fn control(&self) -> &Dataset {
        &self.control
    }

    pub fn control_attribution(&self) -> &Attribution {
        &self.control_attribution
    }

    pub fn control_gfi(&self) -> &GfiVector {
        &self.control_gfi
    }

    /// The control sample with `spec` applied.
    pub fn corrupt(&self, spec: &CorruptionSpec) -> Result<Corrupted> {
        apply_corruption(&self.control, spec, Some(&self.control_gfi))
    }

    /// Predictions of `model` on `dataset`, in parallel.
    pub fn predict(&self, model: &dyn Scorer, dataset: &Dataset) -> Result<Vec<f64>> {
        self.engine.install(|| {
            dataset
                .examples
                .par_iter()
                .enumerate()
                .map(|(i, ex)| model.predict(ex).map_err(|e| e.at_example(i)))
                .collect()
        })
    }

    /// Average prediction change of `spec` without running attribution.
    pub fn prediction_change(&self, spec: &CorruptionSpec) -> Result<f64> {
        let anomaly = self.corrupt(spec)?;
        let preds = self.predict(&self.model, &anomaly.dataset)?;
        avg_prediction_change(&self.control_attribution.predictions, &preds)
    }

    pub fn run_case(&self, spec: &CorruptionSpec) -> Result<CaseResult> {
        self.run_case_inner(spec).map_err(|e| Error::InCase {
            case_id: spec.case_id,
            source: Box::new(e),
        })
    }

    fn run_case_inner(&self, spec: &CorruptionSpec) -> Result<CaseResult> {
        let corrupted = self.corrupt(spec)?;
        let anomaly = &corrupted.dataset;
        let attribution = self.engine.compute(&self.model, anomaly, self.config.method)?;
        let anomaly_gfi = gfi(&attribution.matrix, anomaly.label.to_string());
        let mut gfi_report = rank_features(&self.control_gfi, &anomaly_gfi, self.config.k)?;
        gfi_report.meta.checkpoint_id = Some(self.model.checkpoint_id().to_string());
        let anomaly_mfc = mfc_vector(anomaly, &attribution.predictions)?;
        let mfc_report = rank_mfc_vectors(&self.control_mfc, &anomaly_mfc, self.config.k);

        let schema = &anomaly.schema;
        let mfc_applicable = corrupted.targets.iter().any(|id| {
            schema
                .index_of(id)
                .is_ok_and(|j| !matches!(schema.kind(j), FeatureKind::EncodedEmbedding { .. }))
        });
        Ok(CaseResult {
            case_id: spec.case_id,
            description: spec.description.clone(),
            avg_prediction_change: avg_prediction_change(
                &self.control_attribution.predictions,
                &attribution.predictions,
            )?,
            gfi_hits: gfi_report.hits(&corrupted.targets),
            mfc_hits: mfc_applicable.then(|| mfc_report.hits(&corrupted.targets)),
            corrupted: corrupted.targets,
            gfi_report,
            mfc_report,
        })
    }

    /// Run each case in order; failures do not stop the remaining cases.
    pub fn run_suite(&self, specs: &[CorruptionSpec]) -> Vec<Result<CaseResult>> {
        specs.iter().map(|s| self.run_case(s)).collect()
    }
}

/// One-shot convenience: build a harness and run a single case.
pub fn run_case(spec: &CorruptionSpec, config: &BenchConfig) -> Result<CaseResult> {
    BenchHarness::new(config.clone())?.run_case(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub case_id: u8,
    pub error: String,
}

/// Comparison table across cases, with summary recalls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub k: usize,
    pub n: usize,
    pub cases: Vec<CaseResult>,
    #[serde(default)]
    pub failures: Vec<CaseFailure>,
    pub metrics: Option<RecallMetrics>,
}

pub fn emit_benchmark_report(
    k: usize,
    n: usize,
    results: &[CaseResult],
    failures: &[CaseFailure],
    metrics: Option<&RecallMetrics>,
) -> BenchReport {
    BenchReport {
        k,
        n,
        cases: results.to_vec(),
        failures: failures.to_vec(),
        metrics: metrics.cloned(),
    }
}

impl BenchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_text(&self) -> String {
        let width = self
            .cases
            .iter()
            .map(|c| c.description.len())
            .max()
            .unwrap_or(0)
            .max("corruption".len());
        let mut out = format!("# corruption benchmark: N={} K={}\n", self.n, self.k);
        out.push_str(&format!(
            "{:>3}  {:<width$}  {:>9}  {:>11}  {:>8}  {:>8}\n",
            "#", "corruption", "corrupted", "avg_change", "gfi_hits", "mfc_hits"
        ));
        for c in &self.cases {
            out.push_str(&format!(
                "{:>3}  {:<width$}  {:>9}  {:>10.2}%  {:>8}  {:>8}\n",
                c.case_id,
                c.description,
                c.corrupted.len(),
                c.avg_prediction_change,
                c.gfi_hits,
                c.mfc_hits.map_or_else(|| "N/A".into(), |h| h.to_string()),
            ));
        }
        for f in &self.failures {
            out.push_str(&format!("{:>3}  FAILED: {}\n", f.case_id, f.error));
        }
        if let Some(m) = &self.metrics {
            let line = |name: &str, r: &MethodRecall| {
                format!(
                    "# {name} recall: overall {:.1}% ({}/{}), at-least-one {:.1}% over {} cases\n",
                    r.overall, r.hits, r.corrupted, r.at_least_one, r.cases
                )
            };
            out.push_str(&line("gfi", &m.gfi));
            match &m.mfc {
                Some(r) => out.push_str(&line("mfc", r)),
                None => out.push_str("# mfc recall: N/A\n"),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        let r = emit_benchmark_report(10, 100, &[], &[], None);
        assert_eq!(r.to_text().lines().count(), 2);
        assert_eq!(BenchReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn config_rejects_zero_sizes() {
        let c = BenchConfig {
            sample_size: 0,
            ..BenchConfig::default()
        };
        assert!(c.validate().is_err());
        BenchConfig::default().validate().unwrap();
    }
}
