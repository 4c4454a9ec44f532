//! Global feature importance: coverage-weighted median of nonzero |LFI|.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionEngine, LfiMatrix, LfiMethod};
use crate::error::{Error, Result};
use crate::feature_space::Dataset;
use crate::model::Scorer;
use crate::report::{RankedReport, ReportEntry, ReportMeta};

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;
pub const DEFAULT_SAMPLE_SIZE_CEILING: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfiEntry {
    pub feature_id: String,
    pub coverage: f64,
    pub gfi: f64,
    /// 0 is the most important feature; ties broken by feature id.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfiVector {
    pub entries: Vec<GfiEntry>,
    pub window: String,
    pub n: usize,
    pub method: Option<LfiMethod>,
    pub checkpoint_id: Option<String>,
}

impl GfiVector {
    pub fn get(&self, feature_id: &str) -> Option<&GfiEntry> {
        self.entries.iter().find(|e| e.feature_id == feature_id)
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.gfi).collect()
    }

    /// Feature ids ordered by rank.
    pub fn ranked_ids(&self) -> Vec<&str> {
        let mut ids: Vec<(usize, &str)> = self.entries.iter().map(|e| (e.rank, e.feature_id.as_str())).collect();
        ids.sort_unstable();
        ids.into_iter().map(|(_, id)| id).collect()
    }
}

/// Median with the even-size convention of averaging the two middle elements.
/// Reorders `values`.
pub fn median(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let (lower, upper, _) = values.select_nth_unstable_by(n / 2, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Some(upper)
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((below + upper) / 2.0)
    }
}

/// `(coverage, gfi)` for one column of `n` values.
fn column_gfi(values: impl Iterator<Item = f64>, n: usize, scratch: &mut Vec<f64>) -> (f64, f64) {
    scratch.clear();
    scratch.extend(values.filter(|&w| w != 0.0).map(f64::abs));
    if n == 0 {
        return (0.0, 0.0);
    }
    let coverage = scratch.len() as f64 / n as f64;
    match median(scratch) {
        Some(med) => (coverage, coverage * med),
        None => (coverage, 0.0),
    }
}

/// Fraction of rows with a nonzero entry in column `j`.
pub fn coverage(w: &LfiMatrix, j: usize) -> f64 {
    if w.n_rows() == 0 {
        return 0.0;
    }
    (0..w.n_rows()).filter(|&i| w.get(i, j) != 0.0).count() as f64 / w.n_rows() as f64
}

fn assign_ranks(entries: &mut [GfiEntry]) {
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| {
        entries[b]
            .gfi
            .total_cmp(&entries[a].gfi)
            .then_with(|| entries[a].feature_id.cmp(&entries[b].feature_id))
    });
    for (rank, i) in order.into_iter().enumerate() {
        entries[i].rank = rank;
    }
}

/// Global importances of all columns.
pub fn gfi(w: &LfiMatrix, window: impl Into<String>) -> GfiVector {
    let n = w.n_rows();
    let mut scratch = Vec::with_capacity(n);
    let mut entries: Vec<GfiEntry> = (0..w.n_cols())
        .map(|j| {
            let (coverage, gfi) = column_gfi((0..n).map(|i| w.get(i, j)), n, &mut scratch);
            GfiEntry {
                feature_id: w.col_ids[j].clone(),
                coverage,
                gfi,
                rank: 0,
            }
        })
        .collect();
    assign_ranks(&mut entries);
    GfiVector {
        entries,
        window: window.into(),
        n,
        method: Some(w.method),
        checkpoint_id: Some(w.checkpoint_id.clone()),
    }
}

fn resample_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    rng
}

/// Bootstrap standard error of each feature's GFI over `resamples` row resamples.
pub fn bootstrap_se(w: &LfiMatrix, resamples: usize, seed: u64) -> Result<Vec<f64>> {
    if resamples < 2 {
        return Err(Error::InvalidConfig("bootstrap needs at least 2 resamples".into()));
    }
    let n = w.n_rows();
    if n == 0 {
        return Err(Error::Empty("LFI matrix has no rows"));
    }
    let columns: Vec<Vec<f64>> = (0..w.n_cols()).map(|j| w.column(j)).collect();
    let estimates: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = resample_rng(seed, b);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut scratch = Vec::with_capacity(n);
            columns
                .iter()
                .map(|col| column_gfi(idx.iter().map(|&i| col[i]), n, &mut scratch).1)
                .collect()
        })
        .collect();

    // Welford keeps identical estimates at exactly zero spread.
    let mut se = Vec::with_capacity(w.n_cols());
    for j in 0..w.n_cols() {
        let (mut mean, mut m2) = (0.0, 0.0);
        for (k, est) in estimates.iter().enumerate() {
            let x = est[j];
            let delta = x - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (x - mean);
        }
        se.push((m2 / (resamples - 1) as f64).sqrt());
    }
    Ok(se)
}

/// Acceptable bootstrap standard error per feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SeTolerance {
    Absolute { max_se: f64 },
    /// `max(fraction * gfi_j, floor)` for each feature.
    Relative { fraction: f64, floor: f64 },
}

impl Default for SeTolerance {
    fn default() -> Self {
        SeTolerance::Relative {
            fraction: 0.05,
            floor: 1e-4,
        }
    }
}

impl SeTolerance {
    fn limit(&self, gfi: f64) -> f64 {
        match *self {
            SeTolerance::Absolute { max_se } => max_se,
            SeTolerance::Relative { fraction, floor } => (fraction * gfi).max(floor),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeSelection {
    pub n: usize,
    /// False when no candidate met the tolerance and the largest was chosen.
    pub converged: bool,
    /// `(candidate, max over features of se_j / limit_j)` for each evaluated candidate.
    pub trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct SampleSizeSearch {
    pub tolerance: SeTolerance,
    pub method: LfiMethod,
    pub resamples: usize,
    pub seed: u64,
    pub engine: AttributionEngine,
}

impl Default for SampleSizeSearch {
    fn default() -> Self {
        SampleSizeSearch {
            tolerance: SeTolerance::default(),
            method: LfiMethod::default(),
            resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            seed: 0,
            engine: AttributionEngine::default(),
        }
    }
}

/// Smallest candidate sample size whose bootstrap SE is within tolerance for
/// every feature, or the largest candidate if none is.
pub fn select_sample_size(
    model: &dyn Scorer,
    pool: &Dataset,
    candidates: &[usize],
    search: &SampleSizeSearch,
) -> Result<SampleSizeSelection> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate sample sizes"));
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("candidate sample sizes must be strictly ascending".into()));
    }
    let mut trace = Vec::new();
    for &n in candidates {
        let sample = sample_for_aggregation(pool, n, search.seed)?;
        let attribution = search.engine.compute(model, &sample, search.method)?;
        let gfis = gfi(&attribution.matrix, sample.label.to_string());
        let se = bootstrap_se(&attribution.matrix, search.resamples, search.seed)?;
        let worst = se
            .iter()
            .zip(&gfis.entries)
            .map(|(s, e)| s / search.tolerance.limit(e.gfi))
            .fold(0.0, f64::max);
        trace.push((n, worst));
        if worst <= 1.0 {
            return Ok(SampleSizeSelection {
                n,
                converged: true,
                trace,
            });
        }
    }
    let n = *candidates.last().expect("non-empty");
    log::warn!("no candidate sample size met the SE tolerance; using the largest, {n}");
    Ok(SampleSizeSelection {
        n,
        converged: false,
        trace,
    })
}

/// Equal-weight sample from two strata: all scored examples and displayed
/// examples. The first stratum gets the extra draw when `n` is odd. A stratum
/// smaller than its quota is drawn with replacement.
pub fn sample_for_aggregation(pool: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if pool.is_empty() {
        return Err(Error::Empty("aggregation pool"));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("aggregation sample size must be >= 1".into()));
    }
    let displayed: Vec<usize> = (0..pool.len()).filter(|&i| pool.examples[i].displayed).collect();
    if displayed.is_empty() {
        return Err(Error::Empty("pool has no displayed examples"));
    }
    let all: Vec<usize> = (0..pool.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |stratum: &[usize], k: usize| -> Vec<usize> {
        if k <= stratum.len() {
            index::sample(&mut rng, stratum.len(), k).into_iter().map(|i| stratum[i]).collect()
        } else {
            (0..k).map(|_| stratum[rng.random_range(0..stratum.len())]).collect()
        }
    };
    let mut picks = draw(&all, n - n / 2);
    picks.extend(draw(&displayed, n / 2));
    Ok(pool.with_examples(picks.into_iter().map(|i| pool.examples[i].clone()).collect()))
}

/// Rank features by absolute GFI shift, with coverage change and rank shift.
pub fn rank_features(control: &GfiVector, anomaly: &GfiVector, k: usize) -> Result<RankedReport> {
    let mut a_ids: Vec<&str> = anomaly.entries.iter().map(|e| e.feature_id.as_str()).collect();
    let mut c_ids: Vec<&str> = control.entries.iter().map(|e| e.feature_id.as_str()).collect();
    a_ids.sort_unstable();
    c_ids.sort_unstable();
    if a_ids != c_ids {
        return Err(Error::SchemaMismatch("control and anomaly GFIs cover different features".into()));
    }
    let entries = control
        .entries
        .iter()
        .map(|c| {
            let a = anomaly.get(&c.feature_id).expect("same feature set");
            ReportEntry {
                feature_id: c.feature_id.clone(),
                control: Some(c.gfi),
                anomaly: Some(a.gfi),
                shift: Some((a.gfi - c.gfi).abs()),
                coverage_delta: Some(a.coverage - c.coverage),
                rank_shift: Some(c.rank as i64 - a.rank as i64),
            }
        })
        .collect();
    let method = control.method.or(anomaly.method).map_or_else(|| "gfi".to_string(), |m| format!("gfi/{m}"));
    let meta = ReportMeta {
        method,
        k,
        n_control: control.n,
        n_anomaly: anomaly.n,
        checkpoint_id: control.checkpoint_id.clone(),
        control_window: control.window.clone(),
        anomaly_window: anomaly.window.clone(),
    };
    Ok(RankedReport::new(meta, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(super) fn matrix(rows: Vec<Vec<f64>>) -> LfiMatrix {
        let m = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        LfiMatrix::from_rows(
            rows,
            (0..n).map(|i| format!("r{i}")).collect(),
            (0..m).map(|j| format!("f{j}")).collect(),
            LfiMethod::default(),
            "test",
        )
        .unwrap()
    }

    fn column(values: &[f64]) -> LfiMatrix {
        matrix(values.iter().map(|&v| vec![v]).collect())
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(coverage(&column(&[0.0, 0.0, 0.0]), 0), 0.0);
        assert_eq!(coverage(&column(&[0.1, 0.0, -0.2, 0.0, 0.3, 0.0]), 0), 0.5);
    }

    #[test]
    fn gfi_examples() {
        let g = gfi(&column(&[0.0, 0.0, 0.0]), "c");
        assert_eq!(g.entries[0].gfi, 0.0);
        let g = gfi(&column(&[0.0, 0.0, 0.2, -0.4, 0.6, 0.0]), "c");
        assert_eq!(g.entries[0].coverage, 0.5);
        assert_eq!(g.entries[0].gfi, 0.5 * 0.4);
        let g = gfi(&column(&[0.1, 0.1, 0.1, 1000.0]), "c");
        assert_eq!(g.entries[0].gfi, 0.1);
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&mut []), None);
        assert_eq!(median(&mut [3.0]), Some(3.0));
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&mut [5.0, 1.0, 3.0]), Some(3.0));
    }

    #[test]
    fn ranks_break_ties_by_id() {
        let g = gfi(&matrix(vec![vec![0.0, 0.5, 0.5, 0.1]]), "c");
        let ranks: Vec<usize> = g.entries.iter().map(|e| e.rank).collect();
        assert_eq!(ranks, vec![3, 0, 1, 2]);
        assert_eq!(g.ranked_ids(), ["f1", "f2", "f3", "f0"]);
    }

    #[test]
    fn bootstrap_constant_column_has_zero_se() {
        let w = matrix(vec![vec![0.3, 0.0]; 25]);
        assert_eq!(bootstrap_se(&w, 50, 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn bootstrap_rejects_bad_input() {
        assert!(bootstrap_se(&column(&[1.0]), 1, 0).is_err());
        let empty = LfiMatrix::from_rows(vec![], vec![], vec!["f".into()], LfiMethod::default(), "t").unwrap();
        assert!(matches!(bootstrap_se(&empty, 10, 0), Err(Error::Empty(_))));
    }

    #[test]
    fn bootstrap_is_seeded() {
        let w = matrix((0..40).map(|i| vec![(i % 7) as f64 * 0.1, (i % 3) as f64]).collect());
        assert_eq!(bootstrap_se(&w, 30, 9).unwrap(), bootstrap_se(&w, 30, 9).unwrap());
        assert_ne!(bootstrap_se(&w, 30, 9).unwrap(), bootstrap_se(&w, 30, 10).unwrap());
    }

    #[test]
    fn rank_features_identical_vectors() {
        let g = gfi(&matrix(vec![vec![0.3, 0.1, 0.2]]), "c");
        let r = rank_features(&g, &g, 30).unwrap();
        assert!(r.entries.iter().all(|e| e.shift == Some(0.0)));
        let ids: Vec<_> = r.entries.iter().map(|e| e.feature_id.as_str()).collect();
        assert_eq!(ids, ["f0", "f1", "f2"]);
    }

    #[test]
    fn rank_features_single_change() {
        let c = gfi(&matrix(vec![vec![0.3, 0.1, 0.2]]), "control");
        let a = gfi(&matrix(vec![vec![0.3, 0.9, 0.2]]), "anomaly");
        let r = rank_features(&c, &a, 1).unwrap();
        assert_eq!(r.entries[0].feature_id, "f1");
        assert_eq!(r.entries[0].rank_shift, Some(2));
        assert_eq!(r.entries[0].coverage_delta, Some(0.0));
        assert_eq!(r.meta.control_window, "control");
    }

    #[test]
    fn rank_features_mismatched_universe() {
        let c = gfi(&matrix(vec![vec![0.3, 0.1]]), "c");
        let mut a = c.clone();
        a.entries[1].feature_id = "other".into();
        assert!(rank_features(&c, &a, 2).is_err());
    }

    proptest! {
        #[test]
        fn scale_covariance(col in proptest::collection::vec(prop_oneof![Just(0.0), -10.0f64..10.0], 1..40), lambda in 0.01f64..100.0) {
            let base = gfi(&column(&col), "c").entries[0].clone();
            let scaled: Vec<f64> = col.iter().map(|x| x * lambda).collect();
            let s = gfi(&column(&scaled), "c").entries[0].clone();
            prop_assert_eq!(s.coverage, base.coverage);
            prop_assert!((s.gfi - lambda * base.gfi).abs() <= 1e-12 * (1.0 + lambda * base.gfi));
        }

        #[test]
        fn row_permutation_invariance(col in proptest::collection::vec(prop_oneof![Just(0.0), -1.0f64..1.0], 1..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = col.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(gfi(&column(&col), "c"), gfi(&column(&shuffled), "c"));
        }

        #[test]
        fn outlier_robustness(mut col in proptest::collection::vec(0.01f64..1.0, 3..30), bump in 1.0f64..1e6) {
            let before = gfi(&column(&col), "c").entries[0].gfi;
            let imax = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
            let mut sorted = col.clone();
            let med = median(&mut sorted).unwrap();
            prop_assume!(col[imax] > med);
            col[imax] += bump;
            prop_assert_eq!(gfi(&column(&col), "c").entries[0].gfi, before);
        }

        #[test]
        fn low_coverage_stays_positive(nonzero in 1usize..5, zeros in 6usize..40, v in 0.01f64..1.0) {
            let mut col = vec![v; nonzero];
            col.extend(std::iter::repeat_n(0.0, zeros));
            let e = gfi(&column(&col), "c").entries[0].clone();
            prop_assert!(e.coverage < 0.5);
            prop_assert!(e.gfi > 0.0);
        }
    }
}
