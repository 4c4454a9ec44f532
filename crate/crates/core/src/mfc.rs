//! Model-feature correlation: absolute Pearson correlation between a feature's
//! (proxy) value and the logged prediction. Needs no model, only logged data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_space::{Dataset, FeatureKind, FeatureValue};
use crate::report::{RankedReport, ReportEntry, ReportMeta};

/// Scalar stand-in for a feature value. Categorical and encoded-embedding
/// values have none.
pub fn proxy_value(value: &FeatureValue) -> Option<f64> {
    match value {
        FeatureValue::Numeric(x) => Some(*x),
        FeatureValue::Categorical(_) | FeatureValue::EncodedEmbedding(_) => None,
        FeatureValue::SparseIdList(ids) => Some(ids.len() as f64),
        FeatureValue::WeightedSparseIdList(ids) => Some(ids.iter().map(|(_, w)| w).sum()),
        FeatureValue::Embedding(v) => Some(v.iter().map(|x| x * x).sum::<f64>().sqrt()),
    }
}

pub fn kind_has_proxy(kind: &FeatureKind) -> bool {
    !matches!(kind, FeatureKind::Categorical { .. } | FeatureKind::EncodedEmbedding { .. })
}

/// `|r|` between `xs` and `ps`, or `None` if either has zero variance.
pub fn mfc_score(xs: &[f64], ps: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ps.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            actual: ps.len(),
        });
    }
    // Exactly constant columns are caught here: a rounded mean can leave
    // tiny nonzero deviations that would otherwise score as r = 0.
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if xs.len() < 2 || constant(xs) || constant(ps) {
        return Ok(None);
    }
    // Centered two-pass sums: immune to the cancellation a raw-moment
    // formula suffers when values sit far from zero.
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let mp = ps.iter().sum::<f64>() / n;
    let (mut sxx, mut spp, mut sxp) = (0.0, 0.0, 0.0);
    for (&x, &p) in xs.iter().zip(ps) {
        let (dx, dp) = (x - mx, p - mp);
        sxx += dx * dx;
        spp += dp * dp;
        sxp += dx * dp;
    }
    if sxx <= 0.0 || spp <= 0.0 {
        return Ok(None);
    }
    Ok(Some((sxp / (sxx.sqrt() * spp.sqrt())).abs().min(1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfcEntry {
    pub feature_id: String,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfcVector {
    pub entries: Vec<MfcEntry>,
    pub window: String,
    pub n: usize,
}

pub fn mfc_vector(dataset: &Dataset, predictions: &[f64]) -> Result<MfcVector> {
    if dataset.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: predictions.len(),
        });
    }
    let schema = &dataset.schema;
    let entries = (0..schema.len())
        .into_par_iter()
        .map(|j| {
            let score = if kind_has_proxy(schema.kind(j)) {
                let xs: Vec<f64> = dataset
                    .column(j)
                    .map(|v| proxy_value(v).expect("kind has a proxy"))
                    .collect();
                mfc_score(&xs, predictions)?
            } else {
                None
            };
            Ok(MfcEntry {
                feature_id: schema.entry(j).id.clone(),
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MfcVector {
        entries,
        window: dataset.label.to_string(),
        n: dataset.len(),
    })
}

/// Rank features by the control-to-anomaly shift in MFC score.
pub fn mfc_rank(
    control: (&Dataset, &[f64]),
    anomaly: (&Dataset, &[f64]),
    k: usize,
) -> Result<RankedReport> {
    let c_ids: Vec<&str> = control.0.schema.feature_ids().collect();
    let a_ids: Vec<&str> = anomaly.0.schema.feature_ids().collect();
    if c_ids != a_ids {
        return Err(Error::SchemaMismatch("control and anomaly datasets have different features".into()));
    }
    let c = mfc_vector(control.0, control.1)?;
    let a = mfc_vector(anomaly.0, anomaly.1)?;
    Ok(rank_mfc_vectors(&c, &a, k))
}

pub fn rank_mfc_vectors(control: &MfcVector, anomaly: &MfcVector, k: usize) -> RankedReport {
    let entries = control
        .entries
        .iter()
        .zip(&anomaly.entries)
        .map(|(c, a)| ReportEntry {
            feature_id: c.feature_id.clone(),
            control: c.score,
            anomaly: a.score,
            shift: c.score.zip(a.score).map(|(x, y)| (y - x).abs()),
            coverage_delta: None,
            rank_shift: None,
        })
        .collect();
    let meta = ReportMeta {
        method: "mfc".into(),
        k,
        n_control: control.n,
        n_anomaly: anomaly.n,
        checkpoint_id: None,
        control_window: control.window.clone(),
        anomaly_window: anomaly.window.clone(),
    };
    RankedReport::new(meta, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn proxies() {
        assert_eq!(proxy_value(&FeatureValue::SparseIdList(vec![5, 9, 12])), Some(3.0));
        assert_eq!(
            proxy_value(&FeatureValue::WeightedSparseIdList(vec![(1, 0.5), (2, 1.5)])),
            Some(2.0)
        );
        assert_eq!(proxy_value(&FeatureValue::EncodedEmbedding(vec![1, 2])), None);
        assert_eq!(proxy_value(&FeatureValue::Categorical(4)), None);
        assert_eq!(proxy_value(&FeatureValue::Embedding(vec![3.0, 4.0])), Some(5.0));
        assert_eq!(proxy_value(&FeatureValue::Numeric(-2.5)), Some(-2.5));
    }

    #[test]
    fn score_examples() {
        let s = mfc_score(&[1.0, 2.0, 3.0], &[0.1, 0.2, 0.3]).unwrap().unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        let s = mfc_score(&[1.0, 2.0, 3.0], &[0.3, 0.2, 0.1]).unwrap().unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mfc_score(&[2.0, 2.0, 2.0], &[0.1, 0.2, 0.3]).unwrap(), None);
        assert_eq!(mfc_score(&[1.0, 2.0, 3.0], &[0.2, 0.2, 0.2]).unwrap(), None);
        assert!(matches!(mfc_score(&[1.0], &[0.1, 0.2]), Err(Error::LengthMismatch { .. })));
    }

    proptest! {
        #[test]
        fn score_in_unit_interval(pairs in proptest::collection::vec((-1e3f64..1e3, 0.0f64..1.0), 2..100)) {
            let (xs, ps): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Some(r) = mfc_score(&xs, &ps).unwrap() {
                prop_assert!((0.0..=1.0).contains(&r));
            }
        }
    }
}
