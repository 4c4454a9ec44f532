use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::CaseResult;

/// Signed percent change of the mean prediction, `100 * (mean(a) - mean(c)) / mean(c)`.
pub fn avg_prediction_change(control: &[f64], anomaly: &[f64]) -> Result<f64> {
    if control.len() != anomaly.len() {
        return Err(Error::LengthMismatch {
            expected: control.len(),
            actual: anomaly.len(),
        });
    }
    if control.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let n = control.len() as f64;
    let mc = control.iter().sum::<f64>() / n;
    let ma = anomaly.iter().sum::<f64>() / n;
    if mc < 1e-9 {
        return Err(Error::DegenerateMean(mc));
    }
    Ok(100.0 * (ma - mc) / mc)
}

/// Mean per-example `|p_a - p_c|`.
pub fn mean_abs_prediction_delta(control: &[f64], anomaly: &[f64]) -> Result<f64> {
    if control.len() != anomaly.len() {
        return Err(Error::LengthMismatch {
            expected: control.len(),
            actual: anomaly.len(),
        });
    }
    if control.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    Ok(control.iter().zip(anomaly).map(|(c, a)| (a - c).abs()).sum::<f64>() / control.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecall {
    /// Percent of corrupted features found in the top K.
    pub overall: f64,
    /// Percent of cases with at least one corrupted feature in the top K.
    pub at_least_one: f64,
    pub cases: usize,
    pub corrupted: usize,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallMetrics {
    pub gfi: MethodRecall,
    /// `None` when MFC is undefined for every case.
    pub mfc: Option<MethodRecall>,
}

impl RecallMetrics {
    /// GFI recall is at least MFC recall on both measures.
    pub fn ordering_holds(&self) -> bool {
        self.mfc
            .as_ref()
            .is_none_or(|m| self.gfi.overall >= m.overall && self.gfi.at_least_one >= m.at_least_one)
    }
}

fn method_recall(rows: impl Iterator<Item = (usize, usize)>) -> Option<MethodRecall> {
    let (mut cases, mut corrupted, mut hits, mut any) = (0, 0, 0, 0);
    for (h, c) in rows {
        cases += 1;
        corrupted += c;
        hits += h;
        any += usize::from(h > 0);
    }
    (cases > 0).then(|| MethodRecall {
        overall: 100.0 * hits as f64 / corrupted as f64,
        at_least_one: 100.0 * any as f64 / cases as f64,
        cases,
        corrupted,
        hits,
    })
}

/// Overall and at-least-one recall per method. Cases where MFC is N/A are left
/// out of the MFC denominators.
pub fn recall_metrics(results: &[CaseResult]) -> Result<RecallMetrics> {
    if results.is_empty() {
        return Err(Error::Empty("case results"));
    }
    let gfi = method_recall(results.iter().map(|r| (r.gfi_hits, r.corrupted.len()))).expect("non-empty");
    let mfc = method_recall(
        results
            .iter()
            .filter_map(|r| r.mfc_hits.map(|h| (h, r.corrupted.len()))),
    );
    Ok(RecallMetrics { gfi, mfc })
}
