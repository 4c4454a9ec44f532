//! Feature-ablation attribution.
//!
//! Each local importance compares the model's prediction on an example with
//! its prediction after one feature is replaced by the static baseline.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_space::{Dataset, Example};
use crate::model::{pseudo_label, Scorer};

pub const LFI_HEADER: &str = "driftscope-lfi v1";
pub const PREDICTIONS_HEADER: &str = "driftscope-preds v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LfiMethod {
    /// Change in binary cross-entropy against the thresholded prediction.
    PseudoLoss { threshold: f64 },
    /// `1 - p̃ / p`.
    PredictionRatio,
}

impl Default for LfiMethod {
    fn default() -> Self {
        LfiMethod::PseudoLoss { threshold: 0.5 }
    }
}

impl LfiMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LfiMethod::PseudoLoss { threshold } if !(threshold > 0.0 && threshold < 1.0) => Err(
                Error::InvalidConfig(format!("pseudo-label threshold {threshold} not in (0, 1)")),
            ),
            _ => Ok(()),
        }
    }

    /// Local importance for one cell given the unablated and ablated predictions.
    pub fn lfi(&self, p: f64, p_ablated: f64) -> f64 {
        match *self {
            LfiMethod::PseudoLoss { threshold } => lfi_pseudo_loss(p, p_ablated, pseudo_label(p, threshold)),
            LfiMethod::PredictionRatio => lfi_prediction_ratio(p, p_ablated),
        }
    }
}

impl fmt::Display for LfiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LfiMethod::PseudoLoss { threshold } => write!(f, "pseudo-loss:{threshold}"),
            LfiMethod::PredictionRatio => f.write_str("prediction-ratio"),
        }
    }
}

impl FromStr for LfiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let method = match s.split_once(':') {
            None if s == "pseudo-loss" => LfiMethod::default(),
            None if s == "prediction-ratio" => LfiMethod::PredictionRatio,
            Some(("pseudo-loss", t)) => LfiMethod::PseudoLoss {
                threshold: t
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad threshold `{t}`")))?,
            },
            _ => return Err(Error::InvalidConfig(format!("unknown LFI method `{s}`"))),
        };
        method.validate()?;
        Ok(method)
    }
}

/// `ln(p̃/p)` for pseudo label 1, `ln((1-p̃)/(1-p))` otherwise.
pub fn lfi_pseudo_loss(p: f64, p_ablated: f64, pseudo_label: u8) -> f64 {
    // log1p of the relative change when the ratio is near 1, difference of
    // logs otherwise; both keep full relative precision in their range.
    let (num, den, delta) = if pseudo_label == 1 {
        (p_ablated, p, p_ablated - p)
    } else {
        (1.0 - p_ablated, 1.0 - p, p - p_ablated)
    };
    let x = delta / den;
    if x.abs() < 0.5 {
        x.ln_1p()
    } else {
        num.ln() - den.ln()
    }
}

/// `1 - p̃/p`.
pub fn lfi_prediction_ratio(p: f64, p_ablated: f64) -> f64 {
    (p - p_ablated) / p
}

/// Prediction with `feature_id` replaced by its baseline. The input is not modified.
pub fn ablate_predict(model: &dyn Scorer, example: &Example, feature_id: &str) -> Result<f64> {
    let j = model.schema().index_of(feature_id)?;
    let mut copy = example.clone();
    copy.features[j] = model.schema().baseline(j).clone();
    model.predict(&copy)
}

/// Dense row-major `N x M` matrix of local importances.
#[derive(Debug, Clone, PartialEq)]
pub struct LfiMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub method: LfiMethod,
    pub checkpoint_id: String,
}

impl LfiMatrix {
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        row_ids: Vec<String>,
        col_ids: Vec<String>,
        method: LfiMethod,
        checkpoint_id: impl Into<String>,
    ) -> Result<Self> {
        let cols = col_ids.len();
        if row_ids.len() != rows.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                actual: row_ids.len(),
            });
        }
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in &rows {
            if row.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(LfiMatrix {
            rows: rows.len(),
            cols,
            values,
            row_ids,
            col_ids,
            method,
            checkpoint_id: checkpoint_id.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{LFI_HEADER}\tn={}\tm={}\tmethod={}\tcheckpoint={}",
            self.rows, self.cols, self.method, self.checkpoint_id
        )?;
        for i in 0..self.rows {
            let line = self.row(i).iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join("\t");
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R, row_ids: Vec<String>, col_ids: Vec<String>) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let mut fields = header.split('\t');
        if fields.next() != Some(LFI_HEADER) {
            return Err(Error::parse(1, format!("expected `{LFI_HEADER}` header")));
        }
        let (mut n, mut m, mut method, mut checkpoint) = (None, None, None, None);
        for field in fields {
            match field.split_once('=') {
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("m", v)) => m = v.parse::<usize>().ok(),
                Some(("method", v)) => method = Some(v.parse::<LfiMethod>()?),
                Some(("checkpoint", v)) => checkpoint = Some(v.to_string()),
                _ => return Err(Error::parse(1, format!("unexpected header field `{field}`"))),
            }
        }
        let (Some(n), Some(m), Some(method), Some(checkpoint)) = (n, m, method, checkpoint) else {
            return Err(Error::parse(1, "header must carry n, m, method and checkpoint"));
        };
        if row_ids.len() != n || col_ids.len() != m {
            return Err(Error::parse(1, "id sidecar does not match matrix shape"));
        }
        let mut rows = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let row = line
                .split('\t')
                .map(|v| v.parse::<f64>().map_err(|e| Error::parse(i + 2, e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse(i + 2, "non-finite entry"));
            }
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: rows.len(),
            });
        }
        LfiMatrix::from_rows(rows, row_ids, col_ids, method, checkpoint)
    }

    /// Write the matrix to `path` and the row/column ids to its sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))?;
        let ids = IdSidecar {
            rows: self.row_ids.clone(),
            columns: self.col_ids.clone(),
        };
        let mut side = BufWriter::new(File::create(sidecar_path(path))?);
        serde_json::to_writer(&mut side, &ids)?;
        writeln!(side)?;
        side.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ids: IdSidecar = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
        Self::read(File::open(path)?, ids.rows, ids.columns)
    }
}

#[derive(Serialize, Deserialize)]
struct IdSidecar {
    rows: Vec<String>,
    columns: Vec<String>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".ids.json");
    PathBuf::from(name)
}

/// Per-example predictions as logged alongside a dataset.
pub fn write_predictions<W: Write>(mut w: W, checkpoint_id: &str, ids: &[String], preds: &[f64]) -> Result<()> {
    writeln!(w, "{PREDICTIONS_HEADER}\tcheckpoint={checkpoint_id}")?;
    for (id, p) in ids.iter().zip(preds) {
        writeln!(w, "{id}\t{p:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(r: R) -> Result<(Vec<String>, Vec<f64>)> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if !header.starts_with(PREDICTIONS_HEADER) {
        return Err(Error::parse(1, format!("expected `{PREDICTIONS_HEADER}` header")));
    }
    let mut ids = Vec::new();
    let mut preds = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let (id, p) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 2, "expected `id<TAB>prediction`"))?;
        let p: f64 = p.parse().map_err(|_| Error::parse(i + 2, format!("bad prediction `{p}`")))?;
        ids.push(id.to_string());
        preds.push(p);
    }
    Ok((ids, preds))
}

/// One attributed example.
#[derive(Debug, Clone, PartialEq)]
pub struct RowAttribution {
    pub prediction: f64,
    pub lfi: Vec<f64>,
    pub forward_passes: u64,
}

/// Attribute a single example. Baseline-valued features get an exact zero
/// without a model call.
pub fn attribute_example(model: &dyn Scorer, example: &Example, method: LfiMethod) -> Result<RowAttribution> {
    let schema = model.schema();
    let active: Vec<usize> = (0..schema.len())
        .filter(|&j| !schema.is_baseline(j, &example.features[j]))
        .collect();
    let (p, ablated) = model.predict_with_ablations(example, &active)?;
    let mut lfi = vec![0.0; schema.len()];
    for (&j, &q) in active.iter().zip(&ablated) {
        lfi[j] = method.lfi(p, q);
    }
    Ok(RowAttribution {
        prediction: p,
        lfi,
        forward_passes: 1 + active.len() as u64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub matrix: LfiMatrix,
    pub predictions: Vec<f64>,
    pub forward_passes: u64,
}

/// Parallel attribution over examples. Output does not depend on the thread count.
#[derive(Debug, Clone, Copy, Default)]
pub struct AttributionEngine {
    parallelism: usize,
}

impl AttributionEngine {
    /// `parallelism == 0` uses one thread per core.
    pub fn new(parallelism: usize) -> Self {
        AttributionEngine { parallelism }
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
    }

    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match rayon::ThreadPoolBuilder::new().num_threads(self.parallelism).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("falling back to the global thread pool: {e}");
                f()
            }
        }
    }

    pub fn attribute_examples(
        &self,
        model: &dyn Scorer,
        examples: &[Example],
        method: LfiMethod,
    ) -> Result<Vec<RowAttribution>> {
        method.validate()?;
        let rows: Vec<Result<RowAttribution>> = self.install(|| {
            examples
                .par_iter()
                .enumerate()
                .map(|(i, ex)| attribute_example(model, ex, method).map_err(|e| e.at_example(i)))
                .collect()
        });
        rows.into_iter().collect()
    }

    pub fn compute(&self, model: &dyn Scorer, dataset: &Dataset, method: LfiMethod) -> Result<Attribution> {
        if dataset.schema.as_ref() != model.schema().as_ref() {
            return Err(Error::SchemaMismatch("dataset schema differs from model schema".into()));
        }
        let rows = self.attribute_examples(model, &dataset.examples, method)?;
        let forward_passes = rows.iter().map(|r| r.forward_passes).sum();
        let mut predictions = Vec::with_capacity(rows.len());
        let mut lfi = Vec::with_capacity(rows.len());
        for row in rows {
            predictions.push(row.prediction);
            lfi.push(row.lfi);
        }
        let matrix = LfiMatrix::from_rows(
            lfi,
            dataset.examples.iter().map(|e| e.example_id.clone()).collect(),
            dataset.schema.feature_ids().map(str::to_string).collect(),
            method,
            model.checkpoint_id(),
        )?;
        Ok(Attribution {
            matrix,
            predictions,
            forward_passes,
        })
    }
}

pub fn compute_lfi_matrix(model: &dyn Scorer, dataset: &Dataset, method: LfiMethod) -> Result<LfiMatrix> {
    Ok(AttributionEngine::default().compute(model, dataset, method)?.matrix)
}
