//! Ranked shift reports shared by the GFI and MFC rankings.
//!
//! Two renderings: an aligned text table for people and line-delimited JSON
//! (one metadata record, then one record per feature) for machines.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default top-K cutoff for triage.
pub const DEFAULT_TOP_K: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    /// `gfi/<lfi method>` or `mfc`.
    pub method: String,
    pub k: usize,
    pub n_control: usize,
    pub n_anomaly: usize,
    pub checkpoint_id: Option<String>,
    pub control_window: String,
    pub anomaly_window: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub feature_id: String,
    pub control: Option<f64>,
    pub anomaly: Option<f64>,
    /// Absolute shift; `None` when either side is undefined.
    pub shift: Option<f64>,
    pub coverage_delta: Option<f64>,
    /// Control rank minus anomaly rank.
    pub rank_shift: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedReport {
    pub meta: ReportMeta,
    pub entries: Vec<ReportEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Line {
    Meta(ReportMeta),
    Entry { rank: usize, entry: ReportEntry },
}

impl RankedReport {
    /// Sort defined shifts descending, then undefined ones; ties by feature id.
    pub fn new(meta: ReportMeta, mut entries: Vec<ReportEntry>) -> Self {
        entries.sort_by(|a, b| match (a.shift, b.shift) {
            (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.feature_id.cmp(&b.feature_id)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.feature_id.cmp(&b.feature_id),
        });
        RankedReport { meta, entries }
    }

    pub fn top_k(&self) -> &[ReportEntry] {
        &self.entries[..self.meta.k.min(self.entries.len())]
    }

    pub fn position(&self, feature_id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.feature_id == feature_id)
    }

    /// How many of `features` appear in the top K with a defined shift.
    pub fn hits<S: AsRef<str>>(&self, features: &[S]) -> usize {
        features
            .iter()
            .filter(|f| {
                self.top_k()
                    .iter()
                    .any(|e| e.shift.is_some() && e.feature_id == f.as_ref())
            })
            .count()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", serde_json::to_string(&Line::Meta(self.meta.clone()))?)?;
        for (rank, entry) in self.entries.iter().enumerate() {
            let line = Line::Entry {
                rank,
                entry: entry.clone(),
            };
            writeln!(w, "{}", serde_json::to_string(&line)?)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Self> {
        let mut meta = None;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Line>(&line).map_err(|e| Error::parse(i + 1, e.to_string()))? {
                Line::Meta(m) if meta.is_none() => meta = Some(m),
                Line::Meta(_) => return Err(Error::parse(i + 1, "duplicate metadata record")),
                Line::Entry { rank, entry } => {
                    if rank != entries.len() {
                        return Err(Error::parse(i + 1, format!("rank {rank} out of order")));
                    }
                    entries.push(entry);
                }
            }
        }
        let meta = meta.ok_or_else(|| Error::parse(1, "missing metadata record"))?;
        Ok(RankedReport { meta, entries })
    }

    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut out = format!(
            "# method={} k={} n_control={} n_anomaly={} checkpoint={} windows={}->{}\n",
            m.method,
            m.k,
            m.n_control,
            m.n_anomaly,
            m.checkpoint_id.as_deref().unwrap_or("-"),
            m.control_window,
            m.anomaly_window,
        );
        let width = self
            .entries
            .iter()
            .map(|e| e.feature_id.len())
            .max()
            .unwrap_or(0)
            .max("feature".len());
        out.push_str(&format!(
            "{:>4}  {:<width$}  {:>12}  {:>12}  {:>12}  {:>10}  {:>6}\n",
            "rank", "feature", "control", "anomaly", "shift", "d_cov", "d_rank"
        ));
        for (rank, e) in self.entries.iter().enumerate() {
            let num = |v: Option<f64>| v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.6}"));
            out.push_str(&format!(
                "{:>4}  {:<width$}  {:>12}  {:>12}  {:>12}  {:>10}  {:>6}\n",
                rank,
                e.feature_id,
                num(e.control),
                num(e.anomaly),
                num(e.shift),
                e.coverage_delta.map_or_else(|| "N/A".into(), |x| format!("{x:+.4}")),
                e.rank_shift.map_or_else(|| "N/A".into(), |x| format!("{x:+}")),
            ));
            if rank + 1 == m.k && rank + 1 < self.entries.len() {
                out.push_str(&format!("{:-<1$}\n", "", width + 70));
            }
        }
        out
    }

    /// Parse the text table back into `(feature_id, shift)` rows, in rank order.
    pub fn parse_text_rows(text: &str) -> Result<Vec<(String, Option<f64>)>> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.starts_with('-') || line.trim_start().starts_with("rank") {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 7 {
                return Err(Error::parse(i + 1, "expected 7 columns"));
            }
            let shift = match cols[4] {
                "N/A" => None,
                v => Some(v.parse().map_err(|_| Error::parse(i + 1, format!("bad shift `{v}`")))?),
            };
            rows.push((cols[1].to_string(), shift));
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, shift: Option<f64>) -> ReportEntry {
        ReportEntry {
            feature_id: id.into(),
            control: shift.map(|_| 0.0),
            anomaly: shift,
            shift,
            coverage_delta: None,
            rank_shift: None,
        }
    }

    fn meta(k: usize) -> ReportMeta {
        ReportMeta {
            method: "mfc".into(),
            k,
            n_control: 3,
            n_anomaly: 3,
            checkpoint_id: None,
            control_window: "control".into(),
            anomaly_window: "anomaly".into(),
        }
    }

    #[test]
    fn ordering_and_tiebreak() {
        let r = RankedReport::new(
            meta(2),
            vec![entry("b", Some(0.1)), entry("z", None), entry("a", Some(0.1)), entry("c", Some(0.5))],
        );
        let ids: Vec<_> = r.entries.iter().map(|e| e.feature_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b", "z"]);
        assert_eq!(r.hits(&["a", "b"]), 1);
        assert_eq!(r.position("z"), Some(3));
    }

    #[test]
    fn undefined_entries_never_hit() {
        let r = RankedReport::new(meta(5), vec![entry("a", None)]);
        assert_eq!(r.hits(&["a"]), 0);
    }

    #[test]
    fn jsonl_and_text_agree() {
        let r = RankedReport::new(meta(1), vec![entry("b", Some(0.25)), entry("a", None)]);
        let mut buf = Vec::new();
        r.write_jsonl(&mut buf).unwrap();
        let back = RankedReport::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, r);
        let rows = RankedReport::parse_text_rows(&r.to_text()).unwrap();
        assert_eq!(rows, vec![("b".to_string(), Some(0.25)), ("a".to_string(), None)]);
    }
}
