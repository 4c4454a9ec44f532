//! Sliding-window GFI monitor.
//!
//! Examples arrive in fixed-size batches. Each example is attributed once on
//! admission and its LFI row is cached until eviction, so a step costs
//! `step_size * (M + 1)` forward passes. Once the window is full, every step
//! recomputes the window GFI and compares it with the GFI from `lag` steps ago.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aggregation::{gfi, GfiVector};
use crate::attribution::{AttributionEngine, LfiMatrix, LfiMethod};
use crate::error::{Error, Result};
use crate::feature_space::{Dataset, Example, FeatureSchema, TimeWindow, WindowLabel};
use crate::model::Scorer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub window_size: usize,
    pub step_size: usize,
    /// Steps between the control window and the current one.
    pub lag: usize,
    /// Minimum `|ΔGFI|` to alert.
    pub min_abs_shift: f64,
    /// Minimum `|ΔGFI| / GFI_control` to alert.
    pub min_rel_shift: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_size: 10_000,
            step_size: 1_000,
            lag: 10,
            min_abs_shift: 0.05,
            min_rel_shift: 0.5,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_size == 0 || self.step_size > self.window_size {
            return Err(Error::InvalidConfig(format!(
                "step size {} must be in 1..={}",
                self.step_size, self.window_size
            )));
        }
        if self.lag == 0 {
            return Err(Error::InvalidConfig("lag must be >= 1".into()));
        }
        if !(self.min_abs_shift >= 0.0 && self.min_rel_shift >= 0.0) {
            return Err(Error::InvalidConfig("alert thresholds must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub step: u64,
    pub feature_id: String,
    pub gfi_control: f64,
    pub gfi_current: f64,
    /// `gfi_current - gfi_control`.
    pub shift: f64,
}

struct Admitted {
    example: Example,
    lfi: Vec<f64>,
}

/// Ring of admitted examples plus the last `lag + 1` window GFIs.
pub struct MonitorState {
    ring: VecDeque<Admitted>,
    history: VecDeque<(u64, GfiVector)>,
    alerted: BTreeSet<String>,
    step: u64,
}

pub struct Monitor {
    config: WindowConfig,
    method: LfiMethod,
    engine: AttributionEngine,
    schema: Arc<FeatureSchema>,
    checkpoint_id: String,
    state: MonitorState,
}

impl Monitor {
    pub fn new(config: WindowConfig, method: LfiMethod, engine: AttributionEngine, model: &dyn Scorer) -> Result<Self> {
        config.validate()?;
        method.validate()?;
        Ok(Monitor {
            state: MonitorState {
                ring: VecDeque::with_capacity(config.window_size),
                history: VecDeque::with_capacity(config.lag + 1),
                alerted: BTreeSet::new(),
                step: 0,
            },
            config,
            method,
            engine,
            schema: Arc::clone(model.schema()),
            checkpoint_id: model.checkpoint_id().to_string(),
        })
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.state.step
    }

    pub fn is_full(&self) -> bool {
        self.state.ring.len() == self.config.window_size
    }

    /// Admit one batch, evict the oldest examples, and return new alerts.
    pub fn step(&mut self, model: &dyn Scorer, batch: Vec<Example>) -> Result<Vec<Alert>> {
        if batch.len() != self.config.step_size {
            return Err(Error::LengthMismatch {
                expected: self.config.step_size,
                actual: batch.len(),
            });
        }
        if model.checkpoint_id() != self.checkpoint_id || model.schema().as_ref() != self.schema.as_ref() {
            return Err(Error::SchemaMismatch("monitor must be stepped with one frozen model".into()));
        }
        for (i, ex) in batch.iter().enumerate() {
            self.schema.check_example(ex).map_err(|e| e.at_example(i))?;
        }
        let rows = self.engine.attribute_examples(model, &batch, self.method)?;

        let state = &mut self.state;
        state.step += 1;
        for (example, row) in batch.into_iter().zip(rows) {
            state.ring.push_back(Admitted { example, lfi: row.lfi });
        }
        while state.ring.len() > self.config.window_size {
            state.ring.pop_front();
        }
        if state.ring.len() < self.config.window_size {
            return Ok(Vec::new());
        }

        let current = self.compute_gfi()?;
        let state = &mut self.state;
        state.history.push_back((state.step, current));
        while state.history.len() > self.config.lag + 1 {
            state.history.pop_front();
        }
        let (control_step, control) = &state.history[0];
        let (_, current) = state.history.back().expect("just pushed");
        if state.step - control_step < self.config.lag as u64 {
            return Ok(Vec::new());
        }

        let mut alerting = BTreeSet::new();
        let mut alerts = Vec::new();
        for (c, a) in control.entries.iter().zip(&current.entries) {
            let shift = a.gfi - c.gfi;
            let relative = if c.gfi > 0.0 { shift.abs() / c.gfi } else { f64::INFINITY };
            if shift.abs() >= self.config.min_abs_shift && shift != 0.0 && relative >= self.config.min_rel_shift {
                alerting.insert(c.feature_id.clone());
                if !state.alerted.contains(&c.feature_id) {
                    alerts.push(Alert {
                        step: state.step,
                        feature_id: c.feature_id.clone(),
                        gfi_control: c.gfi,
                        gfi_current: a.gfi,
                        shift,
                    });
                }
            }
        }
        state.alerted = alerting;
        Ok(alerts)
    }

    fn window_name(&self) -> String {
        format!("window@{}", self.state.step)
    }

    fn compute_gfi(&self) -> Result<GfiVector> {
        let ring = &self.state.ring;
        let matrix = LfiMatrix::from_rows(
            ring.iter().map(|a| a.lfi.clone()).collect(),
            ring.iter().map(|a| a.example.example_id.clone()).collect(),
            self.schema.feature_ids().map(str::to_string).collect(),
            self.method,
            self.checkpoint_id.clone(),
        )?;
        Ok(gfi(&matrix, self.window_name()))
    }

    /// GFI of the current window. Its `window` name is `window@<step>`.
    pub fn snapshot_gfi(&self) -> Result<GfiVector> {
        if !self.is_full() {
            return Err(Error::WindowNotFull {
                have: self.state.ring.len(),
                need: self.config.window_size,
            });
        }
        match self.state.history.back() {
            Some((step, g)) if *step == self.state.step => Ok(g.clone()),
            _ => self.compute_gfi(),
        }
    }

    /// The examples currently in the window, oldest first.
    pub fn window_dataset(&self) -> Result<Dataset> {
        let ring = &self.state.ring;
        let (Some(first), Some(last)) = (ring.front(), ring.back()) else {
            return Err(Error::Empty("monitor window"));
        };
        let lo = ring.iter().map(|a| a.example.timestamp).min().unwrap_or(first.example.timestamp);
        let hi = ring.iter().map(|a| a.example.timestamp).max().unwrap_or(last.example.timestamp);
        Ok(Dataset {
            schema: Arc::clone(&self.schema),
            examples: ring.iter().map(|a| a.example.clone()).collect(),
            label: WindowLabel::Anomaly,
            window: TimeWindow::new(lo, hi + 1)?,
        })
    }

    /// Offline-equivalent window name for comparing against [`Monitor::snapshot_gfi`].
    pub fn current_window_name(&self) -> String {
        self.window_name()
    }

    /// Examples held plus GFIs cached.
    pub fn footprint(&self) -> (usize, usize) {
        (self.state.ring.len(), self.state.history.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_space::{FeatureKind, FeatureSpec, FeatureValue, GeneratorParams};
    use crate::model::{ModelConfig, ReferenceModel};

    fn model() -> ReferenceModel {
        let g = GeneratorParams::default;
        let schema = FeatureSchema::new(vec![
            FeatureSpec::new("a", FeatureKind::Numeric, g()),
            FeatureSpec::new("b", FeatureKind::Numeric, g()),
        ])
        .unwrap();
        ReferenceModel::new(ModelConfig::default(), Arc::new(schema)).unwrap()
    }

    fn batch(model: &ReferenceModel, start: usize, len: usize, scale: f64) -> Vec<Example> {
        (start..start + len)
            .map(|i| {
                let mut ex = model.schema().baseline_example(format!("e{i}"), i as i64);
                ex.features = vec![
                    FeatureValue::Numeric(scale * ((i % 7) as f64 - 3.0)),
                    FeatureValue::Numeric((i % 5) as f64),
                ];
                ex
            })
            .collect()
    }

    fn config() -> WindowConfig {
        WindowConfig {
            window_size: 20,
            step_size: 5,
            lag: 2,
            ..WindowConfig::default()
        }
    }

    #[test]
    fn rejects_bad_config_and_batch() {
        let m = model();
        let bad = WindowConfig {
            step_size: 30,
            ..config()
        };
        assert!(Monitor::new(bad, LfiMethod::default(), AttributionEngine::new(1), &m).is_err());
        let mut mon = Monitor::new(config(), LfiMethod::default(), AttributionEngine::new(1), &m).unwrap();
        assert!(matches!(mon.step(&m, batch(&m, 0, 4, 1.0)), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn snapshot_before_full_errors() {
        let m = model();
        let mut mon = Monitor::new(config(), LfiMethod::default(), AttributionEngine::new(1), &m).unwrap();
        mon.step(&m, batch(&m, 0, 5, 1.0)).unwrap();
        assert!(matches!(mon.snapshot_gfi(), Err(Error::WindowNotFull { have: 5, need: 20 })));
    }

    #[test]
    fn repeated_batches_do_not_alert() {
        let m = model();
        let mut mon = Monitor::new(config(), LfiMethod::default(), AttributionEngine::new(1), &m).unwrap();
        let b = batch(&m, 0, 5, 1.0);
        for _ in 0..12 {
            assert!(mon.step(&m, b.clone()).unwrap().is_empty());
        }
        assert_eq!(mon.snapshot_gfi().unwrap(), mon.snapshot_gfi().unwrap());
        assert_eq!(mon.footprint(), (20, 3));
    }

    #[test]
    fn shift_alerts_without_repeats() {
        let m = model();
        let mut mon = Monitor::new(config(), LfiMethod::default(), AttributionEngine::new(1), &m).unwrap();
        let mut alerts = Vec::new();
        for s in 0..16 {
            let scale = if s >= 6 { 8.0 } else { 1.0 };
            alerts.extend(mon.step(&m, batch(&m, s * 5, 5, scale)).unwrap());
        }
        let on_a: Vec<_> = alerts.iter().filter(|a| a.feature_id == "a").collect();
        assert!(on_a[0].shift > 0.0, "{alerts:?}");
        assert!(on_a.windows(2).all(|w| w[1].step > w[0].step + 1), "{alerts:?}");
    }
}
