//! Text file formats for schemas and datasets.
//!
//! Schema file: a `driftscope-schema v1` header line followed by one JSON
//! document listing the entries in column order.
//!
//! Dataset file: a `driftscope-dataset v1` header line, one JSON line with the
//! dataset metadata (label, window), then one JSON record per example with
//! `example_id`, `timestamp`, `displayed` and a `features` map keyed by
//! feature id in schema order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Dataset, Example, FeatureSchema, FeatureValue, TimeWindow, WindowLabel};
use crate::error::{Error, Result};

pub const SCHEMA_HEADER: &str = "driftscope-schema v1";
pub const DATASET_HEADER: &str = "driftscope-dataset v1";

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    label: WindowLabel,
    window: TimeWindow,
    examples: usize,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    example_id: &'a str,
    timestamp: i64,
    displayed: bool,
    features: IndexMap<&'a str, &'a FeatureValue>,
}

#[derive(Deserialize)]
struct RecordIn {
    example_id: String,
    timestamp: i64,
    displayed: bool,
    features: IndexMap<String, FeatureValue>,
}

pub fn write_schema<W: Write>(mut w: W, schema: &FeatureSchema) -> Result<()> {
    writeln!(w, "{SCHEMA_HEADER}")?;
    serde_json::to_writer_pretty(&mut w, schema)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_schema<R: Read>(r: R) -> Result<FeatureSchema> {
    let mut text = String::new();
    BufReader::new(r).read_to_string(&mut text)?;
    let (header, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    if header.trim_end() != SCHEMA_HEADER {
        return Err(Error::parse(1, format!("expected `{SCHEMA_HEADER}` header")));
    }
    let parsed: FeatureSchema = serde_json::from_str(body).map_err(|e| Error::parse(e.line() + 1, e.to_string()))?;
    // Re-run constructor validation on deserialized input.
    FeatureSchema::new(parsed.entries().to_vec())
}

pub fn encode_record(example: &Example, schema: &FeatureSchema) -> Result<String> {
    let record = RecordOut {
        example_id: &example.example_id,
        timestamp: example.timestamp,
        displayed: example.displayed,
        features: schema.feature_ids().zip(&example.features).collect(),
    };
    Ok(serde_json::to_string(&record)?)
}

/// Parse one example record and check it against the schema.
pub fn parse_record(line: &str, schema: &FeatureSchema) -> Result<Example> {
    let mut record: RecordIn = serde_json::from_str(line)?;
    if record.features.len() != schema.len() {
        return Err(Error::SchemaMismatch(format!(
            "record `{}` has {} features, schema has {}",
            record.example_id,
            record.features.len(),
            schema.len()
        )));
    }
    let features = schema
        .feature_ids()
        .map(|id| {
            record
                .features
                .swap_remove(id)
                .ok_or_else(|| Error::SchemaMismatch(format!("record `{}` lacks feature `{id}`", record.example_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let example = Example {
        example_id: record.example_id,
        timestamp: record.timestamp,
        displayed: record.displayed,
        features,
    };
    schema.check_example(&example)?;
    Ok(example)
}

pub fn write_dataset<W: Write>(mut w: W, dataset: &Dataset) -> Result<()> {
    writeln!(w, "{DATASET_HEADER}")?;
    let meta = DatasetMeta {
        label: dataset.label,
        window: dataset.window,
        examples: dataset.len(),
    };
    writeln!(w, "{}", serde_json::to_string(&meta)?)?;
    for ex in &dataset.examples {
        writeln!(w, "{}", encode_record(ex, &dataset.schema)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R, schema: Arc<FeatureSchema>) -> Result<Dataset> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != DATASET_HEADER {
        return Err(Error::parse(1, format!("expected `{DATASET_HEADER}` header")));
    }
    let meta_line = lines.next().transpose()?.ok_or_else(|| Error::parse(2, "missing metadata line"))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_line).map_err(|e| Error::parse(2, e.to_string()))?;
    let mut examples = Vec::with_capacity(meta.examples);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex = parse_record(&line, &schema).map_err(|e| Error::parse(i + 3, e.to_string()))?;
        examples.push(ex);
    }
    if examples.len() != meta.examples {
        return Err(Error::LengthMismatch {
            expected: meta.examples,
            actual: examples.len(),
        });
    }
    let dataset = Dataset {
        schema,
        examples,
        label: meta.label,
        window: meta.window,
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn save_schema(path: &Path, schema: &FeatureSchema) -> Result<()> {
    write_schema(BufWriter::new(File::create(path)?), schema)
}

pub fn load_schema(path: &Path) -> Result<FeatureSchema> {
    read_schema(File::open(path)?)
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), dataset)
}

pub fn load_dataset(path: &Path, schema: Arc<FeatureSchema>) -> Result<Dataset> {
    read_dataset(File::open(path)?, schema)
}
