//! MFC ranking from logged data and predictions only. There is deliberately
//! no model flag: this baseline must not need inference.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use driftscope_core::attribution::read_predictions;
use driftscope_core::feature_space::io::{load_dataset, load_schema};
use driftscope_core::feature_space::Dataset;
use driftscope_core::mfc::mfc_rank;
use driftscope_core::report::DEFAULT_TOP_K;
use serde::Deserialize;

use crate::commands::rank::emit;
use crate::config::{self, with_suffix, EXIT_OK};
use crate::manifest::RunManifest;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    control_data: Option<PathBuf>,
    #[arg(long)]
    anomaly_data: Option<PathBuf>,
    #[arg(long)]
    control_preds: Option<PathBuf>,
    #[arg(long)]
    anomaly_preds: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    text: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    schema: Option<PathBuf>,
    control_data: Option<PathBuf>,
    anomaly_data: Option<PathBuf>,
    control_preds: Option<PathBuf>,
    anomaly_preds: Option<PathBuf>,
    k: Option<usize>,
    out: Option<PathBuf>,
    text: Option<PathBuf>,
}

/// Predictions aligned to the dataset's example order.
fn aligned_predictions(dataset: &Dataset, path: &Path) -> anyhow::Result<Vec<f64>> {
    let (ids, preds) = read_predictions(BufReader::new(File::open(path)?))?;
    let expected = dataset.examples.iter().map(|e| e.example_id.as_str());
    if ids.len() != dataset.len() || !ids.iter().map(String::as_str).eq(expected) {
        anyhow::bail!(
            "predictions in {} do not cover the dataset's examples in order",
            path.display()
        );
    }
    Ok(preds)
}

pub fn run(args: Args) -> anyhow::Result<u8> {
    let file: FileConfig = config::load(args.config.as_deref())?;
    let schema_path = config::required_path(args.schema, file.schema, "schema")?;
    let control_data = config::required_path(args.control_data, file.control_data, "control-data")?;
    let anomaly_data = config::required_path(args.anomaly_data, file.anomaly_data, "anomaly-data")?;
    let control_preds = config::required_path(args.control_preds, file.control_preds, "control-preds")?;
    let anomaly_preds = config::required_path(args.anomaly_preds, file.anomaly_preds, "anomaly-preds")?;
    let out = config::required_path(args.out, file.out, "out")?;
    let text = args.text.or(file.text);
    let k = args.k.or(file.k).unwrap_or(DEFAULT_TOP_K);
    if k == 0 {
        return Err(config::usage("--k must be >= 1"));
    }

    let schema = Arc::new(load_schema(&schema_path)?);
    let control = load_dataset(&control_data, Arc::clone(&schema))?;
    let anomaly = load_dataset(&anomaly_data, schema)?;
    let cp = aligned_predictions(&control, &control_preds)?;
    let ap = aligned_predictions(&anomaly, &anomaly_preds)?;
    let report = mfc_rank((&control, &cp), (&anomaly, &ap), k)?;
    emit(&report, &out, text.as_ref())?;

    let mut manifest = RunManifest::new("mfc", args.config.as_deref())
        .input("schema", &schema_path)
        .input("control_data", &control_data)
        .input("anomaly_data", &anomaly_data)
        .input("control_preds", &control_preds)
        .input("anomaly_preds", &anomaly_preds)
        .output("report", &out);
    if let Some(t) = &text {
        manifest = manifest.output("text", t);
    }
    manifest
        .parameters(serde_json::json!({ "k": k }))?
        .write(&with_suffix(&out, "manifest.json"))?;
    Ok(EXIT_OK)
}
