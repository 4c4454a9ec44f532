use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use driftscope_core::attribution::{sidecar_path, write_predictions, AttributionEngine, LfiMethod};
use driftscope_core::feature_space::io::load_dataset;
use driftscope_core::model::{ReferenceModel, Scorer};
use serde::Deserialize;

use crate::config::{self, create_parent, with_suffix, EXIT_OK};
use crate::manifest::RunManifest;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// `pseudo-loss[:threshold]` (default, threshold 0.5) or `prediction-ratio`.
    #[arg(long)]
    method: Option<String>,
    /// Worker threads; 0 uses every core. Defaults to $DRIFTSCOPE_PARALLELISM.
    #[arg(long)]
    parallelism: Option<usize>,
    /// LFI matrix output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Predictions output; defaults to `<out>.preds`.
    #[arg(long)]
    preds: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    method: Option<String>,
    parallelism: Option<usize>,
    out: Option<PathBuf>,
    preds: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<u8> {
    let file: FileConfig = config::load(args.config.as_deref())?;
    let model_path = config::required_path(args.model, file.model, "model")?;
    let data_path = config::required_path(args.data, file.data, "data")?;
    let out = config::required_path(args.out, file.out, "out")?;
    let preds_out = args.preds.or(file.preds).unwrap_or_else(|| with_suffix(&out, "preds"));
    let method: LfiMethod = match args.method.or(file.method) {
        Some(s) => s.parse()?,
        None => LfiMethod::default(),
    };
    let parallelism = config::parallelism(args.parallelism, file.parallelism)?;

    let model = ReferenceModel::load(&model_path)?;
    let dataset = load_dataset(&data_path, Arc::clone(model.schema()))?;
    let attribution = AttributionEngine::new(parallelism).compute(&model, &dataset, method)?;

    create_parent(&out)?;
    attribution.matrix.save(&out)?;
    create_parent(&preds_out)?;
    write_predictions(
        BufWriter::new(File::create(&preds_out)?),
        model.checkpoint_id(),
        &attribution.matrix.row_ids,
        &attribution.predictions,
    )?;
    RunManifest::new("attribute", args.config.as_deref())
        .input("model", &model_path)
        .input("data", &data_path)
        .output("lfi", &out)
        .output("lfi_ids", &sidecar_path(&out))
        .output("predictions", &preds_out)
        .parameters(serde_json::json!({
            "method": method.to_string(),
            "parallelism": parallelism,
            "n": attribution.matrix.n_rows(),
            "m": attribution.matrix.n_cols(),
            "forward_passes": attribution.forward_passes,
            "checkpoint_id": model.checkpoint_id(),
        }))?
        .write(&with_suffix(&out, "manifest.json"))?;
    println!(
        "attributed {} examples x {} features ({} forward passes) -> {}",
        attribution.matrix.n_rows(),
        attribution.matrix.n_cols(),
        attribution.forward_passes,
        out.display()
    );
    Ok(EXIT_OK)
}
