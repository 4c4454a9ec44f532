use std::path::PathBuf;
use std::sync::Arc;

use driftscope_core::aggregation::gfi;
use driftscope_core::attribution::LfiMatrix;
use driftscope_core::bench::{apply_corruption, standard_cases, CorruptionSpec};
use driftscope_core::feature_space::io::{load_dataset, load_schema, save_dataset};
use serde::Deserialize;

use crate::config::{self, usage, with_suffix, EXIT_OK};
use crate::manifest::RunManifest;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// TOML file holding one corruption spec.
    #[arg(long, conflicts_with = "standard_case")]
    case_file: Option<PathBuf>,
    /// One of the built-in cases, 1 to 11.
    #[arg(long)]
    standard_case: Option<u8>,
    /// Control LFI matrix, for selectors that rank by prior importance.
    #[arg(long)]
    prior_lfi: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    schema: Option<PathBuf>,
    data: Option<PathBuf>,
    case_file: Option<PathBuf>,
    standard_case: Option<u8>,
    prior_lfi: Option<PathBuf>,
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<u8> {
    let file: FileConfig = config::load(args.config.as_deref())?;
    let schema_path = config::required_path(args.schema, file.schema, "schema")?;
    let data_path = config::required_path(args.data, file.data, "data")?;
    let out = config::required_path(args.out, file.out, "out")?;
    let mut manifest = RunManifest::new("corrupt", args.config.as_deref())
        .input("schema", &schema_path)
        .input("data", &data_path);

    let spec: CorruptionSpec = match (args.case_file.or(file.case_file), args.standard_case.or(file.standard_case)) {
        (Some(path), None) => {
            manifest = manifest.input("case", &path);
            config::load_file(&path)?
        }
        (None, Some(id)) => standard_cases()
            .into_iter()
            .find(|c| c.case_id == id)
            .ok_or_else(|| usage(format!("no standard case {id}; expected 1 to 11")))?,
        _ => return Err(usage("give exactly one of --case-file or --standard-case")),
    };
    let schema = Arc::new(load_schema(&schema_path)?);
    let dataset = load_dataset(&data_path, schema)?;
    let prior = match args.prior_lfi.or(file.prior_lfi) {
        Some(path) => {
            manifest = manifest.input("prior_lfi", &path);
            Some(gfi(&LfiMatrix::load(&path)?, "control"))
        }
        None => None,
    };
    let corrupted = apply_corruption(&dataset, &spec, prior.as_ref())?;
    save_dataset(&out, &corrupted.dataset)?;
    manifest
        .seed("corruption", spec.seed)
        .output("data", &out)
        .parameters(serde_json::json!({
            "case": spec,
            "targets": corrupted.targets,
            "affected_examples": corrupted.affected.len(),
        }))?
        .write(&with_suffix(&out, "manifest.json"))?;
    println!(
        "case {}: corrupted {} in {} of {} examples",
        spec.case_id,
        corrupted.targets.join(","),
        corrupted.affected.len(),
        dataset.len()
    );
    Ok(EXIT_OK)
}
