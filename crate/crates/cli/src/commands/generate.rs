use std::path::PathBuf;
use std::sync::Arc;

use driftscope_core::bench::SchemaMix;
use driftscope_core::feature_space::io::{load_schema, save_dataset, save_schema};
use driftscope_core::feature_space::{generate_dataset, GeneratorConfig, TimeWindow, WindowLabel};
use driftscope_core::model::{ModelConfig, ReferenceModel, Scorer};
use serde::{Deserialize, Serialize};

use crate::config::{self, usage, EXIT_OK};
use crate::manifest::RunManifest;

const DEFAULT_EXAMPLES: usize = 20_000;
const DEFAULT_WINDOW: (i64, i64) = (1_717_243_200, 1_717_246_800);

#[derive(clap::Args)]
pub struct Args {
    /// TOML config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    examples: Option<usize>,
    /// `control` or `anomaly`.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    display_fraction: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    window_start: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    window_end: Option<i64>,
    /// Score with this existing checkpoint instead of building a model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use this schema file instead of the synthetic mix.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    examples: Option<usize>,
    label: Option<WindowLabel>,
    display_fraction: Option<f64>,
    window_start: Option<i64>,
    window_end: Option<i64>,
    model_file: Option<PathBuf>,
    schema_file: Option<PathBuf>,
    schema: Option<SchemaMix>,
    model: Option<ModelConfig>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    examples: usize,
    label: WindowLabel,
    display_fraction: f64,
    window: TimeWindow,
    schema_mix: Option<&'a SchemaMix>,
    model_config: &'a ModelConfig,
    checkpoint_id: &'a str,
}

fn parse_label(s: &str) -> anyhow::Result<WindowLabel> {
    match s {
        "control" => Ok(WindowLabel::Control),
        "anomaly" => Ok(WindowLabel::Anomaly),
        other => Err(usage(format!("unknown label `{other}`; expected control or anomaly"))),
    }
}

pub fn run(args: Args) -> anyhow::Result<u8> {
    let file: FileConfig = config::load(args.config.as_deref())?;
    let out = config::required_path(args.out, file.out, "out")?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let examples = args.examples.or(file.examples).unwrap_or(DEFAULT_EXAMPLES);
    let label = match args.label {
        Some(s) => parse_label(&s)?,
        None => file.label.unwrap_or(WindowLabel::Control),
    };
    let display_fraction = args.display_fraction.or(file.display_fraction).unwrap_or(0.2);
    let window = TimeWindow::new(
        args.window_start.or(file.window_start).unwrap_or(DEFAULT_WINDOW.0),
        args.window_end.or(file.window_end).unwrap_or(DEFAULT_WINDOW.1),
    )?;
    let model_path = args.model.or(file.model_file);
    let schema_path = args.schema.or(file.schema_file);

    let mut manifest = RunManifest::new("generate", args.config.as_deref()).seed("data", seed);
    let mix = file.schema.unwrap_or_default();
    let model = match &model_path {
        Some(path) => {
            if schema_path.is_some() || file.model.is_some() {
                return Err(usage("--model cannot be combined with a schema file or model config"));
            }
            manifest = manifest.input("model", path);
            ReferenceModel::load(path)?
        }
        None => {
            let schema = match &schema_path {
                Some(path) => {
                    manifest = manifest.input("schema", path);
                    load_schema(path)?
                }
                None => mix.build()?,
            };
            ReferenceModel::new(file.model.unwrap_or_default(), Arc::new(schema))?
        }
    };
    let generator = GeneratorConfig {
        examples,
        seed,
        display_fraction,
        label,
    };
    let dataset = generate_dataset(&generator, window, &model)?;

    std::fs::create_dir_all(&out)?;
    let schema_out = out.join("schema.json");
    let data_out = out.join("data.jsonl");
    let model_out = out.join("model.ckpt");
    save_schema(&schema_out, model.schema())?;
    save_dataset(&data_out, &dataset)?;
    model.save(&model_out)?;
    manifest
        .seed("model_weights", model.config().weight_seed)
        .output("schema", &schema_out)
        .output("data", &data_out)
        .output("model", &model_out)
        .parameters(Resolved {
            examples,
            label,
            display_fraction,
            window,
            schema_mix: (model_path.is_none() && schema_path.is_none()).then_some(&mix),
            model_config: model.config(),
            checkpoint_id: model.checkpoint_id(),
        })?
        .write(&out.join("manifest.json"))?;
    println!(
        "wrote {} examples ({} displayed) to {}",
        dataset.len(),
        dataset.displayed_count(),
        data_out.display()
    );
    Ok(EXIT_OK)
}
