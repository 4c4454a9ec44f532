use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use driftscope_core::aggregation::{gfi, rank_features};
use driftscope_core::attribution::LfiMatrix;
use driftscope_core::report::{RankedReport, DEFAULT_TOP_K};
use serde::Deserialize;

use crate::config::{self, create_parent, with_suffix, EXIT_OK};
use crate::manifest::RunManifest;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    control_lfi: Option<PathBuf>,
    #[arg(long)]
    anomaly_lfi: Option<PathBuf>,
    /// Top-K cutoff marked in the report.
    #[arg(long)]
    k: Option<usize>,
    /// Report output as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the text table here.
    #[arg(long)]
    text: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    control_lfi: Option<PathBuf>,
    anomaly_lfi: Option<PathBuf>,
    k: Option<usize>,
    out: Option<PathBuf>,
    text: Option<PathBuf>,
}

/// Write `report` as JSON lines to `out`, optionally as text to `text`, and
/// print the text table.
pub fn emit(report: &RankedReport, out: &PathBuf, text: Option<&PathBuf>) -> anyhow::Result<()> {
    create_parent(out)?;
    report.write_jsonl(BufWriter::new(File::create(out)?))?;
    let table = report.to_text();
    if let Some(path) = text {
        create_parent(path)?;
        std::fs::write(path, &table)?;
    }
    print!("{table}");
    Ok(())
}

pub fn run(args: Args) -> anyhow::Result<u8> {
    let file: FileConfig = config::load(args.config.as_deref())?;
    let control_path = config::required_path(args.control_lfi, file.control_lfi, "control-lfi")?;
    let anomaly_path = config::required_path(args.anomaly_lfi, file.anomaly_lfi, "anomaly-lfi")?;
    let out = config::required_path(args.out, file.out, "out")?;
    let text = args.text.or(file.text);
    let k = args.k.or(file.k).unwrap_or(DEFAULT_TOP_K);
    if k == 0 {
        return Err(config::usage("--k must be >= 1"));
    }

    let control = LfiMatrix::load(&control_path)?;
    let anomaly = LfiMatrix::load(&anomaly_path)?;
    if control.checkpoint_id != anomaly.checkpoint_id {
        anyhow::bail!(
            "matrices come from different checkpoints ({} vs {}); both windows must be scored by one model",
            control.checkpoint_id,
            anomaly.checkpoint_id
        );
    }
    if control.method != anomaly.method {
        anyhow::bail!("matrices use different LFI methods ({} vs {})", control.method, anomaly.method);
    }
    let mut report = rank_features(&gfi(&control, "control"), &gfi(&anomaly, "anomaly"), k)?;
    report.meta.checkpoint_id = Some(control.checkpoint_id.clone());
    emit(&report, &out, text.as_ref())?;

    let mut manifest = RunManifest::new("rank", args.config.as_deref())
        .input("control_lfi", &control_path)
        .input("anomaly_lfi", &anomaly_path)
        .output("report", &out);
    if let Some(t) = &text {
        manifest = manifest.output("text", t);
    }
    manifest
        .parameters(serde_json::json!({ "k": k, "method": control.method.to_string() }))?
        .write(&with_suffix(&out, "manifest.json"))?;
    Ok(EXIT_OK)
}
