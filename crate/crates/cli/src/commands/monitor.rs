use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;

use driftscope_core::attribution::{AttributionEngine, LfiMethod};
use driftscope_core::feature_space::io::{parse_record, DATASET_HEADER};
use driftscope_core::model::{ReferenceModel, Scorer};
use driftscope_core::monitor::{Monitor, WindowConfig};

use crate::config::{self, create_parent, with_suffix, EXIT_OK};
use crate::manifest::RunManifest;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    model: PathBuf,
    /// Dataset lines to stream; `-` reads standard input.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// TOML holding window_size, step_size, lag, min_abs_shift, min_rel_shift.
    #[arg(long)]
    window_config: Option<PathBuf>,
    #[arg(long)]
    window_size: Option<usize>,
    #[arg(long)]
    step_size: Option<usize>,
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long)]
    min_abs_shift: Option<f64>,
    #[arg(long)]
    min_rel_shift: Option<f64>,
    #[arg(long, default_value = "pseudo-loss")]
    method: String,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Alert output as JSON lines; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A stream line that carries no example: blank, the file header, or the
/// dataset metadata record.
fn is_preamble(line: &str) -> bool {
    let t = line.trim();
    if t.is_empty() || t == DATASET_HEADER {
        return true;
    }
    matches!(
        serde_json::from_str::<serde_json::Value>(t),
        Ok(serde_json::Value::Object(o)) if o.contains_key("window") && !o.contains_key("example_id")
    )
}

pub fn run(args: Args) -> anyhow::Result<u8> {
    let mut window: WindowConfig = config::load(args.window_config.as_deref())?;
    window.window_size = args.window_size.unwrap_or(window.window_size);
    window.step_size = args.step_size.unwrap_or(window.step_size);
    window.lag = args.lag.unwrap_or(window.lag);
    window.min_abs_shift = args.min_abs_shift.unwrap_or(window.min_abs_shift);
    window.min_rel_shift = args.min_rel_shift.unwrap_or(window.min_rel_shift);
    let method: LfiMethod = args.method.parse()?;
    let parallelism = config::parallelism(args.parallelism, None)?;

    let model = ReferenceModel::load(&args.model)?;
    let mut monitor = Monitor::new(window.clone(), method, AttributionEngine::new(parallelism), &model)?;
    let reader: Box<dyn BufRead> = if args.input.as_os_str() == "-" {
        Box::new(BufReader::new(io::stdin().lock()))
    } else {
        Box::new(BufReader::new(File::open(&args.input)?))
    };
    let mut sink: Box<dyn Write> = match &args.out {
        Some(path) => {
            create_parent(path)?;
            Box::new(BufWriter::new(File::create(path)?))
        }
        None => Box::new(io::stdout().lock()),
    };

    let schema = model.schema().clone();
    let mut batch = Vec::with_capacity(window.step_size);
    let (mut malformed, mut alerts) = (0usize, 0usize);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if is_preamble(&line) {
            continue;
        }
        match parse_record(&line, &schema) {
            Ok(ex) => batch.push(ex),
            Err(e) => {
                malformed += 1;
                log::warn!("skipping line {}: {e}", i + 1);
                continue;
            }
        }
        if batch.len() == window.step_size {
            for alert in monitor.step(&model, std::mem::take(&mut batch))? {
                writeln!(sink, "{}", serde_json::to_string(&alert)?)?;
                alerts += 1;
            }
            sink.flush()?;
        }
    }
    sink.flush()?;
    eprintln!(
        "monitor: {} steps, {} alerts, {} malformed lines skipped, {} trailing examples unused",
        monitor.steps(),
        alerts,
        malformed,
        batch.len()
    );
    if let Some(out) = &args.out {
        RunManifest::new("monitor", args.window_config.as_deref())
            .input("model", &args.model)
            .input("input", &args.input)
            .output("alerts", out)
            .parameters(serde_json::json!({
                "window": window,
                "method": method.to_string(),
                "parallelism": parallelism,
                "steps": monitor.steps(),
                "alerts": alerts,
                "malformed": malformed,
            }))?
            .write(&with_suffix(out, "manifest.json"))?;
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::is_preamble;

    #[test]
    fn preamble_lines() {
        assert!(is_preamble(""));
        assert!(is_preamble("driftscope-dataset v1"));
        assert!(is_preamble(r#"{"label":"control","window":{"start":0,"end":1},"examples":3}"#));
        assert!(!is_preamble(r#"{"example_id":"a","window":1}"#));
        assert!(!is_preamble("garbage"));
    }
}
