use std::path::PathBuf;

use driftscope_core::bench::{
    emit_benchmark_report, recall_metrics, standard_cases, BenchConfig, BenchHarness, CaseFailure, CorruptionSpec,
};
use serde::Deserialize;

use crate::config::{self, usage, EXIT_OK, EXIT_PROPERTY};
use crate::manifest::RunManifest;

#[derive(clap::Args)]
pub struct Args {
    /// TOML with a `[bench]` table and optional `[[cases]]` list.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Case ids to run, e.g. `1,2,6-8`; default all.
    #[arg(long)]
    cases: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    bench: BenchConfig,
    cases: Option<Vec<CorruptionSpec>>,
    select: Option<String>,
    out_dir: Option<PathBuf>,
}

fn parse_selection(s: &str) -> anyhow::Result<Vec<u8>> {
    let bad = || usage(format!("bad case selection `{s}`"));
    let mut ids = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u8, u8) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                ids.extend(a..=b);
            }
            None => ids.push(part.parse().map_err(|_| bad())?),
        }
    }
    if ids.is_empty() {
        return Err(bad());
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

pub fn run(args: Args) -> anyhow::Result<u8> {
    let file: FileConfig = config::load(args.config.as_deref())?;
    let out_dir = config::required_path(args.out_dir, file.out_dir, "out-dir")?;
    let mut bench = file.bench;
    if let Some(p) = args.parallelism {
        bench.parallelism = p;
    } else if bench.parallelism == 0 {
        bench.parallelism = config::parallelism(None, None)?;
    }
    let all = file.cases.unwrap_or_else(standard_cases);
    let cases: Vec<CorruptionSpec> = match args.cases.or(file.select) {
        Some(sel) => {
            let ids = parse_selection(&sel)?;
            if let Some(missing) = ids.iter().find(|id| !all.iter().any(|c| c.case_id == **id)) {
                return Err(usage(format!("no case with id {missing}")));
            }
            all.into_iter().filter(|c| ids.contains(&c.case_id)).collect()
        }
        None => all,
    };

    let harness = BenchHarness::new(bench.clone())?;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for spec in &cases {
        log::info!("running case {}", spec.case_id);
        match harness.run_case(spec) {
            Ok(r) => results.push(r),
            Err(e) => {
                eprintln!("case {} failed: {e}", spec.case_id);
                failures.push(CaseFailure {
                    case_id: spec.case_id,
                    error: e.to_string(),
                });
            }
        }
    }
    let metrics = recall_metrics(&results).ok();
    let report = emit_benchmark_report(bench.k, bench.sample_size, &results, &failures, metrics.as_ref());

    std::fs::create_dir_all(&out_dir)?;
    let json_out = out_dir.join("bench.json");
    let text_out = out_dir.join("bench.txt");
    std::fs::write(&json_out, report.to_json()?)?;
    let text = report.to_text();
    std::fs::write(&text_out, &text)?;
    RunManifest::new("bench", args.config.as_deref())
        .seed("data", bench.data_seed)
        .seed("sample", bench.sample_seed)
        .seed("model_weights", bench.model.weight_seed)
        .seed("schema", bench.schema.seed)
        .output("report", &json_out)
        .output("text", &text_out)
        .parameters(serde_json::json!({
            "bench": bench,
            "cases": cases,
        }))?
        .write(&out_dir.join("manifest.json"))?;
    print!("{text}");

    let ordering = metrics.as_ref().is_some_and(|m| m.ordering_holds());
    if !failures.is_empty() {
        eprintln!("{} case(s) failed", failures.len());
        return Ok(EXIT_PROPERTY);
    }
    if !ordering {
        eprintln!("ordering property failed: GFI recall is below MFC recall");
        return Ok(EXIT_PROPERTY);
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::parse_selection;

    #[test]
    fn selections() {
        assert_eq!(parse_selection("1").unwrap(), vec![1]);
        assert_eq!(parse_selection("3, 1-2,2").unwrap(), vec![1, 2, 3]);
        assert!(parse_selection("5-2").is_err());
        assert!(parse_selection("x").is_err());
        assert!(parse_selection("").is_err());
    }
}
