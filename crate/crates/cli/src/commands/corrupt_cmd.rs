use crate::commands::{load_dataset_split, load_model, parse_kinds};
use crate::config::RunConfig;
use crate::manifest::RunDir;
use crate::svg::{line_chart, Series};
use anyhow::{bail, Result};
use ares_core::curve::severity_curve;
use ares_core::data::Split;
use serde_json::json;
use std::path::Path;

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let Some(section) = &config.corrupt else {
        bail!("config has no [corrupt] section");
    };
    let mut run = RunDir::create(out, "corrupt", config.seed, config.resolved_text()?)?;
    let test = load_dataset_split(&mut run, &section.dataset_dir, Split::Test)?;
    let weights = load_model(&mut run, &section.model)?;
    let layers = weights.to_layers();
    let kinds = parse_kinds(&section.kinds)?;

    // Pooled curve over the requested kinds plus one curve per kind.
    let pooled = severity_curve(&layers, &test, &kinds, config.seed)?;
    let mut per_kind = Vec::new();
    for &kind in &kinds {
        let curve = severity_curve(&layers, &test, &[kind], config.seed)?;
        per_kind.push((kind, curve));
    }

    let rows: Vec<Vec<String>> = pooled
        .iter()
        .enumerate()
        .map(|(s, a)| vec![s.to_string(), format!("{a}")])
        .collect();
    run.write_artifact("severity.csv", &crate::commands::csv_bytes("severity,accuracy", &rows))?;

    let mut series = vec![Series {
        name: "mean",
        points: pooled.iter().enumerate().map(|(s, &a)| (s as f64, a)).collect(),
    }];
    for (kind, curve) in &per_kind {
        series.push(Series {
            name: kind.name(),
            points: curve.iter().enumerate().map(|(s, &a)| (s as f64, a)).collect(),
        });
    }
    run.write_artifact(
        "severity.svg",
        line_chart("Accuracy vs corruption severity", "severity", "accuracy", &series).as_bytes(),
    )?;

    let detail = json!({
        "model_digest": ares_core::digest::model_digest(&weights),
        "corruption_seed": config.seed,
        "mean_curve": pooled,
        "per_kind": per_kind
            .iter()
            .map(|(k, c)| json!({"kind": k.name(), "curve": c}))
            .collect::<Vec<_>>(),
    });
    run.write_artifact("severity.json", serde_json::to_string_pretty(&detail)?.as_bytes())?;
    run.finish()
}
