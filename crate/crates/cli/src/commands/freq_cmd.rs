use crate::commands::{cap_samples, load_dataset_split, load_model};
use crate::config::RunConfig;
use crate::manifest::RunDir;
use crate::svg::{line_chart, Series};
use anyhow::{bail, Result};
use ares_core::data::Split;
use ares_core::freq::{frequency_bias, full_grid};
use serde_json::json;
use std::path::Path;

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let Some(section) = &config.freq else {
        bail!("config has no [freq] section");
    };
    let mut run = RunDir::create(out, "freq", config.seed, config.resolved_text()?)?;
    let test = load_dataset_split(&mut run, &section.dataset_dir, Split::Test)?;
    let test = cap_samples(test, section.max_samples)?;
    let weights = load_model(&mut run, &section.model)?;
    let layers = weights.to_layers();

    let (h, w) = (test.images.shape()[2], test.images.shape()[3]);
    let grid = full_grid(h, w);
    let report = frequency_bias(&layers, &test, &grid)?;

    let rows: Vec<Vec<String>> = report
        .bandwidth_grid
        .iter()
        .zip(&report.acc_lpb)
        .map(|(b, a)| vec![b.to_string(), format!("{a}")])
        .collect();
    run.write_artifact(
        "acc_lpb.csv",
        &crate::commands::csv_bytes("bandwidth,normalized_accuracy", &rows),
    )?;

    let series = [Series {
        name: "ACC-LPB",
        points: report
            .bandwidth_grid
            .iter()
            .zip(&report.acc_lpb)
            .map(|(&b, &a)| (b as f64, a))
            .collect(),
    }];
    run.write_artifact(
        "acc_lpb.svg",
        line_chart(
            "Normalized accuracy vs low-pass bandwidth",
            "bandwidth",
            "normalized accuracy",
            &series,
        )
        .as_bytes(),
    )?;

    let payload = json!({
        "model_digest": ares_core::digest::model_digest(&weights),
        "report": report,
    });
    run.write_artifact("freq.json", serde_json::to_string_pretty(&payload)?.as_bytes())?;
    run.finish()
}
