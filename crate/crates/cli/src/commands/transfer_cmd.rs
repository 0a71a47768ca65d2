use crate::commands::{cap_samples, load_dataset_split, load_model};
use crate::config::RunConfig;
use crate::manifest::RunDir;
use crate::svg::heatmap;
use anyhow::{bail, Result};
use ares_core::attack::AttackMethod;
use ares_core::data::Split;
use ares_core::transfer::transfer_matrix;
use std::path::Path;

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let Some(section) = &config.transfer else {
        bail!("config has no [transfer] section");
    };
    let mut run = RunDir::create(out, "transfer", config.seed, config.resolved_text()?)?;
    let test = load_dataset_split(&mut run, &section.dataset_dir, Split::Test)?;
    let test = cap_samples(test, section.max_samples)?;
    let mut models = Vec::with_capacity(section.models.len());
    for path in &section.models {
        models.push(load_model(&mut run, path)?);
    }
    let method = AttackMethod::from_name(&section.method)?;
    let attack = section.params.build(method, config.seed)?;
    let matrix = transfer_matrix(&models, &test, &attack)?;

    // Short, readable labels: file stem plus digest prefix.
    let labels: Vec<String> = section
        .models
        .iter()
        .zip(&matrix.source_tags)
        .map(|(path, tag)| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
            format!("{stem} [{}]", &tag[..8])
        })
        .collect();

    let mut rows = Vec::new();
    for (s, row) in matrix.robust_accuracy.iter().enumerate() {
        for (t, &acc) in row.iter().enumerate() {
            rows.push(vec![labels[s].clone(), labels[t].clone(), format!("{acc}")]);
        }
    }
    run.write_artifact(
        "transfer.csv",
        &crate::commands::csv_bytes("source,target,robust_accuracy", &rows),
    )?;
    run.write_artifact(
        "transfer.svg",
        heatmap(
            "Transfer robust accuracy (rows: sources, cols: targets)",
            &labels,
            &labels,
            &matrix.robust_accuracy,
        )
        .as_bytes(),
    )?;
    run.write_artifact(
        "transfer.json",
        serde_json::to_string_pretty(&matrix)?.as_bytes(),
    )?;
    run.finish()
}
