use crate::commands::{cap_samples, load_dataset_split, load_model};
use crate::config::RunConfig;
use crate::manifest::RunDir;
use crate::svg::{line_chart, Series};
use anyhow::{bail, Result};
use ares_core::attack::AttackMethod;
use ares_core::curve::{build_curve, min_epsilon_records};
use ares_core::data::Split;
use ares_core::digest::attack_digest;
use serde_json::json;
use std::path::Path;

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let Some(section) = &config.curve else {
        bail!("config has no [curve] section");
    };
    if section.grid_points < 2 {
        bail!("[curve].grid_points must be >= 2");
    }
    let mut run = RunDir::create(out, "curve", config.seed, config.resolved_text()?)?;
    let test = load_dataset_split(&mut run, &section.dataset_dir, Split::Test)?;
    let test = cap_samples(test, section.max_samples)?;
    let weights = load_model(&mut run, &section.model)?;
    let layers = weights.to_layers();

    let method = AttackMethod::from_name(&section.method)?;
    let template = section.params.build(method, config.seed)?;
    let records = min_epsilon_records(
        &layers,
        &test.images,
        &test.labels,
        &template,
        section.eps_max,
        section.tol,
    )?;
    let grid: Vec<f64> = (0..section.grid_points)
        .map(|i| section.eps_max * i as f64 / (section.grid_points - 1) as f64)
        .collect();
    let curve = build_curve(&records, &grid, attack_digest(&template))?;

    let rows: Vec<Vec<String>> = curve
        .epsilon_grid
        .iter()
        .zip(&curve.accuracy)
        .map(|(e, a)| vec![format!("{e}"), format!("{a}")])
        .collect();
    run.write_artifact("curve.csv", &crate::commands::csv_bytes("epsilon,accuracy", &rows))?;

    let series = [Series {
        name: "accuracy",
        points: curve
            .epsilon_grid
            .iter()
            .zip(&curve.accuracy)
            .map(|(&e, &a)| (e, a))
            .collect(),
    }];
    run.write_artifact(
        "curve.svg",
        line_chart("Accuracy vs perturbation budget", "epsilon", "accuracy", &series).as_bytes(),
    )?;

    let detail = json!({
        "attack_digest": curve.attack_tag,
        "template": template,
        "eps_max": section.eps_max,
        "tol": section.tol,
        "records": records,
        "curve": curve,
    });
    run.write_artifact("records.json", serde_json::to_string_pretty(&detail)?.as_bytes())?;
    run.finish()
}
