use crate::commands::{load_dataset_split, load_model, parse_kinds};
use crate::config::RunConfig;
use crate::manifest::RunDir;
use anyhow::{bail, Result};
use ares_core::curve::mean_corruption_error;
use ares_core::data::Split;
use serde_json::json;
use std::path::Path;

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let Some(section) = &config.mce else {
        bail!("config has no [mce] section");
    };
    let mut run = RunDir::create(out, "mce", config.seed, config.resolved_text()?)?;
    let test = load_dataset_split(&mut run, &section.dataset_dir, Split::Test)?;
    let model = load_model(&mut run, &section.model)?;
    let baseline = load_model(&mut run, &section.baseline)?;
    let kinds = parse_kinds(&section.kinds)?;

    let report = mean_corruption_error(&model, &test, &baseline, &kinds, config.seed)?;
    let payload = json!({
        "model_digest": ares_core::digest::model_digest(&model),
        "report": report,
    });
    run.write_artifact("mce.json", serde_json::to_string_pretty(&payload)?.as_bytes())?;
    run.finish()
}
