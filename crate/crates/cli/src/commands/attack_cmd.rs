use crate::commands::{cap_samples, load_dataset_split, load_model};
use crate::config::RunConfig;
use crate::manifest::RunDir;
use anyhow::{bail, Result};
use ares_core::attack::{run_attack, AttackMethod};
use ares_core::curve::accuracy_parallel;
use ares_core::data::Split;
use ares_core::digest::{attack_digest, model_digest};
use serde_json::json;
use std::path::Path;

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let Some(section) = &config.attack else {
        bail!("config has no [attack] section");
    };
    if section.methods.is_empty() {
        bail!("[attack].methods must name at least one method");
    }
    let mut run = RunDir::create(out, "attack", config.seed, config.resolved_text()?)?;
    let test = load_dataset_split(&mut run, &section.dataset_dir, Split::Test)?;
    let test = cap_samples(test, section.max_samples)?;
    let weights = load_model(&mut run, &section.model)?;
    let layers = weights.to_layers();

    let clean_acc = accuracy_parallel(&layers, &test.images, &test.labels)?;
    let mut evaluations = Vec::new();
    for name in &section.methods {
        let method = AttackMethod::from_name(name)?;
        let spec = section.params.build(method, config.seed)?;
        let result = run_attack(&layers, &test.images, &test.labels, &spec)?;
        result.check_constraints(&test.images, &spec)?;
        evaluations.push(json!({
            "method": name,
            "attack_digest": attack_digest(&spec),
            "spec": spec,
            "robust_acc": result.robust_accuracy(),
            "success_rate": 1.0 - result.robust_accuracy(),
            "queries": result.queries,
            "success": result.success,
        }));
    }

    let report = json!({
        "model_digest": model_digest(&weights),
        "samples": test.len(),
        "clean_acc": clean_acc,
        "evaluations": evaluations,
    });
    run.write_artifact("attack-report.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
    run.finish()
}
