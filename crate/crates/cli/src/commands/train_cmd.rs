use crate::commands::load_dataset_split;
use crate::config::{parse_family, RunConfig};
use crate::manifest::RunDir;
use anyhow::{bail, Result};
use ares_core::data::{Dataset, DatasetSpec, Split};
use ares_core::model::{build_model, write_weights, ModelSpec};
use ares_core::train::{train, TrainConfig};
use serde_json::json;
use std::path::Path;

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let Some(section) = &config.train else {
        bail!("config has no [train] section");
    };
    let Some(model_section) = &config.model else {
        bail!("config has no [model] section");
    };
    let mut run = RunDir::create(out, "train", config.seed, config.resolved_text()?)?;

    let train_set = load_dataset_split(&mut run, &section.dataset_dir, Split::Train)?;
    let test_set = load_dataset_split(&mut run, &section.dataset_dir, Split::Test)?;
    let (c, h, w) = (
        train_set.images.shape()[1],
        train_set.images.shape()[2],
        train_set.images.shape()[3],
    );
    let class_count = train_set.labels.iter().copied().max().unwrap_or(0) + 1;
    let data = Dataset {
        spec: DatasetSpec {
            class_count,
            image_shape: (c, h, w),
            train_size: train_set.len(),
            test_size: test_set.len(),
            seed: 0,
        },
        train: train_set,
        test: test_set,
    };

    let family = parse_family(&model_section.family)?;
    let model_spec = ModelSpec {
        family,
        input_shape: (c, h, w),
        class_count,
        width: model_section.width,
        seed: model_section.seed,
    };
    let initial = build_model(&model_spec)?;

    let train_config = TrainConfig {
        epochs: section.epochs,
        batch_size: section.batch_size,
        lr: section.lr,
        momentum: section.momentum,
        weight_decay: section.weight_decay,
        label_smoothing: section.label_smoothing,
        mixup_alpha: section.mixup_alpha,
        ema_beta: section.ema_beta,
        augment: section.augment,
        adversarial: section.adversarial,
        at_epsilon: section.at_epsilon,
        at_steps: section.at_steps,
        seed: config.seed,
        robust_eval_cap: section.robust_eval_cap,
    };
    let outcome = train(&initial, &data, &train_config)?;

    let mut bytes = Vec::new();
    write_weights(&outcome.weights, &mut bytes)?;
    run.write_artifact("model.ares", &bytes)?;
    if let Some(ema) = &outcome.ema {
        let mut bytes = Vec::new();
        write_weights(ema, &mut bytes)?;
        run.write_artifact("model-ema.ares", &bytes)?;
    }

    // Canonical history CSV: epoch,loss,clean_acc,robust_acc (robust empty
    // outside adversarial mode). EMA metrics go into summary.json.
    let rows: Vec<Vec<String>> = outcome
        .history
        .iter()
        .map(|m| {
            vec![
                m.epoch.to_string(),
                format!("{}", m.train_loss),
                format!("{}", m.clean_acc),
                m.robust_acc.map(|v| format!("{v}")).unwrap_or_default(),
            ]
        })
        .collect();
    run.write_artifact(
        "history.csv",
        &crate::commands::csv_bytes("epoch,loss,clean_acc,robust_acc", &rows),
    )?;

    let last = outcome.history.last();
    let summary = json!({
        "model_digest": ares_core::digest::model_digest(&outcome.weights),
        "ema_digest": outcome.ema.as_ref().map(ares_core::digest::model_digest),
        "param_count": outcome.weights.param_count(),
        "final_clean_acc": last.map(|m| m.clean_acc),
        "final_robust_acc": last.and_then(|m| m.robust_acc),
        "final_clean_acc_ema": last.and_then(|m| m.clean_acc_ema),
        "final_robust_acc_ema": last.and_then(|m| m.robust_acc_ema),
        "history": outcome.history,
    });
    run.write_artifact("summary.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    run.finish()
}
