pub mod attack_cmd;
pub mod corrupt_cmd;
pub mod curve_cmd;
pub mod freq_cmd;
pub mod gen_data;
pub mod mce_cmd;
pub mod report_cmd;
pub mod train_cmd;
pub mod transfer_cmd;

use anyhow::{bail, Context, Result};
use ares_core::corruption::{CorruptionKind, ALL_KINDS};
use ares_core::data::{load_split, LabeledDataset, Split};
use ares_core::model::{load_weights, ModelWeights};
use ares_core::tensor::Tensor;
use crate::manifest::RunDir;
use std::path::Path;

/// Loads one split from `<dir>/train.ares` or `<dir>/test.ares`, recording
/// the file digest in the manifest.
pub fn load_dataset_split(run: &mut RunDir, dir: &Path, split: Split) -> Result<LabeledDataset> {
    let name = match split {
        Split::Train => "train.ares",
        Split::Test => "test.ares",
    };
    let path = dir.join(name);
    run.record_input(&path)?;
    let (_, found_split, data) =
        load_split(&path).with_context(|| format!("loading dataset split {}", path.display()))?;
    if found_split != split {
        bail!("{} holds the wrong split", path.display());
    }
    Ok(data)
}

/// Loads model weights, recording the file digest in the manifest.
pub fn load_model(run: &mut RunDir, path: &Path) -> Result<ModelWeights> {
    run.record_input(path)?;
    load_weights(path).with_context(|| format!("loading model {}", path.display()))
}

/// Truncates a test set to the first `max_samples` rows (0 keeps all).
pub fn cap_samples(data: LabeledDataset, max_samples: usize) -> Result<LabeledDataset> {
    if max_samples == 0 || max_samples >= data.len() {
        return Ok(data);
    }
    let samples: Vec<Tensor> = (0..max_samples).map(|i| data.images.sample_tensor(i)).collect();
    Ok(LabeledDataset {
        images: Tensor::stack(&samples)?,
        labels: data.labels[..max_samples].to_vec(),
    })
}

/// Parses a corruption kind list; empty means all six kinds.
pub fn parse_kinds(names: &[String]) -> Result<Vec<CorruptionKind>> {
    if names.is_empty() {
        return Ok(ALL_KINDS.to_vec());
    }
    names
        .iter()
        .map(|n| CorruptionKind::from_name(n).map_err(Into::into))
        .collect()
}

/// Renders a CSV from a header and rows of display-formatted cells.
pub fn csv_bytes(header: &str, rows: &[Vec<String>]) -> Vec<u8> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text.into_bytes()
}
