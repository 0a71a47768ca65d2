//! Cross-model black-box transferability matrices: adversarial examples are
//! crafted once against each source model and evaluated on every target.

use crate::attack::{run_attack, AttackMethod, AttackSpec};
use crate::curve::accuracy_parallel;
use crate::data::LabeledDataset;
use crate::digest::{attack_digest, model_digest};
use crate::error::{AresError, Result};
use crate::model::ModelWeights;
use serde::{Deserialize, Serialize};

/// Robust accuracy of each target on each source's adversarial examples.
/// Rows are sources, columns are targets; the diagonal is the white-box
/// robust accuracy under the same attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub source_tags: Vec<String>,
    pub target_tags: Vec<String>,
    pub robust_accuracy: Vec<Vec<f64>>,
    pub attack_tag: String,
}

impl TransferMatrix {
    pub fn entry(&self, source: usize, target: usize) -> f64 {
        self.robust_accuracy[source][target]
    }
}

/// Builds the matrix over one panel of models. The attack must be a
/// transfer-style method (the momentum family) or PGD for diagonal sanity
/// checks.
pub fn transfer_matrix(
    models: &[ModelWeights],
    dataset: &LabeledDataset,
    attack: &AttackSpec,
) -> Result<TransferMatrix> {
    if models.is_empty() {
        return Err(AresError::EmptyInput("transfer_matrix models"));
    }
    if models.len() < 2 {
        return Err(AresError::InvalidArgument(
            "transfer matrix needs at least 2 models".into(),
        ));
    }
    if attack.method == AttackMethod::Fgsm {
        return Err(AresError::InvalidArgument(
            "transfer matrix expects an iterative attack (momentum family or PGD)".into(),
        ));
    }
    let tags: Vec<String> = models.iter().map(model_digest).collect();
    let layer_stacks: Vec<_> = models.iter().map(|m| m.to_layers()).collect();
    let mut matrix = Vec::with_capacity(models.len());
    for source_layers in &layer_stacks {
        let crafted = run_attack(source_layers, &dataset.images, &dataset.labels, attack)?;
        crafted.check_constraints(&dataset.images, attack)?;
        let mut row = Vec::with_capacity(models.len());
        for target_layers in &layer_stacks {
            row.push(accuracy_parallel(
                target_layers,
                &crafted.adversarial,
                &dataset.labels,
            )?);
        }
        matrix.push(row);
    }
    Ok(TransferMatrix {
        source_tags: tags.clone(),
        target_tags: tags,
        robust_accuracy: matrix,
        attack_tag: attack_digest(attack),
    })
}
