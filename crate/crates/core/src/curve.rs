//! Robustness curves (accuracy vs perturbation budget), corruption severity
//! curves, and CE / mCE aggregation.

use crate::attack::{run_attack, AttackSpec};
use crate::corruption::{corrupt_batch, CorruptionKind, CorruptionSpec};
use crate::data::LabeledDataset;
use crate::error::{AresError, Result};
use crate::layers::Layer;
use crate::model::{predict_with_layers, ModelWeights};
use crate::tensor::Tensor;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Smallest fooling budget for one sample, or `NotFooled` when the attack
/// never succeeds up to the search maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MinEps {
    Value(f64),
    NotFooled,
}

impl MinEps {
    /// True when the budget exceeds the given epsilon (`NotFooled` exceeds
    /// every grid point).
    pub fn exceeds(&self, epsilon: f64) -> bool {
        match self {
            MinEps::Value(v) => *v > epsilon,
            MinEps::NotFooled => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinEpsRecord {
    pub sample_index: usize,
    pub min_epsilon: MinEps,
    pub clean_correct: bool,
}

/// Accuracy as a function of the perturbation budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCurve {
    pub epsilon_grid: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub attack_tag: String,
}

/// Corruption-error report: the model's raw CE per kind plus baseline-
/// normalized mCE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeReport {
    pub per_corruption_ce: BTreeMap<String, f64>,
    pub baseline_ce: BTreeMap<String, f64>,
    pub mce: f64,
    pub baseline_tag: String,
}

/// Default bisection tolerance: half a pixel level.
pub const DEFAULT_TOL: f64 = 1.0 / 510.0;
/// Default search ceiling, covering the widest plotted budgets.
pub const DEFAULT_EPS_MAX: f64 = 32.0 / 255.0;

/// Runs the attack template at a probe epsilon. The template's step size is
/// scaled proportionally with epsilon, random start is disabled and the seed
/// is pinned so that success(eps) is as monotone as the attack allows.
fn probe_success(
    layers: &[Layer],
    x: &Tensor,
    label: usize,
    template: &AttackSpec,
    epsilon: f64,
) -> Result<bool> {
    let mut spec = *template;
    spec.random_start = false;
    spec.epsilon = epsilon;
    spec.step_size = if template.epsilon > 0.0 {
        template.step_size / template.epsilon * epsilon
    } else {
        2.0 * epsilon / template.steps as f64
    };
    let result = run_attack(layers, x, &[label], &spec)?;
    Ok(result.success[0])
}

/// Bisection for the smallest fooling budget of a single sample, treating
/// attack success as monotone in epsilon.
pub fn min_epsilon_search(
    layers: &[Layer],
    x: &Tensor,
    label: usize,
    attack_template: &AttackSpec,
    eps_max: f64,
    tol: f64,
    sample_index: usize,
) -> Result<MinEpsRecord> {
    if tol <= 0.0 || eps_max <= 0.0 {
        return Err(AresError::InvalidArgument(
            "tol and eps_max must be > 0".into(),
        ));
    }
    let clean_pred = predict_with_layers(layers, x)?[0];
    if clean_pred != label {
        return Ok(MinEpsRecord {
            sample_index,
            min_epsilon: MinEps::Value(0.0),
            clean_correct: false,
        });
    }
    if !probe_success(layers, x, label, attack_template, eps_max)? {
        return Ok(MinEpsRecord {
            sample_index,
            min_epsilon: MinEps::NotFooled,
            clean_correct: true,
        });
    }
    let mut lo = 0.0;
    let mut hi = eps_max;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if probe_success(layers, x, label, attack_template, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(MinEpsRecord {
        sample_index,
        min_epsilon: MinEps::Value(hi),
        clean_correct: true,
    })
}

/// Per-sample searches over a batch, parallel and order-independent.
pub fn min_epsilon_records(
    layers: &[Layer],
    batch: &Tensor,
    labels: &[usize],
    attack_template: &AttackSpec,
    eps_max: f64,
    tol: f64,
) -> Result<Vec<MinEpsRecord>> {
    (0..batch.batch_len())
        .into_par_iter()
        .map(|i| {
            min_epsilon_search(
                layers,
                &batch.sample_tensor(i),
                labels[i],
                attack_template,
                eps_max,
                tol,
                i,
            )
        })
        .collect()
}

/// Builds the accuracy-vs-budget curve: accuracy(eps) is the fraction of
/// records whose minimum fooling budget exceeds eps.
pub fn build_curve(
    records: &[MinEpsRecord],
    epsilon_grid: &[f64],
    attack_tag: String,
) -> Result<RobustnessCurve> {
    if records.is_empty() {
        return Err(AresError::EmptyInput("build_curve records"));
    }
    if epsilon_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AresError::InvalidArgument(
            "epsilon grid must be strictly ascending".into(),
        ));
    }
    let n = records.len() as f64;
    let accuracy: Vec<f64> = epsilon_grid
        .iter()
        .map(|&eps| records.iter().filter(|r| r.min_epsilon.exceeds(eps)).count() as f64 / n)
        .collect();
    assert!(
        accuracy.windows(2).all(|w| w[1] <= w[0]),
        "robustness curve must be non-increasing"
    );
    Ok(RobustnessCurve {
        epsilon_grid: epsilon_grid.to_vec(),
        accuracy,
        attack_tag,
    })
}

/// Number of correctly classified samples, evaluated sample-parallel.
pub fn correct_count(layers: &[Layer], images: &Tensor, labels: &[usize]) -> Result<usize> {
    let hits: Vec<Result<bool>> = (0..images.batch_len())
        .into_par_iter()
        .map(|i| {
            let pred = predict_with_layers(layers, &images.sample_tensor(i))?[0];
            Ok(pred == labels[i])
        })
        .collect();
    let mut correct = 0usize;
    for h in hits {
        if h? {
            correct += 1;
        }
    }
    Ok(correct)
}

/// Accuracy of a layer stack, evaluated sample-parallel.
pub fn accuracy_parallel(layers: &[Layer], images: &Tensor, labels: &[usize]) -> Result<f64> {
    Ok(correct_count(layers, images, labels)? as f64 / labels.len() as f64)
}

/// Accuracy per severity 0..=5; severity 0 is the clean accuracy, severity
/// s >= 1 averages over the given corruption kinds.
pub fn severity_curve(
    layers: &[Layer],
    test_set: &LabeledDataset,
    kinds: &[CorruptionKind],
    corruption_seed: u64,
) -> Result<Vec<f64>> {
    if kinds.is_empty() {
        return Err(AresError::EmptyInput("severity_curve kinds"));
    }
    let mut curve = Vec::with_capacity(6);
    curve.push(accuracy_parallel(layers, &test_set.images, &test_set.labels)?);
    for severity in 1..=5u8 {
        let mut acc_sum = 0.0;
        for &kind in kinds {
            let spec = CorruptionSpec::new(kind, severity, corruption_seed)?;
            let corrupted = corrupt_batch(&test_set.images, &spec)?;
            acc_sum += accuracy_parallel(layers, &corrupted, &test_set.labels)?;
        }
        curve.push(acc_sum / kinds.len() as f64);
    }
    Ok(curve)
}

/// CE formula: total misclassifications pooled over severities, divided by
/// N * K.
pub fn ce_from_error_counts(errors_per_severity: &[usize], n: usize) -> Result<f64> {
    if n == 0 || errors_per_severity.is_empty() {
        return Err(AresError::EmptyInput("ce_from_error_counts"));
    }
    let total: usize = errors_per_severity.iter().sum();
    Ok(total as f64 / (n * errors_per_severity.len()) as f64)
}

/// Corruption error: misclassification rate pooled over all five severities.
pub fn corruption_error(
    layers: &[Layer],
    test_set: &LabeledDataset,
    kind: CorruptionKind,
    corruption_seed: u64,
) -> Result<f64> {
    let n = test_set.len();
    if n == 0 {
        return Err(AresError::EmptyInput("corruption_error test set"));
    }
    let mut errors = Vec::with_capacity(5);
    for severity in 1..=5u8 {
        let spec = CorruptionSpec::new(kind, severity, corruption_seed)?;
        let corrupted = corrupt_batch(&test_set.images, &spec)?;
        errors.push(n - correct_count(layers, &corrupted, &test_set.labels)?);
    }
    ce_from_error_counts(&errors, n)
}

/// mCE aggregation from per-kind CE values; errors when the baseline has a
/// zero CE for some kind.
pub fn mce_from_components(
    model_ce: &BTreeMap<String, f64>,
    baseline_ce: &BTreeMap<String, f64>,
) -> Result<f64> {
    if model_ce.is_empty() {
        return Err(AresError::EmptyInput("mce components"));
    }
    let mut sum = 0.0;
    for (kind, &ce) in model_ce {
        let base = *baseline_ce
            .get(kind)
            .ok_or_else(|| AresError::InvalidArgument(format!("baseline CE missing for {kind}")))?;
        if base == 0.0 {
            return Err(AresError::ZeroBaselineCe(kind.clone()));
        }
        sum += ce / base;
    }
    Ok(sum / model_ce.len() as f64)
}

/// Mean corruption error of `model` normalized by `baseline` over the given
/// kinds.
pub fn mean_corruption_error(
    model: &ModelWeights,
    test_set: &LabeledDataset,
    baseline: &ModelWeights,
    kinds: &[CorruptionKind],
    corruption_seed: u64,
) -> Result<CeReport> {
    if kinds.is_empty() {
        return Err(AresError::EmptyInput("mean_corruption_error kinds"));
    }
    let model_layers = model.to_layers();
    let baseline_layers = baseline.to_layers();
    let mut per_corruption_ce = BTreeMap::new();
    let mut baseline_ce = BTreeMap::new();
    for &kind in kinds {
        let ce = corruption_error(&model_layers, test_set, kind, corruption_seed)?;
        let base = corruption_error(&baseline_layers, test_set, kind, corruption_seed)?;
        per_corruption_ce.insert(kind.name().to_string(), ce);
        baseline_ce.insert(kind.name().to_string(), base);
    }
    let mce = mce_from_components(&per_corruption_ce, &baseline_ce)?;
    Ok(CeReport {
        per_corruption_ce,
        baseline_ce,
        mce,
        baseline_tag: crate::digest::model_digest(baseline),
    })
}
