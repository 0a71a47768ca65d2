//! Normal and adversarial training: SGD with momentum and decoupled weight
//! decay, a PGD inner adversary at step size 2*eps/steps, Mixup, label
//! smoothing, a flip+shift augmenter, and an EMA weight shadow.

use crate::attack::{project, AttackMethod, AttackSpec, Norm};
use crate::curve::accuracy_parallel;
use crate::data::Dataset;
use crate::error::{AresError, Result};
use crate::layers::{backward, input_gradient, one_hot, Layer, LayerGrad};
use crate::model::{ModelWeights, TrainingTag};
use crate::rng::{self, tag};
use crate::tensor::{chw_index, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub label_smoothing: f64,
    /// Beta(alpha, alpha) Mixup; 0 disables.
    pub mixup_alpha: f64,
    /// EMA decay; `None` disables the shadow.
    pub ema_beta: Option<f64>,
    /// Flip+shift augmenter toggle.
    pub augment: bool,
    pub adversarial: bool,
    pub at_epsilon: f64,
    pub at_steps: usize,
    pub seed: u64,
    /// Per-epoch robust evaluation is capped to this many test samples.
    pub robust_eval_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            label_smoothing: 0.0,
            mixup_alpha: 0.0,
            ema_beta: None,
            augment: false,
            adversarial: false,
            at_epsilon: 4.0 / 255.0,
            at_steps: 3,
            seed: 0,
            robust_eval_cap: 128,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(AresError::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(AresError::InvalidArgument(
                "label_smoothing must be in [0,1)".into(),
            ));
        }
        if self.mixup_alpha < 0.0 || self.weight_decay < 0.0 {
            return Err(AresError::InvalidArgument(
                "mixup_alpha and weight_decay must be >= 0".into(),
            ));
        }
        if let Some(beta) = self.ema_beta {
            if !(0.0..1.0).contains(&beta) {
                return Err(AresError::InvalidArgument(
                    "ema_beta must be in [0,1)".into(),
                ));
            }
        }
        if self.adversarial && self.at_steps < 1 {
            return Err(AresError::InvalidArgument(
                "adversarial training needs at_steps >= 1".into(),
            ));
        }
        Ok(())
    }

    /// PGD step size for the inner adversary: 2 * eps / steps.
    pub fn at_step_size(&self) -> f64 {
        2.0 * self.at_epsilon / self.at_steps as f64
    }
}

/// EMA shadow of the live weights.
#[derive(Debug, Clone)]
pub struct EmaState {
    pub shadow: ModelWeights,
    pub beta: f64,
}

impl EmaState {
    pub fn new(initial: &ModelWeights, beta: f64) -> EmaState {
        let mut shadow = initial.clone();
        shadow.ema_applied = true;
        EmaState { shadow, beta }
    }
}

/// `shadow <- beta * shadow + (1 - beta) * live`, elementwise per tensor.
pub fn ema_update(state: &mut EmaState, live: &ModelWeights) -> Result<()> {
    if state.shadow.tensors.len() != live.tensors.len() {
        return Err(AresError::InvalidArgument(
            "EMA shadow and live weights have different tensor counts".into(),
        ));
    }
    let beta = state.beta;
    for ((_, shadow), (_, live)) in state.shadow.tensors.iter_mut().zip(&live.tensors) {
        if shadow.shape() != live.shape() {
            return Err(AresError::shape("ema_update", shadow.shape(), live.shape()));
        }
        for (s, &l) in shadow.data_mut().iter_mut().zip(live.data()) {
            *s = beta * *s + (1.0 - beta) * l;
        }
    }
    Ok(())
}

/// Same recurrence against a live layer stack, avoiding weight re-packing in
/// the inner loop.
fn ema_update_layers(state: &mut EmaState, layers: &[Layer]) {
    let beta = state.beta;
    let mut live_params: Vec<&Tensor> = Vec::new();
    for layer in layers {
        live_params.extend(layer.params());
    }
    for ((_, shadow), live) in state.shadow.tensors.iter_mut().zip(live_params) {
        for (s, &l) in shadow.data_mut().iter_mut().zip(live.data()) {
            *s = beta * *s + (1.0 - beta) * l;
        }
    }
}

/// Convex blend of two samples and their soft labels.
pub fn mixup(
    x_i: &Tensor,
    y_i: &Tensor,
    x_j: &Tensor,
    y_j: &Tensor,
    lambda: f64,
) -> Result<(Tensor, Tensor)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(AresError::InvalidArgument(format!(
            "mixup lambda must be in [0,1], got {lambda}"
        )));
    }
    let x = x_i.zip_map(x_j, |a, b| lambda * a + (1.0 - lambda) * b)?;
    let y = y_i.zip_map(y_j, |a, b| lambda * a + (1.0 - lambda) * b)?;
    Ok((x, y))
}

/// Soft label: `(1 - alpha) + alpha / K` on the true class, `alpha / K`
/// elsewhere.
pub fn smooth_labels(label: usize, class_count: usize, alpha: f64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(AresError::InvalidArgument(
            "label smoothing alpha must be in [0,1)".into(),
        ));
    }
    if label >= class_count {
        return Err(AresError::InvalidArgument(format!(
            "class index {label} out of range for {class_count} classes"
        )));
    }
    let off = alpha / class_count as f64;
    let mut data = vec![off; class_count];
    data[label] = 1.0 - alpha + off;
    Tensor::from_vec(&[class_count], data)
}

fn smooth_batch(labels: &[usize], class_count: usize, alpha: f64) -> Result<Tensor> {
    if alpha == 0.0 {
        return Ok(one_hot(labels, class_count));
    }
    let mut out = Tensor::zeros(&[labels.len(), class_count]);
    for (i, &label) in labels.iter().enumerate() {
        let row = smooth_labels(label, class_count, alpha)?;
        out.sample_mut(i).copy_from_slice(row.data());
    }
    Ok(out)
}

/// PGD inner adversary for a training batch: random start, L-inf, soft
/// targets. Verifies the ball and box constraints before returning.
pub fn adversarial_batch(
    layers: &[Layer],
    x: &Tensor,
    targets: &Tensor,
    epsilon: f64,
    steps: usize,
    seed: u64,
) -> Result<Tensor> {
    if epsilon == 0.0 {
        return Ok(x.clone());
    }
    let step_size = 2.0 * epsilon / steps as f64;
    let advs: Vec<Result<Tensor>> = (0..x.batch_len())
        .into_par_iter()
        .map(|i| {
            let x0 = x.sample_tensor(i);
            let target = targets.sample_tensor(i);
            let mut rng = rng::stream(seed, tag::TRAIN_ADV, i as u64);
            let start = Tensor::from_vec(
                x0.shape(),
                x0.data()
                    .iter()
                    .map(|&v| (v + rng.gen_range(-epsilon..=epsilon)).clamp(0.0, 1.0))
                    .collect(),
            )?;
            let mut xi = start;
            for _ in 0..steps {
                let (_, _, grad) = input_gradient(layers, &xi, &target)?;
                let moved = xi.zip_map(&grad, |v, g| v + step_size * g.signum())?;
                let delta = project(&moved.sub(&x0)?, Norm::Linf, epsilon);
                xi = x0.add(&delta)?.clip(0.0, 1.0);
            }
            Ok(xi)
        })
        .collect();
    let advs: Result<Vec<Tensor>> = advs.into_iter().collect();
    let adv = Tensor::stack(&advs?)?;
    for i in 0..x.batch_len() {
        let max_delta = adv
            .sample(i)
            .iter()
            .zip(x.sample(i))
            .map(|(a, o)| (a - o).abs())
            .fold(0.0f64, f64::max);
        if max_delta > epsilon + 1e-9 {
            return Err(AresError::InvalidArgument(format!(
                "adversarial batch violates the epsilon ball on sample {i}"
            )));
        }
    }
    Ok(adv)
}

/// `v <- m*v + (g + wd*w); w <- w - lr*v`, applied elementwise.
pub fn sgd_update(
    weight: &mut Tensor,
    grad: &Tensor,
    velocity: &mut Tensor,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) {
    for ((w, &g), v) in weight
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(velocity.data_mut())
    {
        *v = momentum * *v + (g + weight_decay * *w);
        *w -= lr * *v;
    }
}

/// Momentum-SGD over every parameter tensor of a layer stack.
pub struct SgdOptimizer {
    velocity: Vec<Vec<Tensor>>,
}

impl SgdOptimizer {
    pub fn new(layers: &[Layer]) -> SgdOptimizer {
        let velocity = layers
            .iter()
            .map(|l| l.params().iter().map(|p| Tensor::zeros(p.shape())).collect())
            .collect();
        SgdOptimizer { velocity }
    }

    pub fn step(
        &mut self,
        layers: &mut [Layer],
        grads: &LayerGrad,
        lr: f64,
        momentum: f64,
        weight_decay: f64,
    ) {
        for (li, layer) in layers.iter_mut().enumerate() {
            for (pi, param) in layer.params_mut().into_iter().enumerate() {
                sgd_update(
                    param,
                    &grads.param_grads[li][pi],
                    &mut self.velocity[li][pi],
                    lr,
                    momentum,
                    weight_decay,
                );
            }
        }
    }
}

/// Global gradient-norm cap. Healthy batch gradients at this scale have
/// total L2 norm well below 1; occasional blow-ups drive weights into a
/// permanently dead-ReLU state without the cap.
const GRAD_CLIP: f64 = 5.0;

fn clip_gradients(grads: &mut LayerGrad, max_norm: f64) {
    let total: f64 = grads
        .param_grads
        .iter()
        .flatten()
        .map(|g| g.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if total > max_norm {
        let scale = max_norm / total;
        for layer in grads.param_grads.iter_mut() {
            for g in layer.iter_mut() {
                for v in g.data_mut() {
                    *v *= scale;
                }
            }
        }
    }
}

/// Horizontal flip with probability 1/2 plus an integer shift in [-2, 2]^2
/// with replicated edges.
fn augment_sample(sample: &[f64], c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let flip = rng.gen_bool(0.5);
    let dy = rng.gen_range(-2i64..=2);
    let dx = rng.gen_range(-2i64..=2);
    let mut out = vec![0.0; sample.len()];
    for ci in 0..c {
        for y in 0..h {
            let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
            for x in 0..w {
                let mut sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                if flip {
                    sx = w - 1 - sx;
                }
                out[chw_index(h, w, ci, y, x)] = sample[chw_index(h, w, ci, sy, sx)];
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub clean_acc: f64,
    /// PGD-10 robust accuracy on a capped test subset; adversarial mode only.
    pub robust_acc: Option<f64>,
    pub clean_acc_ema: Option<f64>,
    pub robust_acc_ema: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: ModelWeights,
    pub ema: Option<ModelWeights>,
    pub history: Vec<EpochMetrics>,
}

/// Trains `initial` on the dataset. Deterministic per config seed; every
/// stochastic choice draws from a derived stream.
pub fn train(initial: &ModelWeights, data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let class_count = initial.spec.class_count;
    let mut layers = initial.to_layers();
    let mut optimizer = SgdOptimizer::new(&layers);
    let mut ema = config.ema_beta.map(|beta| EmaState::new(initial, beta));
    let mut history = Vec::with_capacity(config.epochs);
    let n = data.train.len();
    let (c, h, w) = data.spec.image_shape;
    let n_batches = n.div_ceil(config.batch_size);
    // Short linear warm-up (the constant-LR start collapsed some seeds into
    // the dead-ReLU plateau), then a single x0.1 drop at two thirds.
    let warmup_epochs = (config.epochs / 4).min(5);
    let lr_drop_epoch = (2 * config.epochs).div_ceil(3);

    let training_tag = if config.adversarial {
        TrainingTag::Adversarial
    } else {
        TrainingTag::Normal
    };

    for epoch in 0..config.epochs {
        let lr = if epoch < warmup_epochs {
            config.lr * (epoch + 1) as f64 / (warmup_epochs + 1) as f64
        } else if epoch >= lr_drop_epoch {
            config.lr * 0.1
        } else {
            config.lr
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(config.seed, tag::TRAIN_SHUFFLE, epoch as u64));

        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let step = (epoch * n_batches + batch_idx) as u64;
            // Assemble the batch, augmenting per sample in batch order.
            let mut batch = Tensor::zeros(&[chunk.len(), c, h, w]);
            let mut labels = Vec::with_capacity(chunk.len());
            let mut aug_rng = rng::stream(config.seed, tag::TRAIN_AUGMENT, step);
            for (bi, &si) in chunk.iter().enumerate() {
                let sample = data.train.images.sample(si);
                if config.augment {
                    let augmented = augment_sample(sample, c, h, w, &mut aug_rng);
                    batch.sample_mut(bi).copy_from_slice(&augmented);
                } else {
                    batch.sample_mut(bi).copy_from_slice(sample);
                }
                labels.push(data.train.labels[si]);
            }
            let mut targets = smooth_batch(&labels, class_count, config.label_smoothing)?;

            if config.mixup_alpha > 0.0 {
                let mut mix_rng = rng::stream(config.seed, tag::TRAIN_MIXUP, step);
                let beta = Beta::new(config.mixup_alpha, config.mixup_alpha)
                    .map_err(|e| AresError::InvalidArgument(format!("mixup beta: {e}")))?;
                let lambda: f64 = beta.sample(&mut mix_rng);
                let mut partner: Vec<usize> = (0..chunk.len()).collect();
                partner.shuffle(&mut mix_rng);
                let mut mixed_x = Vec::with_capacity(chunk.len());
                let mut mixed_y = Vec::with_capacity(chunk.len());
                for bi in 0..chunk.len() {
                    let (x, y) = mixup(
                        &batch.sample_tensor(bi),
                        &targets.sample_tensor(bi),
                        &batch.sample_tensor(partner[bi]),
                        &targets.sample_tensor(partner[bi]),
                        lambda,
                    )?;
                    mixed_x.push(x);
                    mixed_y.push(y);
                }
                batch = Tensor::stack(&mixed_x)?;
                targets = Tensor::stack(&mixed_y)?;
            }

            if config.adversarial {
                let adv_seed = rng::derive(config.seed, tag::TRAIN_ADV, step);
                batch = adversarial_batch(
                    &layers,
                    &batch,
                    &targets,
                    config.at_epsilon,
                    config.at_steps,
                    adv_seed,
                )?;
            }

            let (loss, mut grads) = backward(&layers, &batch, &targets)?;
            if !loss.is_finite() {
                return Err(AresError::Diverged(epoch));
            }
            loss_sum += loss;
            clip_gradients(&mut grads, GRAD_CLIP);
            optimizer.step(&mut layers, &grads, lr, config.momentum, config.weight_decay);
            if let Some(state) = ema.as_mut() {
                ema_update_layers(state, &layers);
            }
        }

        history.push(epoch_metrics(
            epoch,
            loss_sum / n_batches as f64,
            &layers,
            ema.as_ref(),
            data,
            config,
        )?);
    }

    let weights = ModelWeights::from_layers(initial.spec, &layers, training_tag, false)?;
    let ema_weights = match ema {
        Some(state) => {
            let mut shadow = state.shadow;
            shadow.training_tag = training_tag;
            shadow.ema_applied = true;
            Some(shadow)
        }
        None => None,
    };
    Ok(TrainOutcome {
        weights,
        ema: ema_weights,
        history,
    })
}

fn epoch_metrics(
    epoch: usize,
    train_loss: f64,
    layers: &[Layer],
    ema: Option<&EmaState>,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<EpochMetrics> {
    let clean_acc = accuracy_parallel(layers, &data.test.images, &data.test.labels)?;
    let ema_layers = ema.map(|state| state.shadow.to_layers());
    let clean_acc_ema = match &ema_layers {
        Some(l) => Some(accuracy_parallel(l, &data.test.images, &data.test.labels)?),
        None => None,
    };
    let (robust_acc, robust_acc_ema) = if config.adversarial {
        let cap = config.robust_eval_cap.min(data.test.len()).max(1);
        let subset = Tensor::stack(
            &(0..cap).map(|i| data.test.images.sample_tensor(i)).collect::<Vec<_>>(),
        )?;
        let labels = &data.test.labels[..cap];
        // Convergence tracking via PGD-10 at the training epsilon.
        let mut spec = AttackSpec::new(AttackMethod::Pgd, Norm::Linf, config.at_epsilon, 0);
        spec.steps = 10;
        spec.step_size = 1.0 / 255.0;
        spec.seed = rng::derive(config.seed, 0x50, epoch as u64);
        let live = crate::attack::run_attack(layers, &subset, labels, &spec)?;
        let ema_acc = match &ema_layers {
            Some(l) => Some(crate::attack::run_attack(l, &subset, labels, &spec)?.robust_accuracy()),
            None => None,
        };
        (Some(live.robust_accuracy()), ema_acc)
    } else {
        (None, None)
    };
    Ok(EpochMetrics {
        epoch,
        train_loss,
        clean_acc,
        robust_acc,
        clean_acc_ema,
        robust_acc_ema,
    })
}
