//! Gradient-based attacks under L-inf and L2 threat models.
//!
//! Seven methods: FGSM, PGD, and the momentum family MIM / DIM / TIM /
//! SI-NI-FGSM / VMI-FGSM. Defaults follow the benchmark parameterization:
//! white-box epsilon 4/255 (L-inf) or 0.5 (L2), black-box epsilon 8/255,
//! PGD at 100 steps with step 1/255 and a random start, the momentum
//! family at 20 steps with decay 1.0.
//!
//! Samples are attacked independently; per-sample randomness comes from
//! streams keyed by (spec.seed, sample index), so batches may be processed
//! in parallel without changing any bit of the result.

use crate::error::{AresError, Result};
use crate::layers::{forward_pass, input_gradient, loss_xent, one_hot, validate_chain, Layer};
use crate::model::argmax;
use crate::rng::{self, tag};
use crate::tensor::{chw_index, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackMethod {
    Fgsm,
    Pgd,
    Mim,
    Dim,
    Tim,
    SiNiFgsm,
    VmiFgsm,
}

pub const ALL_METHODS: [AttackMethod; 7] = [
    AttackMethod::Fgsm,
    AttackMethod::Pgd,
    AttackMethod::Mim,
    AttackMethod::Dim,
    AttackMethod::Tim,
    AttackMethod::SiNiFgsm,
    AttackMethod::VmiFgsm,
];

impl AttackMethod {
    pub fn name(&self) -> &'static str {
        match self {
            AttackMethod::Fgsm => "fgsm",
            AttackMethod::Pgd => "pgd",
            AttackMethod::Mim => "mim",
            AttackMethod::Dim => "dim",
            AttackMethod::Tim => "tim",
            AttackMethod::SiNiFgsm => "sinifgsm",
            AttackMethod::VmiFgsm => "vmifgsm",
        }
    }

    pub fn from_name(name: &str) -> Result<AttackMethod> {
        ALL_METHODS
            .iter()
            .find(|m| m.name() == name)
            .copied()
            .ok_or_else(|| AresError::InvalidArgument(format!("unknown attack method '{name}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    Linf,
    L2,
}

impl Norm {
    pub fn name(&self) -> &'static str {
        match self {
            Norm::Linf => "linf",
            Norm::L2 => "l2",
        }
    }

    pub fn from_name(name: &str) -> Result<Norm> {
        match name {
            "linf" => Ok(Norm::Linf),
            "l2" => Ok(Norm::L2),
            _ => Err(AresError::InvalidArgument(format!("unknown norm '{name}'"))),
        }
    }
}

/// Full parameterization of one attack run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub method: AttackMethod,
    pub norm: Norm,
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    pub random_start: bool,
    /// Momentum decay for the momentum family.
    pub decay_mu: f64,
    /// DIM transform probability.
    pub diversity_prob: f64,
    /// TIM kernel size (odd) and sigma.
    pub kernel_size: usize,
    pub kernel_sigma: f64,
    /// SI-NI scale copy count m.
    pub scale_copies: usize,
    /// VMI neighborhood factor beta and sample count n.
    pub beta: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl AttackSpec {
    /// Method defaults at the given norm and epsilon.
    pub fn new(method: AttackMethod, norm: Norm, epsilon: f64, seed: u64) -> AttackSpec {
        let (steps, step_size, random_start) = match (method, norm) {
            (AttackMethod::Fgsm, _) => (1, epsilon, false),
            (AttackMethod::Pgd, Norm::Linf) => (100, 1.0 / 255.0, true),
            (AttackMethod::Pgd, Norm::L2) => (100, 1.0, true),
            // Per-step size eps/steps reaches the ball boundary in exactly
            // `steps` sign-steps.
            _ => (20, epsilon / 20.0, false),
        };
        AttackSpec {
            method,
            norm,
            epsilon,
            steps,
            step_size,
            random_start,
            decay_mu: 1.0,
            diversity_prob: 0.7,
            kernel_size: 15,
            kernel_sigma: 3.0,
            scale_copies: 5,
            beta: 1.5,
            sample_count: 10,
            seed,
        }
    }

    /// Named presets: `whitebox-linf` (eps 4/255), `whitebox-l2` (eps 0.5),
    /// `blackbox-linf` (eps 8/255).
    pub fn preset(name: &str, method: AttackMethod, seed: u64) -> Result<AttackSpec> {
        match name {
            "whitebox-linf" => Ok(AttackSpec::new(method, Norm::Linf, 4.0 / 255.0, seed)),
            "whitebox-l2" => Ok(AttackSpec::new(method, Norm::L2, 0.5, seed)),
            "blackbox-linf" => Ok(AttackSpec::new(method, Norm::Linf, 8.0 / 255.0, seed)),
            _ => Err(AresError::InvalidArgument(format!(
                "unknown preset '{name}'"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 {
            return Err(AresError::InvalidArgument("epsilon must be >= 0".into()));
        }
        if self.steps < 1 {
            return Err(AresError::InvalidArgument("steps must be >= 1".into()));
        }
        if self.step_size <= 0.0 && self.epsilon > 0.0 {
            return Err(AresError::InvalidArgument("step_size must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.diversity_prob) {
            return Err(AresError::InvalidArgument(
                "diversity_prob must be in [0,1]".into(),
            ));
        }
        if self.kernel_size % 2 == 0 {
            return Err(AresError::InvalidArgument(
                "TIM kernel size must be odd".into(),
            ));
        }
        if self.scale_copies < 1 || self.sample_count < 1 {
            return Err(AresError::InvalidArgument(
                "scale_copies and sample_count must be >= 1".into(),
            ));
        }
        if self.decay_mu < 0.0 || self.beta < 0.0 || self.kernel_sigma < 0.0 {
            return Err(AresError::InvalidArgument(
                "decay_mu, beta and kernel_sigma must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-sample outcome of an attack on a batch.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub adversarial: Tensor,
    /// Misclassified with respect to the true label.
    pub success: Vec<bool>,
    pub final_loss: Vec<f64>,
    /// Total gradient evaluations across the batch.
    pub queries: u64,
}

impl AttackResult {
    /// Fraction of samples still classified correctly.
    pub fn robust_accuracy(&self) -> f64 {
        let correct = self.success.iter().filter(|&&s| !s).count();
        correct as f64 / self.success.len() as f64
    }

    /// Verifies the ball and box constraints for every sample.
    pub fn check_constraints(&self, original: &Tensor, spec: &AttackSpec) -> Result<()> {
        for i in 0..original.batch_len() {
            let delta = Tensor::from_vec(
                &[original.sample_len()],
                self.adversarial
                    .sample(i)
                    .iter()
                    .zip(original.sample(i))
                    .map(|(a, o)| a - o)
                    .collect(),
            )?;
            let norm = match spec.norm {
                Norm::Linf => delta.linf_norm(),
                Norm::L2 => delta.l2_norm(),
            };
            if norm > spec.epsilon + 1e-9 {
                return Err(AresError::InvalidArgument(format!(
                    "sample {i}: perturbation norm {norm} exceeds epsilon {}",
                    spec.epsilon
                )));
            }
            let adv = self.adversarial.sample(i);
            if adv.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(AresError::InvalidArgument(format!(
                    "sample {i}: pixel outside [0,1]"
                )));
            }
        }
        Ok(())
    }
}

/// Projects a perturbation onto the epsilon ball of the given norm.
pub fn project(delta: &Tensor, norm: Norm, epsilon: f64) -> Tensor {
    match norm {
        Norm::Linf => delta.clip(-epsilon, epsilon),
        Norm::L2 => {
            let n = delta.l2_norm();
            if n > epsilon {
                delta.scale(epsilon / n)
            } else {
                delta.clone()
            }
        }
    }
}

pub fn fgsm(layers: &[Layer], x: &Tensor, labels: &[usize], spec: &AttackSpec) -> Result<AttackResult> {
    expect_method(spec, AttackMethod::Fgsm)?;
    run_attack(layers, x, labels, spec)
}

pub fn pgd(layers: &[Layer], x: &Tensor, labels: &[usize], spec: &AttackSpec) -> Result<AttackResult> {
    expect_method(spec, AttackMethod::Pgd)?;
    run_attack(layers, x, labels, spec)
}

pub fn mim(layers: &[Layer], x: &Tensor, labels: &[usize], spec: &AttackSpec) -> Result<AttackResult> {
    expect_method(spec, AttackMethod::Mim)?;
    run_attack(layers, x, labels, spec)
}

pub fn dim(layers: &[Layer], x: &Tensor, labels: &[usize], spec: &AttackSpec) -> Result<AttackResult> {
    expect_method(spec, AttackMethod::Dim)?;
    run_attack(layers, x, labels, spec)
}

pub fn tim(layers: &[Layer], x: &Tensor, labels: &[usize], spec: &AttackSpec) -> Result<AttackResult> {
    expect_method(spec, AttackMethod::Tim)?;
    run_attack(layers, x, labels, spec)
}

pub fn si_ni_fgsm(layers: &[Layer], x: &Tensor, labels: &[usize], spec: &AttackSpec) -> Result<AttackResult> {
    expect_method(spec, AttackMethod::SiNiFgsm)?;
    run_attack(layers, x, labels, spec)
}

pub fn vmi_fgsm(layers: &[Layer], x: &Tensor, labels: &[usize], spec: &AttackSpec) -> Result<AttackResult> {
    expect_method(spec, AttackMethod::VmiFgsm)?;
    run_attack(layers, x, labels, spec)
}

fn expect_method(spec: &AttackSpec, method: AttackMethod) -> Result<()> {
    if spec.method != method {
        return Err(AresError::InvalidArgument(format!(
            "spec.method is {:?}, expected {:?}",
            spec.method, method
        )));
    }
    Ok(())
}

/// Attacks every sample of the batch; dispatches on `spec.method`.
pub fn run_attack(
    layers: &[Layer],
    x: &Tensor,
    labels: &[usize],
    spec: &AttackSpec,
) -> Result<AttackResult> {
    spec.validate()?;
    let shapes = validate_chain(layers, x.shape())?;
    let class_count = *shapes.last().and_then(|s| s.last()).ok_or(AresError::EmptyInput("model"))?;
    if labels.len() != x.batch_len() {
        return Err(AresError::InvalidArgument(format!(
            "{} labels for a batch of {}",
            labels.len(),
            x.batch_len()
        )));
    }
    if spec.method == AttackMethod::Dim {
        let (h, w) = (x.shape()[2], x.shape()[3]);
        if h != w {
            return Err(AresError::InvalidArgument(
                "DIM resize requires square inputs".into(),
            ));
        }
    }
    let outcomes: Vec<Result<SampleOutcome>> = (0..x.batch_len())
        .into_par_iter()
        .map(|i| attack_single(layers, &x.sample_tensor(i), labels[i], class_count, spec, i as u64))
        .collect();
    let mut advs = Vec::with_capacity(outcomes.len());
    let mut success = Vec::with_capacity(outcomes.len());
    let mut final_loss = Vec::with_capacity(outcomes.len());
    let mut queries = 0u64;
    for outcome in outcomes {
        let o = outcome?;
        advs.push(o.adv);
        success.push(o.success);
        final_loss.push(o.final_loss);
        queries += o.queries;
    }
    let adversarial = Tensor::stack(&advs)?;
    adversarial.ensure_finite("attack output")?;
    Ok(AttackResult {
        adversarial,
        success,
        final_loss,
        queries,
    })
}

struct SampleOutcome {
    adv: Tensor,
    success: bool,
    final_loss: f64,
    queries: u64,
}

struct SampleCtx<'a> {
    layers: &'a [Layer],
    spec: &'a AttackSpec,
    target: Tensor,
    label: usize,
    sample_index: u64,
    queries: u64,
    fallback_rng: Option<ChaCha8Rng>,
}

impl<'a> SampleCtx<'a> {
    /// Loss and prediction at a point (no gradient query).
    fn eval(&self, x: &Tensor) -> Result<(f64, usize)> {
        let logits = forward_pass(self.layers, x)?;
        let loss = loss_xent(&logits, &self.target)?;
        Ok((loss, argmax(logits.sample(0))))
    }

    /// Gradient of the sample loss with respect to the input; one query.
    fn grad(&mut self, x: &Tensor) -> Result<(Tensor, f64, usize)> {
        let (logits, loss, input_grad) = input_gradient(self.layers, x, &self.target)?;
        self.queries += 1;
        Ok((input_grad, loss, argmax(logits.sample(0))))
    }

    /// Replaces an exactly-zero gradient with a seeded random direction so
    /// attacks do not silently stall on ReLU plateaus.
    fn fallback_if_zero(&mut self, grad: Tensor) -> Tensor {
        if grad.l1_norm() != 0.0 {
            return grad;
        }
        let rng = self.fallback_rng.get_or_insert_with(|| {
            rng::stream(self.spec.seed, tag::GRAD_FALLBACK, self.sample_index)
        });
        let raw: Vec<f64> = (0..grad.len()).map(|_| StandardNormal.sample(rng)).collect();
        let t = Tensor::from_vec(grad.shape(), raw).unwrap();
        let n = t.l2_norm();
        if n == 0.0 {
            t
        } else {
            t.scale(1.0 / n)
        }
    }
}

/// Moves from `x0` along `dir`, projects back into the epsilon ball and the
/// [0,1] box.
fn step_and_project(
    x0: &Tensor,
    current: &Tensor,
    dir: &Tensor,
    step: f64,
    norm: Norm,
    epsilon: f64,
) -> Tensor {
    let moved = current
        .zip_map(dir, |c, d| c + step * d)
        .expect("step shapes");
    let delta = moved.sub(x0).expect("delta shapes");
    let projected = project(&delta, norm, epsilon);
    x0.add(&projected).expect("projected shapes").clip(0.0, 1.0)
}

/// Step direction for a (possibly momentum-accumulated) gradient.
fn steepest_direction(g: &Tensor, norm: Norm) -> Tensor {
    match norm {
        Norm::Linf => g.map(f64::signum),
        Norm::L2 => {
            let n = g.l2_norm();
            if n == 0.0 {
                g.clone()
            } else {
                g.scale(1.0 / n)
            }
        }
    }
}

fn random_start(x0: &Tensor, norm: Norm, epsilon: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let delta = match norm {
        Norm::Linf => Tensor::from_vec(
            x0.shape(),
            (0..x0.len())
                .map(|_| rng.gen_range(-epsilon..=epsilon))
                .collect(),
        )
        .unwrap(),
        Norm::L2 => {
            let raw: Vec<f64> = (0..x0.len()).map(|_| StandardNormal.sample(rng)).collect();
            let t = Tensor::from_vec(x0.shape(), raw).unwrap();
            let n = t.l2_norm();
            let u: f64 = rng.gen_range(0.0..1.0);
            let radius = epsilon * u.powf(1.0 / x0.len() as f64);
            if n == 0.0 {
                t
            } else {
                t.scale(radius / n)
            }
        }
    };
    x0.add(&delta).unwrap().clip(0.0, 1.0)
}

fn attack_single(
    layers: &[Layer],
    x0: &Tensor,
    label: usize,
    class_count: usize,
    spec: &AttackSpec,
    sample_index: u64,
) -> Result<SampleOutcome> {
    let mut ctx = SampleCtx {
        layers,
        spec,
        target: one_hot(&[label], class_count),
        label,
        sample_index,
        queries: 0,
        fallback_rng: None,
    };
    // Epsilon 0 admits no perturbation: return the input bitwise.
    if spec.epsilon == 0.0 {
        let (loss, pred) = ctx.eval(x0)?;
        return Ok(SampleOutcome {
            adv: x0.clone(),
            success: pred != label,
            final_loss: loss,
            queries: 0,
        });
    }
    match spec.method {
        AttackMethod::Fgsm => fgsm_single(&mut ctx, x0),
        AttackMethod::Pgd => pgd_single(&mut ctx, x0),
        _ => momentum_single(&mut ctx, x0),
    }
}

fn fgsm_single(ctx: &mut SampleCtx, x0: &Tensor) -> Result<SampleOutcome> {
    let spec = ctx.spec;
    let (grad, _, _) = ctx.grad(x0)?;
    let grad = ctx.fallback_if_zero(grad);
    let dir = steepest_direction(&grad, spec.norm);
    let adv = step_and_project(x0, x0, &dir, spec.step_size, spec.norm, spec.epsilon);
    let (loss, pred) = ctx.eval(&adv)?;
    Ok(SampleOutcome {
        adv,
        success: pred != ctx.label,
        final_loss: loss,
        queries: ctx.queries,
    })
}

fn pgd_single(ctx: &mut SampleCtx, x0: &Tensor) -> Result<SampleOutcome> {
    let spec = ctx.spec;
    let mut x = if spec.random_start {
        let mut rng = rng::stream(spec.seed, tag::ATTACK, ctx.sample_index);
        random_start(x0, spec.norm, spec.epsilon, &mut rng)
    } else {
        x0.clone()
    };
    // Track the fooling iterate with the highest loss; fall back to the
    // final iterate when nothing fooled the model.
    let mut best: Option<(Tensor, f64)> = None;
    for _ in 0..spec.steps {
        let (grad, loss, pred) = ctx.grad(&x)?;
        if pred != ctx.label && best.as_ref().map_or(true, |(_, bl)| loss > *bl) {
            best = Some((x.clone(), loss));
        }
        let grad = ctx.fallback_if_zero(grad);
        let dir = steepest_direction(&grad, spec.norm);
        x = step_and_project(x0, &x, &dir, spec.step_size, spec.norm, spec.epsilon);
    }
    let (final_loss, final_pred) = ctx.eval(&x)?;
    if final_pred != ctx.label && best.as_ref().map_or(true, |(_, bl)| final_loss > *bl) {
        best = Some((x.clone(), final_loss));
    }
    let (adv, loss) = best.unwrap_or((x, final_loss));
    let (loss_check, pred) = (loss, {
        let logits = forward_pass(ctx.layers, &adv)?;
        argmax(logits.sample(0))
    });
    Ok(SampleOutcome {
        adv,
        success: pred != ctx.label,
        final_loss: loss_check,
        queries: ctx.queries,
    })
}

/// Shared loop for MIM, DIM, TIM, SI-NI-FGSM and VMI-FGSM: a raw gradient
/// source feeds the L1-normalized momentum recurrence
/// `g <- mu * g + raw / ||raw||_1`.
fn momentum_single(ctx: &mut SampleCtx, x0: &Tensor) -> Result<SampleOutcome> {
    let spec = ctx.spec;
    let mut rng = rng::stream(spec.seed, tag::ATTACK, ctx.sample_index);
    let mut x = if spec.random_start {
        random_start(x0, spec.norm, spec.epsilon, &mut rng)
    } else {
        x0.clone()
    };
    let mut g = Tensor::zeros(x0.shape());
    // VMI variance accumulator.
    let mut variance = Tensor::zeros(x0.shape());
    let kernel = match spec.method {
        AttackMethod::Tim => Some(gaussian_kernel(spec.kernel_size, spec.kernel_sigma)),
        _ => None,
    };
    for _ in 0..spec.steps {
        let raw = match spec.method {
            AttackMethod::Mim => ctx.grad(&x)?.0,
            AttackMethod::Dim => {
                let (t, info) = diverse_transform(&x, spec.diversity_prob, &mut rng);
                let (grad_t, _, _) = ctx.grad(&t)?;
                info.backprop(&grad_t, x.shape())
            }
            AttackMethod::Tim => {
                let (grad, _, _) = ctx.grad(&x)?;
                convolve_per_channel(&grad, kernel.as_ref().unwrap())
            }
            AttackMethod::SiNiFgsm => {
                // Nesterov lookahead, then gradients of the scaled copies
                // x_nes / 2^i taken with respect to the lookahead point
                // (chain rule contributes the 1/2^i factor).
                let lookahead = x
                    .zip_map(&g, |xv, gv| xv + spec.step_size * spec.decay_mu * gv)
                    .unwrap();
                let m = spec.scale_copies;
                let mut acc = Tensor::zeros(x0.shape());
                for i in 0..m {
                    let scale = 1.0 / (1u64 << i) as f64;
                    let scaled = lookahead.scale(scale);
                    let (grad, _, _) = ctx.grad(&scaled)?;
                    acc = acc.zip_map(&grad, |a, gv| a + scale * gv).unwrap();
                }
                acc.scale(1.0 / m as f64)
            }
            AttackMethod::VmiFgsm => {
                let (grad, _, _) = ctx.grad(&x)?;
                let tuned = grad.add(&variance).unwrap();
                // Refresh the variance estimate around the current iterate.
                let n = spec.sample_count;
                let radius = spec.beta * spec.epsilon;
                let mut sum = Tensor::zeros(x0.shape());
                for _ in 0..n {
                    let probe = Tensor::from_vec(
                        x.shape(),
                        x.data()
                            .iter()
                            .map(|&v| v + rng.gen_range(-radius..=radius))
                            .collect(),
                    )
                    .unwrap();
                    let (pg, _, _) = ctx.grad(&probe)?;
                    sum = sum.add(&pg).unwrap();
                }
                variance = sum.scale(1.0 / n as f64).sub(&grad).unwrap();
                tuned
            }
            AttackMethod::Fgsm | AttackMethod::Pgd => unreachable!("handled separately"),
        };
        let raw = ctx.fallback_if_zero(raw);
        let l1 = raw.l1_norm();
        let normalized = if l1 == 0.0 { raw } else { raw.scale(1.0 / l1) };
        g = g.zip_map(&normalized, |gv, nv| spec.decay_mu * gv + nv).unwrap();
        let dir = steepest_direction(&g, spec.norm);
        x = step_and_project(x0, &x, &dir, spec.step_size, spec.norm, spec.epsilon);
    }
    let (final_loss, pred) = ctx.eval(&x)?;
    Ok(SampleOutcome {
        adv: x,
        success: pred != ctx.label,
        final_loss,
        queries: ctx.queries,
    })
}

/// DIM random resize-and-pad. Resizes to r x r by nearest neighbor, then
/// zero-pads back to the input size at a random offset.
struct DiverseInfo {
    applied: bool,
    resized: usize,
    pad_y: usize,
    pad_x: usize,
}

impl DiverseInfo {
    /// Pulls the gradient at the transformed point back to input space.
    fn backprop(&self, grad_t: &Tensor, input_shape: &[usize]) -> Tensor {
        if !self.applied {
            return grad_t.clone();
        }
        let (c, h, w) = (input_shape[1], input_shape[2], input_shape[3]);
        let r = self.resized;
        let mut grad = Tensor::zeros(input_shape);
        for ci in 0..c {
            for a in 0..r {
                let sy = a * h / r;
                for b in 0..r {
                    let sx = b * w / r;
                    let g = grad_t.data()[chw_index(h, w, ci, a + self.pad_y, b + self.pad_x)];
                    grad.data_mut()[chw_index(h, w, ci, sy, sx)] += g;
                }
            }
        }
        grad
    }
}

fn diverse_transform(x: &Tensor, prob: f64, rng: &mut ChaCha8Rng) -> (Tensor, DiverseInfo) {
    let (c, h, w) = (x.shape()[1], x.shape()[2], x.shape()[3]);
    if prob <= 0.0 || !rng.gen_bool(prob) {
        return (
            x.clone(),
            DiverseInfo { applied: false, resized: 0, pad_y: 0, pad_x: 0 },
        );
    }
    let r_min = (0.75 * h as f64).ceil() as usize;
    let r = rng.gen_range(r_min..=h);
    let pad_y = rng.gen_range(0..=h - r);
    let pad_x = rng.gen_range(0..=w - r);
    let mut out = Tensor::zeros(x.shape());
    for ci in 0..c {
        for a in 0..r {
            let sy = a * h / r;
            for b in 0..r {
                let sx = b * w / r;
                out.data_mut()[chw_index(h, w, ci, a + pad_y, b + pad_x)] =
                    x.data()[chw_index(h, w, ci, sy, sx)];
            }
        }
    }
    (out, DiverseInfo { applied: true, resized: r, pad_y, pad_x })
}

/// Normalized Gaussian kernel; sigma 0 degenerates to a delta.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Tensor {
    let mut k = Tensor::zeros(&[size, size]);
    let center = (size / 2) as isize;
    if sigma <= 0.0 {
        k.data_mut()[(center as usize) * size + center as usize] = 1.0;
        return k;
    }
    let mut sum = 0.0;
    for y in 0..size {
        for x in 0..size {
            let dy = y as isize - center;
            let dx = x as isize - center;
            let v = (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
            k.data_mut()[y * size + x] = v;
            sum += v;
        }
    }
    for v in k.data_mut() {
        *v /= sum;
    }
    k
}

/// Zero-padded same-size convolution applied per channel.
fn convolve_per_channel(grad: &Tensor, kernel: &Tensor) -> Tensor {
    let (c, h, w) = (grad.shape()[1], grad.shape()[2], grad.shape()[3]);
    let size = kernel.shape()[0];
    let radius = (size / 2) as isize;
    let mut out = Tensor::zeros(grad.shape());
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for ky in 0..size {
                    let sy = y as isize + ky as isize - radius;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..size {
                        let sx = x as isize + kx as isize - radius;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        acc += kernel.data()[ky * size + kx]
                            * grad.data()[chw_index(h, w, ci, sy as usize, sx as usize)];
                    }
                }
                out.data_mut()[chw_index(h, w, ci, y, x)] = acc;
            }
        }
    }
    out
}

/// Clean accuracy of a layer stack on labeled samples.
pub fn clean_accuracy(layers: &[Layer], x: &Tensor, labels: &[usize]) -> Result<f64> {
    let preds = crate::model::predict_with_layers(layers, x)?;
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::backward_full;
    use crate::model::{build_model, ModelSpec};

    fn tiny_model() -> Vec<Layer> {
        build_model(&ModelSpec::small_cnn((3, 8, 8), 4, 1, 21))
            .unwrap()
            .to_layers()
    }

    fn tiny_batch(n: usize) -> (Tensor, Vec<usize>) {
        let mut rng = rng::stream(17, 0x77, 0);
        let x = Tensor::from_vec(
            &[n, 3, 8, 8],
            (0..n * 3 * 8 * 8).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let labels = (0..n).map(|i| i % 4).collect();
        (x, labels)
    }

    #[test]
    fn project_noop_inside_ball() {
        let d = Tensor::from_vec(&[2], vec![0.1, -0.2]).unwrap();
        assert_eq!(project(&d, Norm::Linf, 0.5), d);
        assert_eq!(project(&d, Norm::L2, 0.5), d);
    }

    #[test]
    fn project_l2_rescales() {
        let d = Tensor::from_vec(&[2], vec![2.0 * 0.6, 2.0 * 0.8]).unwrap(); // norm 2
        let p = project(&d, Norm::L2, 0.5);
        let expect = d.scale(0.25);
        assert!(p
            .data()
            .iter()
            .zip(expect.data())
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn project_linf_clamps() {
        let eps = 4.0 / 255.0;
        let d = Tensor::from_vec(&[2], vec![0.9, -0.9]).unwrap();
        let p = project(&d, Norm::Linf, eps);
        assert_eq!(p.data(), &[eps, -eps]);
    }

    #[test]
    fn zero_epsilon_returns_input_bitwise() {
        let layers = tiny_model();
        let (x, labels) = tiny_batch(3);
        for method in ALL_METHODS {
            let mut spec = AttackSpec::new(method, Norm::Linf, 0.0, 5);
            spec.step_size = 1.0; // irrelevant at eps 0 but must be valid
            let result = run_attack(&layers, &x, &labels, &spec).unwrap();
            assert_eq!(result.adversarial, x, "{method:?}");
        }
    }

    #[test]
    fn all_methods_satisfy_constraints_on_presets() {
        let layers = tiny_model();
        let (x, labels) = tiny_batch(2);
        for method in ALL_METHODS {
            for preset in ["whitebox-linf", "whitebox-l2", "blackbox-linf"] {
                let mut spec = AttackSpec::preset(preset, method, 3).unwrap();
                spec.steps = spec.steps.min(5); // keep the unit test fast
                let result = run_attack(&layers, &x, &labels, &spec).unwrap();
                result.check_constraints(&x, &spec).unwrap();
            }
        }
    }

    #[test]
    fn attacks_are_bit_reproducible() {
        let layers = tiny_model();
        let (x, labels) = tiny_batch(3);
        for method in [AttackMethod::Pgd, AttackMethod::Dim, AttackMethod::VmiFgsm] {
            let mut spec = AttackSpec::new(method, Norm::Linf, 8.0 / 255.0, 9);
            spec.steps = 4;
            let a = run_attack(&layers, &x, &labels, &spec).unwrap();
            let b = run_attack(&layers, &x, &labels, &spec).unwrap();
            assert_eq!(a.adversarial, b.adversarial, "{method:?}");
            assert_eq!(a.success, b.success);
        }
    }

    #[test]
    fn pgd_one_step_no_random_start_matches_fgsm_at_alpha_eps() {
        let layers = tiny_model();
        let (x, labels) = tiny_batch(4);
        let eps = 4.0 / 255.0;
        let mut pgd_spec = AttackSpec::new(AttackMethod::Pgd, Norm::Linf, eps, 1);
        pgd_spec.steps = 1;
        pgd_spec.step_size = eps;
        pgd_spec.random_start = false;
        let fgsm_spec = AttackSpec::new(AttackMethod::Fgsm, Norm::Linf, eps, 1);
        let a = run_attack(&layers, &x, &labels, &pgd_spec).unwrap();
        let b = run_attack(&layers, &x, &labels, &fgsm_spec).unwrap();
        // PGD reports its best fooling iterate; when the single step fooled
        // the model both report the same point, otherwise both report the
        // stepped point. Either way the tensors agree.
        assert_eq!(a.adversarial, b.adversarial);
    }

    #[test]
    fn fgsm_on_linear_model_matches_closed_form() {
        // Binary linear model: logits = [w.x, 0]. The cross-entropy gradient
        // with respect to x is (p0 - y0) * w, so FGSM moves by
        // eps * sign((p0 - y0) * w).
        let n_in = 6;
        let mut rng = rng::stream(33, 0x5a, 0);
        let w: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut weight = Tensor::zeros(&[n_in, 2]);
        for i in 0..n_in {
            weight.data_mut()[i * 2] = w[i];
        }
        let layers = vec![Layer::Dense { weight, bias: Tensor::zeros(&[2]) }];
        let x = Tensor::from_vec(&[1, n_in], (0..n_in).map(|_| rng.gen_range(0.2..0.8)).collect())
            .unwrap();
        let label = 0usize;
        let eps = 0.05;
        let spec = AttackSpec::new(AttackMethod::Fgsm, Norm::Linf, eps, 0);
        let result = run_attack(&layers, &x, &[label], &spec).unwrap();

        let z: f64 = x.data().iter().zip(&w).map(|(a, b)| a * b).sum();
        let p0 = z.exp() / (z.exp() + 1.0);
        for i in 0..n_in {
            let grad_i = (p0 - 1.0) * w[i];
            let expect = (x.data()[i] + eps * grad_i.signum()).clamp(0.0, 1.0);
            assert!(
                (result.adversarial.data()[i] - expect).abs() < 1e-12,
                "coordinate {i}"
            );
        }
    }

    #[test]
    fn mim_momentum_accumulates_unrolled_recurrence() {
        // On a linear model the per-step normalized gradient is constant, so
        // after two steps g = mu * n + n.
        let n_in = 4;
        let mut weight = Tensor::zeros(&[n_in, 2]);
        for i in 0..n_in {
            weight.data_mut()[i * 2] = (i as f64 + 1.0) * 0.1;
        }
        let layers = vec![Layer::Dense { weight: weight.clone(), bias: Tensor::zeros(&[2]) }];
        let x = Tensor::from_vec(&[1, n_in], vec![0.5; n_in]).unwrap();
        let label = 0usize;

        // Hand-unroll: gradient direction same each step (logits shift by a
        // constant step in x keeps sign pattern), so compare against running
        // the recurrence with explicitly computed normalized gradients.
        let mu = 0.7;
        let eps = 0.2;
        let steps = 2;
        let mut spec = AttackSpec::new(AttackMethod::Mim, Norm::Linf, eps, 0);
        spec.decay_mu = mu;
        spec.steps = steps;
        spec.step_size = eps / steps as f64;
        let result = run_attack(&layers, &x, &[label], &spec).unwrap();

        // Manual replay.
        let target = one_hot(&[label], 2);
        let mut g = Tensor::zeros(x.shape());
        let mut xi = x.clone();
        for _ in 0..steps {
            let (_, _, grads) = backward_full(&layers, &xi, &target).unwrap();
            let n = grads.input_grad.scale(1.0 / grads.input_grad.l1_norm());
            g = g.zip_map(&n, |gv, nv| mu * gv + nv).unwrap();
            let dir = g.map(f64::signum);
            xi = step_and_project(&x, &xi, &dir, spec.step_size, Norm::Linf, eps);
        }
        assert_eq!(result.adversarial, xi);
    }

    #[test]
    fn dim_prob_zero_equals_mim() {
        let layers = tiny_model();
        let (x, labels) = tiny_batch(2);
        let mut dim_spec = AttackSpec::new(AttackMethod::Dim, Norm::Linf, 8.0 / 255.0, 4);
        dim_spec.diversity_prob = 0.0;
        dim_spec.steps = 5;
        let mut mim_spec = AttackSpec::new(AttackMethod::Mim, Norm::Linf, 8.0 / 255.0, 4);
        mim_spec.steps = 5;
        let a = run_attack(&layers, &x, &labels, &dim_spec).unwrap();
        let b = run_attack(&layers, &x, &labels, &mim_spec).unwrap();
        assert_eq!(a.adversarial, b.adversarial);
    }

    #[test]
    fn dim_transform_preserves_shape() {
        let mut rng = rng::stream(1, 2, 3);
        let x = Tensor::from_vec(&[1, 3, 8, 8], (0..192).map(|v| v as f64 / 191.0).collect())
            .unwrap();
        for _ in 0..10 {
            let (t, _) = diverse_transform(&x, 1.0, &mut rng);
            assert_eq!(t.shape(), x.shape());
        }
    }

    #[test]
    fn tim_kernel_normalized_with_center_max() {
        let k = gaussian_kernel(15, 3.0);
        let sum: f64 = k.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let center = k.data()[7 * 15 + 7];
        assert!(k.data().iter().all(|&v| v <= center));
    }

    #[test]
    fn tim_sigma_zero_equals_mim() {
        let layers = tiny_model();
        let (x, labels) = tiny_batch(2);
        let mut tim_spec = AttackSpec::new(AttackMethod::Tim, Norm::Linf, 8.0 / 255.0, 4);
        tim_spec.kernel_sigma = 0.0;
        tim_spec.steps = 5;
        let mut mim_spec = AttackSpec::new(AttackMethod::Mim, Norm::Linf, 8.0 / 255.0, 4);
        mim_spec.steps = 5;
        let a = run_attack(&layers, &x, &labels, &tim_spec).unwrap();
        let b = run_attack(&layers, &x, &labels, &mim_spec).unwrap();
        assert_eq!(a.adversarial, b.adversarial);
    }

    #[test]
    fn sini_single_copy_zero_momentum_is_iterative_fgsm() {
        let layers = tiny_model();
        let (x, labels) = tiny_batch(2);
        let mut spec = AttackSpec::new(AttackMethod::SiNiFgsm, Norm::Linf, 8.0 / 255.0, 4);
        spec.scale_copies = 1;
        spec.decay_mu = 0.0;
        spec.steps = 3;
        let result = run_attack(&layers, &x, &labels, &spec).unwrap();

        // Manual iterative FGSM with L1-normalized gradients (normalization
        // does not change the sign pattern).
        let target_k = 4;
        let mut expected = Vec::new();
        for i in 0..x.batch_len() {
            let x0 = x.sample_tensor(i);
            let mut xi = x0.clone();
            let target = one_hot(&[labels[i]], target_k);
            for _ in 0..3 {
                let (_, _, grads) = backward_full(&layers, &xi, &target).unwrap();
                let dir = grads.input_grad.map(f64::signum);
                xi = step_and_project(&x0, &xi, &dir, spec.step_size, Norm::Linf, spec.epsilon);
            }
            expected.push(xi);
        }
        assert_eq!(result.adversarial, Tensor::stack(&expected).unwrap());
    }

    #[test]
    fn vmi_counts_n_plus_one_queries_per_step() {
        let layers = tiny_model();
        let (x, labels) = tiny_batch(2);
        let mut spec = AttackSpec::new(AttackMethod::VmiFgsm, Norm::Linf, 8.0 / 255.0, 4);
        spec.steps = 3;
        spec.sample_count = 5;
        let result = run_attack(&layers, &x, &labels, &spec).unwrap();
        assert_eq!(result.queries, 2 * 3 * (5 + 1));
    }

    #[test]
    fn even_tim_kernel_rejected() {
        let mut spec = AttackSpec::new(AttackMethod::Tim, Norm::Linf, 8.0 / 255.0, 4);
        spec.kernel_size = 14;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn fgsm_nondecreasing_loss_on_most_correct_samples() {
        let layers = tiny_model();
        let (x, labels) = tiny_batch(16);
        let eps = 1.0 / 255.0;
        let mut spec = AttackSpec::new(AttackMethod::Fgsm, Norm::Linf, eps, 7);
        spec.step_size = eps;
        let result = run_attack(&layers, &x, &labels, &spec).unwrap();
        let preds = crate::model::predict_with_layers(&layers, &x).unwrap();
        let mut checked = 0;
        let mut ok = 0;
        for i in 0..x.batch_len() {
            if preds[i] != labels[i] {
                continue;
            }
            checked += 1;
            let target = one_hot(&[labels[i]], 4);
            let clean_loss =
                loss_xent(&forward_pass(&layers, &x.sample_tensor(i)).unwrap(), &target).unwrap();
            if result.final_loss[i] >= clean_loss {
                ok += 1;
            }
        }
        if checked > 0 {
            assert!(ok as f64 >= 0.9 * checked as f64, "{ok}/{checked}");
        }
    }
}
