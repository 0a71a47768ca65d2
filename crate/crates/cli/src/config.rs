//! Run configuration: one TOML file per run, with a global seed and output
//! directory plus one section per subcommand. `--seed` overrides the file's
//! seed; the output directory resolves as `--out` > `ARES_OUT` > file.

use anyhow::{bail, Context, Result};
use ares_core::attack::{AttackMethod, AttackSpec, Norm};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; sections derive their own streams from it.
    pub seed: u64,
    /// Output directory for this run's artifacts.
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupt: Option<CorruptSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mce: Option<MceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq: Option<FreqSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    /// Re-serializes the (possibly overridden) config; this exact text goes
    /// into the manifest as the resolved configuration.
    pub fn resolved_text(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default = "default_class_count")]
    pub class_count: usize,
    #[serde(default = "default_image")]
    pub image: [usize; 3],
    #[serde(default = "default_train_size")]
    pub train_size: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    /// Dump the first N images of each split as 8-bit PNGs (inspection
    /// only; evaluation always reads the binary floats).
    #[serde(default)]
    pub png_dump: usize,
}

fn default_class_count() -> usize {
    8
}
fn default_image() -> [usize; 3] {
    [3, 32, 32]
}
fn default_train_size() -> usize {
    1024
}
fn default_test_size() -> usize {
    256
}
fn default_width() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `small_cnn`, `patch_mlp` or `baseline_ref`.
    pub family: String,
    #[serde(default = "default_width")]
    pub width: usize,
    /// Weight initialization seed.
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    /// Directory holding train.ares and test.ares.
    pub dataset_dir: PathBuf,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub label_smoothing: f64,
    #[serde(default)]
    pub mixup_alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ema_beta: Option<f64>,
    #[serde(default)]
    pub augment: bool,
    #[serde(default)]
    pub adversarial: bool,
    #[serde(default = "default_at_epsilon")]
    pub at_epsilon: f64,
    #[serde(default = "default_at_steps")]
    pub at_steps: usize,
    #[serde(default = "default_robust_eval_cap")]
    pub robust_eval_cap: usize,
}

fn default_epochs() -> usize {
    20
}
fn default_batch_size() -> usize {
    32
}
fn default_lr() -> f64 {
    0.1
}
fn default_momentum() -> f64 {
    0.9
}
fn default_at_epsilon() -> f64 {
    4.0 / 255.0
}
fn default_at_steps() -> usize {
    3
}
fn default_robust_eval_cap() -> usize {
    128
}

/// Attack parameterization shared by the attack/curve/transfer commands:
/// a named preset plus optional field-level overrides.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackParams {
    /// `whitebox-linf`, `whitebox-l2` or `blackbox-linf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_start: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_copies: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
}

impl AttackParams {
    /// Builds the concrete spec for one method, starting from the preset
    /// (default `whitebox-linf`) and applying overrides.
    pub fn build(&self, method: AttackMethod, seed: u64) -> Result<AttackSpec> {
        let preset = self.preset.as_deref().unwrap_or("whitebox-linf");
        let mut spec = AttackSpec::preset(preset, method, seed)?;
        if let Some(norm) = &self.norm {
            spec.norm = Norm::from_name(norm)?;
        }
        if let Some(v) = self.epsilon {
            spec.epsilon = v;
        }
        if let Some(v) = self.steps {
            spec.steps = v;
            // Keep the eps/steps convention when the step size is not
            // explicitly pinned.
            if self.step_size.is_none() && method != AttackMethod::Pgd && method != AttackMethod::Fgsm
            {
                spec.step_size = spec.epsilon / v as f64;
            }
        }
        if let Some(v) = self.step_size {
            spec.step_size = v;
        }
        if let Some(v) = self.random_start {
            spec.random_start = v;
        }
        if let Some(v) = self.decay_mu {
            spec.decay_mu = v;
        }
        if let Some(v) = self.diversity_prob {
            spec.diversity_prob = v;
        }
        if let Some(v) = self.kernel_size {
            spec.kernel_size = v;
        }
        if let Some(v) = self.kernel_sigma {
            spec.kernel_sigma = v;
        }
        if let Some(v) = self.scale_copies {
            spec.scale_copies = v;
        }
        if let Some(v) = self.beta {
            spec.beta = v;
        }
        if let Some(v) = self.sample_count {
            spec.sample_count = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub dataset_dir: PathBuf,
    pub model: PathBuf,
    /// Methods to evaluate, e.g. ["fgsm", "pgd"].
    pub methods: Vec<String>,
    #[serde(default)]
    pub params: AttackParams,
    /// Cap on evaluated test samples (0 = all).
    #[serde(default)]
    pub max_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub dataset_dir: PathBuf,
    pub model: PathBuf,
    /// Attack method used inside the bisection (default pgd).
    #[serde(default = "default_curve_method")]
    pub method: String,
    #[serde(default)]
    pub params: AttackParams,
    #[serde(default = "default_eps_max")]
    pub eps_max: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Number of evenly spaced grid points on [0, eps_max].
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub max_samples: usize,
}

fn default_curve_method() -> String {
    "pgd".into()
}
fn default_eps_max() -> f64 {
    32.0 / 255.0
}
fn default_tol() -> f64 {
    1.0 / 510.0
}
fn default_grid_points() -> usize {
    33
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptSection {
    pub dataset_dir: PathBuf,
    pub model: PathBuf,
    /// Corruption kinds (default: all six).
    #[serde(default)]
    pub kinds: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MceSection {
    pub dataset_dir: PathBuf,
    pub model: PathBuf,
    /// The pinned denominator model.
    pub baseline: PathBuf,
    #[serde(default)]
    pub kinds: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSection {
    pub dataset_dir: PathBuf,
    /// Panel of weight files; sources and targets alike.
    pub models: Vec<PathBuf>,
    #[serde(default = "default_transfer_method")]
    pub method: String,
    #[serde(default = "default_transfer_params")]
    pub params: AttackParams,
    #[serde(default)]
    pub max_samples: usize,
}

fn default_transfer_method() -> String {
    "mim".into()
}
fn default_transfer_params() -> AttackParams {
    AttackParams {
        preset: Some("blackbox-linf".into()),
        ..AttackParams::default()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqSection {
    pub dataset_dir: PathBuf,
    pub model: PathBuf,
    #[serde(default)]
    pub max_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Run directories whose artifacts the report consolidates.
    pub runs: Vec<PathBuf>,
}

/// Parses the model family names used in configs.
pub fn parse_family(name: &str) -> Result<ares_core::model::ModelFamily> {
    use ares_core::model::ModelFamily;
    Ok(match name {
        "small_cnn" => ModelFamily::SmallCnn,
        "patch_mlp" => ModelFamily::PatchMlp,
        "baseline_ref" => ModelFamily::BaselineRef,
        _ => bail!("unknown model family '{name}' (small_cnn | patch_mlp | baseline_ref)"),
    })
}
