//! Classifier architectures, seeded initialization and weight serialization.
//!
//! Two families with different inductive biases: `SmallCnn` (two conv/pool
//! stages and a dense head) and `PatchMlp` (patch embedding followed by an
//! MLP). `BaselineRef` is the pinned reference model used as the denominator
//! in mean-corruption-error reports: a SmallCnn of width 1 at seed 0.
//!
//! Parameter counts are closed-form. For SmallCnn on (3, H, W) with width w
//! and K classes:
//!   conv1: 8w*3*9 + 8w, conv2: 16w*8w*9 + 16w, fc: 16w*(H/4)*(W/4)*K + K.
//! At (3,32,32), w = 1, K = 8 that is 224 + 1168 + 8200 = 9592.

use crate::error::{AresError, Result};
use crate::fileio;
use crate::layers::{forward_pass, Layer};
use crate::rng::{self, tag};
use crate::tensor::Tensor;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelFamily {
    SmallCnn,
    PatchMlp,
    BaselineRef,
}

impl ModelFamily {
    pub fn as_u8(self) -> u8 {
        match self {
            ModelFamily::SmallCnn => 0,
            ModelFamily::PatchMlp => 1,
            ModelFamily::BaselineRef => 2,
        }
    }

    pub fn from_u8(v: u8) -> Result<ModelFamily> {
        match v {
            0 => Ok(ModelFamily::SmallCnn),
            1 => Ok(ModelFamily::PatchMlp),
            2 => Ok(ModelFamily::BaselineRef),
            _ => Err(AresError::InvalidSpec(format!("unknown family byte {v}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainingTag {
    Normal,
    Adversarial,
}

impl TrainingTag {
    pub fn as_u8(self) -> u8 {
        match self {
            TrainingTag::Normal => 0,
            TrainingTag::Adversarial => 1,
        }
    }

    pub fn from_u8(v: u8) -> Result<TrainingTag> {
        match v {
            0 => Ok(TrainingTag::Normal),
            1 => Ok(TrainingTag::Adversarial),
            _ => Err(AresError::InvalidSpec(format!("unknown training tag {v}"))),
        }
    }
}

/// Everything needed to deterministically construct a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub input_shape: (usize, usize, usize),
    pub class_count: usize,
    pub width: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn small_cnn(input_shape: (usize, usize, usize), class_count: usize, width: usize, seed: u64) -> ModelSpec {
        ModelSpec { family: ModelFamily::SmallCnn, input_shape, class_count, width, seed }
    }

    pub fn patch_mlp(input_shape: (usize, usize, usize), class_count: usize, width: usize, seed: u64) -> ModelSpec {
        ModelSpec { family: ModelFamily::PatchMlp, input_shape, class_count, width, seed }
    }

    /// The pinned mCE denominator model: SmallCnn arch, width 1, seed 0.
    pub fn baseline_ref(input_shape: (usize, usize, usize), class_count: usize) -> ModelSpec {
        ModelSpec { family: ModelFamily::BaselineRef, input_shape, class_count, width: 1, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.input_shape;
        if self.class_count < 2 {
            return Err(AresError::InvalidSpec(format!(
                "class_count must be >= 2, got {}",
                self.class_count
            )));
        }
        if self.width < 1 {
            return Err(AresError::InvalidSpec("width must be >= 1".into()));
        }
        if c == 0 || h == 0 || w == 0 {
            return Err(AresError::InvalidSpec("input shape must be positive".into()));
        }
        // Both families reduce spatial dims by a factor of 4 (two 2x2 pools
        // or one patch-4 embedding).
        if h % 4 != 0 || w % 4 != 0 {
            return Err(AresError::InvalidSpec(format!(
                "input {h}x{w} not divisible by the family's factor 4"
            )));
        }
        if self.family == ModelFamily::BaselineRef && (self.width != 1 || self.seed != 0) {
            return Err(AresError::InvalidSpec(
                "BaselineRef is pinned to width 1 and seed 0".into(),
            ));
        }
        Ok(())
    }

    /// Tensor names and shapes, fully determined by the spec.
    pub fn tensor_layout(&self) -> Result<Vec<(String, Vec<usize>)>> {
        self.validate()?;
        let (c, h, w) = self.input_shape;
        let k = self.class_count;
        let wd = self.width;
        Ok(match self.family {
            ModelFamily::SmallCnn | ModelFamily::BaselineRef => {
                let c1 = 8 * wd;
                let c2 = 16 * wd;
                vec![
                    ("conv1.weight".into(), vec![c1, c, 3, 3]),
                    ("conv1.bias".into(), vec![c1]),
                    ("conv2.weight".into(), vec![c2, c1, 3, 3]),
                    ("conv2.bias".into(), vec![c2]),
                    ("fc.weight".into(), vec![c2 * (h / 4) * (w / 4), k]),
                    ("fc.bias".into(), vec![k]),
                ]
            }
            ModelFamily::PatchMlp => {
                let patch = 4;
                let embed = 8 * wd;
                let hidden = 64 * wd;
                let flat = embed * (h / patch) * (w / patch);
                vec![
                    ("embed.weight".into(), vec![c * patch * patch, embed]),
                    ("embed.bias".into(), vec![embed]),
                    ("fc1.weight".into(), vec![flat, hidden]),
                    ("fc1.bias".into(), vec![hidden]),
                    ("fc2.weight".into(), vec![hidden, k]),
                    ("fc2.bias".into(), vec![k]),
                ]
            }
        })
    }
}

/// A spec plus its named parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub spec: ModelSpec,
    pub tensors: Vec<(String, Tensor)>,
    pub training_tag: TrainingTag,
    pub ema_applied: bool,
}

impl ModelWeights {
    fn tensor(&self, name: &str) -> &Tensor {
        &self
            .tensors
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("tensor {name} missing"))
            .1
    }

    /// Instantiates the runtime layer stack (clones the tensors).
    pub fn to_layers(&self) -> Vec<Layer> {
        match self.spec.family {
            ModelFamily::SmallCnn | ModelFamily::BaselineRef => vec![
                Layer::Conv3x3 {
                    weight: self.tensor("conv1.weight").clone(),
                    bias: self.tensor("conv1.bias").clone(),
                },
                Layer::Relu,
                Layer::AvgPool2x2,
                Layer::Conv3x3 {
                    weight: self.tensor("conv2.weight").clone(),
                    bias: self.tensor("conv2.bias").clone(),
                },
                Layer::Relu,
                Layer::AvgPool2x2,
                Layer::Dense {
                    weight: self.tensor("fc.weight").clone(),
                    bias: self.tensor("fc.bias").clone(),
                },
            ],
            ModelFamily::PatchMlp => vec![
                Layer::PatchEmbed {
                    patch: 4,
                    weight: self.tensor("embed.weight").clone(),
                    bias: self.tensor("embed.bias").clone(),
                },
                Layer::Dense {
                    weight: self.tensor("fc1.weight").clone(),
                    bias: self.tensor("fc1.bias").clone(),
                },
                Layer::Relu,
                Layer::Dense {
                    weight: self.tensor("fc2.weight").clone(),
                    bias: self.tensor("fc2.bias").clone(),
                },
            ],
        }
    }

    /// Rebuilds weights from a (possibly updated) layer stack.
    pub fn from_layers(
        spec: ModelSpec,
        layers: &[Layer],
        training_tag: TrainingTag,
        ema_applied: bool,
    ) -> Result<ModelWeights> {
        let layout = spec.tensor_layout()?;
        let mut flat: Vec<Tensor> = Vec::new();
        for layer in layers {
            for p in layer.params() {
                flat.push(p.clone());
            }
        }
        if flat.len() != layout.len() {
            return Err(AresError::InvalidSpec(format!(
                "layer stack has {} parameter tensors, spec expects {}",
                flat.len(),
                layout.len()
            )));
        }
        let mut tensors = Vec::with_capacity(layout.len());
        for ((name, shape), tensor) in layout.into_iter().zip(flat) {
            if tensor.shape() != shape.as_slice() {
                return Err(AresError::shape(&name, &shape, tensor.shape()));
            }
            tensors.push((name, tensor));
        }
        Ok(ModelWeights { spec, tensors, training_tag, ema_applied })
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }
}

/// He-style initialization from the spec's seeded generator.
///
/// Two adjustments keep small models off the dead-ReLU plateau that plain
/// zero biases hit on all-positive pixel inputs: the first layer's bias is
/// set so pre-activations are centered for a mid-gray (0.5) input, and the
/// final classifier weights are damped by 10x so training starts from
/// near-uniform logits.
pub fn build_model(spec: &ModelSpec) -> Result<ModelWeights> {
    let layout = spec.tensor_layout()?;
    let last_weight = layout
        .iter()
        .rposition(|(name, _)| name.ends_with(".weight"))
        .expect("every family has a weight tensor");
    let mut tensors: Vec<(String, Tensor)> = Vec::with_capacity(layout.len());
    for (idx, (name, shape)) in layout.into_iter().enumerate() {
        let tensor = if name.ends_with(".bias") {
            let weight = &tensors.last().expect("bias follows its weight").1;
            if tensors.len() == 1 {
                first_layer_centered_bias(weight, &shape)
            } else {
                Tensor::zeros(&shape)
            }
        } else {
            let fan_in = match shape.len() {
                4 => shape[1] * shape[2] * shape[3],
                2 => shape[0],
                _ => shape.iter().product(),
            };
            let mut std = (2.0 / fan_in as f64).sqrt();
            if idx == last_weight {
                std *= 0.1;
            }
            let normal = Normal::new(0.0, std).expect("valid std");
            let mut rng = rng::stream(spec.seed, tag::WEIGHT_INIT, idx as u64);
            let len: usize = shape.iter().product();
            let data = (0..len).map(|_| normal.sample(&mut rng)).collect();
            Tensor::from_vec(&shape, data)?
        };
        tensors.push((name, tensor));
    }
    Ok(ModelWeights {
        spec: *spec,
        tensors,
        training_tag: TrainingTag::Normal,
        ema_applied: false,
    })
}

/// Bias that cancels the weight's response to a constant 0.5 input.
fn first_layer_centered_bias(weight: &Tensor, bias_shape: &[usize]) -> Tensor {
    let out = bias_shape[0];
    let mut bias = Tensor::zeros(bias_shape);
    match weight.shape().len() {
        // Conv [c_out, c_in, kh, kw]: sum over everything but c_out.
        4 => {
            let per = weight.len() / out;
            for (o, b) in bias.data_mut().iter_mut().enumerate() {
                let sum: f64 = weight.data()[o * per..(o + 1) * per].iter().sum();
                *b = -0.5 * sum;
            }
        }
        // Dense / patch-embed [in, out]: sum over rows per column.
        2 => {
            let n_in = weight.shape()[0];
            for (o, b) in bias.data_mut().iter_mut().enumerate() {
                let sum: f64 = (0..n_in).map(|i| weight.data()[i * out + o]).sum();
                *b = -0.5 * sum;
            }
        }
        _ => {}
    }
    bias
}

/// Argmax labels; ties break toward the lowest class index.
pub fn predict_batch(weights: &ModelWeights, batch: &Tensor) -> Result<Vec<usize>> {
    let layers = weights.to_layers();
    predict_with_layers(&layers, batch)
}

/// Same as [`predict_batch`] but reusing an already-instantiated stack.
pub fn predict_with_layers(layers: &[Layer], batch: &Tensor) -> Result<Vec<usize>> {
    let logits = forward_pass(layers, batch)?;
    Ok((0..logits.batch_len()).map(|i| argmax(logits.sample(i))).collect())
}

/// Index of the strictly greatest entry (first one on ties).
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn save_weights(weights: &ModelWeights, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_weights(weights, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_weights(weights: &ModelWeights, w: &mut impl Write) -> Result<()> {
    fileio::write_header(w, fileio::KIND_WEIGHTS)?;
    fileio::write_u8(w, weights.spec.family.as_u8())?;
    let (c, h, wd) = weights.spec.input_shape;
    fileio::write_u32(w, c as u32)?;
    fileio::write_u32(w, h as u32)?;
    fileio::write_u32(w, wd as u32)?;
    fileio::write_u32(w, weights.spec.class_count as u32)?;
    fileio::write_u32(w, weights.spec.width as u32)?;
    fileio::write_u64(w, weights.spec.seed)?;
    fileio::write_u8(w, weights.training_tag.as_u8())?;
    fileio::write_u8(w, weights.ema_applied as u8)?;
    fileio::write_u32(w, weights.tensors.len() as u32)?;
    for (name, tensor) in &weights.tensors {
        fileio::write_tensor_record(w, name, tensor)?;
    }
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<ModelWeights> {
    let mut r = BufReader::new(File::open(path)?);
    read_weights(&mut r)
}

pub fn read_weights(r: &mut impl Read) -> Result<ModelWeights> {
    let kind = fileio::read_header(r)?;
    if kind != fileio::KIND_WEIGHTS {
        return Err(AresError::InvalidArgument(format!(
            "expected a weights file, found kind byte {kind}"
        )));
    }
    let family = ModelFamily::from_u8(fileio::read_u8(r, "family")?)?;
    let c = fileio::read_u32(r, "input C")? as usize;
    let h = fileio::read_u32(r, "input H")? as usize;
    let w = fileio::read_u32(r, "input W")? as usize;
    let class_count = fileio::read_u32(r, "class count")? as usize;
    let width = fileio::read_u32(r, "width")? as usize;
    let seed = fileio::read_u64(r, "seed")?;
    let training_tag = TrainingTag::from_u8(fileio::read_u8(r, "training tag")?)?;
    let ema_applied = fileio::read_u8(r, "ema flag")? != 0;
    let count = fileio::read_u32(r, "tensor count")? as usize;
    let spec = ModelSpec { family, input_shape: (c, h, w), class_count, width, seed };
    let layout = spec.tensor_layout()?;
    if count != layout.len() {
        return Err(AresError::InvalidSpec(format!(
            "file has {count} tensors, spec expects {}",
            layout.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for (name, shape) in layout {
        let (got_name, tensor) = fileio::read_tensor_record(r)?;
        if got_name != name {
            return Err(AresError::InvalidSpec(format!(
                "tensor order mismatch: expected '{name}', found '{got_name}'"
            )));
        }
        if tensor.shape() != shape.as_slice() {
            return Err(AresError::shape(&name, &shape, tensor.shape()));
        }
        tensors.push((name, tensor));
    }
    Ok(ModelWeights { spec, tensors, training_tag, ema_applied })
}
