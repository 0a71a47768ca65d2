//! Parametric image corruptions with five severities each.
//!
//! The severity parameter tables are a calibrated stand-in chosen so the
//! reference model's accuracy decays roughly monotonically across severities;
//! they are frozen here and documented in the README.

use crate::error::{AresError, Result};
use crate::rng::{self, tag};
use crate::tensor::{chw_index, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    GaussianBlur,
    Contrast,
    Brightness,
}

pub const ALL_KINDS: [CorruptionKind; 6] = [
    CorruptionKind::GaussianNoise,
    CorruptionKind::ShotNoise,
    CorruptionKind::ImpulseNoise,
    CorruptionKind::GaussianBlur,
    CorruptionKind::Contrast,
    CorruptionKind::Brightness,
];

impl CorruptionKind {
    pub fn name(&self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::ShotNoise => "shot_noise",
            CorruptionKind::ImpulseNoise => "impulse_noise",
            CorruptionKind::GaussianBlur => "gaussian_blur",
            CorruptionKind::Contrast => "contrast",
            CorruptionKind::Brightness => "brightness",
        }
    }

    pub fn from_name(name: &str) -> Result<CorruptionKind> {
        ALL_KINDS
            .iter()
            .find(|k| k.name() == name)
            .copied()
            .ok_or_else(|| AresError::InvalidArgument(format!("unknown corruption kind '{name}'")))
    }

    fn index(&self) -> u64 {
        ALL_KINDS.iter().position(|k| k == self).unwrap() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8, seed: u64) -> Result<CorruptionSpec> {
        if !(1..=5).contains(&severity) {
            return Err(AresError::InvalidArgument(format!(
                "severity must be 1..=5, got {severity}"
            )));
        }
        Ok(CorruptionSpec { kind, severity, seed })
    }
}

/// The scalar severity parameter for each (kind, severity) pair.
pub fn severity_param(kind: CorruptionKind, severity: u8) -> Result<f64> {
    if !(1..=5).contains(&severity) {
        return Err(AresError::InvalidArgument(format!(
            "severity must be 1..=5, got {severity}"
        )));
    }
    let table: [f64; 5] = match kind {
        CorruptionKind::GaussianNoise => [0.04, 0.08, 0.12, 0.18, 0.26],
        CorruptionKind::ShotNoise => [60.0, 25.0, 12.0, 5.0, 3.0],
        CorruptionKind::ImpulseNoise => [0.01, 0.03, 0.06, 0.10, 0.17],
        CorruptionKind::GaussianBlur => [0.4, 0.6, 0.9, 1.3, 1.8],
        CorruptionKind::Contrast => [0.75, 0.60, 0.45, 0.30, 0.18],
        CorruptionKind::Brightness => [0.08, 0.14, 0.20, 0.27, 0.35],
    };
    Ok(table[(severity - 1) as usize])
}

/// The full 30-row (kind, severity) -> parameter mapping.
pub fn corruption_table() -> Vec<(CorruptionKind, u8, f64)> {
    let mut rows = Vec::with_capacity(30);
    for kind in ALL_KINDS {
        for severity in 1..=5u8 {
            rows.push((kind, severity, severity_param(kind, severity).unwrap()));
        }
    }
    rows
}

fn corruption_rng(spec: &CorruptionSpec, sample_index: u64) -> ChaCha8Rng {
    let base = rng::derive(
        spec.seed,
        tag::CORRUPTION,
        (spec.kind.index() << 3) | spec.severity as u64,
    );
    rng::stream(base, 0x11, sample_index)
}

/// Applies one corruption to a single `[C,H,W]` image in `[0,1]`.
/// Stochastic kinds draw from a stream keyed by (seed, sample_index).
pub fn apply_corruption(image: &Tensor, spec: &CorruptionSpec, sample_index: u64) -> Result<Tensor> {
    let shape = image.shape();
    if shape.len() != 3 {
        return Err(AresError::shape("apply_corruption", &[3, 0, 0], shape));
    }
    let param = severity_param(spec.kind, spec.severity)?;
    let mut rng = corruption_rng(spec, sample_index);
    let out = match spec.kind {
        CorruptionKind::GaussianNoise => gaussian_noise(image, param, &mut rng),
        CorruptionKind::ShotNoise => shot_noise(image, param, &mut rng),
        CorruptionKind::ImpulseNoise => impulse_noise(image, param, &mut rng),
        CorruptionKind::GaussianBlur => gaussian_blur(image, param),
        CorruptionKind::Contrast => contrast(image, param),
        CorruptionKind::Brightness => brightness(image, param),
    };
    out.ensure_finite("apply_corruption output")?;
    Ok(out)
}

/// Corrupts every image in a `[N,C,H,W]` batch, one stream per sample.
pub fn corrupt_batch(images: &Tensor, spec: &CorruptionSpec) -> Result<Tensor> {
    let n = images.batch_len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let sample = images.sample_tensor(i);
        let single = sample.reshape(&sample.shape()[1..])?;
        let corrupted = apply_corruption(&single, spec, i as u64)?;
        let mut shape = vec![1];
        shape.extend_from_slice(corrupted.shape());
        out.push(corrupted.reshape(&shape)?);
    }
    Tensor::stack(&out)
}

fn gaussian_noise(image: &Tensor, sigma: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let data = image
        .data()
        .iter()
        .map(|&x| {
            let n: f64 = StandardNormal.sample(rng);
            (x + sigma * n).clamp(0.0, 1.0)
        })
        .collect();
    Tensor::from_vec(image.shape(), data).unwrap()
}

fn shot_noise(image: &Tensor, lambda: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let data = image
        .data()
        .iter()
        .map(|&x| {
            let mean = x.max(0.0) * lambda;
            let count = if mean > 0.0 {
                Poisson::new(mean).expect("positive mean").sample(rng)
            } else {
                0.0
            };
            (count / lambda).clamp(0.0, 1.0)
        })
        .collect();
    Tensor::from_vec(image.shape(), data).unwrap()
}

fn impulse_noise(image: &Tensor, fraction: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let data = image
        .data()
        .iter()
        .map(|&x| {
            let u: f64 = rng.gen_range(0.0..1.0);
            if u < fraction / 2.0 {
                0.0
            } else if u < fraction {
                1.0
            } else {
                x
            }
        })
        .collect();
    Tensor::from_vec(image.shape(), data).unwrap()
}

/// Separable Gaussian blur with replicated edges; sigma <= 0 is the identity.
fn gaussian_blur(image: &Tensor, sigma: f64) -> Tensor {
    if sigma <= 0.0 {
        return image.clone();
    }
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    let x = image.data();
    let mut mid = vec![0.0; x.len()];
    for ci in 0..c {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = 0.0;
                for (ki, kv) in kernel.iter().enumerate() {
                    let sx = (xx as isize + ki as isize - radius).clamp(0, w as isize - 1) as usize;
                    acc += kv * x[chw_index(h, w, ci, y, sx)];
                }
                mid[chw_index(h, w, ci, y, xx)] = acc;
            }
        }
    }
    let mut out = vec![0.0; x.len()];
    for ci in 0..c {
        for y in 0..h {
            for xx in 0..w {
                let mut acc = 0.0;
                for (ki, kv) in kernel.iter().enumerate() {
                    let sy = (y as isize + ki as isize - radius).clamp(0, h as isize - 1) as usize;
                    acc += kv * mid[chw_index(h, w, ci, sy, xx)];
                }
                out[chw_index(h, w, ci, y, xx)] = acc.clamp(0.0, 1.0);
            }
        }
    }
    Tensor::from_vec(image.shape(), out).unwrap()
}

/// Scales contrast around each channel's mean.
fn contrast(image: &Tensor, factor: f64) -> Tensor {
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    let mut out = image.clone();
    for ci in 0..c {
        let start = ci * h * w;
        let chan = &image.data()[start..start + h * w];
        let mean = chan.iter().sum::<f64>() / (h * w) as f64;
        for (o, &v) in out.data_mut()[start..start + h * w].iter_mut().zip(chan) {
            *o = (mean + factor * (v - mean)).clamp(0.0, 1.0);
        }
    }
    out
}

fn brightness(image: &Tensor, shift: f64) -> Tensor {
    image.map(|v| (v + shift).clamp(0.0, 1.0))
}
