//! Deterministic synthetic labeled images: eight shape classes on textured
//! backgrounds, with position, scale, hue and texture as nuisance factors.

use crate::error::{AresError, Result};
use crate::fileio;
use crate::rng::{self, tag};
use crate::tensor::{chw_index, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

pub const SHAPE_NAMES: [&str; 8] = [
    "circle", "square", "triangle", "cross", "ring", "star", "bar", "checker",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub class_count: usize,
    pub image_shape: (usize, usize, usize),
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            class_count: 8,
            image_shape: (3, 32, 32),
            train_size: 1024,
            test_size: 256,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 || self.class_count > SHAPE_NAMES.len() {
            return Err(AresError::InvalidSpec(format!(
                "class_count must be in 2..={}, got {}",
                SHAPE_NAMES.len(),
                self.class_count
            )));
        }
        let (c, h, w) = self.image_shape;
        if c != 3 || h < 16 || w < 16 {
            return Err(AresError::InvalidSpec(format!(
                "image shape must be (3, >=16, >=16), got ({c},{h},{w})"
            )));
        }
        if self.train_size < self.class_count || self.test_size < self.class_count {
            return Err(AresError::InvalidSpec(
                "split sizes must be >= class_count".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn as_u8(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }

    fn from_u8(v: u8) -> Result<Split> {
        match v {
            0 => Ok(Split::Train),
            1 => Ok(Split::Test),
            _ => Err(AresError::InvalidSpec(format!("unknown split byte {v}"))),
        }
    }

    /// Sample streams for the two splits never collide.
    fn stream_offset(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1 << 32,
        }
    }
}

/// Images in `[0,1]` plus integer labels, one label per batch row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Generates both splits deterministically from the spec seed.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    Ok(Dataset {
        spec: *spec,
        train: generate_split(spec, Split::Train)?,
        test: generate_split(spec, Split::Test)?,
    })
}

/// Generates one split. Labels cycle over the classes, so class counts are
/// balanced within one sample.
pub fn generate_split(spec: &DatasetSpec, split: Split) -> Result<LabeledDataset> {
    spec.validate()?;
    let n = match split {
        Split::Train => spec.train_size,
        Split::Test => spec.test_size,
    };
    let (c, h, w) = spec.image_shape;
    let mut images = Tensor::zeros(&[n, c, h, w]);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % spec.class_count;
        labels.push(label);
        let mut rng = rng::stream(spec.seed, tag::DATASET, split.stream_offset() + i as u64);
        render_sample(images.sample_mut(i), h, w, label, &mut rng);
    }
    images.ensure_finite("generated dataset")?;
    Ok(LabeledDataset { images, labels })
}

/// HSV (h in [0,1)) to RGB, all components in [0,1].
fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.fract() + 1.0).fract() * 6.0;
    let i = h6.floor() as usize % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Even-odd crossing test for a closed polygon.
fn point_in_polygon(px: f64, py: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (x1, y1) = poly[i];
        let (x2, y2) = poly[(i + 1) % n];
        if (y1 > py) != (y2 > py) {
            let xint = x1 + (py - y1) / (y2 - y1) * (x2 - x1);
            if px < xint {
                inside = !inside;
            }
        }
    }
    inside
}

struct SampleParams {
    cx: f64,
    cy: f64,
    radius: f64,
    fg: [f64; 3],
    bg: [f64; 3],
    waves: [(f64, f64, f64, f64, [f64; 3]); 3],
    noise_amp: f64,
    bar_vertical: bool,
    star: Vec<(f64, f64)>,
    stripe_amp: f64,
    stripe_phase: f64,
}

/// Per-class interior stripe texture (period in pixels, orientation).
/// The fine texture co-varies with the class, giving gradient descent a
/// high-frequency shortcut; the silhouette remains the low-frequency cue.
const STRIPES: [(f64, f64); 8] = [
    (2.0, 0.0),
    (2.0, 90.0),
    (3.0, 45.0),
    (3.0, 135.0),
    (2.0, 45.0),
    (3.0, 90.0),
    (2.0, 135.0),
    (3.0, 0.0),
];

fn draw_params(h: usize, w: usize, rng: &mut ChaCha8Rng) -> SampleParams {
    let size = h.min(w) as f64;
    let cx = rng.gen_range(0.38..0.62) * w as f64;
    let cy = rng.gen_range(0.38..0.62) * h as f64;
    let radius = rng.gen_range(0.18..0.30) * size;
    // Moderate silhouette contrast: the interior stripe texture stays the
    // easiest single cue, the outline remains clearly learnable.
    let bg: [f64; 3] = [
        rng.gen_range(0.10..0.45),
        rng.gen_range(0.10..0.45),
        rng.gen_range(0.10..0.45),
    ];
    let bg_mean = (bg[0] + bg[1] + bg[2]) / 3.0;
    let mut fg_value: f64 = rng.gen_range(0.55..0.95);
    if fg_value - bg_mean < 0.30 {
        fg_value = (bg_mean + 0.30).min(0.95);
    }
    let fg = hsv_to_rgb(
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.40..0.80),
        fg_value,
    );
    let mut waves = [(0.0, 0.0, 0.0, 0.0, [0.0; 3]); 3];
    for wave in &mut waves {
        *wave = (
            rng.gen_range(0.02..0.06),
            rng.gen_range(1.0..8.0),
            rng.gen_range(1.0..8.0),
            rng.gen_range(0.0..std::f64::consts::TAU),
            [
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
            ],
        );
    }
    let noise_amp = rng.gen_range(0.01..0.03);
    let bar_vertical = rng.gen_bool(0.5);
    // Ten-vertex star polygon, outer radius 1, inner 0.42, a spike pointing up.
    let star = (0..10)
        .map(|i| {
            let angle = -std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::PI / 5.0;
            let r = if i % 2 == 0 { 1.0 } else { 0.42 };
            (r * angle.cos(), r * angle.sin())
        })
        .collect();
    let stripe_amp = rng.gen_range(0.05..0.10);
    let stripe_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    SampleParams {
        cx,
        cy,
        radius,
        fg,
        bg,
        waves,
        noise_amp,
        bar_vertical,
        star,
        stripe_amp,
        stripe_phase,
    }
}

fn shape_hit(label: usize, u: f64, v: f64, p: &SampleParams) -> bool {
    match label {
        // circle
        0 => u * u + v * v <= 1.0,
        // square
        1 => u.abs().max(v.abs()) <= 0.9,
        // triangle, apex up
        2 => {
            let (ax, ay) = (0.0, -1.0);
            let (bx, by) = (-0.95, 0.75);
            let (cx, cy) = (0.95, 0.75);
            let sign = |x1: f64, y1: f64, x2: f64, y2: f64| (u - x2) * (y1 - y2) - (x1 - x2) * (v - y2);
            let d1 = sign(ax, ay, bx, by);
            let d2 = sign(bx, by, cx, cy);
            let d3 = sign(cx, cy, ax, ay);
            let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
            let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
            !(has_neg && has_pos)
        }
        // cross
        3 => (u.abs() <= 0.33 && v.abs() <= 1.0) || (v.abs() <= 0.33 && u.abs() <= 1.0),
        // ring
        4 => {
            let d = (u * u + v * v).sqrt();
            (0.55..=1.0).contains(&d)
        }
        // star
        5 => point_in_polygon(u, v, &p.star),
        // bar
        6 => {
            let (a, b) = if p.bar_vertical { (v, u) } else { (u, v) };
            a.abs() <= 1.05 && b.abs() <= 0.28
        }
        // checker: 4x4 alternating cells inside a square
        7 => {
            if u.abs().max(v.abs()) > 1.0 {
                false
            } else {
                let cu = ((u + 1.0) / 0.5).floor() as i64;
                let cv = ((v + 1.0) / 0.5).floor() as i64;
                (cu + cv) % 2 == 0
            }
        }
        _ => false,
    }
}

fn render_sample(out: &mut [f64], h: usize, w: usize, label: usize, rng: &mut ChaCha8Rng) {
    let p = draw_params(h, w, rng);
    // Noise field drawn after the shape parameters, in pixel order.
    let noise: Vec<f64> = (0..3 * h * w)
        .map(|_| rng.gen_range(-p.noise_amp..p.noise_amp))
        .collect();
    let (stripe_period, stripe_theta) = STRIPES[label % STRIPES.len()];
    let theta = stripe_theta.to_radians();
    let (stripe_dx, stripe_dy) = (theta.cos(), theta.sin());
    let sub = [0.25, 0.75];
    for y in 0..h {
        for x in 0..w {
            // 2x2 subsample coverage for smooth edges.
            let mut cover = 0.0;
            for dy in sub {
                for dx in sub {
                    let u = (x as f64 + dx - p.cx) / p.radius;
                    let v = (y as f64 + dy - p.cy) / p.radius;
                    if shape_hit(label, u, v, &p) {
                        cover += 0.25;
                    }
                }
            }
            // Class stripe texture over the shape interior.
            let stripe = p.stripe_amp
                * (std::f64::consts::TAU * (stripe_dx * x as f64 + stripe_dy * y as f64)
                    / stripe_period
                    + p.stripe_phase)
                    .sin();
            let uu = x as f64 / w as f64;
            let vv = y as f64 / h as f64;
            for c in 0..3 {
                let mut texture = 0.0;
                for (amp, fx, fy, phase, cw) in &p.waves {
                    texture += amp
                        * cw[c]
                        * (std::f64::consts::TAU * (fx * uu + fy * vv) + phase).sin();
                }
                let bg = p.bg[c] + texture;
                let value = cover * (p.fg[c] + stripe)
                    + (1.0 - cover) * bg
                    + noise[chw_index(h, w, c, y, x)];
                out[chw_index(h, w, c, y, x)] = value.clamp(0.0, 1.0);
            }
        }
    }
}

pub fn save_split(dataset: &LabeledDataset, spec: &DatasetSpec, split: Split, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_split(dataset, spec, split, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_split(
    dataset: &LabeledDataset,
    spec: &DatasetSpec,
    split: Split,
    w: &mut impl Write,
) -> Result<()> {
    fileio::write_header(w, fileio::KIND_DATASET)?;
    fileio::write_u32(w, spec.class_count as u32)?;
    let (c, h, wd) = spec.image_shape;
    fileio::write_u32(w, c as u32)?;
    fileio::write_u32(w, h as u32)?;
    fileio::write_u32(w, wd as u32)?;
    fileio::write_u64(w, spec.seed)?;
    fileio::write_u8(w, split.as_u8())?;
    fileio::write_u32(w, dataset.len() as u32)?;
    fileio::write_tensor_record(w, "images", &dataset.images)?;
    let labels = Tensor::from_vec(
        &[dataset.labels.len()],
        dataset.labels.iter().map(|&l| l as f64).collect(),
    )?;
    fileio::write_tensor_record(w, "labels", &labels)?;
    Ok(())
}

pub fn load_split(path: &Path) -> Result<(DatasetSpec, Split, LabeledDataset)> {
    let mut r = BufReader::new(File::open(path)?);
    let kind = fileio::read_header(&mut r)?;
    if kind != fileio::KIND_DATASET {
        return Err(AresError::InvalidArgument(format!(
            "expected a dataset file, found kind byte {kind}"
        )));
    }
    let class_count = fileio::read_u32(&mut r, "class count")? as usize;
    let c = fileio::read_u32(&mut r, "C")? as usize;
    let h = fileio::read_u32(&mut r, "H")? as usize;
    let w = fileio::read_u32(&mut r, "W")? as usize;
    let seed = fileio::read_u64(&mut r, "seed")?;
    let split = Split::from_u8(fileio::read_u8(&mut r, "split")?)?;
    let n = fileio::read_u32(&mut r, "sample count")? as usize;
    let (img_name, images) = fileio::read_tensor_record(&mut r)?;
    let (lbl_name, labels) = fileio::read_tensor_record(&mut r)?;
    if img_name != "images" || lbl_name != "labels" {
        return Err(AresError::InvalidArgument(
            "dataset records out of order".into(),
        ));
    }
    if images.shape() != [n, c, h, w] {
        return Err(AresError::shape("dataset images", &[n, c, h, w], images.shape()));
    }
    let labels = labels.data().iter().map(|&v| v as usize).collect();
    // Split sizes are not stored independently; reconstruct a spec that
    // carries this split's size in the matching slot.
    let spec = DatasetSpec {
        class_count,
        image_shape: (c, h, w),
        train_size: if split == Split::Train { n } else { class_count },
        test_size: if split == Split::Test { n } else { class_count },
        seed,
    };
    Ok((spec, split, LabeledDataset { images, labels }))
}
