//! Frequency-bias analysis: unitary 2-D DFT, ideal radial low-pass sweep,
//! per-sample minimum cutoff bandwidth, the ACC-LPB curve and the scalar
//! frequency-bias metric (mean minimum cutoff over correctly classified
//! samples; lower means more low-frequency reliance).

use crate::data::LabeledDataset;
use crate::error::{AresError, Result};
use crate::layers::Layer;
use crate::model::predict_with_layers;
use crate::tensor::Tensor;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Unitary 2-D DFT of a `[H,W]` real channel, row-major complex output.
pub fn dft2(channel: &Tensor) -> Result<Vec<Complex64>> {
    let shape = channel.shape();
    if shape.len() != 2 {
        return Err(AresError::shape("dft2", &[0, 0], shape));
    }
    let (h, w) = (shape[0], shape[1]);
    let input: Vec<Complex64> = channel
        .data()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    Ok(dft2_complex(&input, h, w, -1.0))
}

/// Unitary inverse 2-D DFT.
pub fn idft2(spectrum: &[Complex64], h: usize, w: usize) -> Result<Vec<Complex64>> {
    if spectrum.len() != h * w {
        return Err(AresError::InvalidArgument(format!(
            "spectrum length {} does not match {h}x{w}",
            spectrum.len()
        )));
    }
    Ok(dft2_complex(spectrum, h, w, 1.0))
}

/// Separable DFT with kernel sign `s` (-1 forward, +1 inverse), normalized
/// by 1/sqrt(HW) in each direction combined.
fn dft2_complex(input: &[Complex64], h: usize, w: usize, s: f64) -> Vec<Complex64> {
    let tw_w = twiddle(w, s);
    let tw_h = twiddle(h, s);
    // Rows.
    let mut mid = vec![Complex64::new(0.0, 0.0); h * w];
    for y in 0..h {
        for v in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in 0..w {
                acc += input[y * w + x] * tw_w[(x * v) % w];
            }
            mid[y * w + v] = acc;
        }
    }
    // Columns.
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    let norm = 1.0 / ((h * w) as f64).sqrt();
    for v in 0..w {
        for u in 0..h {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..h {
                acc += mid[y * w + v] * tw_h[(y * u) % h];
            }
            out[u * w + v] = acc * norm;
        }
    }
    out
}

fn twiddle(n: usize, s: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let angle = s * std::f64::consts::TAU * k as f64 / n as f64;
            Complex64::new(angle.cos(), angle.sin())
        })
        .collect()
}

pub fn spectrum_energy(spectrum: &[Complex64]) -> f64 {
    spectrum.iter().map(|c| c.norm_sqr()).sum()
}

/// Largest meaningful bandwidth: every frequency lies within this radius.
pub fn max_bandwidth(h: usize, w: usize) -> usize {
    let r = ((h as f64 / 2.0).powi(2) + (w as f64 / 2.0).powi(2)).sqrt();
    r.ceil() as usize
}

/// Signed frequency of DFT index `u` on an axis of length `n`.
fn signed_freq(u: usize, n: usize) -> f64 {
    if u <= n / 2 {
        u as f64
    } else {
        u as f64 - n as f64
    }
}

/// Ideal radial low-pass: keeps frequencies within distance `b` of DC,
/// inverse-transforms, and clips the real part to [0,1]. At `b == b_max`
/// every frequency is kept, so the input is returned verbatim.
pub fn lowpass(image: &Tensor, bandwidth: usize) -> Result<Tensor> {
    let shape = image.shape();
    if shape.len() != 3 {
        return Err(AresError::shape("lowpass", &[3, 0, 0], shape));
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let b_max = max_bandwidth(h, w);
    if bandwidth > b_max {
        return Err(AresError::InvalidArgument(format!(
            "bandwidth {bandwidth} out of range 0..={b_max}"
        )));
    }
    if bandwidth == b_max {
        return Ok(image.clone());
    }
    let mut out = Tensor::zeros(shape);
    let limit_sq = (bandwidth * bandwidth) as f64;
    for ci in 0..c {
        let channel = Tensor::from_vec(&[h, w], image.data()[ci * h * w..(ci + 1) * h * w].to_vec())?;
        let mut spectrum = dft2(&channel)?;
        for u in 0..h {
            let fu = signed_freq(u, h);
            for v in 0..w {
                let fv = signed_freq(v, w);
                if fu * fu + fv * fv > limit_sq {
                    spectrum[u * w + v] = Complex64::new(0.0, 0.0);
                }
            }
        }
        let restored = idft2(&spectrum, h, w)?;
        let max_imag = restored.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        if max_imag > 1e-10 {
            return Err(AresError::NonFinite(format!(
                "lowpass imaginary residue {max_imag}"
            )));
        }
        for (o, z) in out.data_mut()[ci * h * w..(ci + 1) * h * w]
            .iter_mut()
            .zip(&restored)
        {
            *o = z.re.clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Minimum cutoff for one sample: excluded when the clean sample is already
/// misclassified, otherwise the first grid bandwidth that keeps the
/// classification correct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cutoff {
    Excluded,
    Value(f64),
}

pub fn min_cutoff(layers: &[Layer], x: &Tensor, label: usize, grid: &[usize]) -> Result<Cutoff> {
    validate_grid(grid, x.shape()[2], x.shape()[3])?;
    let clean = predict_with_layers(layers, x)?[0];
    if clean != label {
        return Ok(Cutoff::Excluded);
    }
    let single = x.reshape(&x.shape()[1..])?;
    for &b in grid {
        let filtered = lowpass(&single, b)?;
        let mut shape = vec![1usize];
        shape.extend_from_slice(filtered.shape());
        let batched = filtered.reshape(&shape)?;
        if predict_with_layers(layers, &batched)?[0] == label {
            return Ok(Cutoff::Value(b as f64));
        }
    }
    // Unreachable with a grid ending at b_max: the filter is the identity
    // there and the clean prediction was correct.
    Err(AresError::InvalidArgument(
        "no grid bandwidth preserved the classification; grid must end at b_max".into(),
    ))
}

fn validate_grid(grid: &[usize], h: usize, w: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(AresError::EmptyInput("bandwidth grid"));
    }
    if grid.windows(2).any(|g| g[1] <= g[0]) {
        return Err(AresError::InvalidArgument(
            "bandwidth grid must be strictly ascending".into(),
        ));
    }
    let b_max = max_bandwidth(h, w);
    if *grid.last().unwrap() != b_max {
        return Err(AresError::InvalidArgument(format!(
            "bandwidth grid must end at b_max = {b_max}"
        )));
    }
    Ok(())
}

/// The full integer grid 0..=b_max for an image size.
pub fn full_grid(h: usize, w: usize) -> Vec<usize> {
    (0..=max_bandwidth(h, w)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqReport {
    pub bandwidth_grid: Vec<usize>,
    /// Accuracy at each bandwidth divided by clean accuracy, capped at 1.
    pub acc_lpb: Vec<f64>,
    /// One entry per sample; `None` marks clean-misclassified (excluded).
    pub per_sample_fc: Vec<Option<f64>>,
    pub f_bias: f64,
    /// Number of correctly classified (included) samples.
    pub n_prime: usize,
    pub clean_accuracy: f64,
}

/// Sweeps the low-pass bandwidth over the whole test set.
pub fn frequency_bias(
    layers: &[Layer],
    test_set: &LabeledDataset,
    grid: &[usize],
) -> Result<FreqReport> {
    let (h, w) = (test_set.images.shape()[2], test_set.images.shape()[3]);
    validate_grid(grid, h, w)?;
    let n = test_set.len();
    if n == 0 {
        return Err(AresError::EmptyInput("frequency_bias test set"));
    }

    struct Row {
        clean_correct: bool,
        correct_at: Vec<bool>,
    }
    let rows: Vec<Result<Row>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = test_set.images.sample_tensor(i);
            let label = test_set.labels[i];
            let clean_correct = predict_with_layers(layers, &x)?[0] == label;
            let single = x.reshape(&x.shape()[1..])?;
            let mut correct_at = Vec::with_capacity(grid.len());
            for &b in grid {
                let filtered = lowpass(&single, b)?;
                let mut shape = vec![1usize];
                shape.extend_from_slice(filtered.shape());
                let batched = filtered.reshape(&shape)?;
                correct_at.push(predict_with_layers(layers, &batched)?[0] == label);
            }
            Ok(Row {
                clean_correct,
                correct_at,
            })
        })
        .collect();
    let rows: Result<Vec<Row>> = rows.into_iter().collect();
    let rows = rows?;

    let clean_count = rows.iter().filter(|r| r.clean_correct).count();
    if clean_count == 0 {
        return Err(AresError::InvalidArgument(
            "clean accuracy is zero; frequency bias undefined".into(),
        ));
    }
    let clean_accuracy = clean_count as f64 / n as f64;

    let acc_lpb: Vec<f64> = (0..grid.len())
        .map(|j| {
            let acc = rows.iter().filter(|r| r.correct_at[j]).count() as f64 / n as f64;
            (acc / clean_accuracy).min(1.0)
        })
        .collect();

    let mut per_sample_fc = Vec::with_capacity(n);
    let mut fc_sum = 0.0;
    for row in &rows {
        if !row.clean_correct {
            per_sample_fc.push(None);
            continue;
        }
        let first = row
            .correct_at
            .iter()
            .position(|&c| c)
            .expect("grid ends at b_max where the filter is the identity");
        let fc = grid[first] as f64;
        fc_sum += fc;
        per_sample_fc.push(Some(fc));
    }
    let f_bias = fc_sum / clean_count as f64;

    Ok(FreqReport {
        bandwidth_grid: grid.to_vec(),
        acc_lpb,
        per_sample_fc,
        f_bias,
        n_prime: clean_count,
        clean_accuracy,
    })
}
