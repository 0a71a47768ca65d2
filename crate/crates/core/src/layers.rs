//! The fixed layer set and its hand-written forward/backward passes.
//!
//! Layers: 3x3 convolution (stride 1, zero padding 1), ReLU, 2x2 average
//! pooling, dense, and patch embedding (non-overlapping PxP patches mapped
//! through a shared linear projection). The classification head is softmax
//! cross-entropy over soft targets.
//!
//! Dense and patch-embed weights are stored `[in, out]`, so a dense layer
//! applied to basis vector `e_i` returns row `i` of the weight matrix.
//! Convolution weights are `[c_out, c_in, 3, 3]`.

use crate::error::{AresError, Result};
use crate::tensor::{chw_index, Tensor};

/// One layer of a model. Parameterized layers own their weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv3x3 { weight: Tensor, bias: Tensor },
    Relu,
    AvgPool2x2,
    PatchEmbed { patch: usize, weight: Tensor, bias: Tensor },
    Dense { weight: Tensor, bias: Tensor },
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv3x3 { .. } => "conv3x3",
            Layer::Relu => "relu",
            Layer::AvgPool2x2 => "avgpool2x2",
            Layer::PatchEmbed { .. } => "patch_embed",
            Layer::Dense { .. } => "dense",
        }
    }

    /// Parameter tensors in a fixed order (weight before bias).
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv3x3 { weight, bias }
            | Layer::PatchEmbed { weight, bias, .. }
            | Layer::Dense { weight, bias } => vec![weight, bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv3x3 { weight, bias }
            | Layer::PatchEmbed { weight, bias, .. }
            | Layer::Dense { weight, bias } => vec![weight, bias],
            _ => vec![],
        }
    }

    /// Output shape for an input shape `[B, ...]`, or a structured error.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match self {
            Layer::Conv3x3 { weight, .. } => {
                let w = weight.shape();
                if input.len() != 4 {
                    return Err(format!("conv3x3 expects [B,C,H,W], got {input:?}"));
                }
                if input[1] != w[1] {
                    return Err(format!(
                        "conv3x3 input channels {} != weight channels {}",
                        input[1], w[1]
                    ));
                }
                Ok(vec![input[0], w[0], input[2], input[3]])
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::AvgPool2x2 => {
                if input.len() != 4 {
                    return Err(format!("avgpool2x2 expects [B,C,H,W], got {input:?}"));
                }
                if input[2] % 2 != 0 || input[3] % 2 != 0 {
                    return Err(format!(
                        "avgpool2x2 needs even spatial dims, got {}x{}",
                        input[2], input[3]
                    ));
                }
                Ok(vec![input[0], input[1], input[2] / 2, input[3] / 2])
            }
            Layer::PatchEmbed { patch, weight, .. } => {
                if input.len() != 4 {
                    return Err(format!("patch_embed expects [B,C,H,W], got {input:?}"));
                }
                let (c, h, w) = (input[1], input[2], input[3]);
                if h % patch != 0 || w % patch != 0 {
                    return Err(format!(
                        "patch_embed patch {patch} does not divide {h}x{w}"
                    ));
                }
                let patch_dim = c * patch * patch;
                if weight.shape()[0] != patch_dim {
                    return Err(format!(
                        "patch_embed weight rows {} != patch dim {patch_dim}",
                        weight.shape()[0]
                    ));
                }
                Ok(vec![input[0], weight.shape()[1], h / patch, w / patch])
            }
            Layer::Dense { weight, .. } => {
                let flat: usize = input[1..].iter().product();
                if weight.shape()[0] != flat {
                    return Err(format!(
                        "dense weight rows {} != flattened input {flat}",
                        weight.shape()[0]
                    ));
                }
                Ok(vec![input[0], weight.shape()[1]])
            }
        }
    }

    /// Forward pass. The input shape must already be validated.
    pub fn forward(&self, input: &Tensor) -> Tensor {
        match self {
            Layer::Conv3x3 { weight, bias } => conv3x3_forward(input, weight, bias),
            Layer::Relu => input.map(|v| if v > 0.0 { v } else { 0.0 }),
            Layer::AvgPool2x2 => avgpool_forward(input),
            Layer::PatchEmbed { patch, weight, bias } => {
                patch_embed_forward(input, *patch, weight, bias)
            }
            Layer::Dense { weight, bias } => dense_forward(input, weight, bias),
        }
    }

    /// Backward pass given the layer input and the upstream gradient.
    /// Returns (parameter gradients, input gradient).
    pub fn backward(&self, input: &Tensor, dout: &Tensor) -> (Vec<Tensor>, Tensor) {
        match self {
            Layer::Conv3x3 { weight, .. } => conv3x3_backward(input, weight, dout),
            Layer::Relu => (vec![], self.backward_input(input, dout)),
            Layer::AvgPool2x2 => (vec![], avgpool_backward(input, dout)),
            Layer::PatchEmbed { patch, weight, .. } => {
                patch_embed_backward(input, *patch, weight, dout)
            }
            Layer::Dense { weight, .. } => dense_backward(input, weight, dout),
        }
    }

    /// Input gradient only; skips the parameter-gradient work. Attacks call
    /// this once per step, so the saving is substantial.
    pub fn backward_input(&self, input: &Tensor, dout: &Tensor) -> Tensor {
        match self {
            Layer::Conv3x3 { weight, .. } => conv3x3_input_grad(input.shape(), weight, dout),
            Layer::Relu => input
                .zip_map(dout, |x, d| if x > 0.0 { d } else { 0.0 })
                .expect("relu shapes"),
            Layer::AvgPool2x2 => avgpool_backward(input, dout),
            Layer::PatchEmbed { patch, weight, .. } => {
                patch_embed_input_grad(input.shape(), *patch, weight, dout)
            }
            Layer::Dense { weight, .. } => dense_input_grad(input.shape(), weight, dout),
        }
    }
}

fn conv3x3_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    let [b, c_in, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]];
    let c_out = weight.shape()[0];
    let mut out = Tensor::zeros(&[b, c_out, h, w]);
    let x = input.data();
    let wt = weight.data();
    let o = out.data_mut();
    for bi in 0..b {
        let x_base = bi * c_in * h * w;
        let o_base = bi * c_out * h * w;
        for co in 0..c_out {
            let bias_v = bias.data()[co];
            let o_ch = o_base + co * h * w;
            for v in &mut o[o_ch..o_ch + h * w] {
                *v = bias_v;
            }
            for ci in 0..c_in {
                let x_ch = x_base + ci * h * w;
                for ky in 0..3usize {
                    let dy = ky as isize - 1;
                    for kx in 0..3usize {
                        let dx = kx as isize - 1;
                        let wv = wt[((co * c_in + ci) * 3 + ky) * 3 + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let y0 = (-dy).max(0) as usize;
                        let y1 = ((h as isize - dy).min(h as isize)) as usize;
                        let x0 = (-dx).max(0) as usize;
                        let x1 = ((w as isize - dx).min(w as isize)) as usize;
                        for y in y0..y1 {
                            let iy = (y as isize + dy) as usize;
                            let orow = o_ch + y * w;
                            let xrow = x_ch + iy * w;
                            for xx in x0..x1 {
                                let ix = (xx as isize + dx) as usize;
                                o[orow + xx] += wv * x[xrow + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv3x3_backward(input: &Tensor, weight: &Tensor, dout: &Tensor) -> (Vec<Tensor>, Tensor) {
    let [b, c_in, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]];
    let c_out = weight.shape()[0];
    let mut dw = Tensor::zeros(weight.shape());
    let mut db = Tensor::zeros(&[c_out]);
    let x = input.data();
    let d = dout.data();
    {
        let dwm = dw.data_mut();
        for bi in 0..b {
            let x_base = bi * c_in * h * w;
            let d_base = bi * c_out * h * w;
            for co in 0..c_out {
                let d_ch = d_base + co * h * w;
                db.data_mut()[co] += d[d_ch..d_ch + h * w].iter().sum::<f64>();
                for ci in 0..c_in {
                    let x_ch = x_base + ci * h * w;
                    for ky in 0..3usize {
                        let dy = ky as isize - 1;
                        for kx in 0..3usize {
                            let dx = kx as isize - 1;
                            let mut acc = 0.0;
                            let y0 = (-dy).max(0) as usize;
                            let y1 = ((h as isize - dy).min(h as isize)) as usize;
                            let x0 = (-dx).max(0) as usize;
                            let x1 = ((w as isize - dx).min(w as isize)) as usize;
                            for y in y0..y1 {
                                let iy = (y as isize + dy) as usize;
                                let drow = d_ch + y * w;
                                let xrow = x_ch + iy * w;
                                for xx in x0..x1 {
                                    let ix = (xx as isize + dx) as usize;
                                    acc += d[drow + xx] * x[xrow + ix];
                                }
                            }
                            dwm[((co * c_in + ci) * 3 + ky) * 3 + kx] += acc;
                        }
                    }
                }
            }
        }
    }
    let din = conv3x3_input_grad(input.shape(), weight, dout);
    (vec![dw, db], din)
}

fn conv3x3_input_grad(input_shape: &[usize], weight: &Tensor, dout: &Tensor) -> Tensor {
    let [b, c_in, h, w] = [input_shape[0], input_shape[1], input_shape[2], input_shape[3]];
    let c_out = weight.shape()[0];
    let mut din = Tensor::zeros(input_shape);
    let wt = weight.data();
    let d = dout.data();
    let dinm = din.data_mut();
    for bi in 0..b {
        let x_base = bi * c_in * h * w;
        let d_base = bi * c_out * h * w;
        for co in 0..c_out {
            let d_ch = d_base + co * h * w;
            for ci in 0..c_in {
                let x_ch = x_base + ci * h * w;
                for ky in 0..3usize {
                    let dy = ky as isize - 1;
                    for kx in 0..3usize {
                        let dx = kx as isize - 1;
                        let wv = wt[((co * c_in + ci) * 3 + ky) * 3 + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let y0 = (-dy).max(0) as usize;
                        let y1 = ((h as isize - dy).min(h as isize)) as usize;
                        let x0 = (-dx).max(0) as usize;
                        let x1 = ((w as isize - dx).min(w as isize)) as usize;
                        for y in y0..y1 {
                            let iy = (y as isize + dy) as usize;
                            let drow = d_ch + y * w;
                            let xrow = x_ch + iy * w;
                            for xx in x0..x1 {
                                let ix = (xx as isize + dx) as usize;
                                dinm[xrow + ix] += wv * d[drow + xx];
                            }
                        }
                    }
                }
            }
        }
    }
    din
}

fn avgpool_forward(input: &Tensor) -> Tensor {
    let [b, c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]];
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[b, c, oh, ow]);
    let x = input.data();
    let o = out.data_mut();
    for bc in 0..b * c {
        let x_ch = bc * h * w;
        let o_ch = bc * oh * ow;
        for y in 0..oh {
            for xx in 0..ow {
                let i0 = x_ch + (2 * y) * w + 2 * xx;
                let i1 = x_ch + (2 * y + 1) * w + 2 * xx;
                o[o_ch + y * ow + xx] = 0.25 * (x[i0] + x[i0 + 1] + x[i1] + x[i1 + 1]);
            }
        }
    }
    out
}

fn avgpool_backward(input: &Tensor, dout: &Tensor) -> Tensor {
    let [b, c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]];
    let (oh, ow) = (h / 2, w / 2);
    let mut din = Tensor::zeros(input.shape());
    let d = dout.data();
    let m = din.data_mut();
    for bc in 0..b * c {
        let x_ch = bc * h * w;
        let o_ch = bc * oh * ow;
        for y in 0..oh {
            for xx in 0..ow {
                let g = 0.25 * d[o_ch + y * ow + xx];
                let i0 = x_ch + (2 * y) * w + 2 * xx;
                let i1 = x_ch + (2 * y + 1) * w + 2 * xx;
                m[i0] += g;
                m[i0 + 1] += g;
                m[i1] += g;
                m[i1 + 1] += g;
            }
        }
    }
    din
}

fn patch_embed_forward(input: &Tensor, patch: usize, weight: &Tensor, bias: &Tensor) -> Tensor {
    let [b, c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]];
    let (gh, gw) = (h / patch, w / patch);
    let embed = weight.shape()[1];
    let patch_dim = c * patch * patch;
    let mut out = Tensor::zeros(&[b, embed, gh, gw]);
    let mut flat = vec![0.0; patch_dim];
    for bi in 0..b {
        let sample = input.sample(bi);
        for gy in 0..gh {
            for gx in 0..gw {
                let mut k = 0;
                for ci in 0..c {
                    for py in 0..patch {
                        for px in 0..patch {
                            flat[k] =
                                sample[chw_index(h, w, ci, gy * patch + py, gx * patch + px)];
                            k += 1;
                        }
                    }
                }
                for e in 0..embed {
                    let mut acc = bias.data()[e];
                    for (i, &v) in flat.iter().enumerate() {
                        acc += v * weight.data()[i * embed + e];
                    }
                    out.data_mut()[((bi * embed + e) * gh + gy) * gw + gx] = acc;
                }
            }
        }
    }
    out
}

fn patch_embed_backward(
    input: &Tensor,
    patch: usize,
    weight: &Tensor,
    dout: &Tensor,
) -> (Vec<Tensor>, Tensor) {
    let [b, c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]];
    let (gh, gw) = (h / patch, w / patch);
    let embed = weight.shape()[1];
    let mut dw = Tensor::zeros(weight.shape());
    let mut db = Tensor::zeros(&[embed]);
    let mut din = Tensor::zeros(input.shape());
    for bi in 0..b {
        let sample = input.sample(bi);
        for gy in 0..gh {
            for gx in 0..gw {
                for e in 0..embed {
                    let g = dout.data()[((bi * embed + e) * gh + gy) * gw + gx];
                    db.data_mut()[e] += g;
                    let mut k = 0;
                    for ci in 0..c {
                        for py in 0..patch {
                            for px in 0..patch {
                                let idx = chw_index(h, w, ci, gy * patch + py, gx * patch + px);
                                dw.data_mut()[k * embed + e] += g * sample[idx];
                                din.sample_mut(bi)[idx] += g * weight.data()[k * embed + e];
                                k += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    (vec![dw, db], din)
}

fn patch_embed_input_grad(
    input_shape: &[usize],
    patch: usize,
    weight: &Tensor,
    dout: &Tensor,
) -> Tensor {
    let [b, c, h, w] = [input_shape[0], input_shape[1], input_shape[2], input_shape[3]];
    let (gh, gw) = (h / patch, w / patch);
    let embed = weight.shape()[1];
    let mut din = Tensor::zeros(input_shape);
    for bi in 0..b {
        for gy in 0..gh {
            for gx in 0..gw {
                for e in 0..embed {
                    let g = dout.data()[((bi * embed + e) * gh + gy) * gw + gx];
                    if g == 0.0 {
                        continue;
                    }
                    let mut k = 0;
                    for ci in 0..c {
                        for py in 0..patch {
                            for px in 0..patch {
                                let idx = chw_index(h, w, ci, gy * patch + py, gx * patch + px);
                                din.sample_mut(bi)[idx] += g * weight.data()[k * embed + e];
                                k += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    din
}

fn dense_input_grad(input_shape: &[usize], weight: &Tensor, dout: &Tensor) -> Tensor {
    let b = input_shape[0];
    let n_in: usize = input_shape[1..].iter().product();
    let n_out = weight.shape()[1];
    let mut din = Tensor::zeros(input_shape);
    for bi in 0..b {
        let d = dout.sample(bi);
        let row = din.sample_mut(bi);
        for i in 0..n_in {
            let wrow = &weight.data()[i * n_out..(i + 1) * n_out];
            row[i] = wrow.iter().zip(d).map(|(w, dv)| w * dv).sum();
        }
    }
    din
}

fn dense_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    let b = input.batch_len();
    let n_out = weight.shape()[1];
    let mut out = Tensor::zeros(&[b, n_out]);
    for bi in 0..b {
        let x = input.sample(bi);
        let o = out.sample_mut(bi);
        o.copy_from_slice(bias.data());
        for (i, &xv) in x.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let row = &weight.data()[i * n_out..(i + 1) * n_out];
            for (ov, &wv) in o.iter_mut().zip(row) {
                *ov += xv * wv;
            }
        }
    }
    out
}

fn dense_backward(input: &Tensor, weight: &Tensor, dout: &Tensor) -> (Vec<Tensor>, Tensor) {
    let b = input.batch_len();
    let n_in = input.sample_len();
    let n_out = weight.shape()[1];
    let mut dw = Tensor::zeros(weight.shape());
    let mut db = Tensor::zeros(&[n_out]);
    let mut din = Tensor::zeros(input.shape());
    for bi in 0..b {
        let x = input.sample(bi);
        let d = dout.sample(bi);
        for (dbv, &dv) in db.data_mut().iter_mut().zip(d) {
            *dbv += dv;
        }
        for i in 0..n_in {
            let xv = x[i];
            let wrow = &weight.data()[i * n_out..(i + 1) * n_out];
            let dwrow = &mut dw.data_mut()[i * n_out..(i + 1) * n_out];
            let mut acc = 0.0;
            for o in 0..n_out {
                dwrow[o] += xv * d[o];
                acc += wrow[o] * d[o];
            }
            din.sample_mut(bi)[i] = acc;
        }
    }
    (vec![dw, db], din)
}

/// Validates the layer chain against the batch shape; returns each layer's
/// output shape. Errors name the offending layer.
pub fn validate_chain(layers: &[Layer], input_shape: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut shapes = Vec::with_capacity(layers.len());
    let mut current = input_shape.to_vec();
    for (index, layer) in layers.iter().enumerate() {
        match layer.output_shape(&current) {
            Ok(next) => {
                current = next.clone();
                shapes.push(next);
            }
            Err(message) => {
                return Err(AresError::Layer {
                    index,
                    kind: layer.kind().to_string(),
                    message,
                })
            }
        }
    }
    Ok(shapes)
}

/// Runs the batch through every layer and returns the logits `[B, K]`.
pub fn forward_pass(layers: &[Layer], batch: &Tensor) -> Result<Tensor> {
    validate_chain(layers, batch.shape())?;
    let mut current = batch.clone();
    for layer in layers {
        current = layer.forward(&current);
    }
    current.ensure_finite("forward_pass logits")?;
    Ok(current)
}

fn forward_cached(layers: &[Layer], batch: &Tensor) -> Result<Vec<Tensor>> {
    validate_chain(layers, batch.shape())?;
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(batch.clone());
    for layer in layers {
        let next = layer.forward(acts.last().unwrap());
        acts.push(next);
    }
    Ok(acts)
}

/// Numerically stable per-row log-softmax.
fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    row.iter().map(|&z| z - lse).collect()
}

fn check_targets(logits: &Tensor, targets: &Tensor) -> Result<()> {
    if logits.shape() != targets.shape() {
        return Err(AresError::shape("loss_xent", logits.shape(), targets.shape()));
    }
    for row in 0..targets.batch_len() {
        let t = targets.sample(row);
        let sum: f64 = t.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || t.iter().any(|&v| v < 0.0) {
            return Err(AresError::UnnormalizedTarget { row, sum });
        }
    }
    Ok(())
}

/// Mean soft-target cross-entropy: `-(1/B) sum_b sum_k t_k log softmax(z)_k`.
pub fn loss_xent(logits: &Tensor, targets: &Tensor) -> Result<f64> {
    check_targets(logits, targets)?;
    let b = logits.batch_len();
    let mut total = 0.0;
    for bi in 0..b {
        let logp = log_softmax_row(logits.sample(bi));
        for (t, lp) in targets.sample(bi).iter().zip(&logp) {
            if *t != 0.0 {
                total -= t * lp;
            }
        }
    }
    Ok(total / b as f64)
}

/// Gradient of the mean cross-entropy with respect to the logits.
fn xent_logit_grad(logits: &Tensor, targets: &Tensor) -> Tensor {
    let b = logits.batch_len();
    let mut grad = Tensor::zeros(logits.shape());
    for bi in 0..b {
        let logp = log_softmax_row(logits.sample(bi));
        let t = targets.sample(bi);
        for (k, g) in grad.sample_mut(bi).iter_mut().enumerate() {
            *g = (logp[k].exp() - t[k]) / b as f64;
        }
    }
    grad
}

/// Parameter gradients per layer plus the gradient with respect to the input.
#[derive(Debug, Clone)]
pub struct LayerGrad {
    /// One entry per layer, each holding that layer's parameter gradients
    /// (empty for parameterless layers).
    pub param_grads: Vec<Vec<Tensor>>,
    /// Gradient of the loss with respect to the input batch.
    pub input_grad: Tensor,
}

/// Full backward pass: mean cross-entropy loss, parameter gradients and the
/// input gradient in one sweep.
pub fn backward(layers: &[Layer], batch: &Tensor, targets: &Tensor) -> Result<(f64, LayerGrad)> {
    let (_, loss, grads) = backward_full(layers, batch, targets)?;
    Ok((loss, grads))
}

/// Like [`backward`] but also returns the logits, for callers that need the
/// predictions at the same point (attack iterate tracking).
pub fn backward_full(
    layers: &[Layer],
    batch: &Tensor,
    targets: &Tensor,
) -> Result<(Tensor, f64, LayerGrad)> {
    let acts = forward_cached(layers, batch)?;
    let logits = acts.last().unwrap().clone();
    logits.ensure_finite("backward logits")?;
    let loss = loss_xent(&logits, targets)?;
    let mut upstream = xent_logit_grad(&logits, targets);
    let mut param_grads = vec![Vec::new(); layers.len()];
    for (i, layer) in layers.iter().enumerate().rev() {
        let (pg, din) = layer.backward(&acts[i], &upstream);
        param_grads[i] = pg;
        upstream = din;
    }
    Ok((
        logits,
        loss,
        LayerGrad {
            param_grads,
            input_grad: upstream,
        },
    ))
}

/// Gradient of the mean loss with respect to the input only: logits, loss
/// and input gradient, skipping all parameter gradients.
pub fn input_gradient(layers: &[Layer], batch: &Tensor, targets: &Tensor) -> Result<(Tensor, f64, Tensor)> {
    let acts = forward_cached(layers, batch)?;
    let logits = acts.last().unwrap().clone();
    logits.ensure_finite("input_gradient logits")?;
    let loss = loss_xent(&logits, targets)?;
    let mut upstream = xent_logit_grad(&logits, targets);
    for (i, layer) in layers.iter().enumerate().rev() {
        upstream = layer.backward_input(&acts[i], &upstream);
    }
    Ok((logits, loss, upstream))
}

/// One-hot target rows for integer labels.
pub fn one_hot(labels: &[usize], class_count: usize) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), class_count]);
    for (i, &l) in labels.iter().enumerate() {
        t.sample_mut(i)[l] = 1.0;
    }
    t
}

/// Central finite-difference check over every parameter and input entry.
/// Returns the max of `|analytic - numeric| / max(1, |numeric|)`.
pub fn finite_diff_check(layers: &[Layer], batch: &Tensor, targets: &Tensor, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1e-2) {
        return Err(AresError::InvalidArgument(format!(
            "finite-difference step must be in (0, 1e-2], got {h}"
        )));
    }
    let (_, grads) = backward(layers, batch, targets)?;
    let mut work = layers.to_vec();
    let mut max_err: f64 = 0.0;

    let loss_at = |layers: &[Layer], batch: &Tensor| -> Result<f64> {
        let logits = forward_pass(layers, batch)?;
        loss_xent(&logits, targets)
    };

    for li in 0..work.len() {
        for pi in 0..work[li].params().len() {
            let n = work[li].params()[pi].len();
            for k in 0..n {
                let orig = work[li].params()[pi].data()[k];
                work[li].params_mut()[pi].data_mut()[k] = orig + h;
                let plus = loss_at(&work, batch)?;
                work[li].params_mut()[pi].data_mut()[k] = orig - h;
                let minus = loss_at(&work, batch)?;
                work[li].params_mut()[pi].data_mut()[k] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grads.param_grads[li][pi].data()[k];
                max_err = max_err.max((analytic - numeric).abs() / numeric.abs().max(1.0));
            }
        }
    }

    let mut perturbed = batch.clone();
    for k in 0..batch.len() {
        let orig = batch.data()[k];
        perturbed.data_mut()[k] = orig + h;
        let plus = loss_at(&work, &perturbed)?;
        perturbed.data_mut()[k] = orig - h;
        let minus = loss_at(&work, &perturbed)?;
        perturbed.data_mut()[k] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = grads.input_grad.data()[k];
        max_err = max_err.max((analytic - numeric).abs() / numeric.abs().max(1.0));
    }
    Ok(max_err)
}
