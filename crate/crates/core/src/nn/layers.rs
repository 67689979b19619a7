use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;
pub const STRIDE: usize = 2;

/// Largest double below one.
const SIGMOID_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => {
                let y = if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                };
                // keep the open interval (0, 1) under rounding
                y.clamp(f64::MIN_POSITIVE, SIGMOID_MAX)
            }
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output value.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn apply_in_place(self, xs: &mut [f64]) {
        if self != Activation::Identity {
            xs.iter_mut().for_each(|x| *x = self.apply(*x));
        }
    }

    /// Turns an upstream gradient w.r.t. outputs into one w.r.t. pre-activations.
    pub fn backprop_in_place(self, outputs: &[f64], grad: &mut [f64]) {
        if self != Activation::Identity {
            for (g, &y) in grad.iter_mut().zip(outputs) {
                *g *= self.derivative_from_output(y);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv2d,
    Deconv2d,
    Dense,
    Reshape,
}

/// Static description of one layer. Convolution kinds are always 3x3 with
/// stride 2 and same-style zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn conv2d(in_channels: usize, out_channels: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Conv2d,
            kernel: (KERNEL, KERNEL),
            stride: STRIDE,
            in_channels,
            out_channels,
            activation,
        }
    }

    pub fn deconv2d(in_channels: usize, out_channels: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Deconv2d,
            ..Self::conv2d(in_channels, out_channels, activation)
        }
    }

    pub fn dense(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Dense,
            kernel: (1, 1),
            stride: 1,
            in_channels: inputs,
            out_channels: outputs,
            activation,
        }
    }

    /// Reshape carries element counts in the channel fields.
    pub fn reshape(elements: usize) -> Self {
        Self {
            kind: LayerKind::Reshape,
            kernel: (1, 1),
            stride: 1,
            in_channels: elements,
            out_channels: elements,
            activation: Activation::Identity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::invalid(format!("zero channel count in {self:?}")));
        }
        match self.kind {
            LayerKind::Conv2d | LayerKind::Deconv2d => {
                if self.kernel != (KERNEL, KERNEL) || self.stride != STRIDE {
                    return Err(Error::invalid(format!(
                        "convolution layers must use a 3x3 kernel with stride 2, got {:?}/{}",
                        self.kernel, self.stride
                    )));
                }
            }
            LayerKind::Reshape => {
                if self.in_channels != self.out_channels {
                    return Err(Error::invalid("reshape must preserve element count"));
                }
            }
            LayerKind::Dense => {}
        }
        Ok(())
    }

    /// Number of trainable scalars (weights then bias).
    pub fn param_count(&self) -> usize {
        match self.kind {
            LayerKind::Conv2d | LayerKind::Deconv2d => {
                self.kernel.0 * self.kernel.1 * self.in_channels * self.out_channels
                    + self.out_channels
            }
            LayerKind::Dense => self.in_channels * self.out_channels + self.out_channels,
            LayerKind::Reshape => 0,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.param_count().saturating_sub(match self.kind {
            LayerKind::Reshape => 0,
            _ => self.out_channels,
        })
    }

    /// (fan_in, fan_out) used for weight initialization.
    pub fn fans(&self) -> (usize, usize) {
        let taps = self.kernel.0 * self.kernel.1;
        (taps * self.in_channels, taps * self.out_channels)
    }
}

/// Output extent of a stride-2 same-padded convolution.
#[inline]
pub fn conv_out_extent(extent: usize) -> usize {
    extent.div_ceil(STRIDE)
}

/// Leading zero padding of a same-padded stride-2 convolution from `input`
/// to `output` extents (trailing side absorbs any odd remainder).
#[inline]
fn pad_before(input: usize, output: usize) -> usize {
    let needed = (output - 1) * STRIDE + KERNEL;
    needed.saturating_sub(input) / 2
}

/// Spatial geometry of a single convolution or deconvolution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub out_c: usize,
}

impl ConvGeom {
    pub fn conv(batch: usize, h: usize, w: usize, in_c: usize, out_c: usize) -> Self {
        Self {
            batch,
            in_h: h,
            in_w: w,
            in_c,
            out_h: conv_out_extent(h),
            out_w: conv_out_extent(w),
            out_c,
        }
    }

    pub fn deconv(batch: usize, h: usize, w: usize, in_c: usize, out_c: usize) -> Self {
        Self {
            batch,
            in_h: h,
            in_w: w,
            in_c,
            out_h: h * STRIDE,
            out_w: w * STRIDE,
            out_c,
        }
    }

    pub fn in_len(&self) -> usize {
        self.batch * self.in_h * self.in_w * self.in_c
    }

    pub fn out_len(&self) -> usize {
        self.batch * self.out_h * self.out_w * self.out_c
    }

    /// Padding of the strided (large-extent -> small-extent) direction.
    fn pads_conv(&self) -> (usize, usize) {
        (
            pad_before(self.in_h, self.out_h),
            pad_before(self.in_w, self.out_w),
        )
    }

    fn pads_deconv(&self) -> (usize, usize) {
        (
            pad_before(self.out_h, self.in_h),
            pad_before(self.out_w, self.in_w),
        )
    }
}

/// Pre-activation convolution. Weights are laid out (ky, kx, in_c, out_c).
pub(crate) fn conv_linear(g: &ConvGeom, input: &[f64], weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.out_len()];
    let (ph, pw) = g.pads_conv();
    for b in 0..g.batch {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let o0 = ((b * g.out_h + oy) * g.out_w + ox) * g.out_c;
                let out_px = &mut out[o0..o0 + g.out_c];
                out_px.copy_from_slice(bias);
                for ky in 0..KERNEL {
                    let Some(iy) = (oy * STRIDE + ky).checked_sub(ph) else {
                        continue;
                    };
                    if iy >= g.in_h {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let Some(ix) = (ox * STRIDE + kx).checked_sub(pw) else {
                            continue;
                        };
                        if ix >= g.in_w {
                            continue;
                        }
                        let i0 = ((b * g.in_h + iy) * g.in_w + ix) * g.in_c;
                        let w0 = (ky * KERNEL + kx) * g.in_c * g.out_c;
                        for ci in 0..g.in_c {
                            let a = input[i0 + ci];
                            if a == 0.0 {
                                continue;
                            }
                            let row = &weights[w0 + ci * g.out_c..w0 + (ci + 1) * g.out_c];
                            for (o, &wv) in out_px.iter_mut().zip(row) {
                                *o += a * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Backward pass of [`conv_linear`] given the pre-activation gradient.
/// Accumulates into `grad_w` and `grad_b`; returns the input gradient when asked.
pub(crate) fn conv_linear_backward(
    g: &ConvGeom,
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let mut grad_in = want_input.then(|| vec![0.0; g.in_len()]);
    let (ph, pw) = g.pads_conv();
    for b in 0..g.batch {
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let o0 = ((b * g.out_h + oy) * g.out_w + ox) * g.out_c;
                let go = &grad_out[o0..o0 + g.out_c];
                for (gb, &v) in grad_b.iter_mut().zip(go) {
                    *gb += v;
                }
                for ky in 0..KERNEL {
                    let Some(iy) = (oy * STRIDE + ky).checked_sub(ph) else {
                        continue;
                    };
                    if iy >= g.in_h {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let Some(ix) = (ox * STRIDE + kx).checked_sub(pw) else {
                            continue;
                        };
                        if ix >= g.in_w {
                            continue;
                        }
                        let i0 = ((b * g.in_h + iy) * g.in_w + ix) * g.in_c;
                        let w0 = (ky * KERNEL + kx) * g.in_c * g.out_c;
                        for ci in 0..g.in_c {
                            let a = input[i0 + ci];
                            let r = w0 + ci * g.out_c..w0 + (ci + 1) * g.out_c;
                            if a != 0.0 {
                                for (gw, &v) in grad_w[r.clone()].iter_mut().zip(go) {
                                    *gw += a * v;
                                }
                            }
                            if let Some(gi) = grad_in.as_mut() {
                                let s: f64 = weights[r].iter().zip(go).map(|(w, v)| w * v).sum();
                                gi[i0 + ci] += s;
                            }
                        }
                    }
                }
            }
        }
    }
    grad_in
}

/// Pre-activation transposed convolution (exact adjoint geometry of
/// [`conv_linear`] from the doubled extent). Weights are (ky, kx, in_c, out_c).
pub(crate) fn deconv_linear(
    g: &ConvGeom,
    input: &[f64],
    weights: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; g.out_len()];
    for px in out.chunks_exact_mut(g.out_c) {
        px.copy_from_slice(bias);
    }
    let (ph, pw) = g.pads_deconv();
    for b in 0..g.batch {
        for iy in 0..g.in_h {
            for ix in 0..g.in_w {
                let i0 = ((b * g.in_h + iy) * g.in_w + ix) * g.in_c;
                let in_px = &input[i0..i0 + g.in_c];
                for ky in 0..KERNEL {
                    let Some(oy) = (iy * STRIDE + ky).checked_sub(ph) else {
                        continue;
                    };
                    if oy >= g.out_h {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let Some(ox) = (ix * STRIDE + kx).checked_sub(pw) else {
                            continue;
                        };
                        if ox >= g.out_w {
                            continue;
                        }
                        let o0 = ((b * g.out_h + oy) * g.out_w + ox) * g.out_c;
                        let w0 = (ky * KERNEL + kx) * g.in_c * g.out_c;
                        let out_px = &mut out[o0..o0 + g.out_c];
                        for (ci, &a) in in_px.iter().enumerate() {
                            if a == 0.0 {
                                continue;
                            }
                            let row = &weights[w0 + ci * g.out_c..w0 + (ci + 1) * g.out_c];
                            for (o, &wv) in out_px.iter_mut().zip(row) {
                                *o += a * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn deconv_linear_backward(
    g: &ConvGeom,
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let mut grad_in = want_input.then(|| vec![0.0; g.in_len()]);
    for go in grad_out.chunks_exact(g.out_c) {
        for (gb, &v) in grad_b.iter_mut().zip(go) {
            *gb += v;
        }
    }
    let (ph, pw) = g.pads_deconv();
    for b in 0..g.batch {
        for iy in 0..g.in_h {
            for ix in 0..g.in_w {
                let i0 = ((b * g.in_h + iy) * g.in_w + ix) * g.in_c;
                for ky in 0..KERNEL {
                    let Some(oy) = (iy * STRIDE + ky).checked_sub(ph) else {
                        continue;
                    };
                    if oy >= g.out_h {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let Some(ox) = (ix * STRIDE + kx).checked_sub(pw) else {
                            continue;
                        };
                        if ox >= g.out_w {
                            continue;
                        }
                        let o0 = ((b * g.out_h + oy) * g.out_w + ox) * g.out_c;
                        let go = &grad_out[o0..o0 + g.out_c];
                        let w0 = (ky * KERNEL + kx) * g.in_c * g.out_c;
                        for ci in 0..g.in_c {
                            let a = input[i0 + ci];
                            let r = w0 + ci * g.out_c..w0 + (ci + 1) * g.out_c;
                            if a != 0.0 {
                                for (gw, &v) in grad_w[r.clone()].iter_mut().zip(go) {
                                    *gw += a * v;
                                }
                            }
                            if let Some(gi) = grad_in.as_mut() {
                                let s: f64 = weights[r].iter().zip(go).map(|(w, v)| w * v).sum();
                                gi[i0 + ci] += s;
                            }
                        }
                    }
                }
            }
        }
    }
    grad_in
}

/// Pre-activation dense map over `batch` rows. Weights are (outputs, inputs).
pub(crate) fn dense_linear(
    batch: usize,
    inputs: usize,
    outputs: usize,
    input: &[f64],
    weights: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * outputs);
    for x in input.chunks_exact(inputs).take(batch) {
        for (o, row) in weights.chunks_exact(inputs).enumerate() {
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(bias[o] + s);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_linear_backward(
    batch: usize,
    inputs: usize,
    outputs: usize,
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let mut grad_in = want_input.then(|| vec![0.0; batch * inputs]);
    for b in 0..batch {
        let x = &input[b * inputs..(b + 1) * inputs];
        let go = &grad_out[b * outputs..(b + 1) * outputs];
        for (o, &g) in go.iter().enumerate() {
            grad_b[o] += g;
            if g == 0.0 {
                continue;
            }
            let gw = &mut grad_w[o * inputs..(o + 1) * inputs];
            for (w, &v) in gw.iter_mut().zip(x) {
                *w += g * v;
            }
            if let Some(gi) = grad_in.as_mut() {
                let row = &weights[o * inputs..(o + 1) * inputs];
                for (d, &w) in gi[b * inputs..(b + 1) * inputs].iter_mut().zip(row) {
                    *d += g * w;
                }
            }
        }
    }
    grad_in
}

/// Gradients of one layer with respect to its input, weights and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

fn check_conv_args(
    op: &'static str,
    kind: LayerKind,
    input: &Tensor,
    weights: &Tensor,
    bias: &[f64],
    spec: &LayerSpec,
) -> Result<(usize, usize, usize, usize)> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::invalid(format!("{op} called with a {:?} spec", spec.kind)));
    }
    let (n, h, w, c) = input.nhwc()?;
    if c != spec.in_channels {
        return Err(Error::shape(
            op,
            format!("input with {} channels", spec.in_channels),
            format!("input shape {:?}", input.shape()),
        ));
    }
    let expected_w = [KERNEL, KERNEL, spec.in_channels, spec.out_channels];
    if weights.shape() != expected_w {
        return Err(Error::shape(
            op,
            format!("weights {expected_w:?}"),
            format!("weights {:?} for input {:?}", weights.shape(), input.shape()),
        ));
    }
    if bias.len() != spec.out_channels {
        return Err(Error::shape(op, format!("bias of {}", spec.out_channels), bias.len()));
    }
    Ok((n, h, w, c))
}

pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &[f64],
    spec: &LayerSpec,
) -> Result<Tensor> {
    let (n, h, w, c) = check_conv_args("conv2d_forward", LayerKind::Conv2d, input, weights, bias, spec)?;
    let g = ConvGeom::conv(n, h, w, c, spec.out_channels);
    let mut out = conv_linear(&g, input.data(), weights.data(), bias);
    spec.activation.apply_in_place(&mut out);
    Tensor::new(vec![n, g.out_h, g.out_w, g.out_c], out)
}

/// Exact gradients of [`conv2d_forward`] given the gradient w.r.t. its output.
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    bias: &[f64],
    upstream: &Tensor,
    spec: &LayerSpec,
) -> Result<LayerGrads> {
    let (n, h, w, c) = check_conv_args("conv2d_backward", LayerKind::Conv2d, input, weights, bias, spec)?;
    let g = ConvGeom::conv(n, h, w, c, spec.out_channels);
    let out_shape = [n, g.out_h, g.out_w, g.out_c];
    if upstream.shape() != out_shape {
        return Err(Error::shape(
            "conv2d_backward",
            format!("upstream gradient {out_shape:?}"),
            format!("{:?}", upstream.shape()),
        ));
    }
    let mut out = conv_linear(&g, input.data(), weights.data(), bias);
    spec.activation.apply_in_place(&mut out);
    let mut grad = upstream.data().to_vec();
    spec.activation.backprop_in_place(&out, &mut grad);
    let mut gw = vec![0.0; weights.len()];
    let mut gb = vec![0.0; bias.len()];
    let gi = conv_linear_backward(&g, input.data(), weights.data(), &grad, &mut gw, &mut gb, true)
        .expect("input gradient requested");
    Ok(LayerGrads {
        input: Tensor::new(input.shape().to_vec(), gi)?,
        weights: Tensor::new(weights.shape().to_vec(), gw)?,
        bias: gb,
    })
}

pub fn deconv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &[f64],
    spec: &LayerSpec,
) -> Result<Tensor> {
    let (n, h, w, c) =
        check_conv_args("deconv2d_forward", LayerKind::Deconv2d, input, weights, bias, spec)?;
    let g = ConvGeom::deconv(n, h, w, c, spec.out_channels);
    let mut out = deconv_linear(&g, input.data(), weights.data(), bias);
    spec.activation.apply_in_place(&mut out);
    Tensor::new(vec![n, g.out_h, g.out_w, g.out_c], out)
}

pub fn deconv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    bias: &[f64],
    upstream: &Tensor,
    spec: &LayerSpec,
) -> Result<LayerGrads> {
    let (n, h, w, c) =
        check_conv_args("deconv2d_backward", LayerKind::Deconv2d, input, weights, bias, spec)?;
    let g = ConvGeom::deconv(n, h, w, c, spec.out_channels);
    let out_shape = [n, g.out_h, g.out_w, g.out_c];
    if upstream.shape() != out_shape {
        return Err(Error::shape(
            "deconv2d_backward",
            format!("upstream gradient {out_shape:?}"),
            format!("{:?}", upstream.shape()),
        ));
    }
    let mut out = deconv_linear(&g, input.data(), weights.data(), bias);
    spec.activation.apply_in_place(&mut out);
    let mut grad = upstream.data().to_vec();
    spec.activation.backprop_in_place(&out, &mut grad);
    let mut gw = vec![0.0; weights.len()];
    let mut gb = vec![0.0; bias.len()];
    let gi = deconv_linear_backward(&g, input.data(), weights.data(), &grad, &mut gw, &mut gb, true)
        .expect("input gradient requested");
    Ok(LayerGrads {
        input: Tensor::new(input.shape().to_vec(), gi)?,
        weights: Tensor::new(weights.shape().to_vec(), gw)?,
        bias: gb,
    })
}

fn check_dense_args(
    op: &'static str,
    input: &Tensor,
    weights: &Tensor,
    bias: &[f64],
) -> Result<(usize, usize, usize)> {
    let (batch, inputs) = input.matrix()?;
    let (outputs, w_inputs) = weights.matrix()?;
    if weights.shape().len() != 2 || w_inputs != inputs {
        return Err(Error::shape(
            op,
            format!("weights with {inputs} columns"),
            format!("weights {:?} for input {:?}", weights.shape(), input.shape()),
        ));
    }
    if bias.len() != outputs {
        return Err(Error::shape(op, format!("bias of {outputs}"), bias.len()));
    }
    Ok((batch, inputs, outputs))
}

/// `activation(W x + b)` for each row of `input` (a vector or a batch matrix).
pub fn dense_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &[f64],
    activation: Activation,
) -> Result<Tensor> {
    let (batch, inputs, outputs) = check_dense_args("dense_forward", input, weights, bias)?;
    let mut out = dense_linear(batch, inputs, outputs, input.data(), weights.data(), bias);
    activation.apply_in_place(&mut out);
    if input.shape().len() == 1 {
        Tensor::new(vec![outputs], out)
    } else {
        Tensor::new(vec![batch, outputs], out)
    }
}

pub fn dense_backward(
    input: &Tensor,
    weights: &Tensor,
    bias: &[f64],
    upstream: &Tensor,
    activation: Activation,
) -> Result<LayerGrads> {
    let (batch, inputs, outputs) = check_dense_args("dense_backward", input, weights, bias)?;
    if upstream.len() != batch * outputs {
        return Err(Error::shape(
            "dense_backward",
            format!("upstream gradient of {}", batch * outputs),
            format!("{:?}", upstream.shape()),
        ));
    }
    let mut out = dense_linear(batch, inputs, outputs, input.data(), weights.data(), bias);
    activation.apply_in_place(&mut out);
    let mut grad = upstream.data().to_vec();
    activation.backprop_in_place(&out, &mut grad);
    let mut gw = vec![0.0; weights.len()];
    let mut gb = vec![0.0; outputs];
    let gi = dense_linear_backward(
        batch,
        inputs,
        outputs,
        input.data(),
        weights.data(),
        &grad,
        &mut gw,
        &mut gb,
        true,
    )
    .expect("input gradient requested");
    Ok(LayerGrads {
        input: Tensor::new(input.shape().to_vec(), gi)?,
        weights: Tensor::new(weights.shape().to_vec(), gw)?,
        bias: gb,
    })
}
