use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    conv_linear, conv_linear_backward, deconv_linear, deconv_linear_backward, dense_linear,
    dense_linear_backward, ConvGeom, LayerKind, LayerSpec,
};

/// Per-sample activation shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Spatial { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Spatial { h, w, c } => h * w * c,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A feed-forward stack over one slice of a flat parameter vector. Each
/// layer stores weights then bias. A flat input to a convolution is read as
/// a square NHWC grid with the layer's input channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    /// shapes[l] is the input of layer l; the last entry is the output.
    shapes: Vec<Shape>,
    offsets: Vec<usize>,
    n_params: usize,
}

fn spatial_input(shape: Shape, channels: usize, layer: usize) -> Result<(usize, usize)> {
    match shape {
        Shape::Spatial { h, w, c } if c == channels => Ok((h, w)),
        Shape::Flat(n) if n % channels == 0 => {
            let side = ((n / channels) as f64).sqrt().round() as usize;
            if side * side * channels == n {
                Ok((side, side))
            } else {
                Err(Error::invalid(format!(
                    "layer {layer}: {n} inputs do not form a square grid of {channels} channels"
                )))
            }
        }
        other => Err(Error::invalid(format!(
            "layer {layer}: input {other:?} does not carry {channels} channels"
        ))),
    }
}

impl Network {
    pub fn new(input: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        let mut shapes = vec![input];
        let mut offsets = Vec::with_capacity(layers.len());
        let mut n_params = 0;
        for (l, spec) in layers.iter().enumerate() {
            spec.validate()?;
            let cur = shapes[l];
            let next = match spec.kind {
                LayerKind::Conv2d => {
                    let (h, w) = spatial_input(cur, spec.in_channels, l)?;
                    let g = ConvGeom::conv(1, h, w, spec.in_channels, spec.out_channels);
                    Shape::Spatial { h: g.out_h, w: g.out_w, c: spec.out_channels }
                }
                LayerKind::Deconv2d => {
                    let (h, w) = spatial_input(cur, spec.in_channels, l)?;
                    let g = ConvGeom::deconv(1, h, w, spec.in_channels, spec.out_channels);
                    Shape::Spatial { h: g.out_h, w: g.out_w, c: spec.out_channels }
                }
                LayerKind::Dense => {
                    if cur.len() != spec.in_channels {
                        return Err(Error::shape(
                            "dense layer input",
                            spec.in_channels,
                            format!("{cur:?} at layer {l}"),
                        ));
                    }
                    Shape::Flat(spec.out_channels)
                }
                LayerKind::Reshape => {
                    if cur.len() != spec.in_channels {
                        return Err(Error::shape("reshape", spec.in_channels, format!("{cur:?} at layer {l}")));
                    }
                    Shape::Flat(cur.len())
                }
            };
            offsets.push(n_params);
            n_params += spec.param_count();
            shapes.push(next);
        }
        Ok(Self { layers, shapes, offsets, n_params })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_shape(&self) -> Shape {
        self.shapes[0]
    }

    pub fn output_shape(&self) -> Shape {
        *self.shapes.last().expect("shape list is never empty")
    }

    pub fn param_count(&self) -> usize {
        self.n_params
    }

    /// Start offset of each layer's parameter block.
    pub fn param_blocks(&self) -> impl Iterator<Item = (usize, &LayerSpec)> {
        self.offsets.iter().copied().zip(&self.layers)
    }

    fn split<'a>(&self, l: usize, params: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        let spec = &self.layers[l];
        let start = self.offsets[l];
        let nw = spec.weight_count();
        let block = &params[start..start + spec.param_count()];
        block.split_at(nw)
    }

    fn geom(&self, l: usize, batch: usize) -> ConvGeom {
        let spec = &self.layers[l];
        let (h, w) = spatial_input(self.shapes[l], spec.in_channels, l).expect("checked in new");
        match spec.kind {
            LayerKind::Deconv2d => ConvGeom::deconv(batch, h, w, spec.in_channels, spec.out_channels),
            _ => ConvGeom::conv(batch, h, w, spec.in_channels, spec.out_channels),
        }
    }

    fn check(&self, params: &[f64], input: &[f64], batch: usize) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::shape("network parameters", self.n_params, params.len()));
        }
        let want = batch * self.shapes[0].len();
        if batch == 0 || input.len() != want {
            return Err(Error::shape("network input", want, input.len()));
        }
        Ok(())
    }

    /// Runs the stack, returning every layer's post-activation output.
    pub fn forward_cached(&self, params: &[f64], input: &[f64], batch: usize) -> Result<Vec<Vec<f64>>> {
        self.check(params, input, batch)?;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (l, spec) in self.layers.iter().enumerate() {
            let x: &[f64] = if l == 0 { input } else { &acts[l - 1] };
            let mut y = match spec.kind {
                LayerKind::Reshape => x.to_vec(),
                LayerKind::Dense => {
                    let (w, b) = self.split(l, params);
                    dense_linear(batch, spec.in_channels, spec.out_channels, x, w, b)
                }
                LayerKind::Conv2d => {
                    let (w, b) = self.split(l, params);
                    conv_linear(&self.geom(l, batch), x, w, b)
                }
                LayerKind::Deconv2d => {
                    let (w, b) = self.split(l, params);
                    deconv_linear(&self.geom(l, batch), x, w, b)
                }
            };
            spec.activation.apply_in_place(&mut y);
            acts.push(y);
        }
        Ok(acts)
    }

    pub fn forward(&self, params: &[f64], input: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut acts = self.forward_cached(params, input, batch)?;
        Ok(acts.pop().unwrap_or_else(|| input.to_vec()))
    }

    /// Back-propagates `grad_out` (w.r.t. the final output) through the
    /// cached pass. Parameter gradients are added into `grads`; the input
    /// gradient is returned when `want_input` is set.
    pub fn backward(
        &self,
        params: &[f64],
        input: &[f64],
        acts: &[Vec<f64>],
        grad_out: Vec<f64>,
        grads: &mut [f64],
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let batch = input.len() / self.shapes[0].len();
        let mut g = grad_out;
        for l in (0..self.layers.len()).rev() {
            let spec = &self.layers[l];
            spec.activation.backprop_in_place(&acts[l], &mut g);
            let x: &[f64] = if l == 0 { input } else { &acts[l - 1] };
            let need = l > 0 || want_input;
            let start = self.offsets[l];
            let nw = spec.weight_count();
            let (gw, gb) = grads[start..start + spec.param_count()].split_at_mut(nw);
            let next = match spec.kind {
                LayerKind::Reshape => Some(g),
                LayerKind::Dense => {
                    let (w, _) = self.split(l, params);
                    dense_linear_backward(batch, spec.in_channels, spec.out_channels, x, w, &g, gw, gb, need)
                }
                LayerKind::Conv2d => {
                    let (w, _) = self.split(l, params);
                    conv_linear_backward(&self.geom(l, batch), x, w, &g, gw, gb, need)
                }
                LayerKind::Deconv2d => {
                    let (w, _) = self.split(l, params);
                    deconv_linear_backward(&self.geom(l, batch), x, w, &g, gw, gb, need)
                }
            };
            match next {
                Some(n) => g = n,
                None => return None,
            }
        }
        want_input.then_some(g)
    }
}
