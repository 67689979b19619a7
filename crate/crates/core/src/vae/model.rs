use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Network, Shape};
use crate::error::{Error, Result};
use crate::field::{Bounds, Field, Mask, GRID_SIDE};
use crate::nn::{glorot_uniform, Activation, LayerKind, LayerSpec};

/// Encoder/decoder geometry: two stride-2 convolutions down to a dense
/// latent layer, mirrored by a dense layer and two transposed convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeArch {
    pub latent_dim: usize,
    /// Side of the square input grid; must be divisible by 4.
    pub grid_side: usize,
    pub channels: [usize; 2],
}

impl Default for VaeArch {
    fn default() -> Self {
        Self { latent_dim: 8, grid_side: GRID_SIDE, channels: [32, 64] }
    }
}

impl VaeArch {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.channels.contains(&0) {
            return Err(Error::invalid(format!("latent size and channel counts must be positive: {self:?}")));
        }
        if self.grid_side == 0 || self.grid_side % 4 != 0 {
            return Err(Error::invalid(format!("grid side {} is not a positive multiple of 4", self.grid_side)));
        }
        Ok(())
    }

    fn bottleneck(&self) -> usize {
        let s = self.grid_side / 4;
        s * s * self.channels[1]
    }

    pub fn encoder_layers(&self) -> Vec<LayerSpec> {
        let [c1, c2] = self.channels;
        vec![
            LayerSpec::conv2d(1, c1, Activation::Relu),
            LayerSpec::conv2d(c1, c2, Activation::Relu),
            LayerSpec::reshape(self.bottleneck()),
            LayerSpec::dense(self.bottleneck(), self.latent_dim, Activation::Identity),
        ]
    }

    pub fn decoder_layers(&self) -> Vec<LayerSpec> {
        let [c1, c2] = self.channels;
        vec![
            LayerSpec::dense(self.latent_dim, self.bottleneck(), Activation::Relu),
            LayerSpec::reshape(self.bottleneck()),
            LayerSpec::deconv2d(c2, c1, Activation::Relu),
            LayerSpec::deconv2d(c1, 1, Activation::Sigmoid),
        ]
    }

    pub fn grid_len(&self) -> usize {
        self.grid_side * self.grid_side
    }
}

/// A point in latent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("latent coordinate {i}")));
        }
        Ok(Self(z))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One epoch of training diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_total: f64,
    pub train_reconstruction: f64,
    pub train_mmd: f64,
    pub val_total: f64,
    pub val_reconstruction: f64,
    pub val_mmd: f64,
}

/// Trained or freshly initialised autoencoder plus the metadata needed to
/// map its outputs back to physical units.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeModel {
    arch: VaeArch,
    encoder: Network,
    decoder: Network,
    /// Encoder parameters followed by decoder parameters.
    params: Vec<f64>,
    pub bounds: Bounds,
    pub mask: Mask,
    /// Mean squared per-cell training residual at the selected epoch.
    pub sigma2: f64,
    pub history: Vec<EpochRecord>,
    /// Index into `history` of the selected epoch.
    pub best_epoch: Option<usize>,
    /// Per-class mean latent codes, when the model seeds a generator.
    pub class_means: Option<Vec<Vec<f64>>>,
}

fn networks(arch: &VaeArch) -> Result<(Network, Network)> {
    arch.validate()?;
    let s = arch.grid_side;
    let enc = Network::new(Shape::Spatial { h: s, w: s, c: 1 }, arch.encoder_layers())?;
    let dec = Network::new(Shape::Flat(arch.latent_dim), arch.decoder_layers())?;
    Ok((enc, dec))
}

impl VaeModel {
    /// Glorot-uniform weights and zero biases from `seed`.
    pub fn new(arch: VaeArch, bounds: Bounds, mask: Mask, seed: u64) -> Result<Self> {
        let (encoder, decoder) = networks(&arch)?;
        check_mask(&arch, &mask)?;
        bounds.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(encoder.param_count() + decoder.param_count());
        for spec in encoder.layers().iter().chain(decoder.layers()) {
            if spec.kind == LayerKind::Reshape {
                continue;
            }
            let (fan_in, fan_out) = spec.fans();
            params.extend(glorot_uniform(&mut rng, fan_in, fan_out, spec.weight_count()));
            params.extend(std::iter::repeat(0.0).take(spec.out_channels));
        }
        Ok(Self::assemble(arch, encoder, decoder, params, bounds, mask))
    }

    /// Rebuilds a model around an existing flat parameter vector.
    pub fn from_params(arch: VaeArch, params: Vec<f64>, bounds: Bounds, mask: Mask) -> Result<Self> {
        let (encoder, decoder) = networks(&arch)?;
        check_mask(&arch, &mask)?;
        bounds.validate()?;
        let want = encoder.param_count() + decoder.param_count();
        if params.len() != want {
            return Err(Error::shape("VAE parameter vector", want, params.len()));
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("VAE parameter {i}")));
        }
        Ok(Self::assemble(arch, encoder, decoder, params, bounds, mask))
    }

    fn assemble(arch: VaeArch, encoder: Network, decoder: Network, params: Vec<f64>, bounds: Bounds, mask: Mask) -> Self {
        Self {
            arch,
            encoder,
            decoder,
            params,
            bounds,
            mask,
            sigma2: 0.0,
            history: Vec::new(),
            best_epoch: None,
            class_means: None,
        }
    }

    pub fn arch(&self) -> &VaeArch {
        &self.arch
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn encoder(&self) -> &Network {
        &self.encoder
    }

    pub fn decoder(&self) -> &Network {
        &self.decoder
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn split_params(&self) -> (&[f64], &[f64]) {
        self.params.split_at(self.encoder.param_count())
    }

    /// Encodes `n` row-major grids.
    pub fn encode_grids(&self, grids: &[f64], n: usize) -> Result<Vec<f64>> {
        if let Some(i) = grids.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("encoder input entry {i}")));
        }
        let (enc, _) = self.split_params();
        self.encoder.forward(enc, grids, n)
    }

    /// Decodes `n` row-major latent codes into grids in (0, 1).
    pub fn decode_codes(&self, codes: &[f64], n: usize) -> Result<Vec<f64>> {
        if let Some(i) = codes.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("latent entry {i}")));
        }
        let (_, dec) = self.split_params();
        self.decoder.forward(dec, codes, n)
    }

    pub fn encode(&self, field: &Field) -> Result<LatentCode> {
        let z = self.encode_grids(field.grid(), 1)?;
        Ok(LatentCode(z))
    }

    pub fn encode_batch(&self, fields: &[Field]) -> Result<Vec<LatentCode>> {
        if fields.is_empty() {
            return Ok(Vec::new());
        }
        let flat: Vec<f64> = fields.iter().flat_map(|f| f.grid().iter().copied()).collect();
        let z = self.encode_grids(&flat, fields.len())?;
        Ok(z.chunks_exact(self.latent_dim()).map(|c| LatentCode(c.to_vec())).collect())
    }

    pub fn decode(&self, code: &LatentCode) -> Result<Field> {
        if code.len() != self.latent_dim() {
            return Err(Error::shape("decode", self.latent_dim(), code.len()));
        }
        let grid = self.decode_codes(code.as_slice(), 1)?;
        Ok(Field::from_parts_unchecked(grid, self.mask.clone()))
    }

    pub fn decode_batch(&self, codes: &[LatentCode]) -> Result<Vec<Field>> {
        if codes.is_empty() {
            return Ok(Vec::new());
        }
        let k = self.latent_dim();
        if let Some(c) = codes.iter().find(|c| c.len() != k) {
            return Err(Error::shape("decode", k, c.len()));
        }
        let flat: Vec<f64> = codes.iter().flat_map(|c| c.0.iter().copied()).collect();
        let grids = self.decode_codes(&flat, codes.len())?;
        Ok(grids
            .chunks_exact(self.arch.grid_len())
            .map(|g| Field::from_parts_unchecked(g.to_vec(), self.mask.clone()))
            .collect())
    }

    /// Encode-then-decode of a field.
    pub fn reconstruct(&self, field: &Field) -> Result<Field> {
        self.decode(&self.encode(field)?)
    }

    /// Per-dimension affine change of latent coordinates so that the codes
    /// of `fields` have mean 0 and variance 1. The map z -> (z - mu) / sd is
    /// folded into the encoder's last dense layer and its inverse into the
    /// decoder's first, so reconstructions are unchanged. Dimensions with no
    /// spread are only centred. Returns (mu, sd).
    pub fn standardize_latent(&mut self, fields: &[Field]) -> Result<(Vec<f64>, Vec<f64>)> {
        if fields.len() < 2 {
            return Err(Error::invalid("latent standardization needs at least 2 fields"));
        }
        let k = self.latent_dim();
        let mut sum = vec![0.0; k];
        let mut sq = vec![0.0; k];
        for chunk in fields.chunks(256) {
            for code in self.encode_batch(chunk)? {
                for (d, z) in code.0.iter().enumerate() {
                    sum[d] += z;
                    sq[d] += z * z;
                }
            }
        }
        let n = fields.len() as f64;
        let mu: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let sd: Vec<f64> = sq
            .iter()
            .zip(&mu)
            .map(|(q, m)| {
                let v = (q / n - m * m).max(0.0).sqrt();
                if v > 1e-12 * m.abs().max(1.0) { v } else { 1.0 }
            })
            .collect();

        let (enc_off, enc_spec) = self.encoder.param_blocks().last().map(|(o, s)| (o, s.clone())).expect("encoder has layers");
        let (dec_off, dec_spec) = self.decoder.param_blocks().next().map(|(o, s)| (o, s.clone())).expect("decoder has layers");
        debug_assert!(enc_spec.kind == LayerKind::Dense && dec_spec.kind == LayerKind::Dense);
        let dec_off = dec_off + self.encoder.param_count();
        let fan_in = enc_spec.in_channels;
        let fan_out = dec_spec.out_channels;
        let p = &mut self.params;
        // encoder: weights (k, fan_in) then bias (k)
        for d in 0..k {
            for j in 0..fan_in {
                p[enc_off + d * fan_in + j] /= sd[d];
            }
            let b = enc_off + k * fan_in + d;
            p[b] = (p[b] - mu[d]) / sd[d];
        }
        // decoder: weights (fan_out, k) then bias (fan_out)
        for o in 0..fan_out {
            let mut shift = 0.0;
            for d in 0..k {
                let w = &mut p[dec_off + o * k + d];
                shift += *w * mu[d];
                *w *= sd[d];
            }
            p[dec_off + fan_out * k + o] += shift;
        }
        Ok((mu, sd))
    }
}

fn check_mask(arch: &VaeArch, mask: &Mask) -> Result<()> {
    if mask.rows() != arch.grid_side || mask.cols() != arch.grid_side {
        return Err(Error::shape(
            "model mask",
            format!("{0}x{0}", arch.grid_side),
            format!("{}x{}", mask.rows(), mask.cols()),
        ));
    }
    Ok(())
}
