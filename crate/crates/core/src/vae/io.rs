//! Binary model container.
//!
//! ```text
//! magic        6 bytes   "STVAE\0"
//! version      u32 LE
//! header_len   u64 LE
//! header       header_len bytes of UTF-8 JSON (architecture, layer specs,
//!              bounds, sigma2, history, mask rows, class means, layout note)
//! param_count  u64 LE
//! params       param_count x f64 LE, encoder layers then decoder layers,
//!              each layer's weights then bias
//! ```
//! Convolution weights are (ky, kx, in_c, out_c); dense weights are
//! (out, in); activations are NHWC.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{EpochRecord, VaeArch, VaeModel};
use crate::error::{Error, Result};
use crate::field::{Bounds, Mask};
use crate::nn::LayerSpec;

pub const MODEL_MAGIC: &[u8; 6] = b"STVAE\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;
const LAYOUT: &str = "nhwc; conv/deconv weights (ky,kx,in_c,out_c); dense weights (out,in); per layer weights then bias; encoder then decoder";
/// Headers beyond this are treated as corruption rather than allocated.
const MAX_HEADER: u64 = 64 << 20;

#[derive(Serialize, Deserialize)]
struct Header {
    arch: VaeArch,
    encoder: Vec<LayerSpec>,
    decoder: Vec<LayerSpec>,
    bounds: Bounds,
    sigma2: f64,
    history: Vec<EpochRecord>,
    best_epoch: Option<usize>,
    mask: Vec<String>,
    class_means: Option<Vec<Vec<f64>>>,
    layout: String,
}

pub fn serialize_model(model: &VaeModel) -> Result<Vec<u8>> {
    let header = Header {
        arch: *model.arch(),
        encoder: model.encoder().layers().to_vec(),
        decoder: model.decoder().layers().to_vec(),
        bounds: model.bounds,
        sigma2: model.sigma2,
        history: model.history.clone(),
        best_epoch: model.best_epoch,
        mask: model.mask.to_rows(),
        class_means: model.class_means.clone(),
        layout: LAYOUT.into(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::format(None, e.to_string()))?;
    let params = model.params();
    let mut out = Vec::with_capacity(6 + 4 + 8 + json.len() + 8 + 8 * params.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(
                None,
                format!("model file truncated: {what} needs {n} bytes at offset {}, {} available", self.pos, self.bytes.len() - self.pos),
            )
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn deserialize_model(bytes: &[u8]) -> Result<VaeModel> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(6, "magic")? != MODEL_MAGIC {
        return Err(Error::format(None, "not a model file (bad magic)"));
    }
    let version = u32::from_le_bytes(c.take(4, "version")?.try_into().expect("4 bytes"));
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::format(None, format!("unsupported model format version {version} (expected {MODEL_FORMAT_VERSION})")));
    }
    let header_len = c.u64("header length")?;
    if header_len > MAX_HEADER {
        return Err(Error::format(None, format!("implausible header length {header_len}")));
    }
    let header: Header = serde_json::from_slice(c.take(header_len as usize, "header")?)
        .map_err(|e| Error::format(None, format!("bad model header: {e}")))?;
    let count = c.u64("parameter count")?;
    let remaining = (bytes.len() - c.pos) as u64;
    if count.checked_mul(8) != Some(remaining) {
        return Err(Error::format(
            None,
            format!("parameter block holds {remaining} bytes but the header declares {count} parameters"),
        ));
    }
    let params: Vec<f64> = c
        .take(remaining as usize, "parameters")?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    if header.encoder != header.arch.encoder_layers() || header.decoder != header.arch.decoder_layers() {
        return Err(Error::format(None, "layer specs do not match the declared architecture"));
    }
    let mask = Mask::from_rows(&header.mask).map_err(|e| Error::format(None, format!("bad mask: {e}")))?;
    let mut model = VaeModel::from_params(header.arch, params, header.bounds, mask)
        .map_err(|e| Error::format(None, e.to_string()))?;
    if let Some(cm) = &header.class_means {
        if cm.iter().any(|c| c.len() != header.arch.latent_dim) {
            return Err(Error::format(None, "class mean length differs from latent size"));
        }
    }
    model.sigma2 = header.sigma2;
    model.history = header.history;
    model.best_epoch = header.best_epoch;
    model.class_means = header.class_means;
    Ok(model)
}

pub fn write_model<W: Write>(model: &VaeModel, mut w: W) -> Result<()> {
    w.write_all(&serialize_model(model)?)?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<VaeModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    deserialize_model(&bytes)
}

pub fn save_model(model: &VaeModel, path: &Path) -> Result<()> {
    crate::util::write_atomic(path, &serialize_model(model)?)
}

pub fn load_model(path: &Path) -> Result<VaeModel> {
    deserialize_model(&std::fs::read(path)?)
}
