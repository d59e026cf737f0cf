use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::tensor::Tensor;

/// Symmetric per-tensor uniform quantization of one named tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub bits: u8,
    pub scale: f32,
    pub symbols: Vec<i32>,
}

pub fn check_bits(bits: u32) -> Result<u8> {
    if !(2..=16).contains(&bits) {
        return Err(Error::InvalidArgument(format!("bit width {bits} outside [2, 16]")));
    }
    Ok(bits as u8)
}

/// Largest symbol magnitude for `bits`: `2^(bits-1) - 1`.
pub fn max_symbol(bits: u8) -> i32 {
    (1i32 << (bits - 1)) - 1
}

/// Step size `max|w| / (2^(bits-1) - 1)`, or 1 for an all-zero tensor.
pub fn tensor_scale(values: &[f32], bits: u8) -> f32 {
    let m = values.iter().fold(0.0f32, |a, v| a.max(v.abs()));
    if m == 0.0 {
        1.0
    } else {
        (m as f64 / max_symbol(bits) as f64) as f32
    }
}

/// Nearest symbol with ties away from zero, decided on the exact product
/// `symbol · scale` so that `|w − symbol·scale| ≤ scale/2` holds exactly.
fn symbol_for(w: f32, scale: f32, qmax: i32) -> i32 {
    let (w, s) = (w as f64, scale as f64);
    let mut q = ((w / s).round() as i64).clamp(-(qmax as i64), qmax as i64);
    // w/s is rounded once; fix the rare case where that lands on the wrong
    // side of a midpoint. Products of a ≤16-bit integer and an f32 are exact
    // in f64.
    let err = |q: i64| (w - q as f64 * s).abs();
    for cand in [q - 1, q + 1] {
        if cand.abs() <= qmax as i64 {
            let (e, ec) = (err(q), err(cand));
            if ec < e || (ec == e && cand.abs() > q.abs()) {
                q = cand;
            }
        }
    }
    q as i32
}

pub fn quantize_values(values: &[f32], bits: u8) -> (f32, Vec<i32>) {
    let scale = tensor_scale(values, bits);
    let qmax = max_symbol(bits);
    (scale, values.iter().map(|&w| symbol_for(w, scale, qmax)).collect())
}

pub fn quantize_tensor(name: &str, tensor: &Tensor<f32>, bits: u32) -> Result<QuantizedTensor> {
    let bits = check_bits(bits)?;
    let (scale, symbols) = quantize_values(tensor.data(), bits);
    Ok(QuantizedTensor {
        name: name.to_string(),
        shape: tensor.shape().to_vec(),
        bits,
        scale,
        symbols,
    })
}

impl QuantizedTensor {
    /// Dequantized weights as `f32(symbol · scale)`.
    pub fn dequantize(&self) -> Tensor<f32> {
        let data = self.symbols.iter().map(|&q| q as f32 * self.scale).collect();
        Tensor::from_vec(&self.shape, data).expect("shape matches symbol count")
    }

    /// `max |w − symbol·scale|` over the tensor, evaluated exactly.
    pub fn max_error(&self, original: &Tensor<f32>) -> f64 {
        original
            .data()
            .iter()
            .zip(&self.symbols)
            .map(|(&w, &q)| (w as f64 - q as f64 * self.scale as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// Quantize → dequantize in place of a forward pass: what a decoder will
/// see for this tensor.
pub fn fake_quantize(values: &[f32], bits: u8) -> Vec<f32> {
    let (scale, symbols) = quantize_values(values, bits);
    symbols.iter().map(|&q| q as f32 * scale).collect()
}

/// Every parameter tensor of `model`, sorted by name.
pub fn quantize_model(model: &Model<f32>, bits: u32) -> Result<Vec<QuantizedTensor>> {
    let mut out = model
        .params()
        .into_iter()
        .map(|(name, t)| quantize_tensor(&name, t, bits))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

pub fn dequantize_model(config: &ModelConfig, tensors: &[QuantizedTensor]) -> Result<Model<f32>> {
    let mut named = std::collections::BTreeMap::new();
    for t in tensors {
        if named.insert(t.name.clone(), t.dequantize()).is_some() {
            return Err(Error::Malformed(format!("duplicate tensor `{}`", t.name)));
        }
    }
    Model::from_params(config, named)
}
