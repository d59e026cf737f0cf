//! Weight quantization, entropy coding, the `.fnrv` container and
//! scalable decoding.

mod bitstream;
mod quant;
mod range_coder;

pub use bitstream::{entropy_decode, entropy_encode, measure_bpp, Bitstream, StreamHeader, VideoDims, MAGIC, VERSION};
pub use quant::{
    check_bits, dequantize_model, fake_quantize, max_symbol, quantize_model, quantize_tensor, quantize_values,
    tensor_scale, QuantizedTensor,
};
pub use range_coder::{
    decode_symbols, empirical_entropy, encode_symbols, FrequencyTable, RangeDecoder, RangeEncoder, MAX_TOTAL,
};

use crate::error::Result;
use crate::model::Model;
use crate::render::reconstruct;
use crate::video_io::VideoTensor;

impl Bitstream {
    /// The dequantized model carried by the stream.
    pub fn model(&self) -> Result<Model<f32>> {
        dequantize_model(&self.header.model, &self.tensors)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        entropy_encode(&self.header, &self.tensors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        entropy_decode(bytes)
    }
}

/// Quantize `model` at `bits` and pack it with `header`.
pub fn encode_model(model: &Model<f32>, header: StreamHeader, bits: u32) -> Result<Bitstream> {
    Ok(Bitstream {
        header,
        tensors: quantize_model(model, bits)?,
    })
}

/// Reconstruct the video at resolution level `level` (1 = coarsest). Stages
/// past `level` are never run; padding is cropped away.
pub fn decode_video(stream: &Bitstream, level: usize) -> Result<VideoTensor> {
    let model = stream.model()?;
    model.check_level(level)?;
    let v = &stream.header.video;
    reconstruct(&model, v.frames, v.height, v.width, &stream.header.patch, level)
}
