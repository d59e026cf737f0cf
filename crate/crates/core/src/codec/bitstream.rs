//! The `.fnrv` container.
//!
//! ```text
//! magic        4 bytes  "FNRV"
//! version      u8       1
//! header_len   u32      length of the JSON header
//! header       JSON     {"model": ModelConfig, "video": {...}, "patch": PatchSpec}
//! count        u32      number of tensor records
//! count × record, sorted by name:
//!   name_len u16, name (UTF-8)
//!   ndim u8, dims ndim × u32
//!   bits u8, scale f32
//!   min_symbol i32, table_len u32, table_len × frequency (LEB128)
//!   payload_len u32, payload (range-coded symbols)
//! crc32        u32      over every preceding byte
//! ```
//!
//! All fixed-width integers are little-endian.

use serde::{Deserialize, Serialize};

use super::quant::{check_bits, max_symbol, QuantizedTensor};
use super::range_coder::{decode_symbols, encode_symbols, FrequencyTable};
use crate::error::{Error, Result};
use crate::model::checkpoint::Cursor;
use crate::model::ModelConfig;
use crate::video_io::PatchSpec;

pub const MAGIC: &[u8; 4] = b"FNRV";
pub const VERSION: u8 = 1;

/// Original (unpadded) video dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoDims {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl VideoDims {
    pub fn pixels(&self) -> usize {
        self.frames * self.height * self.width
    }
}

/// Everything a decoder needs besides the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub model: ModelConfig,
    pub video: VideoDims,
    pub patch: PatchSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bitstream {
    pub header: StreamHeader,
    pub tensors: Vec<QuantizedTensor>,
}

fn put_leb128(out: &mut Vec<u8>, mut v: u32) {
    loop {
        let b = (v & 0x7F) as u8;
        v >>= 7;
        if v == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

fn get_leb128(c: &mut Cursor<'_>) -> Result<u32> {
    let mut v = 0u64;
    for shift in (0..35).step_by(7) {
        let b = c.u8("frequency")?;
        v |= ((b & 0x7F) as u64) << shift;
        if b & 0x80 == 0 {
            return u32::try_from(v).map_err(|_| Error::Malformed("frequency overflows u32".into()));
        }
    }
    Err(Error::Malformed("unterminated varint".into()))
}

/// Entropy-code tensors into a complete stream.
pub fn entropy_encode(header: &StreamHeader, tensors: &[QuantizedTensor]) -> Result<Vec<u8>> {
    let mut sorted: Vec<&QuantizedTensor> = tensors.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    if sorted.windows(2).any(|w| w[0].name == w[1].name) {
        return Err(Error::InvalidArgument("duplicate tensor names".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let json = serde_json::to_vec(header)?;
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(sorted.len() as u32).to_le_bytes());
    for t in sorted {
        check_bits(t.bits as u32)?;
        let numel: usize = t.shape.iter().product();
        if numel != t.symbols.len() {
            return Err(Error::shape(&t.shape, &[t.symbols.len()]));
        }
        let qmax = max_symbol(t.bits);
        if t.symbols.iter().any(|s| s.abs() > qmax) {
            return Err(Error::InvalidArgument(format!(
                "tensor `{}` has symbols beyond ±{qmax}",
                t.name
            )));
        }
        if t.name.len() > u16::MAX as usize || t.shape.len() > u8::MAX as usize {
            return Err(Error::InvalidArgument(format!("tensor `{}` cannot be framed", t.name)));
        }
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(t.bits);
        out.extend_from_slice(&t.scale.to_le_bytes());
        let table = FrequencyTable::from_symbols(&t.symbols)?;
        out.extend_from_slice(&table.min_symbol.to_le_bytes());
        out.extend_from_slice(&(table.freqs.len() as u32).to_le_bytes());
        for &f in &table.freqs {
            put_leb128(&mut out, f);
        }
        let payload = encode_symbols(&t.symbols, &table)?;
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&payload);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Validate the trailer and parse a stream.
pub fn entropy_decode(bytes: &[u8]) -> Result<Bitstream> {
    if bytes.len() < MAGIC.len() + 1 + 4 {
        return Err(Error::Truncated(format!("stream of {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Malformed("missing FNRV magic".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::CrcMismatch { stored, computed });
    }
    let mut c = Cursor::new(body);
    c.take(4, "magic")?;
    let version = c.u8("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let header_len = c.u32("header length")? as usize;
    let header: StreamHeader = serde_json::from_slice(c.take(header_len, "header")?)?;
    let count = c.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let name_len = c.u16("name length")? as usize;
        let name = std::str::from_utf8(c.take(name_len, "tensor name")?)
            .map_err(|_| Error::Malformed("tensor name is not UTF-8".into()))?
            .to_string();
        let ndim = c.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(c.u32("dimension")? as usize);
        }
        let bits = check_bits(c.u8("bit width")? as u32).map_err(|e| Error::Malformed(e.to_string()))?;
        let scale = c.f32("scale")?;
        let min_symbol = c.i32("minimum symbol")?;
        let table_len = c.u32("table length")? as usize;
        if table_len > c.remaining() {
            return Err(Error::Truncated(format!("frequency table of `{name}`")));
        }
        let freqs = (0..table_len).map(|_| get_leb128(&mut c)).collect::<Result<Vec<_>>>()?;
        let table = FrequencyTable::new(min_symbol, freqs)?;
        let payload_len = c.u32("payload length")? as usize;
        let payload = c.take(payload_len, "payload")?;
        let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let numel = numel.ok_or_else(|| Error::Malformed(format!("shape of `{name}` overflows")))?;
        let (symbols, used) = decode_symbols(payload, numel, &table)?;
        if used != payload.len() {
            return Err(Error::Malformed(format!("payload of `{name}` has trailing bytes")));
        }
        let qmax = max_symbol(bits);
        if table.min_symbol < -qmax || table.max_symbol() > qmax {
            return Err(Error::Malformed(format!("symbols of `{name}` exceed the bit width")));
        }
        if let Some(prev) = tensors.last().map(|t: &QuantizedTensor| &t.name) {
            if *prev >= name {
                return Err(Error::Malformed("tensor records are not sorted by name".into()));
            }
        }
        tensors.push(QuantizedTensor {
            name,
            shape,
            bits,
            scale,
            symbols,
        });
    }
    if c.remaining() != 0 {
        return Err(Error::Malformed(format!("{} bytes after the last record", c.remaining())));
    }
    Ok(Bitstream { header, tensors })
}

/// `8 · bytes / (T·H·W)`.
pub fn measure_bpp(stream_bytes: usize, dims: &VideoDims) -> Result<f64> {
    if dims.pixels() == 0 {
        return Err(Error::InvalidArgument("video has no pixels".into()));
    }
    Ok(8.0 * stream_bytes as f64 / dims.pixels() as f64)
}
