//! Static multi-symbol range coder with a carry-propagating byte cache
//! (64-bit `low`, 32-bit `range`, totals up to 2^16).

use crate::error::{Error, Result};

const TOP: u32 = 1 << 24;
/// Largest admissible frequency total.
pub const MAX_TOTAL: u32 = 1 << 16;

pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut temp = self.cache;
            loop {
                self.out.push(temp.wrapping_add(carry));
                temp = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    /// Narrow the interval to `[start, start + size)` out of `total`.
    pub fn encode(&mut self, start: u32, size: u32, total: u32) {
        debug_assert!(size > 0 && start + size <= total && total <= MAX_TOTAL);
        let r = self.range / total;
        self.low += r as u64 * start as u64;
        self.range = r * size;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub struct RangeDecoder<'a> {
    code: u32,
    range: u32,
    input: &'a [u8],
    pos: usize,
    r: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self> {
        if input.len() < 5 {
            return Err(Error::Truncated("range-coded payload shorter than 5 bytes".into()));
        }
        let mut code = 0u32;
        for &b in &input[1..5] {
            code = (code << 8) | b as u32;
        }
        Ok(Self {
            code,
            range: u32::MAX,
            input,
            pos: 5,
            r: 0,
        })
    }

    /// Cumulative frequency the next symbol falls into.
    pub fn decode_freq(&mut self, total: u32) -> Result<u32> {
        self.r = self.range / total;
        let v = self.code / self.r;
        if v >= total {
            return Err(Error::Malformed("range decoder left the coded interval".into()));
        }
        Ok(v)
    }

    pub fn update(&mut self, start: u32, size: u32) -> Result<()> {
        self.code -= self.r * start;
        self.range = self.r * size;
        while self.range < TOP {
            let b = *self
                .input
                .get(self.pos)
                .ok_or_else(|| Error::Truncated("range-coded payload ended early".into()))?;
            self.pos += 1;
            self.code = (self.code << 8) | b as u32;
            self.range <<= 8;
        }
        Ok(())
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

/// Symbol frequencies over the contiguous alphabet `[min_symbol, min_symbol + len)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyTable {
    pub min_symbol: i32,
    pub freqs: Vec<u32>,
    cumulative: Vec<u32>,
}

impl FrequencyTable {
    pub fn new(min_symbol: i32, freqs: Vec<u32>) -> Result<Self> {
        if freqs.is_empty() || freqs.iter().any(|&f| f == 0) {
            return Err(Error::Malformed("frequency table must be non-empty with positive entries".into()));
        }
        let mut cumulative = Vec::with_capacity(freqs.len() + 1);
        let mut acc = 0u64;
        cumulative.push(0);
        for &f in &freqs {
            acc += f as u64;
            if acc > MAX_TOTAL as u64 {
                return Err(Error::Malformed(format!("frequency total exceeds {MAX_TOTAL}")));
            }
            cumulative.push(acc as u32);
        }
        Ok(Self {
            min_symbol,
            freqs,
            cumulative,
        })
    }

    /// Empirical counts over `[min, max]` of `symbols`, each plus one,
    /// rescaled when the total would exceed [`MAX_TOTAL`].
    pub fn from_symbols(symbols: &[i32]) -> Result<Self> {
        let (lo, hi) = match (symbols.iter().min(), symbols.iter().max()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => (0, 0),
        };
        let k = (hi as i64 - lo as i64 + 1) as usize;
        if k > MAX_TOTAL as usize {
            return Err(Error::InvalidArgument(format!("alphabet of {k} symbols is too large")));
        }
        let mut counts = vec![1u64; k];
        for &s in symbols {
            counts[(s as i64 - lo as i64) as usize] += 1;
        }
        let total: u64 = counts.iter().sum();
        if total > MAX_TOTAL as u64 {
            let budget = (MAX_TOTAL as u64) - k as u64;
            for c in &mut counts {
                *c = 1 + (*c - 1) * budget / (total - k as u64);
            }
        }
        Self::new(lo, counts.into_iter().map(|c| c as u32).collect())
    }

    pub fn total(&self) -> u32 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn max_symbol(&self) -> i32 {
        self.min_symbol + self.freqs.len() as i32 - 1
    }

    fn index(&self, s: i32) -> Result<usize> {
        let i = s as i64 - self.min_symbol as i64;
        if i < 0 || i >= self.freqs.len() as i64 {
            return Err(Error::InvalidArgument(format!("symbol {s} outside the coded alphabet")));
        }
        Ok(i as usize)
    }

    /// Ideal code length in bits of `symbols` under this table.
    pub fn cost_bits(&self, symbols: &[i32]) -> f64 {
        let t = self.total() as f64;
        symbols
            .iter()
            .map(|&s| {
                let i = (s - self.min_symbol) as usize;
                (t / self.freqs[i] as f64).log2()
            })
            .sum()
    }
}

pub fn encode_symbols(symbols: &[i32], table: &FrequencyTable) -> Result<Vec<u8>> {
    let total = table.total();
    let mut enc = RangeEncoder::new();
    for &s in symbols {
        let i = table.index(s)?;
        enc.encode(table.cumulative[i], table.freqs[i], total);
    }
    Ok(enc.finish())
}

/// Decodes exactly `count` symbols; returns them and the bytes consumed.
pub fn decode_symbols(payload: &[u8], count: usize, table: &FrequencyTable) -> Result<(Vec<i32>, usize)> {
    let total = table.total();
    let mut dec = RangeDecoder::new(payload)?;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let v = dec.decode_freq(total)?;
        // Last i with cumulative[i] <= v.
        let i = table.cumulative.partition_point(|&c| c <= v) - 1;
        dec.update(table.cumulative[i], table.freqs[i])?;
        out.push(table.min_symbol + i as i32);
    }
    Ok((out, dec.consumed()))
}

/// Empirical entropy in bits per symbol.
pub fn empirical_entropy(symbols: &[i32]) -> f64 {
    if symbols.is_empty() {
        return 0.0;
    }
    let mut counts = std::collections::HashMap::new();
    for &s in symbols {
        *counts.entry(s).or_insert(0usize) += 1;
    }
    let n = symbols.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}
