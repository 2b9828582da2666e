//! Bit-level serialization of `.prbp` streams.
//!
//! Bits are written MSB first; multi-bit fields are big-endian and the final
//! byte is zero-padded. See `FORMAT.md` at the repository root for the full
//! syntax.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::predict::{IntraMode, PredMode, BLOCK_SIZES};
use crate::transform::CoeffBlock;

pub const MAGIC: [u8; 4] = *b"PRBP";
pub const VERSION: u32 = 1;

/// Anything that accepts bits. [`BitCounter`] lets rate estimation run the
/// exact syntax writers without producing bytes.
pub trait BitSink {
    /// Appends the `n` low bits of `value`, most significant first (`n <= 64`).
    fn put_bits(&mut self, value: u64, n: u32);
    fn bit_len(&self) -> u64;

    fn put_bit(&mut self, bit: bool) {
        self.put_bits(bit as u64, 1);
    }
}

#[derive(Clone, Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    filled: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pads the last byte with zeros and returns the payload.
    pub fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.bytes.push(self.acc << (8 - self.filled));
        }
        self.bytes
    }
}

impl BitSink for BitWriter {
    fn put_bits(&mut self, value: u64, n: u32) {
        debug_assert!(n <= 64);
        for i in (0..n).rev() {
            self.acc = (self.acc << 1) | ((value >> i) & 1) as u8;
            self.filled += 1;
            if self.filled == 8 {
                self.bytes.push(self.acc);
                self.acc = 0;
                self.filled = 0;
            }
        }
    }

    fn bit_len(&self) -> u64 {
        self.bytes.len() as u64 * 8 + self.filled as u64
    }
}

/// Counts bits without storing them.
#[derive(Clone, Copy, Debug, Default)]
pub struct BitCounter {
    bits: u64,
}

impl BitCounter {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BitSink for BitCounter {
    fn put_bits(&mut self, _value: u64, n: u32) {
        self.bits += n as u64;
    }

    fn bit_len(&self) -> u64 {
        self.bits
    }
}

pub struct BitReader<'a> {
    data: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        BitReader { data, pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.data.len() as u64 * 8 - self.pos
    }

    pub fn get_bit(&mut self) -> Result<bool> {
        if self.pos >= self.data.len() as u64 * 8 {
            return Err(Error::EndOfStream);
        }
        let byte = self.data[(self.pos / 8) as usize];
        let bit = (byte >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn get_bits(&mut self, n: u32) -> Result<u64> {
        debug_assert!(n <= 64);
        if self.remaining() < n as u64 {
            return Err(Error::EndOfStream);
        }
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.get_bit()? as u64;
        }
        Ok(v)
    }

    /// Fails unless only zero padding (< 8 bits) is left.
    pub fn expect_end(&mut self) -> Result<()> {
        let rest = self.remaining();
        if rest >= 8 {
            return Err(Error::CorruptStream(format!("{rest} trailing bits")));
        }
        if self.get_bits(rest as u32)? != 0 {
            return Err(Error::CorruptStream("non-zero padding".into()));
        }
        Ok(())
    }
}

/// Order-0 exp-Golomb: `value + 1` in binary, preceded by one zero per bit
/// after its leading one.
pub fn write_ue<W: BitSink + ?Sized>(w: &mut W, value: u64) {
    assert!(value < u64::MAX, "ue value out of range");
    let v = value + 1;
    let len = 64 - v.leading_zeros();
    w.put_bits(0, len - 1);
    w.put_bits(v, len);
}

pub fn read_ue(r: &mut BitReader<'_>) -> Result<u64> {
    let mut zeros = 0u32;
    while !r.get_bit()? {
        zeros += 1;
        if zeros > 63 {
            return Err(Error::CorruptStream("exp-Golomb prefix too long".into()));
        }
    }
    let rest = r.get_bits(zeros)?;
    Ok(((1u64 << zeros) | rest) - 1)
}

pub fn ue_len(value: u64) -> u32 {
    2 * (64 - (value + 1).leading_zeros()) - 1
}

/// Signed mapping `0, 1, −1, 2, −2, … → 0, 1, 2, 3, 4, …`.
pub fn se_to_ue(value: i64) -> u64 {
    if value > 0 {
        (value as u64) * 2 - 1
    } else {
        value.unsigned_abs() * 2
    }
}

pub fn ue_to_se(code: u64) -> i64 {
    if code % 2 == 1 {
        code.div_ceil(2) as i64
    } else {
        -((code / 2) as i64)
    }
}

pub fn write_se<W: BitSink + ?Sized>(w: &mut W, value: i64) {
    write_ue(w, se_to_ue(value));
}

pub fn read_se(r: &mut BitReader<'_>) -> Result<i64> {
    Ok(ue_to_se(read_ue(r)?))
}

/// Zig-zag scan positions (row-major indices) for an `n×n` block.
pub fn zigzag(n: usize) -> &'static [usize] {
    static TABLES: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| BLOCK_SIZES.iter().map(|&n| build_zigzag(n)).collect());
    let idx = BLOCK_SIZES
        .iter()
        .position(|&s| s == n)
        .unwrap_or_else(|| panic!("unsupported block size {n}"));
    &tables[idx]
}

fn build_zigzag(n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n * n);
    for d in 0..(2 * n - 1) {
        let lo = d.saturating_sub(n - 1);
        let hi = d.min(n - 1);
        if d % 2 == 0 {
            // up-right: row decreasing
            for row in (lo..=hi).rev() {
                order.push(row * n + (d - row));
            }
        } else {
            for row in lo..=hi {
                order.push(row * n + (d - row));
            }
        }
    }
    order
}

/// Run/level coding in zig-zag order: each non-zero level is
/// `ue(run + 1)`, `ue(|level| − 1)`, sign bit; `ue(0)` ends the block.
pub fn code_coefficients<W: BitSink + ?Sized>(w: &mut W, block: &CoeffBlock) {
    let mut run = 0u64;
    for &pos in zigzag(block.size) {
        let level = block.levels[pos];
        if level == 0 {
            run += 1;
            continue;
        }
        write_ue(w, run + 1);
        write_ue(w, level.unsigned_abs() as u64 - 1);
        w.put_bit(level < 0);
        run = 0;
    }
    write_ue(w, 0);
}

pub fn decode_coefficients(r: &mut BitReader<'_>, n: usize, qp: u32) -> Result<CoeffBlock> {
    let scan = zigzag(n);
    let mut block = CoeffBlock::zeros(n, qp);
    let mut pos = 0usize;
    loop {
        let symbol = read_ue(r)?;
        if symbol == 0 {
            return Ok(block);
        }
        let run = symbol - 1;
        if run >= (scan.len() - pos) as u64 {
            return Err(Error::CorruptStream(format!(
                "coefficient run {run} overflows {n}x{n} block at position {pos}"
            )));
        }
        pos += run as usize;
        let magnitude = read_ue(r)? + 1;
        if magnitude > i32::MAX as u64 {
            return Err(Error::CorruptStream(format!("coefficient level {magnitude}")));
        }
        let negative = r.get_bit()?;
        block.levels[scan[pos]] = if negative { -(magnitude as i32) } else { magnitude as i32 };
        pos += 1;
    }
}

/// Writes a prediction mode. With inter-band prediction enabled every mode is
/// `ue(index)`; intra-only bands use a 2-bit intra index.
pub fn code_mode<W: BitSink + ?Sized>(w: &mut W, mode: PredMode, inter_band: bool) -> Result<()> {
    match (inter_band, mode) {
        (true, m) => write_ue(w, m.index() as u64),
        (false, PredMode::Intra(m)) => w.put_bits(m.index() as u64, 2),
        (false, m) => return Err(Error::InvalidMode(m.index())),
    }
    Ok(())
}

pub fn decode_mode(r: &mut BitReader<'_>, inter_band: bool) -> Result<PredMode> {
    if inter_band {
        let index = read_ue(r)?;
        u32::try_from(index)
            .ok()
            .and_then(PredMode::from_index)
            .ok_or(Error::InvalidMode(index.min(u32::MAX as u64) as u32))
    } else {
        let index = r.get_bits(2)? as u32;
        Ok(PredMode::Intra(
            IntraMode::from_index(index).expect("2-bit index is a valid intra mode"),
        ))
    }
}

/// Fixed-size stream preamble.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamHeader {
    pub version: u32,
    pub width: u32,
    pub height: u32,
    pub bands: u32,
    pub bit_depth: u32,
    pub qp: u32,
    pub inter_band: bool,
    pub ordering: bool,
    pub anchor: u32,
    /// Original band index at each coding position.
    pub band_order: Vec<u32>,
}

const FLAG_INTER_BAND: u32 = 1;
const FLAG_ORDERING: u32 = 2;
const MAX_BANDS: u32 = 1 << 16;

impl StreamHeader {
    pub fn bit_len(&self) -> u64 {
        32 + 32 * 8 + 32 * self.band_order.len() as u64
    }

    pub fn write<W: BitSink + ?Sized>(&self, w: &mut W) {
        for b in MAGIC {
            w.put_bits(b as u64, 8);
        }
        let flags = if self.inter_band { FLAG_INTER_BAND } else { 0 }
            | if self.ordering { FLAG_ORDERING } else { 0 };
        for field in [
            self.version,
            self.width,
            self.height,
            self.bands,
            self.bit_depth,
            self.qp,
            flags,
            self.anchor,
        ] {
            w.put_bits(field as u64, 32);
        }
        for &b in &self.band_order {
            w.put_bits(b as u64, 32);
        }
    }

    pub fn read(r: &mut BitReader<'_>) -> Result<Self> {
        let mut magic = [0u8; 4];
        for b in &mut magic {
            *b = r.get_bits(8)? as u8;
        }
        if magic != MAGIC {
            return Err(Error::CorruptStream(format!("bad magic {magic:?}")));
        }
        let mut field = || -> Result<u32> { Ok(r.get_bits(32)? as u32) };
        let version = field()?;
        if version != VERSION {
            return Err(Error::CorruptStream(format!("unsupported version {version}")));
        }
        let width = field()?;
        let height = field()?;
        let bands = field()?;
        let bit_depth = field()?;
        let qp = field()?;
        let flags = field()?;
        let anchor = field()?;
        if flags & !(FLAG_INTER_BAND | FLAG_ORDERING) != 0 {
            return Err(Error::CorruptStream(format!("unknown flags {flags:#x}")));
        }
        if bands == 0 || bands > MAX_BANDS {
            return Err(Error::CorruptStream(format!("band count {bands}")));
        }
        if r.remaining() < 32 * bands as u64 {
            return Err(Error::EndOfStream);
        }
        let band_order = (0..bands)
            .map(|_| r.get_bits(32).map(|v| v as u32))
            .collect::<Result<Vec<_>>>()?;
        let header = StreamHeader {
            version,
            width,
            height,
            bands,
            bit_depth,
            qp,
            inter_band: flags & FLAG_INTER_BAND != 0,
            ordering: flags & FLAG_ORDERING != 0,
            anchor,
            band_order,
        };
        header.validate()?;
        Ok(header)
    }

    pub fn validate(&self) -> Result<()> {
        let corrupt = |m: String| Err(Error::CorruptStream(m));
        if self.width < 4 || self.height < 4 || self.width % 4 != 0 || self.height % 4 != 0 {
            return corrupt(format!("dimensions {}x{}", self.width, self.height));
        }
        if !(8..=16).contains(&self.bit_depth) {
            return corrupt(format!("bit depth {}", self.bit_depth));
        }
        if self.qp > 51 {
            return corrupt(format!("qp {}", self.qp));
        }
        if self.anchor >= self.bands {
            return corrupt(format!("anchor {} of {} bands", self.anchor, self.bands));
        }
        if self.band_order.len() != self.bands as usize {
            return corrupt("band order length".into());
        }
        let mut seen = vec![false; self.bands as usize];
        for &b in &self.band_order {
            match seen.get_mut(b as usize) {
                Some(s) if !*s => *s = true,
                _ => return corrupt("band order is not a permutation".into()),
            }
        }
        Ok(())
    }
}
