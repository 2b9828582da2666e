//! Multispectral cube containers and their on-disk formats.
//!
//! Two layouts are supported: a planar raw file (band-major, row-major within
//! each band) accompanied by a JSON sidecar descriptor, and a directory of
//! binary PGM (P5) files holding one band each.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_CUBE_BIT_DEPTH: u8 = 8;
pub const MAX_BIT_DEPTH: u8 = 16;

/// One spectral band: row-major samples, each in `[0, 2^bit_depth)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    bit_depth: u8,
    samples: Vec<i32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, bit_depth: u8, samples: Vec<i32>) -> Result<Self> {
        if bit_depth == 0 || bit_depth > MAX_BIT_DEPTH {
            return Err(Error::UnsupportedBitDepth(bit_depth as u32));
        }
        if width == 0 || height == 0 {
            return Err(Error::Dimensions(format!("{width}x{height} plane")));
        }
        if samples.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a {width}x{height} plane",
                samples.len()
            )));
        }
        let max = (1i32 << bit_depth) - 1;
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, &v)| v < 0 || v > max)
        {
            return Err(Error::SampleOutOfRange {
                value: value as i64,
                index,
                bit_depth,
            });
        }
        Ok(Plane {
            width,
            height,
            bit_depth,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, bit_depth: u8, value: i32) -> Result<Self> {
        Plane::new(width, height, bit_depth, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    #[inline]
    pub fn max_value(&self) -> i32 {
        (1 << self.bit_depth) - 1
    }

    #[inline]
    pub fn samples(&self) -> &[i32] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.samples[y * self.width + x]
    }

    /// Callers must keep the value inside the sample range.
    #[inline]
    pub(crate) fn set(&mut self, x: usize, y: usize, value: i32) {
        debug_assert!(value >= 0 && value <= self.max_value());
        self.samples[y * self.width + x] = value;
    }

    pub fn same_shape(&self, other: &Plane) -> bool {
        self.width == other.width && self.height == other.height && self.bit_depth == other.bit_depth
    }
}

/// A `width × height × bands` cube stored as one [`Plane`] per band.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectralCube {
    width: usize,
    height: usize,
    bit_depth: u8,
    bands: Vec<Plane>,
}

impl SpectralCube {
    pub fn from_planes(bands: Vec<Plane>) -> Result<Self> {
        let first = bands
            .first()
            .ok_or_else(|| Error::Dimensions("cube without bands".into()))?;
        let (width, height, bit_depth) = (first.width, first.height, first.bit_depth);
        if !(MIN_CUBE_BIT_DEPTH..=MAX_BIT_DEPTH).contains(&bit_depth) {
            return Err(Error::UnsupportedBitDepth(bit_depth as u32));
        }
        if let Some(bad) = bands.iter().position(|p| !p.same_shape(first)) {
            return Err(Error::ShapeMismatch(format!(
                "band {bad} differs from band 0 in shape or bit depth"
            )));
        }
        Ok(SpectralCube {
            width,
            height,
            bit_depth,
            bands,
        })
    }

    /// Builds a cube from band-major samples.
    pub fn from_samples(
        width: usize,
        height: usize,
        bands: usize,
        bit_depth: u8,
        samples: Vec<i32>,
    ) -> Result<Self> {
        if bands == 0 {
            return Err(Error::Dimensions("cube without bands".into()));
        }
        if samples.len() != width * height * bands {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a {width}x{height}x{bands} cube",
                samples.len()
            )));
        }
        let band_len = width * height;
        let planes = samples
            .chunks(band_len.max(1))
            .enumerate()
            .map(|(b, chunk)| {
                Plane::new(width, height, bit_depth, chunk.to_vec()).map_err(|e| match e {
                    Error::SampleOutOfRange {
                        value,
                        index,
                        bit_depth,
                    } => Error::SampleOutOfRange {
                        value,
                        index: index + b * band_len,
                        bit_depth,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SpectralCube::from_planes(planes)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, index: usize) -> &Plane {
        &self.bands[index]
    }

    pub fn bands(&self) -> &[Plane] {
        &self.bands
    }

    pub fn into_bands(self) -> Vec<Plane> {
        self.bands
    }

    pub fn sample_count(&self) -> usize {
        self.width * self.height * self.bands.len()
    }

    pub fn descriptor(&self, endianness: Endianness) -> CubeDescriptor {
        CubeDescriptor {
            width: self.width,
            height: self.height,
            bands: self.bands.len(),
            bit_depth: self.bit_depth as u32,
            endianness,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    #[default]
    Little,
    Big,
}

/// Sidecar metadata for a planar raw cube.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeDescriptor {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub bit_depth: u32,
    #[serde(default)]
    pub endianness: Endianness,
}

impl CubeDescriptor {
    pub fn bytes_per_sample(&self) -> usize {
        if self.bit_depth <= 8 {
            1
        } else {
            2
        }
    }

    pub fn expected_len(&self) -> u64 {
        (self.width * self.height * self.bands * self.bytes_per_sample()) as u64
    }

    fn validate(&self) -> Result<u8> {
        if !(MIN_CUBE_BIT_DEPTH as u32..=MAX_BIT_DEPTH as u32).contains(&self.bit_depth) {
            return Err(Error::UnsupportedBitDepth(self.bit_depth));
        }
        if self.width == 0 || self.height == 0 || self.bands == 0 {
            return Err(Error::Descriptor(format!(
                "zero-sized cube {}x{}x{}",
                self.width, self.height, self.bands
            )));
        }
        Ok(self.bit_depth as u8)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Descriptor(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }
}

/// Conventional sidecar location for a raw cube: `cube.raw` → `cube.json`.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

pub fn load_descriptor(path: &Path) -> Result<CubeDescriptor> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CubeDescriptor::parse(&text)
}

pub fn store_descriptor(path: &Path, descriptor: &CubeDescriptor) -> Result<()> {
    fs::write(path, descriptor.to_json()).map_err(|e| Error::io(path, e))
}

/// Decodes planar raw bytes. Samples that do not fit `bit_depth` are rejected.
pub fn decode_raw(bytes: &[u8], descriptor: &CubeDescriptor) -> Result<SpectralCube> {
    let bit_depth = descriptor.validate()?;
    let expected = descriptor.expected_len();
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    let samples: Vec<i32> = match (descriptor.bytes_per_sample(), descriptor.endianness) {
        (1, _) => bytes.iter().map(|&b| b as i32).collect(),
        (_, Endianness::Big) => bytes
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as i32)
            .collect(),
        (_, Endianness::Little) => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as i32)
            .collect(),
    };
    SpectralCube::from_samples(
        descriptor.width,
        descriptor.height,
        descriptor.bands,
        bit_depth,
        samples,
    )
}

pub fn encode_raw(cube: &SpectralCube, endianness: Endianness) -> Vec<u8> {
    let wide = cube.bit_depth > 8;
    let mut out = Vec::with_capacity(cube.sample_count() * if wide { 2 } else { 1 });
    for &v in cube.bands.iter().flat_map(|b| b.samples.iter()) {
        if !wide {
            out.push(v as u8);
        } else {
            let v = v as u16;
            match endianness {
                Endianness::Big => out.extend_from_slice(&v.to_be_bytes()),
                Endianness::Little => out.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    out
}

pub fn load_cube(path: &Path, descriptor: &CubeDescriptor) -> Result<SpectralCube> {
    descriptor.validate()?;
    let len = fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    if len != descriptor.expected_len() {
        return Err(Error::SizeMismatch {
            expected: descriptor.expected_len(),
            found: len,
        });
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raw(&bytes, descriptor)
}

/// Writes the raw file and its sidecar descriptor next to it.
pub fn store_cube(path: &Path, cube: &SpectralCube, endianness: Endianness) -> Result<CubeDescriptor> {
    let descriptor = cube.descriptor(endianness);
    fs::write(path, encode_raw(cube, endianness)).map_err(|e| Error::io(path, e))?;
    store_descriptor(&sidecar_path(path), &descriptor)?;
    Ok(descriptor)
}

/// Smallest bit depth able to represent `maxval`.
pub fn bit_depth_for_maxval(maxval: u32) -> u8 {
    (32 - maxval.leading_zeros()) as u8
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Plane> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Pgm("truncated header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| !c.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if token(bytes)? != "P5" {
        return Err(Error::Pgm("expected binary P5 magic".into()));
    }
    let mut number = |what: &str| -> Result<u32> {
        let t = token(bytes)?;
        t.parse::<u32>()
            .map_err(|_| Error::Pgm(format!("bad {what} field {t:?}")))
    };
    let width = number("width")? as usize;
    let height = number("height")? as usize;
    let maxval = number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Pgm(format!("maxval {maxval} outside 1..=65535")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Pgm(format!("zero-sized image {width}x{height}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(|c| c.is_ascii_whitespace()) {
        return Err(Error::Pgm("missing separator after maxval".into()));
    }
    let raster = &bytes[pos + 1..];
    let bps = if maxval < 256 { 1 } else { 2 };
    let expected = (width * height * bps) as u64;
    if raster.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: raster.len() as u64,
        });
    }
    let samples: Vec<i32> = if bps == 1 {
        raster.iter().map(|&b| b as i32).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as i32)
            .collect()
    };
    let bit_depth = bit_depth_for_maxval(maxval);
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, &v)| v as u32 > maxval)
    {
        return Err(Error::SampleOutOfRange {
            value: value as i64,
            index,
            bit_depth,
        });
    }
    Plane::new(width, height, bit_depth, samples)
}

pub fn encode_pgm(plane: &Plane) -> Vec<u8> {
    let maxval = plane.max_value();
    let mut out = format!("P5\n{} {}\n{}\n", plane.width, plane.height, maxval).into_bytes();
    for &v in &plane.samples {
        if maxval < 256 {
            out.push(v as u8);
        } else {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        }
    }
    out
}

pub fn load_pgm_band(path: &Path) -> Result<Plane> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

pub fn store_pgm_band(path: &Path, plane: &Plane) -> Result<()> {
    fs::write(path, encode_pgm(plane)).map_err(|e| Error::io(path, e))
}

/// Loads every `*.pgm` in `dir`, ordered by file name, as the bands of a cube.
///
/// Bands may declare different maxvals; the cube takes the widest bit depth
/// (at least 8).
pub fn load_pgm_dir(dir: &Path) -> Result<SpectralCube> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Dimensions(format!(
            "no .pgm files in {}",
            dir.display()
        )));
    }
    let planes = paths
        .iter()
        .map(|p| load_pgm_band(p))
        .collect::<Result<Vec<_>>>()?;
    let depth = planes
        .iter()
        .map(Plane::bit_depth)
        .max()
        .unwrap_or(MIN_CUBE_BIT_DEPTH)
        .max(MIN_CUBE_BIT_DEPTH);
    let planes = planes
        .into_iter()
        .map(|p| Plane::new(p.width, p.height, depth, p.samples))
        .collect::<Result<Vec<_>>>()?;
    SpectralCube::from_planes(planes)
}

/// Writes `band_000.pgm`, `band_001.pgm`, … into `dir`.
pub fn store_pgm_dir(dir: &Path, cube: &SpectralCube) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, band) in cube.bands.iter().enumerate() {
        store_pgm_band(&dir.join(format!("band_{i:03}.pgm")), band)?;
    }
    Ok(())
}

/// Gain and offset applied to the shared structure to form one band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandGain {
    pub gain: f64,
    /// Offset in sample units.
    pub offset: f64,
}

/// The default per-band schedule used by [`synthesize_correlated_cube`]:
/// `gain_i = 0.6 + 0.8·frac(0.618034·i)` and
/// `offset_i = 0.15·max·frac(0.381966·i)`, where `max = 2^bit_depth − 1`.
pub fn default_gain_schedule(bands: usize, bit_depth: u8) -> Vec<BandGain> {
    let max = ((1u32 << bit_depth) - 1) as f64;
    (0..bands)
        .map(|i| {
            let i = i as f64;
            BandGain {
                gain: 0.6 + 0.8 * (0.618034 * i).fract(),
                offset: 0.15 * max * (0.381966 * i).fract(),
            }
        })
        .collect()
}

/// A deterministic textured field in `[0, 1]`: a smooth gradient, random
/// rectangles and disks (edges), and a few oriented sinusoids (texture).
pub fn structure_field(width: usize, height: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let mut field = vec![0.0f64; width * height];

    let gx = rng.gen_range(-1.0..1.0);
    let gy = rng.gen_range(-1.0..1.0);
    for y in 0..height {
        for x in 0..width {
            field[y * width + x] = 0.3 * (gx * x as f64 / w + gy * y as f64 / h);
        }
    }

    let shapes = 6 + (width * height) / 256;
    for _ in 0..shapes {
        let level = rng.gen_range(-0.6..0.6);
        let cx = rng.gen_range(0.0..w);
        let cy = rng.gen_range(0.0..h);
        let rx = rng.gen_range(2.0..(w / 3.0).max(3.0));
        let ry = rng.gen_range(2.0..(h / 3.0).max(3.0));
        let disk = rng.gen_bool(0.5);
        for y in 0..height {
            for x in 0..width {
                let dx = (x as f64 - cx) / rx;
                let dy = (y as f64 - cy) / ry;
                let inside = if disk {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    field[y * width + x] += level;
                }
            }
        }
    }

    for _ in 0..3 {
        let amp = rng.gen_range(0.05..0.2);
        let fx = rng.gen_range(0.05..0.6);
        let fy = rng.gen_range(0.05..0.6);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        for y in 0..height {
            for x in 0..width {
                field[y * width + x] += amp * (fx * x as f64 + fy * y as f64 + phase).sin();
            }
        }
    }

    let lo = field.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span > 0.0 {
        field.iter_mut().for_each(|v| *v = (*v - lo) / span);
    } else {
        field.iter_mut().for_each(|v| *v = 0.5);
    }
    field
}

/// Synthesizes a cube whose bands are affine transforms of one shared
/// structure plus independent uniform noise in `[-noise_amplitude, noise_amplitude]`.
///
/// The structure spans `[0, max/2]` and the bands follow
/// [`default_gain_schedule`].
pub fn synthesize_correlated_cube(
    width: usize,
    height: usize,
    bands: usize,
    bit_depth: u8,
    seed: u64,
    noise_amplitude: f64,
) -> Result<SpectralCube> {
    let schedule = default_gain_schedule(bands, bit_depth);
    synthesize_with_schedule(width, height, bit_depth, seed, noise_amplitude, &schedule)
}

/// Like [`synthesize_correlated_cube`] with an explicit per-band schedule.
pub fn synthesize_with_schedule(
    width: usize,
    height: usize,
    bit_depth: u8,
    seed: u64,
    noise_amplitude: f64,
    schedule: &[BandGain],
) -> Result<SpectralCube> {
    if schedule.len() < 4 {
        return Err(Error::Dimensions(format!(
            "synthetic cubes need at least 4 bands, got {}",
            schedule.len()
        )));
    }
    if !(noise_amplitude >= 0.0 && noise_amplitude.is_finite()) {
        return Err(Error::Dimensions(format!(
            "noise amplitude {noise_amplitude} must be finite and non-negative"
        )));
    }
    if !(MIN_CUBE_BIT_DEPTH..=MAX_BIT_DEPTH).contains(&bit_depth) {
        return Err(Error::UnsupportedBitDepth(bit_depth as u32));
    }
    let max = ((1u32 << bit_depth) - 1) as f64;
    let base: Vec<f64> = structure_field(width, height, seed)
        .into_iter()
        .map(|v| (v * max * 0.5).round())
        .collect();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let planes = schedule
        .iter()
        .map(|g| {
            let samples = base
                .iter()
                .map(|&b| {
                    let noise = if noise_amplitude > 0.0 {
                        noise_rng.gen_range(-noise_amplitude..=noise_amplitude)
                    } else {
                        0.0
                    };
                    (g.gain * b + g.offset + noise).round().clamp(0.0, max) as i32
                })
                .collect();
            Plane::new(width, height, bit_depth, samples)
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralCube::from_planes(planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{pearson_corr, SamplePairSet};

    fn desc(w: usize, h: usize, b: usize, bd: u32, e: Endianness) -> CubeDescriptor {
        CubeDescriptor {
            width: w,
            height: h,
            bands: b,
            bit_depth: bd,
            endianness: e,
        }
    }

    #[test]
    fn raw_bytes_are_identity_at_8_bit() {
        let cube = decode_raw(&[0, 1, 2, 3], &desc(2, 2, 1, 8, Endianness::Little)).unwrap();
        assert_eq!(cube.band(0).samples(), &[0, 1, 2, 3]);
    }

    #[test]
    fn off_by_one_length_is_rejected() {
        let d = desc(3, 2, 2, 12, Endianness::Little);
        let bytes = vec![0u8; 3 * 2 * 2 * 2 - 1];
        assert!(matches!(
            decode_raw(&bytes, &d),
            Err(Error::SizeMismatch { expected: 24, found: 23 })
        ));
    }

    #[test]
    fn big_endian_16_bit() {
        let cube = decode_raw(&[0x01, 0x00], &desc(1, 1, 1, 16, Endianness::Big)).unwrap();
        assert_eq!(cube.band(0).samples(), &[256]);
        let cube = decode_raw(&[0x01, 0x00], &desc(1, 1, 1, 16, Endianness::Little)).unwrap();
        assert_eq!(cube.band(0).samples(), &[1]);
    }

    #[test]
    fn out_of_range_samples_are_rejected_not_masked() {
        // 0x1000 = 4096 does not fit 12 bits.
        let err = decode_raw(&[0x00, 0x10, 0, 0], &desc(2, 1, 1, 12, Endianness::Little));
        assert!(matches!(
            err,
            Err(Error::SampleOutOfRange { value: 4096, index: 0, .. })
        ));
    }

    #[test]
    fn unsupported_bit_depth() {
        assert!(matches!(
            decode_raw(&[0], &desc(1, 1, 1, 7, Endianness::Little)),
            Err(Error::UnsupportedBitDepth(7))
        ));
        assert!(matches!(
            decode_raw(&[0, 0], &desc(1, 1, 1, 17, Endianness::Little)),
            Err(Error::UnsupportedBitDepth(17))
        ));
    }

    #[test]
    fn descriptor_json() {
        let d = CubeDescriptor::parse(
            r#"{"width": 4, "height": 8, "bands": 3, "bit_depth": 12, "endianness": "big"}"#,
        )
        .unwrap();
        assert_eq!(d, desc(4, 8, 3, 12, Endianness::Big));
        assert_eq!(CubeDescriptor::parse(&d.to_json()).unwrap(), d);
        assert!(CubeDescriptor::parse(r#"{"width": 4}"#).is_err());
    }

    #[test]
    fn pgm_header_parse() {
        let plane = parse_pgm(b"P5 2 1 255\n\x07\x09").unwrap();
        assert_eq!(plane.samples(), &[7, 9]);
        assert_eq!(plane.bit_depth(), 8);

        let plane = parse_pgm(b"P5\n# comment\n1 1\n65535\n\xff\xff").unwrap();
        assert_eq!(plane.samples(), &[65535]);
        assert_eq!(plane.bit_depth(), 16);
    }

    #[test]
    fn pgm_bit_depth_is_ceil_log2() {
        // Oracle: smallest d with 2^d > maxval.
        for maxval in 1u32..=65535 {
            let d = (1..=16).find(|d| (1u32 << d) > maxval).unwrap();
            assert_eq!(bit_depth_for_maxval(maxval), d as u8, "maxval {maxval}");
        }
        assert_eq!(bit_depth_for_maxval(1023), 10);
        let plane = parse_pgm(b"P5 1 1 1023\n\x03\xff").unwrap();
        assert_eq!((plane.bit_depth(), plane.samples()), (10, &[1023][..]));
    }

    #[test]
    fn pgm_errors() {
        assert!(matches!(parse_pgm(b"P2 1 1 255\n\x00"), Err(Error::Pgm(_))));
        assert!(matches!(parse_pgm(b"P5 1 1 0\n\x00"), Err(Error::Pgm(_))));
        assert!(matches!(parse_pgm(b"P5 1 1 65536\n\x00\x00"), Err(Error::Pgm(_))));
        assert!(matches!(parse_pgm(b"P5 1 1"), Err(Error::Pgm(_))));
        assert!(matches!(parse_pgm(b"P5 x 1 255\n\x00"), Err(Error::Pgm(_))));
        assert!(matches!(
            parse_pgm(b"P5 1 1 100\n\x65"),
            Err(Error::SampleOutOfRange { value: 101, .. })
        ));
        assert!(matches!(
            parse_pgm(b"P5 2 1 255\n\x00"),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for (bd, e) in [(8u8, Endianness::Little), (12, Endianness::Big), (16, Endianness::Little)] {
            let cube = synthesize_correlated_cube(8, 4, 5, bd, 3, 2.0).unwrap();
            let raw = dir.path().join(format!("c{bd}.raw"));
            let d = store_cube(&raw, &cube, e).unwrap();
            let loaded = load_cube(&raw, &load_descriptor(&sidecar_path(&raw)).unwrap()).unwrap();
            assert_eq!(loaded, cube);
            assert_eq!(d.endianness, e);

            let pgm_dir = dir.path().join(format!("pgm{bd}"));
            store_pgm_dir(&pgm_dir, &cube).unwrap();
            assert_eq!(load_pgm_dir(&pgm_dir).unwrap(), cube);
        }
    }

    #[test]
    fn identical_bands_without_noise() {
        let schedule = vec![
            BandGain {
                gain: 1.0,
                offset: 0.0
            };
            5
        ];
        let cube = synthesize_with_schedule(16, 16, 8, 11, 0.0, &schedule).unwrap();
        for b in cube.bands() {
            assert_eq!(b, cube.band(0));
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = synthesize_correlated_cube(16, 12, 6, 12, 42, 10.0).unwrap();
        let b = synthesize_correlated_cube(16, 12, 6, 12, 42, 10.0).unwrap();
        let c = synthesize_correlated_cube(16, 12, 6, 12, 43, 10.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_bands_are_affinely_related() {
        let cube = synthesize_correlated_cube(32, 32, 6, 16, 5, 0.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let pairs = SamplePairSet::new(
                    cube.band(i).samples().iter().map(|&v| v as f64).collect(),
                    cube.band(j).samples().iter().map(|&v| v as f64).collect(),
                );
                let rho = pearson_corr(&pairs).unwrap();
                // Integer rounding of the affine map is the only deviation.
                assert!(rho > 0.9999, "bands {i},{j}: {rho}");
            }
        }
    }

    #[test]
    fn synthesis_preconditions() {
        assert!(synthesize_correlated_cube(8, 8, 3, 8, 0, 0.0).is_err());
        assert!(synthesize_correlated_cube(8, 8, 4, 8, 0, -1.0).is_err());
    }
}
