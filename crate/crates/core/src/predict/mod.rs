//! Candidate prediction signals for one square block.
//!
//! Every predictor reads the band being coded only through a
//! [`CausalSource`], i.e. through samples that the decoder has already
//! reconstructed, and the spectral references only through reconstructed
//! planes. This keeps encoder and decoder predictions identical.

mod boundary;
mod interband;
mod intra;

pub use boundary::{build_boundary, spectral_boundary, BoundarySamples};
pub use interband::{
    extract_patch, predict_blockwise, predict_direct, predict_pel_recursive, processing_order,
    select_reference_band, PatchPair, PelContext, CORRELATION_PATCH, REGRESSION_PATCH,
};
pub use intra::predict_intra;

use crate::cube::Plane;

pub const BLOCK_SIZES: [usize; 4] = [4, 8, 16, 32];
pub const MIN_BLOCK: usize = 4;
pub const MAX_BLOCK: usize = 32;

/// Square block in image coordinates; `(x, y)` is the top-left sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockRect {
    pub x: usize,
    pub y: usize,
    pub size: usize,
}

impl BlockRect {
    pub fn new(x: usize, y: usize, size: usize) -> Self {
        BlockRect { x, y, size }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x + self.size <= width && self.y + self.size <= height
    }

    /// Quadrants in coding order: top-left, top-right, bottom-left, bottom-right.
    pub fn quadrants(&self) -> [BlockRect; 4] {
        let h = self.size / 2;
        [
            BlockRect::new(self.x, self.y, h),
            BlockRect::new(self.x + h, self.y, h),
            BlockRect::new(self.x, self.y + h, h),
            BlockRect::new(self.x + h, self.y + h, h),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntraMode {
    Dc,
    Planar,
    Horizontal,
    Vertical,
}

impl IntraMode {
    pub const ALL: [IntraMode; 4] = [
        IntraMode::Dc,
        IntraMode::Planar,
        IntraMode::Horizontal,
        IntraMode::Vertical,
    ];

    pub fn index(self) -> u32 {
        match self {
            IntraMode::Dc => 0,
            IntraMode::Planar => 1,
            IntraMode::Horizontal => 2,
            IntraMode::Vertical => 3,
        }
    }

    pub fn from_index(index: u32) -> Option<Self> {
        IntraMode::ALL.get(index as usize).copied()
    }
}

/// All prediction modes. Inter-band modes hold the lowest mode indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredMode {
    PelRecursive,
    BlockWise,
    /// Co-located copy of reference slot 0, 1 or 2.
    Direct(u8),
    Intra(IntraMode),
}

impl PredMode {
    pub const COUNT: usize = 9;

    pub const ALL: [PredMode; 9] = [
        PredMode::PelRecursive,
        PredMode::BlockWise,
        PredMode::Direct(0),
        PredMode::Direct(1),
        PredMode::Direct(2),
        PredMode::Intra(IntraMode::Dc),
        PredMode::Intra(IntraMode::Planar),
        PredMode::Intra(IntraMode::Horizontal),
        PredMode::Intra(IntraMode::Vertical),
    ];

    pub fn index(self) -> u32 {
        match self {
            PredMode::PelRecursive => 0,
            PredMode::BlockWise => 1,
            PredMode::Direct(slot) => 2 + slot as u32,
            PredMode::Intra(m) => 5 + m.index(),
        }
    }

    pub fn from_index(index: u32) -> Option<Self> {
        PredMode::ALL.get(index as usize).copied()
    }

    pub fn is_inter_band(self) -> bool {
        !matches!(self, PredMode::Intra(_))
    }

    pub fn name(self) -> &'static str {
        match self {
            PredMode::PelRecursive => "pel_recursive",
            PredMode::BlockWise => "block_wise",
            PredMode::Direct(0) => "direct1",
            PredMode::Direct(1) => "direct2",
            PredMode::Direct(_) => "direct3",
            PredMode::Intra(IntraMode::Dc) => "intra_dc",
            PredMode::Intra(IntraMode::Planar) => "intra_planar",
            PredMode::Intra(IntraMode::Horizontal) => "intra_horizontal",
            PredMode::Intra(IntraMode::Vertical) => "intra_vertical",
        }
    }
}

/// Block-local `N×N` prediction, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionPlane {
    pub size: usize,
    pub mode: PredMode,
    pub samples: Vec<i32>,
}

impl PredictionPlane {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.samples[row * self.size + col]
    }
}

/// Read access to the band being coded, restricted to its causal region.
pub trait CausalSource {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn bit_depth(&self) -> u8;
    fn is_available(&self, x: usize, y: usize) -> bool;
    /// Only meaningful where [`CausalSource::is_available`] holds.
    fn sample(&self, x: usize, y: usize) -> i32;
}

/// A reconstruction buffer plus the mask of samples decoded so far.
#[derive(Clone, Debug)]
pub struct CausalPlane {
    plane: Plane,
    decoded: Vec<bool>,
}

impl CausalPlane {
    pub fn new(width: usize, height: usize, bit_depth: u8) -> Self {
        CausalPlane {
            plane: Plane::filled(width, height, bit_depth, 0).expect("valid plane shape"),
            decoded: vec![false; width * height],
        }
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn into_plane(self) -> Plane {
        self.plane
    }

    /// Stores a reconstructed block and marks it decoded.
    pub fn commit_block(&mut self, block: BlockRect, samples: &[i32]) {
        debug_assert_eq!(samples.len(), block.size * block.size);
        for row in 0..block.size {
            for col in 0..block.size {
                let (x, y) = (block.x + col, block.y + row);
                self.plane.set(x, y, samples[row * block.size + col]);
                self.decoded[y * self.plane.width() + x] = true;
            }
        }
    }

    pub fn is_fully_decoded(&self) -> bool {
        self.decoded.iter().all(|&d| d)
    }
}

impl CausalSource for CausalPlane {
    fn width(&self) -> usize {
        self.plane.width()
    }

    fn height(&self) -> usize {
        self.plane.height()
    }

    fn bit_depth(&self) -> u8 {
        self.plane.bit_depth()
    }

    fn is_available(&self, x: usize, y: usize) -> bool {
        self.decoded[y * self.plane.width() + x]
    }

    fn sample(&self, x: usize, y: usize) -> i32 {
        self.plane.get(x, y)
    }
}

/// Three reconstructed spectral references plus the causal current band.
#[derive(Clone, Copy)]
pub struct ReferenceSet<'a> {
    pub spectral: [&'a Plane; 3],
    pub current: &'a dyn CausalSource,
}

impl<'a> ReferenceSet<'a> {
    pub fn new(spectral: [&'a Plane; 3], current: &'a dyn CausalSource) -> Self {
        debug_assert!(spectral.iter().all(|p| {
            p.width() == current.width()
                && p.height() == current.height()
                && p.bit_depth() == current.bit_depth()
        }));
        ReferenceSet { spectral, current }
    }

    pub fn bit_depth(&self) -> u8 {
        self.current.bit_depth()
    }
}
