//! Cube encoder and decoder.
//!
//! Bands are coded one after another in the order carried by the header. The
//! first three coded bands use intra prediction only; every later band is
//! predicted from a sliding set of three reconstructed reference bands.
//! Within a band the image is tiled by 32×32 superblocks, each coded as a
//! quadtree whose leaves pick the prediction mode with the lowest
//! rate-distortion cost.

use crate::bitstream::{
    code_coefficients, code_mode, decode_coefficients, decode_mode, BitCounter, BitReader, BitSink,
    BitWriter, StreamHeader, VERSION,
};
use crate::cube::{Plane, SpectralCube};
use crate::error::{Error, Result};
use crate::metrics::{psnr, ssim, SSIM_WINDOW};
use crate::predict::{
    build_boundary, predict_blockwise, predict_direct, predict_intra, predict_pel_recursive, BlockRect,
    BoundarySamples, CausalPlane, PredMode, PredictionPlane, ReferenceSet, MAX_BLOCK, MIN_BLOCK,
};
use crate::transform::{check_qp, dct2, quantize, reconstruct_block, CoeffBlock};

/// Number of bands coded without spectral references.
pub const INTRA_BANDS: usize = 3;
/// Fewest bands for which ordering is applied.
pub const MIN_ORDERED_BANDS: usize = 4;

/// `λ = 0.85 · 2^((qp − 12) / 3)`.
pub fn lambda_of_qp(qp: u32) -> f64 {
    0.85 * 2f64.powf((qp as f64 - 12.0) / 3.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdCost {
    /// Sum of squared errors.
    pub distortion: f64,
    pub bits: u64,
}

impl RdCost {
    pub const ZERO: RdCost = RdCost {
        distortion: 0.0,
        bits: 0,
    };

    pub fn cost(&self, lambda: f64) -> f64 {
        self.distortion + lambda * self.bits as f64
    }

    fn add(self, other: RdCost) -> RdCost {
        RdCost {
            distortion: self.distortion + other.distortion,
            bits: self.bits + other.bits,
        }
    }
}

/// One evaluated leaf mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub mode: PredMode,
    pub rd: RdCost,
}

/// Index of the cheapest candidate; ties go to the earliest.
pub fn select_candidate(candidates: &[Candidate], lambda: f64) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.rd.cost(lambda) < candidates[best].rd.cost(lambda) {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeafCoding {
    pub mode: PredMode,
    pub coeffs: CoeffBlock,
    /// Every mode evaluated for this leaf, in evaluation order.
    pub candidates: Vec<Candidate>,
    recon: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Leaf(LeafCoding),
    /// Children in z-order; quadrants outside the image are omitted.
    Split(Vec<BlockNode>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockNode {
    pub rect: BlockRect,
    /// Whether a split flag is coded (false when the block sticks out of the
    /// image or has minimum size).
    pub has_flag: bool,
    pub kind: NodeKind,
    /// Total cost of the subtree including its split flag.
    pub rd: RdCost,
}

impl BlockNode {
    pub fn leaves(&self) -> Vec<&BlockNode> {
        match &self.kind {
            NodeKind::Leaf(_) => vec![self],
            NodeKind::Split(children) => children.iter().flat_map(BlockNode::leaves).collect(),
        }
    }

    pub fn is_split(&self) -> bool {
        matches!(self.kind, NodeKind::Split(_))
    }
}

/// Coding order and the fact whether it was derived by similarity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandPlan {
    /// Original band index at each coding position.
    pub order: Vec<usize>,
    pub ordering: bool,
}

fn similarity_usable(width: usize, height: usize) -> bool {
    width >= SSIM_WINDOW && height >= SSIM_WINDOW
}

/// Codes bands 0, 1, 2 first and the rest by ascending SSIM to the anchor
/// band, ties by index. Cubes with fewer than four bands, or planes too small
/// for the SSIM window, keep the original order with ordering disabled.
pub fn order_bands(cube: &SpectralCube, anchor: usize) -> Result<BandPlan> {
    let bands = cube.band_count();
    if anchor >= bands {
        return Err(Error::InvalidOption(format!("anchor {anchor} with {bands} bands")));
    }
    if bands < MIN_ORDERED_BANDS || !similarity_usable(cube.width(), cube.height()) {
        return Ok(BandPlan {
            order: (0..bands).collect(),
            ordering: false,
        });
    }
    let anchor_plane = cube.band(anchor);
    let mut rest = Vec::with_capacity(bands - INTRA_BANDS);
    for b in INTRA_BANDS..bands {
        rest.push((ssim(cube.band(b), anchor_plane)?, b));
    }
    rest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut order: Vec<usize> = (0..INTRA_BANDS).collect();
    order.extend(rest.into_iter().map(|(_, b)| b));
    Ok(BandPlan { order, ordering: true })
}

/// A reconstructed band held as spectral reference.
#[derive(Clone, Debug)]
pub struct ReferenceBand {
    pub band: usize,
    pub coded_pos: usize,
    pub plane: Plane,
}

/// Slot to overwrite with a newly coded band: the reference least similar
/// (lowest SSIM) to `new`, ties to the oldest. Without `by_similarity`, or
/// for planes smaller than the SSIM window, the oldest slot.
pub fn replaced_slot(refs: &[ReferenceBand; 3], new: &Plane, by_similarity: bool) -> usize {
    let oldest = (0..3).min_by_key(|&i| refs[i].coded_pos).unwrap();
    if !by_similarity || !similarity_usable(new.width(), new.height()) {
        return oldest;
    }
    let scores: Vec<f64> = refs
        .iter()
        .map(|r| ssim(&r.plane, new).expect("reference planes share the band shape"))
        .collect();
    let mut best = oldest;
    for i in 0..3 {
        let better = scores[i] < scores[best]
            || (scores[i] == scores[best] && refs[i].coded_pos < refs[best].coded_pos);
        if better {
            best = i;
        }
    }
    best
}

/// Replaces one reference by the just-coded band; returns the slot used.
pub fn update_references(refs: &mut [ReferenceBand; 3], new: ReferenceBand, by_similarity: bool) -> usize {
    let slot = replaced_slot(refs, &new.plane, by_similarity);
    refs[slot] = new;
    slot
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodeOptions {
    pub qp: u32,
    pub inter_band: bool,
    pub ordering: bool,
    pub anchor: usize,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            qp: 22,
            inter_band: true,
            ordering: true,
            anchor: 2,
        }
    }
}

/// Per-band coding summary, indexed by coding position.
#[derive(Clone, Debug, PartialEq)]
pub struct BandReport {
    pub band: usize,
    pub coded_pos: usize,
    /// Original band indices of reference slots 0..2.
    pub references: Option<[usize; 3]>,
    /// Offset of the band's first bit in the stream.
    pub bit_offset: u64,
    pub bits: u64,
    pub psnr: f64,
    /// Chosen leaves per mode, by mode index.
    pub mode_counts: [u64; PredMode::COUNT],
}

impl BandReport {
    pub fn leaves(&self) -> u64 {
        self.mode_counts.iter().sum()
    }

    pub fn inter_leaves(&self) -> u64 {
        PredMode::ALL
            .iter()
            .filter(|m| m.is_inter_band())
            .map(|m| self.mode_counts[m.index() as usize])
            .sum()
    }
}

/// Mode usage across a coded cube.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeStats {
    /// Per original band index.
    pub counts: Vec<[u64; PredMode::COUNT]>,
    /// Whether the band had spectral references.
    pub predicted: Vec<bool>,
}

impl ModeStats {
    /// Fraction of leaves coded with an inter-band mode, over the bands that
    /// had references. Zero when no band had references.
    pub fn inter_share(&self) -> f64 {
        let (mut inter, mut total) = (0u64, 0u64);
        for (counts, _) in self.counts.iter().zip(&self.predicted).filter(|(_, &p)| p) {
            for m in PredMode::ALL {
                let c = counts[m.index() as usize];
                total += c;
                if m.is_inter_band() {
                    inter += c;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            inter as f64 / total as f64
        }
    }

    pub fn total_leaves(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Clone, Debug)]
pub struct EncodedCube {
    pub bytes: Vec<u8>,
    pub header: StreamHeader,
    /// Encoder-side reconstruction, in original band order.
    pub reconstruction: SpectralCube,
    pub bands: Vec<BandReport>,
    pub stats: ModeStats,
}

impl EncodedCube {
    pub fn bpppb(&self) -> f64 {
        let h = &self.header;
        crate::metrics::bpppb(self.bytes.len(), h.width as usize, h.height as usize, h.bands as usize)
    }
}

/// Per-band coding parameters shared by the recursive search.
struct BandCoder<'a> {
    original: &'a Plane,
    spectral: Option<[&'a Plane; 3]>,
    qp: u32,
    lambda: f64,
}

impl BandCoder<'_> {
    fn inter(&self) -> bool {
        self.spectral.is_some()
    }

    fn modes(&self) -> &'static [PredMode] {
        if self.inter() {
            &PredMode::ALL
        } else {
            &PredMode::ALL[5..]
        }
    }

    fn evaluate(&self, rect: BlockRect, causal: &mut CausalPlane) -> BlockNode {
        let (w, h) = (self.original.width(), self.original.height());
        let fits = rect.fits(w, h);
        let has_flag = fits && rect.size > MIN_BLOCK;
        let flag_bits = has_flag as u64;

        let leaf = fits.then(|| self.evaluate_leaf(rect, causal, flag_bits));
        if rect.size == MIN_BLOCK {
            let (coding, rd) = leaf.expect("minimum blocks always fit");
            causal.commit_block(rect, &coding.recon);
            return BlockNode {
                rect,
                has_flag,
                kind: NodeKind::Leaf(coding),
                rd,
            };
        }

        let mut children = Vec::with_capacity(4);
        let mut split_rd = RdCost {
            distortion: 0.0,
            bits: flag_bits,
        };
        for q in rect.quadrants() {
            if q.x < w && q.y < h {
                let child = self.evaluate(q, causal);
                split_rd = split_rd.add(child.rd);
                children.push(child);
            }
        }
        match leaf {
            Some((coding, rd)) if rd.cost(self.lambda) <= split_rd.cost(self.lambda) => {
                causal.commit_block(rect, &coding.recon);
                BlockNode {
                    rect,
                    has_flag,
                    kind: NodeKind::Leaf(coding),
                    rd,
                }
            }
            _ => BlockNode {
                rect,
                has_flag,
                kind: NodeKind::Split(children),
                rd: split_rd,
            },
        }
    }

    fn evaluate_leaf(&self, rect: BlockRect, causal: &CausalPlane, flag_bits: u64) -> (LeafCoding, RdCost) {
        let boundary = build_boundary(rect, causal);
        let original = block_samples(self.original, rect);
        let bit_depth = self.original.bit_depth();
        let refs = self.spectral.map(|s| ReferenceSet::new(s, causal));
        let mut candidates = Vec::with_capacity(PredMode::COUNT);
        let mut best: Option<(usize, CoeffBlock, Vec<i32>)> = None;
        for &mode in self.modes() {
            let prediction = predict(mode, rect, &boundary, refs.as_ref());
            let residual: Vec<i32> = original.iter().zip(&prediction.samples).map(|(o, p)| o - p).collect();
            let coeffs = quantize(&dct2(&residual, rect.size), rect.size, self.qp);
            let recon = reconstruct_block(&prediction, &coeffs, bit_depth);
            let distortion: f64 = original
                .iter()
                .zip(&recon)
                .map(|(&o, &r)| {
                    let d = (o - r) as f64;
                    d * d
                })
                .sum();
            let mut counter = BitCounter::new();
            counter.put_bits(0, flag_bits as u32);
            code_mode(&mut counter, mode, self.inter()).expect("mode valid for band context");
            code_coefficients(&mut counter, &coeffs);
            candidates.push(Candidate {
                mode,
                rd: RdCost {
                    distortion,
                    bits: counter.bit_len(),
                },
            });
            let idx = candidates.len() - 1;
            if best.is_none() || select_candidate(&candidates, self.lambda) == idx {
                best = Some((idx, coeffs, recon));
            }
        }
        let (idx, coeffs, recon) = best.expect("at least one mode");
        let rd = candidates[idx].rd;
        (
            LeafCoding {
                mode: candidates[idx].mode,
                coeffs,
                candidates,
                recon,
            },
            rd,
        )
    }
}

fn block_samples(plane: &Plane, rect: BlockRect) -> Vec<i32> {
    let mut out = Vec::with_capacity(rect.size * rect.size);
    for y in rect.y..rect.y + rect.size {
        let start = y * plane.width() + rect.x;
        out.extend_from_slice(&plane.samples()[start..start + rect.size]);
    }
    out
}

/// Prediction signal of `mode` for `rect`; shared by encoder and decoder.
fn predict(
    mode: PredMode,
    rect: BlockRect,
    boundary: &BoundarySamples,
    refs: Option<&ReferenceSet<'_>>,
) -> PredictionPlane {
    let refs = || refs.expect("inter-band mode requires references");
    match mode {
        PredMode::Intra(m) => predict_intra(boundary, m),
        PredMode::PelRecursive => predict_pel_recursive(rect, refs()),
        PredMode::BlockWise => predict_blockwise(rect, refs()),
        PredMode::Direct(slot) => predict_direct(rect, refs(), slot),
    }
}

fn write_node<W: BitSink>(w: &mut W, node: &BlockNode, inter: bool, counts: &mut [u64; PredMode::COUNT]) {
    if node.has_flag {
        w.put_bit(node.is_split());
    }
    match &node.kind {
        NodeKind::Leaf(leaf) => {
            code_mode(w, leaf.mode, inter).expect("mode valid for band context");
            code_coefficients(w, &leaf.coeffs);
            counts[leaf.mode.index() as usize] += 1;
        }
        NodeKind::Split(children) => {
            for c in children {
                write_node(w, c, inter, counts);
            }
        }
    }
}

fn superblocks(width: usize, height: usize) -> impl Iterator<Item = BlockRect> {
    (0..height)
        .step_by(MAX_BLOCK)
        .flat_map(move |y| (0..width).step_by(MAX_BLOCK).map(move |x| BlockRect::new(x, y, MAX_BLOCK)))
}

/// Rate-distortion search for one superblock (or any block) given the causal
/// state; reconstructions of the chosen coding are committed to `causal`.
pub fn encode_block_recursive(
    rect: BlockRect,
    original: &Plane,
    causal: &mut CausalPlane,
    spectral: Option<[&Plane; 3]>,
    qp: u32,
    lambda: f64,
) -> BlockNode {
    BandCoder {
        original,
        spectral,
        qp,
        lambda,
    }
    .evaluate(rect, causal)
}

/// Bits of a coded tree as written to the stream.
pub fn tree_bits(node: &BlockNode, inter: bool) -> u64 {
    let mut c = BitCounter::new();
    write_node(&mut c, node, inter, &mut [0; PredMode::COUNT]);
    c.bit_len()
}

fn check_dimensions(width: usize, height: usize) -> Result<()> {
    if width < MIN_BLOCK || height < MIN_BLOCK || width % MIN_BLOCK != 0 || height % MIN_BLOCK != 0 {
        return Err(Error::Dimensions(format!(
            "{width}x{height}: width and height must be positive multiples of {MIN_BLOCK}"
        )));
    }
    Ok(())
}

/// Encodes a band and returns its reconstruction.
fn encode_band<W: BitSink>(
    w: &mut W,
    original: &Plane,
    spectral: Option<[&Plane; 3]>,
    qp: u32,
    counts: &mut [u64; PredMode::COUNT],
) -> Plane {
    let coder = BandCoder {
        original,
        spectral,
        qp,
        lambda: lambda_of_qp(qp),
    };
    let mut causal = CausalPlane::new(original.width(), original.height(), original.bit_depth());
    for sb in superblocks(original.width(), original.height()) {
        let node = coder.evaluate(sb, &mut causal);
        write_node(w, &node, coder.inter(), counts);
    }
    debug_assert!(causal.is_fully_decoded());
    causal.into_plane()
}

pub fn encode_cube(cube: &SpectralCube, options: &EncodeOptions) -> Result<EncodedCube> {
    check_qp(options.qp)?;
    check_dimensions(cube.width(), cube.height())?;
    let bands = cube.band_count();
    let plan = if options.ordering {
        order_bands(cube, options.anchor)?
    } else {
        if options.anchor >= bands {
            return Err(Error::InvalidOption(format!("anchor {} with {bands} bands", options.anchor)));
        }
        BandPlan {
            order: (0..bands).collect(),
            ordering: false,
        }
    };
    let header = StreamHeader {
        version: VERSION,
        width: cube.width() as u32,
        height: cube.height() as u32,
        bands: bands as u32,
        bit_depth: cube.bit_depth() as u32,
        qp: options.qp,
        inter_band: options.inter_band,
        ordering: plan.ordering,
        anchor: options.anchor as u32,
        band_order: plan.order.iter().map(|&b| b as u32).collect(),
    };
    header.validate()?;

    let mut w = BitWriter::new();
    header.write(&mut w);
    let mut recon: Vec<Option<Plane>> = vec![None; bands];
    let mut reports = Vec::with_capacity(bands);
    let mut refs: Option<[ReferenceBand; 3]> = None;
    let mut warmup: Vec<ReferenceBand> = Vec::with_capacity(INTRA_BANDS);

    for (pos, &band) in plan.order.iter().enumerate() {
        let original = cube.band(band);
        let use_refs = options.inter_band && refs.is_some();
        let spectral = refs
            .as_ref()
            .filter(|_| use_refs)
            .map(|r| [&r[0].plane, &r[1].plane, &r[2].plane]);
        let references = refs.as_ref().filter(|_| use_refs).map(|r| [r[0].band, r[1].band, r[2].band]);
        let bit_offset = w.bit_len();
        let mut mode_counts = [0u64; PredMode::COUNT];
        let plane = encode_band(&mut w, original, spectral, options.qp, &mut mode_counts);
        reports.push(BandReport {
            band,
            coded_pos: pos,
            references,
            bit_offset,
            bits: w.bit_len() - bit_offset,
            psnr: psnr(original, &plane)?,
            mode_counts,
        });
        advance_references(&mut refs, &mut warmup, band, pos, &plane, plan.ordering);
        recon[band] = Some(plane);
    }

    let reconstruction =
        SpectralCube::from_planes(recon.into_iter().map(|p| p.expect("every band coded")).collect())?;
    let mut counts = vec![[0u64; PredMode::COUNT]; bands];
    let mut predicted = vec![false; bands];
    for r in &reports {
        counts[r.band] = r.mode_counts;
        predicted[r.band] = r.references.is_some();
    }
    Ok(EncodedCube {
        bytes: w.finish(),
        header,
        reconstruction,
        bands: reports,
        stats: ModeStats { counts, predicted },
    })
}

/// Reference bookkeeping after coding one band, identical on both sides.
fn advance_references(
    refs: &mut Option<[ReferenceBand; 3]>,
    warmup: &mut Vec<ReferenceBand>,
    band: usize,
    pos: usize,
    plane: &Plane,
    by_similarity: bool,
) {
    let entry = ReferenceBand {
        band,
        coded_pos: pos,
        plane: plane.clone(),
    };
    match refs {
        Some(r) => {
            update_references(r, entry, by_similarity);
        }
        None => {
            warmup.push(entry);
            if warmup.len() == INTRA_BANDS {
                let mut it = std::mem::take(warmup).into_iter();
                *refs = Some([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]);
            }
        }
    }
}

/// Incremental decoder yielding bands in coding order.
pub struct Decoder<'a> {
    reader: BitReader<'a>,
    header: StreamHeader,
    pos: usize,
    refs: Option<[ReferenceBand; 3]>,
    warmup: Vec<ReferenceBand>,
}

impl<'a> Decoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        let mut reader = BitReader::new(bytes);
        let header = StreamHeader::read(&mut reader)?;
        let (w, h) = (header.width as u64, header.height as u64);
        // Every superblock costs at least three bits, which bounds the
        // allocation a forged header can request.
        let superblocks = w.div_ceil(MAX_BLOCK as u64) * h.div_ceil(MAX_BLOCK as u64);
        let needed = superblocks.saturating_mul(3).saturating_mul(header.bands as u64);
        if reader.remaining() < needed {
            return Err(Error::EndOfStream);
        }
        Ok(Decoder {
            reader,
            header,
            pos: 0,
            refs: None,
            warmup: Vec::with_capacity(INTRA_BANDS),
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    /// Original band index and reconstruction of the next coded band.
    pub fn next_band(&mut self) -> Result<Option<(usize, Plane)>> {
        if self.pos == self.header.bands as usize {
            return Ok(None);
        }
        let band = self.header.band_order[self.pos] as usize;
        let use_refs = self.header.inter_band && self.refs.is_some();
        let spectral = self
            .refs
            .as_ref()
            .filter(|_| use_refs)
            .map(|r| [&r[0].plane, &r[1].plane, &r[2].plane]);
        let (w, h) = (self.header.width as usize, self.header.height as usize);
        let bit_depth = self.header.bit_depth as u8;
        let mut causal = CausalPlane::new(w, h, bit_depth);
        for sb in superblocks(w, h) {
            decode_node(&mut self.reader, sb, &mut causal, spectral, self.header.qp)?;
        }
        let plane = causal.into_plane();
        advance_references(&mut self.refs, &mut self.warmup, band, self.pos, &plane, self.header.ordering);
        self.pos += 1;
        Ok(Some((band, plane)))
    }

    /// Checks that only zero padding remains.
    pub fn finish(mut self) -> Result<()> {
        self.reader.expect_end()
    }
}

fn decode_node(
    r: &mut BitReader<'_>,
    rect: BlockRect,
    causal: &mut CausalPlane,
    spectral: Option<[&Plane; 3]>,
    qp: u32,
) -> Result<()> {
    let (w, h) = (causal.plane().width(), causal.plane().height());
    let fits = rect.fits(w, h);
    let split = if !fits {
        true
    } else if rect.size > MIN_BLOCK {
        r.get_bit()?
    } else {
        false
    };
    if split {
        for q in rect.quadrants() {
            if q.x < w && q.y < h {
                decode_node(r, q, causal, spectral, qp)?;
            }
        }
        return Ok(());
    }
    let inter = spectral.is_some();
    let mode = decode_mode(r, inter)?;
    let coeffs = decode_coefficients(r, rect.size, qp)?;
    let boundary = build_boundary(rect, causal);
    let recon = {
        let refs = spectral.map(|s| ReferenceSet::new(s, causal));
        let prediction = predict(mode, rect, &boundary, refs.as_ref());
        reconstruct_block(&prediction, &coeffs, causal.plane().bit_depth())
    };
    causal.commit_block(rect, &recon);
    Ok(())
}

pub fn decode_cube(bytes: &[u8]) -> Result<SpectralCube> {
    let mut decoder = Decoder::new(bytes)?;
    let mut planes: Vec<Option<Plane>> = vec![None; decoder.header().bands as usize];
    while let Some((band, plane)) = decoder.next_band()? {
        planes[band] = Some(plane);
    }
    decoder.finish()?;
    SpectralCube::from_planes(planes.into_iter().map(|p| p.expect("permutation covers every band")).collect())
}
