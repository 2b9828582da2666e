//! Cross-spectral predictors: direct copy, block-wise affine and the
//! pel-recursive affine predictor.
//!
//! The pel-recursive predictor estimates a fresh affine model for every
//! sample. For the sample at `(m, n)` it
//!
//! 1. picks the reference slot whose `5×5` patch correlates best (largest
//!    `|ρ|`) with the current band's valid support,
//! 2. fits `r ≈ α·s + β` on the `3×3` patch of that slot,
//! 3. predicts `round(α·s[m,n] + β)`, clamped.
//!
//! Valid support consists of the block boundary and the block samples
//! already predicted; the processing order visits row 0, then column 0, then
//! the remaining samples in raster order so every sample sees support on at
//! least two sides.

use super::{
    build_boundary, spectral_boundary, BlockRect, BoundarySamples, PredMode, PredictionPlane,
    ReferenceSet,
};
use crate::cube::Plane;
use crate::regress::{fit_affine, pearson_corr, predict_value, SamplePairSet};

/// Patch edge used for reference-band selection.
pub const CORRELATION_PATCH: usize = 5;
/// Patch edge used for the affine fit.
pub const REGRESSION_PATCH: usize = 3;

/// Visiting order of the pel-recursive predictor for an `n×n` block, as
/// `(row, col)` pairs.
pub fn processing_order(n: usize) -> Vec<(usize, usize)> {
    let mut order = Vec::with_capacity(n * n);
    order.extend((0..n).map(|col| (0, col)));
    order.extend((1..n).map(|row| (row, 0)));
    for row in 1..n {
        order.extend((1..n).map(|col| (row, col)));
    }
    order
}

fn co_located(plane: &Plane, block: BlockRect) -> Vec<i32> {
    let mut out = Vec::with_capacity(block.size * block.size);
    for y in block.y..block.y + block.size {
        let start = y * plane.width() + block.x;
        out.extend_from_slice(&plane.samples()[start..start + block.size]);
    }
    out
}

/// Support state of one block during pel-recursive prediction.
pub struct PelContext {
    size: usize,
    bit_depth: u8,
    r_boundary: BoundarySamples,
    s_boundary: [BoundarySamples; 3],
    s_block: [Vec<i32>; 3],
    predicted: Vec<Option<i32>>,
}

impl PelContext {
    pub fn new(block: BlockRect, refs: &ReferenceSet<'_>) -> Self {
        let r_boundary = build_boundary(block, refs.current);
        let s_boundary = refs
            .spectral
            .map(|plane| spectral_boundary(block, plane, &r_boundary));
        let s_block = refs.spectral.map(|plane| co_located(plane, block));
        PelContext {
            size: block.size,
            bit_depth: refs.bit_depth(),
            r_boundary,
            s_boundary,
            s_block,
            predicted: vec![None; block.size * block.size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn boundary(&self) -> &BoundarySamples {
        &self.r_boundary
    }

    #[inline]
    fn in_block(&self, row: isize, col: isize) -> bool {
        let n = self.size as isize;
        (0..n).contains(&row) && (0..n).contains(&col)
    }

    /// Current-band support at a block-relative position: a boundary sample
    /// or an already predicted block sample.
    #[inline]
    pub fn support(&self, row: isize, col: isize) -> Option<i32> {
        if self.in_block(row, col) {
            self.predicted[row as usize * self.size + col as usize]
        } else {
            self.r_boundary.at(row, col)
        }
    }

    /// Spectral sample of reference `slot` at a block-relative position
    /// inside the block or on its boundary.
    #[inline]
    pub fn spectral(&self, slot: usize, row: isize, col: isize) -> Option<i32> {
        if self.in_block(row, col) {
            Some(self.s_block[slot][row as usize * self.size + col as usize])
        } else {
            self.s_boundary[slot].at(row, col)
        }
    }

    pub fn is_predicted(&self, row: usize, col: usize) -> bool {
        self.predicted[row * self.size + col].is_some()
    }

    pub fn mark_predicted(&mut self, row: usize, col: usize, value: i32) {
        self.predicted[row * self.size + col] = Some(value);
    }

    fn fill_patch(
        &self,
        center: (usize, usize),
        b: usize,
        slot: usize,
        pairs: &mut SamplePairSet,
        mut positions: Option<&mut Vec<(isize, isize)>>,
    ) {
        pairs.clear();
        let half = (b / 2) as isize;
        let (cm, cn) = (center.0 as isize, center.1 as isize);
        for row in cm - half..=cm + half {
            for col in cn - half..=cn + half {
                if row == cm && col == cn {
                    continue;
                }
                if let Some(r) = self.support(row, col) {
                    let s = self
                        .spectral(slot, row, col)
                        .expect("support positions have spectral samples");
                    pairs.push(s as f64, r as f64);
                    if let Some(p) = positions.as_deref_mut() {
                        p.push((row, col));
                    }
                }
            }
        }
    }
}

/// Co-located samples of one reference slot and the current band's valid
/// support inside a `b×b` patch, center excluded.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PatchPair {
    /// Block-relative `(row, col)` of each pair.
    pub positions: Vec<(isize, isize)>,
    pub pairs: SamplePairSet,
}

impl PatchPair {
    pub fn count(&self) -> usize {
        self.positions.len()
    }
}

/// # Panics
/// If `b` is even.
pub fn extract_patch(ctx: &PelContext, center: (usize, usize), b: usize, slot: usize) -> PatchPair {
    assert!(b % 2 == 1, "patch edge must be odd");
    let mut out = PatchPair::default();
    ctx.fill_patch(center, b, slot, &mut out.pairs, Some(&mut out.positions));
    out
}

/// Index of the slot with the largest `|ρ|` over the `5×5` patch; ties go to
/// the lowest slot and fewer than two support pairs select slot 0.
pub fn select_reference_band(ctx: &PelContext, center: (usize, usize)) -> usize {
    let mut pairs = SamplePairSet::with_capacity(CORRELATION_PATCH * CORRELATION_PATCH);
    select_with(ctx, center, &mut pairs)
}

fn select_with(ctx: &PelContext, center: (usize, usize), pairs: &mut SamplePairSet) -> usize {
    let mut best = (0usize, f64::NEG_INFINITY);
    for slot in 0..3 {
        ctx.fill_patch(center, CORRELATION_PATCH, slot, pairs, None);
        let Ok(rho) = pearson_corr(pairs) else {
            return 0;
        };
        if rho.abs() > best.1 {
            best = (slot, rho.abs());
        }
    }
    best.0
}

/// Per-sample affine prediction with recursively growing support.
pub fn predict_pel_recursive(block: BlockRect, refs: &ReferenceSet<'_>) -> PredictionPlane {
    let mut ctx = PelContext::new(block, refs);
    let n = block.size;
    let mut select_buf = SamplePairSet::with_capacity(CORRELATION_PATCH * CORRELATION_PATCH);
    let mut fit_buf = SamplePairSet::with_capacity(REGRESSION_PATCH * REGRESSION_PATCH);
    for (m, k) in processing_order(n) {
        let slot = select_with(&ctx, (m, k), &mut select_buf);
        ctx.fill_patch((m, k), REGRESSION_PATCH, slot, &mut fit_buf, None);
        let s = ctx.s_block[slot][m * n + k];
        let value = match fit_affine(&fit_buf) {
            Ok(model) => predict_value(&model, s, ctx.bit_depth),
            // Starved patch: co-located copy from the selected band.
            Err(_) => s,
        };
        ctx.mark_predicted(m, k, value);
    }
    PredictionPlane {
        size: n,
        mode: PredMode::PelRecursive,
        samples: ctx.predicted.into_iter().map(|v| v.expect("every sample predicted")).collect(),
    }
}

/// One affine model per block, estimated on the `2N+3` boundary pairs.
pub fn predict_blockwise(block: BlockRect, refs: &ReferenceSet<'_>) -> PredictionPlane {
    let r_boundary = build_boundary(block, refs.current);
    let r: Vec<f64> = r_boundary.values().map(|v| v as f64).collect();
    let mut best: Option<(usize, f64, SamplePairSet)> = None;
    for (slot, plane) in refs.spectral.iter().enumerate() {
        let s_boundary = spectral_boundary(block, plane, &r_boundary);
        let pairs = SamplePairSet::new(s_boundary.values().map(|v| v as f64).collect(), r.clone());
        let rho = pearson_corr(&pairs).expect("boundary has 2N+3 >= 5 samples").abs();
        if best.as_ref().is_none_or(|b| rho > b.1) {
            best = Some((slot, rho, pairs));
        }
    }
    let (slot, _, pairs) = best.expect("three reference slots");
    let model = fit_affine(&pairs).expect("boundary has 2N+3 >= 5 samples");
    let bit_depth = refs.bit_depth();
    let samples = co_located(refs.spectral[slot], block)
        .into_iter()
        .map(|s| predict_value(&model, s, bit_depth))
        .collect();
    PredictionPlane {
        size: block.size,
        mode: PredMode::BlockWise,
        samples,
    }
}

/// Co-located block of reference `slot` (0, 1 or 2) used as is.
pub fn predict_direct(block: BlockRect, refs: &ReferenceSet<'_>, slot: u8) -> PredictionPlane {
    PredictionPlane {
        size: block.size,
        mode: PredMode::Direct(slot),
        samples: co_located(refs.spectral[slot as usize], block),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::{CausalPlane, CausalSource};
    use crate::regress::AffineModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn plane_fn(w: usize, h: usize, bd: u8, mut f: impl FnMut(usize, usize) -> i32) -> Plane {
        let mut samples = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                samples.push(f(x, y));
            }
        }
        Plane::new(w, h, bd, samples).unwrap()
    }

    /// Current band decoded everywhere above and left of `block` (raster
    /// superblock order approximated by "row above or column left").
    fn causal_around(plane: &Plane, block: BlockRect) -> CausalPlane {
        let mut c = CausalPlane::new(plane.width(), plane.height(), plane.bit_depth());
        for y in 0..plane.height() {
            for x in 0..plane.width() {
                let above = y < block.y;
                let left = x < block.x && y < block.y + 2 * block.size;
                if above || left {
                    c.commit_block(BlockRect::new(x, y, 1), &[plane.get(x, y)]);
                }
            }
        }
        c
    }

    #[test]
    fn processing_order_small_cases() {
        assert_eq!(processing_order(1), vec![(0, 0)]);
        assert_eq!(processing_order(2), vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(
            processing_order(3),
            vec![(0, 0), (0, 1), (0, 2), (1, 0), (2, 0), (1, 1), (1, 2), (2, 1), (2, 2)]
        );
    }

    #[test]
    fn processing_order_visits_each_once() {
        for n in 1..=32 {
            let order = processing_order(n);
            let set: HashSet<_> = order.iter().copied().collect();
            assert_eq!(order.len(), n * n);
            assert_eq!(set.len(), n * n);
        }
    }

    fn origin_ctx(n: usize) -> PelContext {
        let p = plane_fn(32, 32, 8, |x, y| ((x * 3 + y * 5) % 200) as i32);
        let src = CausalPlane::new(32, 32, 8);
        PelContext::new(BlockRect::new(0, 0, n), &ReferenceSet::new([&p, &p, &p], &src))
    }

    #[test]
    fn patch_at_block_corner() {
        let ctx = origin_ctx(4);
        let patch = extract_patch(&ctx, (0, 0), 3, 0);
        let got: HashSet<_> = patch.positions.iter().copied().collect();
        let want: HashSet<_> = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (1, -1)].into_iter().collect();
        assert_eq!(got, want);
        assert_eq!(patch.count(), 5);
    }

    #[test]
    fn patch_in_raster_stage() {
        let n = 8;
        let mut ctx = origin_ctx(n);
        let order = processing_order(n);
        let at = order.iter().position(|&p| p == (3, 4)).unwrap();
        for &(r, c) in &order[..at] {
            ctx.mark_predicted(r, c, 1);
        }
        let got: HashSet<_> = extract_patch(&ctx, (3, 4), 3, 1).positions.into_iter().collect();
        let want: HashSet<_> = [(2, 3), (2, 4), (2, 5), (3, 3)].into_iter().collect();
        assert_eq!(got, want);

        // Next to column 0, the already predicted (m+1, 0) joins the support.
        let mut ctx = origin_ctx(n);
        let at = order.iter().position(|&p| p == (1, 1)).unwrap();
        for &(r, c) in &order[..at] {
            ctx.mark_predicted(r, c, 1);
        }
        let got: HashSet<_> = extract_patch(&ctx, (1, 1), 3, 0).positions.into_iter().collect();
        let want: HashSet<_> = [(0, 0), (0, 1), (0, 2), (1, 0), (2, 0)].into_iter().collect();
        assert_eq!(got, want);
    }

    #[test]
    fn unit_patch_is_empty() {
        let ctx = origin_ctx(4);
        assert_eq!(extract_patch(&ctx, (2, 2), 1, 0).count(), 0);
    }

    /// Enumerates valid patch positions directly from the processing order.
    #[test]
    fn patch_validity_matches_enumeration() {
        for n in [4usize, 8] {
            let order = processing_order(n);
            let mut ctx = origin_ctx(n);
            for (i, &(m, k)) in order.iter().enumerate() {
                for b in [3usize, 5] {
                    let half = (b / 2) as isize;
                    let mut want = HashSet::new();
                    for dr in -half..=half {
                        for dc in -half..=half {
                            let (r, c) = (m as isize + dr, k as isize + dc);
                            if (dr, dc) == (0, 0) {
                                continue;
                            }
                            let boundary = (r == -1 && (-1..=n as isize).contains(&c))
                                || (c == -1 && (0..=n as isize).contains(&r));
                            let earlier = order[..i].contains(&(r.max(-9) as usize, c.max(-9) as usize))
                                && r >= 0
                                && c >= 0;
                            if boundary || earlier {
                                want.insert((r, c));
                            }
                        }
                    }
                    let got: HashSet<_> = extract_patch(&ctx, (m, k), b, 0).positions.into_iter().collect();
                    assert_eq!(got, want, "n={n} center=({m},{k}) b={b}");
                }
                ctx.mark_predicted(m, k, 0);
            }
        }
    }

    fn ctx_with_relations(r_of: impl Fn(usize, usize) -> i32, s: [&Plane; 3]) -> PelContext {
        let r = plane_fn(16, 16, 12, r_of);
        let block = BlockRect::new(8, 8, 4);
        let src = causal_around(&r, block);
        PelContext::new(block, &ReferenceSet::new(s, &src))
    }

    #[test]
    fn selection_prefers_exact_affine_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s1 = plane_fn(16, 16, 12, |x, y| (x * 37 + y * 11) as i32 % 1000);
        let noise2 = plane_fn(16, 16, 12, |_, _| rng.gen_range(0..4096));
        let noise3 = plane_fn(16, 16, 12, |_, _| rng.gen_range(0..4096));
        let ctx = ctx_with_relations(|x, y| 3 * s1.get(x, y) + 5, [&s1, &noise2, &noise3]);
        assert_eq!(select_reference_band(&ctx, (0, 0)), 0);
        let ctx = ctx_with_relations(|x, y| 3 * s1.get(x, y) + 5, [&noise2, &noise3, &s1]);
        assert_eq!(select_reference_band(&ctx, (0, 0)), 2);
    }

    #[test]
    fn selection_ties_go_to_lowest_slot() {
        let s = plane_fn(16, 16, 12, |x, y| (x * 37 + y * 11) as i32 % 1000);
        let ctx = ctx_with_relations(|x, y| s.get(x, y) + 1, [&s, &s, &s]);
        assert_eq!(select_reference_band(&ctx, (0, 0)), 0);
    }

    #[test]
    fn selection_matches_pcc_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let planes: Vec<Plane> = (0..3)
                .map(|_| plane_fn(16, 16, 12, |_, _| rng.gen_range(0..4096)))
                .collect();
            let r = plane_fn(16, 16, 12, |_, _| rng.gen_range(0..4096));
            let ctx = ctx_with_relations(|x, y| r.get(x, y), [&planes[0], &planes[1], &planes[2]]);
            // Oracle: Pearson by the raw-sum formula over the 7 corner-patch
            // positions of the 5x5 window.
            let pos = [(-1, -1), (-1, 0), (-1, 1), (-1, 2), (0, -1), (1, -1), (2, -1)];
            let rho = |slot: usize| {
                let xs: Vec<f64> = pos.iter().map(|&(a, b)| ctx.spectral(slot, a, b).unwrap() as f64).collect();
                let ys: Vec<f64> = pos.iter().map(|&(a, b)| ctx.support(a, b).unwrap() as f64).collect();
                let n = xs.len() as f64;
                let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
                let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
                let sxx: f64 = xs.iter().map(|a| a * a).sum();
                let syy: f64 = ys.iter().map(|a| a * a).sum();
                ((n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())).abs()
            };
            let scores = [rho(0), rho(1), rho(2)];
            let want = (0..3).fold(0, |best, i| if scores[i] > scores[best] + 1e-12 { i } else { best });
            assert_eq!(select_reference_band(&ctx, (0, 0)), want, "{scores:?}");
        }
    }

    #[test]
    fn selection_falls_back_without_support() {
        let ctx = origin_ctx(4);
        // Origin boundary is fully substituted (constant), so |ρ| = 0 for all.
        assert_eq!(select_reference_band(&ctx, (0, 0)), 0);
    }

    #[test]
    fn pel_recursive_recovers_exact_affine_relation() {
        let s1 = plane_fn(32, 32, 12, |x, y| ((x * 29 + y * 17 + x * y) % 1500) as i32);
        // Noise, so that no stretch of support is accidentally affine in it.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let other = plane_fn(32, 32, 12, |_, _| rng.gen_range(0..4096));
        let r = plane_fn(32, 32, 12, |x, y| 2 * s1.get(x, y) + 3);
        for block in [BlockRect::new(8, 8, 8), BlockRect::new(16, 8, 4), BlockRect::new(0, 16, 16)] {
            let src = causal_around(&r, block);
            let refs = ReferenceSet::new([&s1, &other, &other], &src);
            let p = predict_pel_recursive(block, &refs);
            for row in 0..block.size {
                for col in 0..block.size {
                    assert_eq!(p.get(row, col), r.get(block.x + col, block.y + row), "{block:?} {row} {col}");
                }
            }
        }
    }

    #[test]
    fn pel_recursive_constant_references() {
        let s = Plane::filled(16, 16, 8, 40).unwrap();
        let r = Plane::filled(16, 16, 8, 90).unwrap();
        let block = BlockRect::new(4, 4, 8);
        let src = causal_around(&r, block);
        let p = predict_pel_recursive(block, &ReferenceSet::new([&s, &s, &s], &src));
        assert!(p.samples.iter().all(|&v| v == 90));
    }

    /// Stand-alone scalar restatement of the per-sample procedure, written
    /// against plain arrays rather than `PelContext`.
    fn pel_recursive_oracle(
        n: usize,
        bd: u8,
        r_top: &[i32],
        r_left: &[i32],
        s_full: [&dyn Fn(isize, isize) -> i32; 3],
    ) -> Vec<i32> {
        let mut pred: Vec<Option<i32>> = vec![None; n * n];
        let r_at = |pred: &Vec<Option<i32>>, row: isize, col: isize| -> Option<i32> {
            if row >= 0 && col >= 0 && row < n as isize && col < n as isize {
                pred[row as usize * n + col as usize]
            } else if row == -1 && col >= -1 && col <= n as isize {
                Some(r_top[(col + 1) as usize])
            } else if col == -1 && row >= 0 && row <= n as isize {
                Some(r_left[row as usize])
            } else {
                None
            }
        };
        let gather = |pred: &Vec<Option<i32>>, m: usize, k: usize, half: isize, slot: usize| {
            let mut v = Vec::new();
            for dr in -half..=half {
                for dc in -half..=half {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (row, col) = (m as isize + dr, k as isize + dc);
                    if let Some(rv) = r_at(pred, row, col) {
                        v.push((s_full[slot](row, col) as f64, rv as f64));
                    }
                }
            }
            v
        };
        let mut visit = Vec::new();
        for k in 0..n {
            visit.push((0, k));
        }
        for m in 1..n {
            visit.push((m, 0));
        }
        for m in 1..n {
            for k in 1..n {
                visit.push((m, k));
            }
        }
        for (m, k) in visit {
            let mut best_slot = 0;
            let mut best_abs = -1.0;
            for slot in 0..3 {
                let v = gather(&pred, m, k, 2, slot);
                let nn = v.len() as f64;
                let ms = v.iter().map(|p| p.0).sum::<f64>() / nn;
                let mr = v.iter().map(|p| p.1).sum::<f64>() / nn;
                let cov: f64 = v.iter().map(|p| (p.0 - ms) * (p.1 - mr)).sum();
                let vs: f64 = v.iter().map(|p| (p.0 - ms).powi(2)).sum();
                let vr: f64 = v.iter().map(|p| (p.1 - mr).powi(2)).sum();
                let rho = if vs == 0.0 || vr == 0.0 { 0.0 } else { cov / (vs.sqrt() * vr.sqrt()) };
                if rho.abs() > best_abs {
                    best_abs = rho.abs();
                    best_slot = slot;
                }
            }
            let v = gather(&pred, m, k, 1, best_slot);
            let nn = v.len() as f64;
            let ms = v.iter().map(|p| p.0).sum::<f64>() / nn;
            let mr = v.iter().map(|p| p.1).sum::<f64>() / nn;
            let cov: f64 = v.iter().map(|p| (p.0 - ms) * (p.1 - mr)).sum();
            let vs: f64 = v.iter().map(|p| (p.0 - ms).powi(2)).sum();
            let (a, b) = if vs == 0.0 { (0.0, mr) } else { (cov / vs, mr - cov / vs * ms) };
            let s = s_full[best_slot](m as isize, k as isize);
            let max = ((1 << bd) - 1) as f64;
            pred[m * n + k] = Some((a * s as f64 + b).round().clamp(0.0, max) as i32);
        }
        pred.into_iter().map(Option::unwrap).collect()
    }

    #[test]
    fn pel_recursive_tracks_piecewise_relation() {
        // Left half r = 2s + 3, right half r = 255 - s, in an 8x8 block.
        let bd = 8u8;
        let s1 = plane_fn(24, 24, bd, |x, y| ((x * 13 + y * 7 + (x ^ y) * 3) % 120) as i32);
        let s2 = plane_fn(24, 24, bd, |x, y| ((x * x + 3 * y) % 200) as i32);
        let s3 = plane_fn(24, 24, bd, |x, y| ((y * y + 5 * x) % 250) as i32);
        let r = plane_fn(24, 24, bd, |x, y| {
            if x < 12 {
                2 * s1.get(x, y) + 3
            } else {
                255 - s1.get(x, y)
            }
        });
        let block = BlockRect::new(8, 8, 8);
        let src = causal_around(&r, block);
        let refs = ReferenceSet::new([&s2, &s1, &s3], &src);
        let got = predict_pel_recursive(block, &refs);

        let b = build_boundary(block, &src);
        let planes = [&s2, &s1, &s3];
        let f0 = |row: isize, col: isize| planes[0].get((8 + col) as usize, (8 + row) as usize);
        let f1 = |row: isize, col: isize| planes[1].get((8 + col) as usize, (8 + row) as usize);
        let f2 = |row: isize, col: isize| planes[2].get((8 + col) as usize, (8 + row) as usize);
        let want = pel_recursive_oracle(8, bd, b.top(), b.left(), [&f0, &f1, &f2]);
        assert_eq!(got.samples, want);

        // The model switch is tracked: more than half the samples are exact.
        let exact = (0..8)
            .flat_map(|row| (0..8).map(move |col| (row, col)))
            .filter(|&(row, col)| got.get(row, col) == r.get(8 + col, 8 + row))
            .count();
        assert!(exact > 32, "only {exact} exact samples");
    }

    #[test]
    fn pel_recursive_matches_oracle_on_random_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..40 {
            let bd = [8u8, 12, 16][rng.gen_range(0..3)];
            let max = (1i32 << bd) - 1;
            let planes: Vec<Plane> = (0..4)
                .map(|_| plane_fn(24, 24, bd, |_, _| rng.gen_range(0..=max)))
                .collect();
            let n = [4usize, 8][rng.gen_range(0..2)];
            let block = BlockRect::new(8, 8, n);
            let src = causal_around(&planes[3], block);
            let refs = ReferenceSet::new([&planes[0], &planes[1], &planes[2]], &src);
            let got = predict_pel_recursive(block, &refs);
            let b = build_boundary(block, &src);
            let f = |i: usize| {
                let p = &planes[i];
                move |row: isize, col: isize| p.get((8 + col) as usize, (8 + row) as usize)
            };
            let (f0, f1, f2) = (f(0), f(1), f(2));
            assert_eq!(got.samples, pel_recursive_oracle(n, bd, b.top(), b.left(), [&f0, &f1, &f2]));
        }
    }

    #[test]
    fn blockwise_exact_offset() {
        let s = plane_fn(16, 16, 8, |x, y| ((x * 11 + y * 5) % 200) as i32);
        let r = plane_fn(16, 16, 8, |x, y| s.get(x, y) + 10);
        let block = BlockRect::new(4, 4, 8);
        let src = causal_around(&r, block);
        let p = predict_blockwise(block, &ReferenceSet::new([&s, &s, &s], &src));
        for row in 0..8 {
            for col in 0..8 {
                assert_eq!(p.get(row, col), s.get(4 + col, 4 + row) + 10);
            }
        }
    }

    #[test]
    fn blockwise_constant_boundary_gives_flat_plane() {
        let s = plane_fn(16, 16, 8, |x, y| ((x * 11 + y * 5) % 200) as i32);
        let r = Plane::filled(16, 16, 8, 123).unwrap();
        let block = BlockRect::new(4, 4, 8);
        let src = causal_around(&r, block);
        let p = predict_blockwise(block, &ReferenceSet::new([&s, &s, &s], &src));
        assert!(p.samples.iter().all(|&v| v == 123));
    }

    #[test]
    fn blockwise_matches_composition_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let planes: Vec<Plane> = (0..4)
                .map(|_| plane_fn(24, 24, 10, |_, _| rng.gen_range(0..1024)))
                .collect();
            let block = BlockRect::new(8, 8, 8);
            let src = causal_around(&planes[3], block);
            let refs = ReferenceSet::new([&planes[0], &planes[1], &planes[2]], &src);
            let got = predict_blockwise(block, &refs);

            // Oracle: all boundary positions are available here, so pairs are
            // read straight from the planes.
            let mut coords = Vec::new();
            for c in -1isize..=8 {
                coords.push((8 + c, 7isize));
            }
            for r in 0isize..=8 {
                coords.push((7isize, 8 + r));
            }
            let mut best = (0usize, -1.0f64);
            for slot in 0..3 {
                let pairs = SamplePairSet::new(
                    coords.iter().map(|&(x, y)| planes[slot].get(x as usize, y as usize) as f64).collect(),
                    coords.iter().map(|&(x, y)| planes[3].get(x as usize, y as usize) as f64).collect(),
                );
                let rho = pearson_corr(&pairs).unwrap().abs();
                if rho > best.1 {
                    best = (slot, rho);
                }
            }
            let pairs = SamplePairSet::new(
                coords.iter().map(|&(x, y)| planes[best.0].get(x as usize, y as usize) as f64).collect(),
                coords.iter().map(|&(x, y)| planes[3].get(x as usize, y as usize) as f64).collect(),
            );
            let AffineModel { alpha, beta } = fit_affine(&pairs).unwrap();
            for row in 0..8 {
                for col in 0..8 {
                    let s = planes[best.0].get(8 + col, 8 + row) as f64;
                    let want = (alpha * s + beta).round().clamp(0.0, 1023.0) as i32;
                    assert_eq!(got.get(row, col), want);
                }
            }
        }
    }

    #[test]
    fn blockwise_and_pel_recursive_agree_on_global_affine() {
        let s = plane_fn(32, 32, 12, |x, y| ((x * 41 + y * 23 + x * y * 3) % 1800) as i32);
        let r = plane_fn(32, 32, 12, |x, y| 2 * s.get(x, y) + 7);
        let block = BlockRect::new(8, 8, 16);
        let src = causal_around(&r, block);
        let refs = ReferenceSet::new([&s, &s, &s], &src);
        assert_eq!(
            predict_blockwise(block, &refs).samples,
            predict_pel_recursive(block, &refs).samples
        );
    }

    #[test]
    fn direct_copies_each_channel() {
        let a = Plane::filled(8, 8, 8, 7).unwrap();
        let b = plane_fn(8, 8, 8, |x, y| (x + 8 * y) as i32);
        let c = plane_fn(8, 8, 8, |x, _| 3 * x as i32);
        let src = CausalPlane::new(8, 8, 8);
        let refs = ReferenceSet::new([&a, &b, &c], &src);
        let block = BlockRect::new(4, 4, 4);
        assert!(predict_direct(block, &refs, 0).samples.iter().all(|&v| v == 7));
        let p1 = predict_direct(block, &refs, 1);
        let p2 = predict_direct(block, &refs, 2);
        for row in 0..4 {
            for col in 0..4 {
                assert_eq!(p1.get(row, col), b.get(4 + col, 4 + row));
                assert_eq!(p2.get(row, col), c.get(4 + col, 4 + row));
            }
        }
        assert_eq!(p1.mode, PredMode::Direct(1));
    }

    #[test]
    fn predictions_ignore_non_causal_samples() {
        // Garbage outside the causal region must not change any prediction.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<Plane> = (0..3)
            .map(|_| plane_fn(32, 32, 12, |_, _| rng.gen_range(0..4096)))
            .collect();
        let r = plane_fn(32, 32, 12, |_, _| rng.gen_range(0..4096));
        let block = BlockRect::new(8, 8, 8);
        let clean = causal_around(&r, block);
        let garbage = plane_fn(32, 32, 12, |x, y| {
            if clean.is_available(x, y) {
                r.get(x, y)
            } else {
                rng.gen_range(0..4096)
            }
        });
        let dirty = causal_around(&garbage, block);
        assert_ne!(garbage, r);
        let a = ReferenceSet::new([&s[0], &s[1], &s[2]], &clean);
        let b = ReferenceSet::new([&s[0], &s[1], &s[2]], &dirty);
        assert_eq!(predict_pel_recursive(block, &a), predict_pel_recursive(block, &b));
        assert_eq!(predict_blockwise(block, &a), predict_blockwise(block, &b));
    }
}
