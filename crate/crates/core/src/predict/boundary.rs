use super::{BlockRect, CausalSource};
use crate::cube::Plane;

/// The `2N+3` causal neighbours of an `N×N` block after substitution of
/// unavailable positions.
///
/// `top` covers row −1, columns −1..=N (so `top[0]` is the corner) and
/// `left` covers column −1, rows 0..=N.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundarySamples {
    size: usize,
    top: Vec<i32>,
    left: Vec<i32>,
    top_available: Vec<bool>,
    left_available: Vec<bool>,
}

impl BoundarySamples {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Row −1, columns −1..=N.
    pub fn top(&self) -> &[i32] {
        &self.top
    }

    /// Column −1, rows 0..=N.
    pub fn left(&self) -> &[i32] {
        &self.left
    }

    pub fn corner(&self) -> i32 {
        self.top[0]
    }

    pub fn top_available(&self) -> &[bool] {
        &self.top_available
    }

    pub fn left_available(&self) -> &[bool] {
        &self.left_available
    }

    pub fn len(&self) -> usize {
        self.top.len() + self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn any_available(&self) -> bool {
        self.top_available.iter().chain(&self.left_available).any(|&a| a)
    }

    /// Sample at block-relative `(row, col)` if that position belongs to the
    /// boundary set.
    #[inline]
    pub fn at(&self, row: isize, col: isize) -> Option<i32> {
        let n = self.size as isize;
        if row == -1 && (-1..=n).contains(&col) {
            Some(self.top[(col + 1) as usize])
        } else if col == -1 && (0..=n).contains(&row) {
            Some(self.left[row as usize])
        } else {
            None
        }
    }

    /// Block-relative positions of all boundary samples, top row first.
    pub fn positions(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        let n = self.size as isize;
        (-1..=n)
            .map(|c| (-1, c))
            .chain((0..=n).map(|r| (r, -1)))
    }

    /// All samples in the order of [`BoundarySamples::positions`].
    pub fn values(&self) -> impl Iterator<Item = i32> + '_ {
        self.top.iter().chain(&self.left).copied()
    }

    /// Samples in substitution scan order: bottom-left (row N) up the left
    /// column, through the corner, then along the top row to column N.
    pub fn scan_order(&self) -> Vec<i32> {
        self.left.iter().rev().chain(&self.top).copied().collect()
    }

    fn from_scan(size: usize, scan: Vec<i32>, avail: Vec<bool>) -> Self {
        let split = size + 1;
        let mut left = scan[..split].to_vec();
        left.reverse();
        let top = scan[split..].to_vec();
        let mut left_available = avail[..split].to_vec();
        left_available.reverse();
        let top_available = avail[split..].to_vec();
        BoundarySamples {
            size,
            top,
            left,
            top_available,
            left_available,
        }
    }
}

/// Image coordinates of boundary positions in scan order; `None` when the
/// position falls outside the image.
fn scan_coordinates(block: BlockRect, width: usize, height: usize) -> Vec<Option<(usize, usize)>> {
    let n = block.size as isize;
    let (bx, by) = (block.x as isize, block.y as isize);
    let inside = |x: isize, y: isize| {
        (x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height)
            .then_some((x as usize, y as usize))
    };
    (0..=n)
        .rev()
        .map(|row| inside(bx - 1, by + row))
        .chain((-1..=n).map(|col| inside(bx + col, by - 1)))
        .collect()
}

/// Replaces unavailable entries: the first one takes the first available
/// value along the scan, every later one copies its predecessor.
fn substitute(values: &mut [i32], avail: &[bool], default: i32) {
    match avail.iter().position(|&a| a) {
        None => values.iter_mut().for_each(|v| *v = default),
        Some(first) => {
            if first > 0 {
                values[0] = values[first];
            }
            for k in 1..values.len() {
                if !avail[k] {
                    values[k] = values[k - 1];
                }
            }
        }
    }
}

/// Gathers the boundary of `block` from the causal region of `source`.
///
/// With no available neighbour at all every sample becomes `2^(bit_depth−1)`.
pub fn build_boundary(block: BlockRect, source: &dyn CausalSource) -> BoundarySamples {
    let coords = scan_coordinates(block, source.width(), source.height());
    let avail: Vec<bool> = coords
        .iter()
        .map(|c| c.is_some_and(|(x, y)| source.is_available(x, y)))
        .collect();
    let mut values: Vec<i32> = coords
        .iter()
        .zip(&avail)
        .map(|(c, &a)| match (c, a) {
            (Some((x, y)), true) => source.sample(*x, *y),
            _ => 0,
        })
        .collect();
    substitute(&mut values, &avail, 1 << (source.bit_depth() - 1));
    BoundarySamples::from_scan(block.size, values, avail)
}

/// Boundary of `block` in a fully decoded spectral reference, substituted
/// with the availability pattern of the current band's boundary `template`,
/// so each substituted pair repeats an existing pair.
pub fn spectral_boundary(
    block: BlockRect,
    plane: &Plane,
    template: &BoundarySamples,
) -> BoundarySamples {
    let coords = scan_coordinates(block, plane.width(), plane.height());
    let mut avail: Vec<bool> = template.left_available.clone();
    avail.reverse();
    avail.extend_from_slice(&template.top_available);
    let mut values: Vec<i32> = coords
        .iter()
        .zip(&avail)
        .map(|(c, &a)| match (c, a) {
            (Some((x, y)), true) => plane.get(*x, *y),
            _ => 0,
        })
        .collect();
    substitute(&mut values, &avail, 1 << (plane.bit_depth() - 1));
    BoundarySamples::from_scan(block.size, values, avail)
}
