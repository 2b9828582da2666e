use super::{BoundarySamples, IntraMode, PredMode, PredictionPlane};

/// Spatial prediction from the substituted boundary.
pub fn predict_intra(boundary: &BoundarySamples, mode: IntraMode) -> PredictionPlane {
    let n = boundary.size();
    // top[c + 1] is column c; left[r] is row r.
    let top = boundary.top();
    let left = boundary.left();
    let mut samples = vec![0i32; n * n];
    match mode {
        IntraMode::Dc => {
            let sum: i64 = top[1..=n].iter().chain(&left[..n]).map(|&v| v as i64).sum();
            let dc = ((sum + n as i64) / (2 * n as i64)) as i32;
            samples.fill(dc);
        }
        IntraMode::Horizontal => {
            for (row, chunk) in samples.chunks_mut(n).enumerate() {
                chunk.fill(left[row]);
            }
        }
        IntraMode::Vertical => {
            for chunk in samples.chunks_mut(n) {
                chunk.copy_from_slice(&top[1..=n]);
            }
        }
        IntraMode::Planar => {
            let shift = n.trailing_zeros() + 1;
            let top_right = top[n + 1] as i64;
            let bottom_left = left[n] as i64;
            let n64 = n as i64;
            for row in 0..n {
                for col in 0..n {
                    let (r, c) = (row as i64, col as i64);
                    let v = (n64 - 1 - c) * left[row] as i64
                        + (c + 1) * top_right
                        + (n64 - 1 - r) * top[col + 1] as i64
                        + (r + 1) * bottom_left
                        + n64;
                    samples[row * n + col] = (v >> shift) as i32;
                }
            }
        }
    }
    PredictionPlane {
        size: n,
        mode: PredMode::Intra(mode),
        samples,
    }
}
