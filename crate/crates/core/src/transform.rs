//! Residual transform and scalar quantization.
//!
//! The transform is a floating-point orthonormal 2-D DCT-II. Only integer
//! quantization levels cross the bitstream, and encoder and decoder share
//! [`reconstruct_block`], so both sides reconstruct identical samples.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::predict::{PredictionPlane, BLOCK_SIZES};

/// Orthonormal DCT-II basis, `basis[k * n + i] = c_k · cos(π(2i+1)k / 2n)`.
fn basis(n: usize) -> &'static [f64] {
    static TABLES: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        BLOCK_SIZES
            .iter()
            .map(|&n| {
                let mut m = vec![0.0; n * n];
                let nf = n as f64;
                for k in 0..n {
                    let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    for i in 0..n {
                        m[k * n + i] = c
                            * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos();
                    }
                }
                m
            })
            .collect()
    });
    let idx = BLOCK_SIZES
        .iter()
        .position(|&s| s == n)
        .unwrap_or_else(|| panic!("unsupported transform size {n}"));
    &tables[idx]
}

/// `out = B · x · Bᵀ` (forward) or `Bᵀ · x · B` (inverse).
fn separable(input: &[f64], n: usize, inverse: bool) -> Vec<f64> {
    let b = basis(n);
    let at = |k: usize, i: usize| if inverse { b[i * n + k] } else { b[k * n + i] };
    let mut tmp = vec![0.0; n * n];
    // rows
    for r in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += at(k, i) * input[r * n + i];
            }
            tmp[r * n + k] = acc;
        }
    }
    // columns
    let mut out = vec![0.0; n * n];
    for c in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += at(k, i) * tmp[i * n + c];
            }
            out[k * n + c] = acc;
        }
    }
    out
}

/// Forward orthonormal 2-D DCT-II of a row-major `n×n` block.
pub fn dct2(residual: &[i32], n: usize) -> Vec<f64> {
    assert_eq!(residual.len(), n * n);
    let input: Vec<f64> = residual.iter().map(|&v| v as f64).collect();
    separable(&input, n, false)
}

/// Inverse of [`dct2`].
pub fn idct2(coeffs: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(coeffs.len(), n * n);
    separable(coeffs, n, true)
}

pub fn check_qp(qp: u32) -> Result<()> {
    if qp > 51 {
        Err(Error::QpOutOfRange(qp))
    } else {
        Ok(())
    }
}

/// Quantizer step: doubles every 6 QP, unity at QP 4.
pub fn qstep(qp: u32) -> f64 {
    2f64.powf((qp as f64 - 4.0) / 6.0)
}

/// Quantized transform levels of one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoeffBlock {
    pub size: usize,
    pub qp: u32,
    pub levels: Vec<i32>,
}

impl CoeffBlock {
    pub fn zeros(size: usize, qp: u32) -> Self {
        CoeffBlock {
            size,
            qp,
            levels: vec![0; size * size],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().all(|&l| l == 0)
    }
}

/// `level = round(c / Qstep)`, half away from zero.
pub fn quantize(coeffs: &[f64], n: usize, qp: u32) -> CoeffBlock {
    let step = qstep(qp);
    CoeffBlock {
        size: n,
        qp,
        levels: coeffs.iter().map(|&c| (c / step).round() as i32).collect(),
    }
}

pub fn dequantize(block: &CoeffBlock) -> Vec<f64> {
    let step = qstep(block.qp);
    block.levels.iter().map(|&l| l as f64 * step).collect()
}

/// `clamp(prediction + round(residual))` per sample.
pub fn reconstruct(prediction: &[i32], residual: &[f64], bit_depth: u8) -> Vec<i32> {
    assert_eq!(prediction.len(), residual.len());
    let max = (1i32 << bit_depth) - 1;
    prediction
        .iter()
        .zip(residual)
        .map(|(&p, &r)| (p + r.round() as i32).clamp(0, max))
        .collect()
}

/// Decoder-side reconstruction of a block from its prediction and levels.
/// All-zero levels reproduce the prediction without a transform.
pub fn reconstruct_block(prediction: &PredictionPlane, levels: &CoeffBlock, bit_depth: u8) -> Vec<i32> {
    if levels.is_zero() {
        return prediction.samples.clone();
    }
    let residual = idct2(&dequantize(levels), levels.size);
    reconstruct(&prediction.samples, &residual, bit_depth)
}
