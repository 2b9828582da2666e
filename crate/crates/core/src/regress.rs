//! Correlation and affine least-squares fitting between a spectral reference
//! and the current band's causal reference.

use crate::error::{Error, Result};

/// Paired samples: `s` from a spectral reference, `r` from the current band.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SamplePairSet {
    s_values: Vec<f64>,
    r_values: Vec<f64>,
}

impl SamplePairSet {
    /// # Panics
    /// If the two vectors differ in length.
    pub fn new(s_values: Vec<f64>, r_values: Vec<f64>) -> Self {
        assert_eq!(s_values.len(), r_values.len(), "unpaired samples");
        SamplePairSet { s_values, r_values }
    }

    pub fn with_capacity(n: usize) -> Self {
        SamplePairSet {
            s_values: Vec::with_capacity(n),
            r_values: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, s: f64, r: f64) {
        self.s_values.push(s);
        self.r_values.push(r);
    }

    pub fn clear(&mut self) {
        self.s_values.clear();
        self.r_values.clear();
    }

    pub fn len(&self) -> usize {
        self.s_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_values.is_empty()
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s_values
    }

    pub fn r_values(&self) -> &[f64] {
        &self.r_values
    }

    fn require_support(&self) -> Result<()> {
        if self.len() < 2 {
            Err(Error::InsufficientSupport(self.len()))
        } else {
            Ok(())
        }
    }

    /// Centered second moments `(Σ(s−s̄)², Σ(r−r̄)², Σ(s−s̄)(r−r̄))` and the means.
    fn moments(&self) -> Moments {
        let n = self.len() as f64;
        let mean_s = self.s_values.iter().sum::<f64>() / n;
        let mean_r = self.r_values.iter().sum::<f64>() / n;
        let mut m = Moments {
            mean_s,
            mean_r,
            ss: 0.0,
            rr: 0.0,
            sr: 0.0,
        };
        for (&s, &r) in self.s_values.iter().zip(&self.r_values) {
            let ds = s - mean_s;
            let dr = r - mean_r;
            m.ss += ds * ds;
            m.rr += dr * dr;
            m.sr += ds * dr;
        }
        m
    }
}

struct Moments {
    mean_s: f64,
    mean_r: f64,
    ss: f64,
    rr: f64,
    sr: f64,
}

/// `r ≈ alpha · s + beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineModel {
    pub alpha: f64,
    pub beta: f64,
}

impl AffineModel {
    pub fn apply(&self, s: f64) -> f64 {
        self.alpha * s + self.beta
    }
}

/// Pearson correlation of the pairs. Zero variance in either vector yields 0.
pub fn pearson_corr(pairs: &SamplePairSet) -> Result<f64> {
    pairs.require_support()?;
    let m = pairs.moments();
    if m.ss == 0.0 || m.rr == 0.0 {
        return Ok(0.0);
    }
    Ok((m.sr / (m.ss.sqrt() * m.rr.sqrt())).clamp(-1.0, 1.0))
}

/// Least-squares `(alpha, beta)` minimizing `‖alpha·s + beta − r‖²`.
///
/// A constant `s` carries no slope information, so the fit degrades to
/// `alpha = 0, beta = mean(r)`.
pub fn fit_affine(pairs: &SamplePairSet) -> Result<AffineModel> {
    pairs.require_support()?;
    let m = pairs.moments();
    if m.ss == 0.0 {
        return Ok(AffineModel {
            alpha: 0.0,
            beta: m.mean_r,
        });
    }
    let alpha = m.sr / m.ss;
    Ok(AffineModel {
        alpha,
        beta: m.mean_r - alpha * m.mean_s,
    })
}

/// Applies the model to one spectral sample, rounding half away from zero and
/// clamping to the sample range.
pub fn predict_value(model: &AffineModel, s_value: i32, bit_depth: u8) -> i32 {
    let max = ((1i64 << bit_depth) - 1) as f64;
    let v = model.apply(s_value as f64).round();
    if v.is_nan() {
        return 0;
    }
    v.clamp(0.0, max) as i32
}
