//! Quality and rate measurements: PSNR, SSIM, bits per pixel per band and
//! Bjøntegaard delta rate.

use crate::cube::{Plane, SpectralCube};
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 8;

fn check_shapes(a: &Plane, b: &Plane) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}@{} vs {}x{}@{}",
            a.width(),
            a.height(),
            a.bit_depth(),
            b.width(),
            b.height(),
            b.bit_depth()
        )));
    }
    Ok(())
}

fn squared_error(a: &Plane, b: &Plane) -> u128 {
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = (x - y) as i64;
            (d * d) as u128
        })
        .sum()
}

fn psnr_from(sse: u128, count: usize, max: i32) -> f64 {
    if sse == 0 {
        return f64::INFINITY;
    }
    let mse = sse as f64 / count as f64;
    10.0 * ((max as f64).powi(2) / mse).log10()
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical planes.
pub fn psnr(reference: &Plane, distorted: &Plane) -> Result<f64> {
    check_shapes(reference, distorted)?;
    Ok(psnr_from(
        squared_error(reference, distorted),
        reference.samples().len(),
        reference.max_value(),
    ))
}

/// Cube PSNR from the MSE over all samples of all bands.
pub fn psnr_cube(reference: &SpectralCube, distorted: &SpectralCube) -> Result<f64> {
    if reference.band_count() != distorted.band_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} bands",
            reference.band_count(),
            distorted.band_count()
        )));
    }
    let mut sse = 0u128;
    for (a, b) in reference.bands().iter().zip(distorted.bands()) {
        check_shapes(a, b)?;
        sse += squared_error(a, b);
    }
    Ok(psnr_from(
        sse,
        reference.sample_count(),
        reference.band(0).max_value(),
    ))
}

/// Summed-area table with one row and column of zero padding.
struct Integral {
    stride: usize,
    sums: Vec<i64>,
}

impl Integral {
    fn new(width: usize, height: usize, value: impl Fn(usize, usize) -> i64) -> Self {
        let stride = width + 1;
        let mut sums = vec![0i64; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0i64;
            for x in 0..width {
                row += value(x, y);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Integral { stride, sums }
    }

    fn window(&self, x: usize, y: usize, size: usize) -> i64 {
        let s = self.stride;
        self.sums[(y + size) * s + x + size] - self.sums[y * s + x + size] - self.sums[(y + size) * s + x]
            + self.sums[y * s + x]
    }
}

/// Mean SSIM over all `8×8` windows (stride 1, uniform weights, population
/// statistics), with `C1 = (0.01·L)²`, `C2 = (0.03·L)²`.
pub fn ssim(a: &Plane, b: &Plane) -> Result<f64> {
    check_shapes(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Dimensions(format!(
            "{w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let l = a.max_value() as f64;
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);
    let av = |x: usize, y: usize| a.get(x, y) as i64;
    let bv = |x: usize, y: usize| b.get(x, y) as i64;
    let sa = Integral::new(w, h, av);
    let sb = Integral::new(w, h, bv);
    let saa = Integral::new(w, h, |x, y| av(x, y) * av(x, y));
    let sbb = Integral::new(w, h, |x, y| bv(x, y) * bv(x, y));
    let sab = Integral::new(w, h, |x, y| av(x, y) * bv(x, y));

    let n = (SSIM_WINDOW * SSIM_WINDOW) as i128;
    let nf = n as f64;
    let mut total = 0.0;
    for y in 0..=h - SSIM_WINDOW {
        for x in 0..=w - SSIM_WINDOW {
            let (ta, tb) = (sa.window(x, y, SSIM_WINDOW) as i128, sb.window(x, y, SSIM_WINDOW) as i128);
            let taa = saa.window(x, y, SSIM_WINDOW) as i128;
            let tbb = sbb.window(x, y, SSIM_WINDOW) as i128;
            let tab = sab.window(x, y, SSIM_WINDOW) as i128;
            // Exact integer numerators of n²·variance and n²·covariance.
            let var_a = (n * taa - ta * ta) as f64 / (nf * nf);
            let var_b = (n * tbb - tb * tb) as f64 / (nf * nf);
            let cov = (n * tab - ta * tb) as f64 / (nf * nf);
            let (mu_a, mu_b) = (ta as f64 / nf, tb as f64 / nf);
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
    }
    Ok(total / ((w - SSIM_WINDOW + 1) * (h - SSIM_WINDOW + 1)) as f64)
}

/// Bits per pixel per band for a stream of `bytes` bytes.
pub fn bpppb(bytes: usize, width: usize, height: usize, bands: usize) -> f64 {
    (bytes as f64 * 8.0) / (width * height * bands) as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RDPoint {
    pub rate: f64,
    pub psnr: f64,
}

/// At least four points with strictly increasing rate and PSNR.
#[derive(Clone, Debug, PartialEq)]
pub struct RDCurve {
    points: Vec<RDPoint>,
}

impl RDCurve {
    pub const MIN_POINTS: usize = 4;

    /// Sorts by rate and validates.
    pub fn new(mut points: Vec<RDPoint>) -> Result<Self> {
        if points.len() < Self::MIN_POINTS {
            return Err(Error::Curve(format!(
                "{} points, need at least {}",
                points.len(),
                Self::MIN_POINTS
            )));
        }
        if let Some(p) = points.iter().find(|p| !(p.rate > 0.0 && p.rate.is_finite() && p.psnr.is_finite())) {
            return Err(Error::Curve(format!("invalid point rate={} psnr={}", p.rate, p.psnr)));
        }
        points.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        for w in points.windows(2) {
            if !(w[1].rate > w[0].rate && w[1].psnr > w[0].psnr) {
                return Err(Error::Curve(format!(
                    "not strictly increasing at rate {} -> {}, psnr {} -> {}",
                    w[0].rate, w[1].rate, w[0].psnr, w[1].psnr
                )));
            }
        }
        Ok(RDCurve { points })
    }

    pub fn points(&self) -> &[RDPoint] {
        &self.points
    }
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Butland
/// slopes, three-point end conditions).
#[derive(Clone, Debug)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` strictly increasing, at least two knots.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len());
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d.fill(delta[0]);
            return Pchip { x, y, d };
        }
        for k in 1..n - 1 {
            let (d0, d1) = (delta[k - 1], delta[k]);
            if d0 == 0.0 || d1 == 0.0 || d0.signum() != d1.signum() {
                continue;
            }
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
        d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Pchip { x, y, d }
    }

    /// Evaluates inside `[x_0, x_last]`; outside the range the end cubics
    /// are extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[k]
            + (s3 - 2.0 * s2 + s) * h * self.d[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y[k + 1]
            + (s3 - s2) * h * self.d[k + 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    /// Exact integral over `[a, b]` (Simpson's rule is exact on each cubic piece).
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let mut cuts = vec![a];
        cuts.extend(self.x.iter().copied().filter(|&v| v > a && v < b));
        cuts.push(b);
        cuts.windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                (w[1] - w[0]) / 6.0 * (self.eval(w[0]) + 4.0 * self.eval(m) + self.eval(w[1]))
            })
            .sum()
    }
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || d == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// Average rate difference of `test` against `reference` at equal PSNR, in
/// percent; negative values are savings.
pub fn bd_rate(reference: &RDCurve, test: &RDCurve) -> Result<f64> {
    let interp = |c: &RDCurve| {
        Pchip::new(
            c.points.iter().map(|p| p.psnr).collect(),
            c.points.iter().map(|p| p.rate.log10()).collect(),
        )
    };
    let (fr, ft) = (interp(reference), interp(test));
    let lo = fr.knots()[0].max(ft.knots()[0]);
    let hi = fr.knots().last().unwrap().min(*ft.knots().last().unwrap());
    if !(hi > lo) {
        return Err(Error::Curve(format!("PSNR ranges do not overlap ({lo:.3} .. {hi:.3} dB)")));
    }
    let avg = (ft.integrate(lo, hi) - fr.integrate(lo, hi)) / (hi - lo);
    Ok((10f64.powf(avg) - 1.0) * 100.0)
}
