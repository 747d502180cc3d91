//! Full-reference image quality metrics: MSE, PSNR and windowed SSIM.
//!
//! All metric math runs in the 8-bit domain (intensity × 255, unquantized
//! reals): published MSE/PSNR figures for 8-bit images are only consistent
//! with `MAX = 255`, so that is the declared domain here. Quantizing to the
//! integer grid first is the caller's choice (`RgbImage::quantized`).

use thiserror::Error;

use crate::raster::{ImagePlane, PixelDepth, RgbImage};

/// The fixed scale between normalized intensities and the 8-bit domain.
const LEVELS: f64 = 255.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    TooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("MSE must be non-negative, got {0}")]
    NegativeMse(f64),
    #[error("invalid SSIM parameters: {0}")]
    InvalidParams(String),
}

/// SSIM window and stabilization constants.
///
/// Defaults follow the common choice for 8-bit images: an 11x11 Gaussian
/// window with sigma 1.5, k1 = 0.01, k2 = 0.03, dynamic range 255.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimParams {
    fn validate(&self) -> Result<(), MetricError> {
        if self.window == 0 {
            return Err(MetricError::InvalidParams("window must be positive".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(MetricError::InvalidParams("sigma must be positive".into()));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(MetricError::InvalidParams("k1 and k2 must be positive".into()));
        }
        if !(self.dynamic_range > 0.0) {
            return Err(MetricError::InvalidParams(
                "dynamic range must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Normalized 1-D Gaussian kernel; the 2-D window is its outer product,
    /// so the window weights sum to 1.
    fn kernel(&self) -> Vec<f64> {
        let n = self.window;
        let center = (n as f64 - 1.0) / 2.0;
        let mut k: Vec<f64> = (0..n)
            .map(|i| {
                let d = i as f64 - center;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = k.iter().sum();
        for v in &mut k {
            *v /= sum;
        }
        k
    }
}

fn check_dims(a: &ImagePlane, b: &ImagePlane) -> Result<(), MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

/// Mean squared error of one plane pair in the 8-bit domain.
pub fn mse_plane(a: &ImagePlane, b: &ImagePlane) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let sum: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| {
            let d = x * LEVELS - y * LEVELS;
            d * d
        })
        .sum();
    Ok(sum / a.as_slice().len() as f64)
}

/// Mean squared error pooled over all three channels (one number per image,
/// averaged over 3·W·H values).
pub fn mse_rgb(a: &RgbImage, b: &RgbImage) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    for c in 0..3 {
        check_dims(a.plane(c), b.plane(c))?;
        sum += mse_plane(a.plane(c), b.plane(c))? * (a.width() * a.height()) as f64;
    }
    Ok(sum / (3 * a.width() * a.height()) as f64)
}

/// Peak signal-to-noise ratio in dB: `10·log10(MAX² / mse)`.
///
/// An MSE of zero (identical images) is reported as `+inf`.
pub fn psnr(mse_value: f64, depth: PixelDepth) -> Result<f64, MetricError> {
    if mse_value < 0.0 || mse_value.is_nan() {
        return Err(MetricError::NegativeMse(mse_value));
    }
    if mse_value == 0.0 {
        return Ok(f64::INFINITY);
    }
    let max = depth.max_value();
    Ok(10.0 * (max * max / mse_value).log10())
}

/// Windowed SSIM of one plane pair.
///
/// Per window position: `(2·μa·μb + C1)(2·σab + C2) /
/// ((μa² + μb² + C1)(σa² + σb² + C2))`, computed in the 8-bit domain with a
/// Gaussian-weighted window; the mean over all positions where the window
/// fully fits is returned. Implemented with separable filtering; the test
/// oracle recomputes every window directly.
pub fn ssim_plane(a: &ImagePlane, b: &ImagePlane, params: &SsimParams) -> Result<f64, MetricError> {
    params.validate()?;
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    let win = params.window;
    if w < win || h < win {
        return Err(MetricError::TooSmall {
            width: w,
            height: h,
            window: win,
        });
    }

    let scale = params.dynamic_range;
    let n = w * h;
    let mut av = Vec::with_capacity(n);
    let mut bv = Vec::with_capacity(n);
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        av.push(x * scale);
        bv.push(y * scale);
    }
    let aa: Vec<f64> = av.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = bv.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| x * y).collect();

    let kernel = params.kernel();
    let mu_a = filter_valid(&av, w, h, &kernel);
    let mu_b = filter_valid(&bv, w, h, &kernel);
    let m_aa = filter_valid(&aa, w, h, &kernel);
    let m_bb = filter_valid(&bb, w, h, &kernel);
    let m_ab = filter_valid(&ab, w, h, &kernel);

    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);

    let mut sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = m_aa[i] - ma * ma;
        let var_b = m_bb[i] - mb * mb;
        let cov = m_ab[i] - ma * mb;
        let num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
        sum += num / den;
    }
    Ok(sum / mu_a.len() as f64)
}

/// Arithmetic mean of the three per-channel SSIM values.
pub fn ssim_rgb(a: &RgbImage, b: &RgbImage, params: &SsimParams) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    for c in 0..3 {
        sum += ssim_plane(a.plane(c), b.plane(c), params)?;
    }
    Ok(sum / 3.0)
}

/// Separable "valid" filtering: a horizontal then a vertical pass with the
/// same 1-D kernel, output size (w-win+1) x (h-win+1).
fn filter_valid(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let win = kernel.len();
    let ow = w - win + 1;
    let oh = h - win + 1;

    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                acc += k * row[x + i];
            }
            horiz[y * ow + x] = acc;
        }
    }

    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                acc += k * horiz[(y + i) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// One benchmark result row: a (reference image, upscaling method) pair with
/// its three quality metrics in the 8-bit domain.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub image: String,
    pub method: String,
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
}

/// Collection of benchmark rows, in report order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}
