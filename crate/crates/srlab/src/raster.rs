//! Image planes and whole-image raster operations.
//!
//! All pixel math in this crate runs on `f64` intensities normalized to
//! `[0, 1]`; quantization to 8-bit happens only at file I/O ([`crate::io`]).
//! Stencil operations use replicate padding at the borders.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("plane data length {len} does not match {width}x{height}")]
    DataLengthMismatch {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("zero-dimension image ({width}x{height})")]
    ZeroDimension { width: usize, height: usize },
    #[error("intensity {value} at index {index} is outside [0, 1]")]
    IntensityOutOfRange { index: usize, value: f64 },
    #[error("plane dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("dimensions must be even for 2x downsampling, got {width}x{height}")]
    OddDimensions { width: usize, height: usize },
    #[error("pixel depth max value must be positive")]
    ZeroPixelDepth,
}

/// Maximum representable value of the integer pixel domain (the `MAX` of the
/// PSNR formula). Fixed to 255 for the 8-bit sources this crate handles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelDepth {
    max_value: u32,
}

impl PixelDepth {
    pub const EIGHT_BIT: PixelDepth = PixelDepth { max_value: 255 };

    pub fn new(max_value: u32) -> Result<Self, RasterError> {
        if max_value == 0 {
            return Err(RasterError::ZeroPixelDepth);
        }
        Ok(PixelDepth { max_value })
    }

    pub fn max_value(&self) -> f64 {
        f64::from(self.max_value)
    }
}

/// A single color plane: a row-major grid of intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    /// Builds a plane from row-major data, validating the length and the
    /// `[0, 1]` intensity invariant.
    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension { width, height });
        }
        if data.len() != width * height {
            return Err(RasterError::DataLengthMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        for (index, &value) in data.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(RasterError::IntensityOutOfRange { index, value });
            }
        }
        Ok(ImagePlane {
            width,
            height,
            data,
        })
    }

    /// Builds a plane from data that is in range up to floating-point noise,
    /// clamping each value into `[0, 1]`. Panics on non-finite values; the
    /// interpolation kernels that use this never produce them from valid
    /// planes.
    pub(crate) fn from_data_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Self {
        for v in &mut data {
            assert!(v.is_finite(), "non-finite intensity produced by a kernel");
            *v = v.clamp(0.0, 1.0);
        }
        ImagePlane::from_data(width, height, data).expect("clamped data satisfies invariants")
    }

    /// A `width x height` plane filled with a single intensity.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, RasterError> {
        ImagePlane::from_data(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    /// Replicate-border lookup: coordinates outside the grid are clamped to
    /// the nearest edge pixel.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    /// Extends the plane by `margin` pixels on every side, replicating the
    /// nearest edge pixel. `margin == 0` returns a copy.
    pub fn pad_replicate(&self, margin: usize) -> ImagePlane {
        if margin == 0 {
            return self.clone();
        }
        let pw = self.width + 2 * margin;
        let ph = self.height + 2 * margin;
        let mut data = Vec::with_capacity(pw * ph);
        let m = margin as isize;
        for y in 0..ph {
            for x in 0..pw {
                data.push(self.get_clamped(x as isize - m, y as isize - m));
            }
        }
        ImagePlane {
            width: pw,
            height: ph,
            data,
        }
    }

    /// Copies the `width x height` window with top-left corner `(x0, y0)`.
    pub fn crop(
        &self,
        x0: usize,
        y0: usize,
        width: usize,
        height: usize,
    ) -> Result<ImagePlane, RasterError> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(RasterError::DimensionMismatch(
                width, height, self.width, self.height,
            ));
        }
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            let row = (y0 + y) * self.width + x0;
            data.extend_from_slice(&self.data[row..row + width]);
        }
        ImagePlane::from_data(width, height, data)
    }

    /// Halves both dimensions by averaging each 2x2 block (box filter).
    pub fn downsample_2x(&self) -> Result<ImagePlane, RasterError> {
        if self.width % 2 != 0 || self.height % 2 != 0 {
            return Err(RasterError::OddDimensions {
                width: self.width,
                height: self.height,
            });
        }
        let ow = self.width / 2;
        let oh = self.height / 2;
        let mut data = Vec::with_capacity(ow * oh);
        for y in 0..oh {
            for x in 0..ow {
                let sum = self.get(2 * x, 2 * y)
                    + self.get(2 * x + 1, 2 * y)
                    + self.get(2 * x, 2 * y + 1)
                    + self.get(2 * x + 1, 2 * y + 1);
                data.push(sum / 4.0);
            }
        }
        ImagePlane::from_data(ow, oh, data)
    }

    /// Maps each intensity onto the 8-bit grid and back (`round(v*255)/255`),
    /// using the same round-half-away-from-zero rule as file output.
    pub fn quantized(&self) -> ImagePlane {
        let data = self
            .data
            .iter()
            .map(|&v| f64::from(crate::io::intensity_to_byte(v)) / 255.0)
            .collect();
        ImagePlane {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn transposed(&self) -> ImagePlane {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.get(x, y));
            }
        }
        ImagePlane {
            width: self.height,
            height: self.width,
            data,
        }
    }
}

/// Three same-sized planes in red, green, blue order.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    planes: [ImagePlane; 3],
}

impl RgbImage {
    pub fn new(planes: [ImagePlane; 3]) -> Result<Self, RasterError> {
        let (w, h) = (planes[0].width(), planes[0].height());
        for p in &planes[1..] {
            if p.width() != w || p.height() != h {
                return Err(RasterError::DimensionMismatch(
                    w,
                    h,
                    p.width(),
                    p.height(),
                ));
            }
        }
        Ok(RgbImage { planes })
    }

    pub fn constant(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self, RasterError> {
        Ok(RgbImage {
            planes: [
                ImagePlane::filled(width, height, rgb[0])?,
                ImagePlane::filled(width, height, rgb[1])?,
                ImagePlane::filled(width, height, rgb[2])?,
            ],
        })
    }

    pub fn width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn planes(&self) -> &[ImagePlane; 3] {
        &self.planes
    }

    pub fn plane(&self, channel: usize) -> &ImagePlane {
        &self.planes[channel]
    }

    pub fn into_planes(self) -> [ImagePlane; 3] {
        self.planes
    }

    /// Applies a per-plane transform to all three channels.
    pub fn map_planes<F>(&self, mut f: F) -> RgbImage
    where
        F: FnMut(&ImagePlane) -> ImagePlane,
    {
        RgbImage {
            planes: [
                f(&self.planes[0]),
                f(&self.planes[1]),
                f(&self.planes[2]),
            ],
        }
    }

    pub fn try_map_planes<F, E>(&self, mut f: F) -> Result<RgbImage, E>
    where
        F: FnMut(&ImagePlane) -> Result<ImagePlane, E>,
    {
        Ok(RgbImage {
            planes: [
                f(&self.planes[0])?,
                f(&self.planes[1])?,
                f(&self.planes[2])?,
            ],
        })
    }

    /// Per-channel 2x box downsampling.
    pub fn downsample_2x(&self) -> Result<RgbImage, RasterError> {
        self.try_map_planes(|p| p.downsample_2x())
    }

    /// Snaps every channel onto the 8-bit grid (see [`ImagePlane::quantized`]).
    pub fn quantized(&self) -> RgbImage {
        self.map_planes(|p| p.quantized())
    }

    /// Drops the last column and/or row when a dimension is odd, so the
    /// result is always even-sized. Returns a copy when already even.
    pub fn crop_even(&self) -> Result<RgbImage, RasterError> {
        let w = self.width() - self.width() % 2;
        let h = self.height() - self.height() % 2;
        if w == 0 || h == 0 {
            return Err(RasterError::ZeroDimension { width: w, height: h });
        }
        self.try_map_planes(|p| p.crop(0, 0, w, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(w: usize, h: usize, data: &[f64]) -> ImagePlane {
        ImagePlane::from_data(w, h, data.to_vec()).unwrap()
    }

    #[test]
    fn from_data_rejects_bad_length_and_range() {
        assert!(matches!(
            ImagePlane::from_data(2, 2, vec![0.0; 3]),
            Err(RasterError::DataLengthMismatch { .. })
        ));
        assert!(matches!(
            ImagePlane::from_data(1, 1, vec![1.5]),
            Err(RasterError::IntensityOutOfRange { .. })
        ));
        assert!(matches!(
            ImagePlane::from_data(1, 1, vec![f64::NAN]),
            Err(RasterError::IntensityOutOfRange { .. })
        ));
        assert!(matches!(
            ImagePlane::from_data(0, 4, vec![]),
            Err(RasterError::ZeroDimension { .. })
        ));
    }

    #[test]
    fn pad_zero_margin_is_identity() {
        let p = plane(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(p.pad_replicate(0), p);
    }

    #[test]
    fn pad_single_pixel_replicates_everywhere() {
        let p = plane(1, 1, &[0.7]);
        let padded = p.pad_replicate(1);
        assert_eq!(padded.width(), 3);
        assert_eq!(padded.height(), 3);
        assert!(padded.as_slice().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn pad_2x2_margin_1_enumerated() {
        // Expected 4x4 grid enumerated cell by cell from the replication rule.
        let (a, b, c, d) = (0.1, 0.2, 0.3, 0.4);
        let p = plane(2, 2, &[a, b, c, d]);
        let padded = p.pad_replicate(1);
        #[rustfmt::skip]
        let expected = [
            a, a, b, b,
            a, a, b, b,
            c, c, d, d,
            c, c, d, d,
        ];
        assert_eq!(padded.as_slice(), &expected);
    }

    #[test]
    fn pad_then_crop_recovers_original() {
        let p = plane(3, 2, &[0.0, 0.25, 0.5, 0.75, 1.0, 0.125]);
        for margin in [1usize, 2, 5] {
            let cropped = p
                .pad_replicate(margin)
                .crop(margin, margin, p.width(), p.height())
                .unwrap();
            assert_eq!(cropped, p);
        }
    }

    #[test]
    fn downsample_constant_is_constant() {
        let p = ImagePlane::filled(2, 2, 0.42).unwrap();
        let d = p.downsample_2x().unwrap();
        assert_eq!(d.as_slice(), &[0.42]);
    }

    #[test]
    fn downsample_averages_blocks() {
        let p = plane(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(p.downsample_2x().unwrap().as_slice(), &[0.5]);
    }

    #[test]
    fn downsample_ramp_matches_block_mean_oracle() {
        // 4x4 ramp; expected values computed by brute-force block averaging.
        let data: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
        let p = plane(4, 4, &data);
        let d = p.downsample_2x().unwrap();

        let mut expected = Vec::new();
        for by in 0..2 {
            for bx in 0..2 {
                let mut sum = 0.0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        sum += data[(2 * by + dy) * 4 + (2 * bx + dx)];
                    }
                }
                expected.push(sum / 4.0);
            }
        }
        assert_eq!(d.as_slice(), expected.as_slice());
    }

    #[test]
    fn downsample_rejects_odd_dimensions() {
        let p = plane(3, 2, &[0.0; 6]);
        assert!(matches!(
            p.downsample_2x(),
            Err(RasterError::OddDimensions { .. })
        ));
    }

    #[test]
    fn downsample_preserves_global_mean() {
        let data: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).fract()).collect();
        let p = plane(8, 8, &data);
        let d = p.downsample_2x().unwrap();
        let mean = |pl: &ImagePlane| pl.as_slice().iter().sum::<f64>() / pl.as_slice().len() as f64;
        assert!((mean(&p) - mean(&d)).abs() < 1e-15);
    }

    #[test]
    fn rgb_requires_matching_planes() {
        let a = ImagePlane::filled(2, 2, 0.0).unwrap();
        let b = ImagePlane::filled(2, 3, 0.0).unwrap();
        assert!(RgbImage::new([a.clone(), a.clone(), b]).is_err());
        assert!(RgbImage::new([a.clone(), a.clone(), a]).is_ok());
    }

    #[test]
    fn crop_even_trims_odd_edges() {
        let p = plane(3, 3, &[0.1; 9]);
        let img = RgbImage::new([p.clone(), p.clone(), p]).unwrap();
        let even = img.crop_even().unwrap();
        assert_eq!((even.width(), even.height()), (2, 2));
        let already = even.crop_even().unwrap();
        assert_eq!(already, even);
    }

    #[test]
    fn pixel_depth_rejects_zero() {
        assert!(PixelDepth::new(0).is_err());
        assert_eq!(PixelDepth::EIGHT_BIT.max_value(), 255.0);
    }
}
