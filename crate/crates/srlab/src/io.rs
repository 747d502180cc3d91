//! Image file I/O: PNG and binary PPM (P6) decoding, PNG encoding.
//!
//! Intensities are mapped between the 8-bit integer domain and the internal
//! `[0, 1]` real domain here and nowhere else. Output is always 8-bit RGB
//! PNG; quantization rounds half away from zero and clamps.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, ImageReader, Limits};
use thiserror::Error;

use crate::raster::{ImagePlane, RasterError, RgbImage};

/// Hard cap on decoded image dimensions; anything larger is treated as
/// corrupt input rather than an allocation request.
const MAX_DIMENSION: u32 = 1 << 15;

#[derive(Debug, Error)]
pub enum ImageReadError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unrecognized image format (expected PNG or binary PPM)")]
    UnsupportedFormat,
    #[error("PNG decode failed: {0}")]
    PngDecode(String),
    #[error("unsupported pixel format {0} (only 8-bit gray/RGB/RGBA inputs are handled)")]
    UnsupportedPixelFormat(String),
    #[error("malformed PPM header: {0}")]
    PpmHeader(String),
    #[error("unsupported PPM maxval {0} (only 255 is handled)")]
    PpmMaxval(u64),
    #[error("PPM pixel data truncated: expected {expected} bytes, found {actual}")]
    PpmTruncated { expected: usize, actual: usize },
    #[error("{0} trailing bytes after PPM pixel data")]
    PpmTrailing(usize),
    #[error("image dimensions {width}x{height} exceed the {max} limit")]
    TooLarge { width: u64, height: u64, max: u32 },
    #[error("zero-dimension image")]
    ZeroDimension,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Error)]
pub enum ImageWriteError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("PNG encode failed: {0}")]
    Encode(String),
}

/// Maps a normalized intensity to its stored byte: `round(v * 255)` with
/// ties away from zero, clamped to `[0, 255]`.
#[inline]
pub fn intensity_to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Decodes PNG or binary PPM bytes into a normalized RGB image.
///
/// Grayscale sources are replicated into all three planes; alpha is dropped.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, ImageReadError> {
    const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];
    if bytes.starts_with(&PNG_MAGIC) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else {
        Err(ImageReadError::UnsupportedFormat)
    }
}

/// Reads and decodes an image file (see [`decode_image`] for formats).
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage, ImageReadError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ImageReadError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes)
}

/// Encodes an image as 8-bit RGB PNG.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, ImageWriteError> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let buffer = image::ImageBuffer::from_fn(w, h, |x, y| {
        let (x, y) = (x as usize, y as usize);
        image::Rgb([
            intensity_to_byte(img.plane(0).get(x, y)),
            intensity_to_byte(img.plane(1).get(x, y)),
            intensity_to_byte(img.plane(2).get(x, y)),
        ])
    });
    let mut out = Cursor::new(Vec::new());
    buffer
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ImageWriteError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

/// Writes the image to `path` as 8-bit RGB PNG, regardless of extension.
pub fn save_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<(), ImageWriteError> {
    let path = path.as_ref();
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|source| ImageWriteError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage, ImageReadError> {
    let mut reader = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
    let mut limits = Limits::default();
    limits.max_image_width = Some(MAX_DIMENSION);
    limits.max_image_height = Some(MAX_DIMENSION);
    reader.limits(limits);
    let dynamic = reader
        .decode()
        .map_err(|e| ImageReadError::PngDecode(e.to_string()))?;

    use image::DynamicImage;
    let (rgb, gray) = match &dynamic {
        DynamicImage::ImageRgb8(buf) => (Some(buf.clone()), None),
        DynamicImage::ImageRgba8(_) => (Some(dynamic.to_rgb8()), None),
        DynamicImage::ImageLuma8(buf) => (None, Some(buf.clone())),
        DynamicImage::ImageLumaA8(_) => (None, Some(dynamic.to_luma8())),
        other => {
            return Err(ImageReadError::UnsupportedPixelFormat(format!(
                "{:?}",
                other.color()
            )))
        }
    };

    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    if w == 0 || h == 0 {
        return Err(ImageReadError::ZeroDimension);
    }

    let mut planes = [
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
    ];
    if let Some(rgb) = rgb {
        for px in rgb.pixels() {
            for c in 0..3 {
                planes[c].push(f64::from(px[c]) / 255.0);
            }
        }
    } else if let Some(gray) = gray {
        for px in gray.pixels() {
            let v = f64::from(px[0]) / 255.0;
            for plane in &mut planes {
                plane.push(v);
            }
        }
    }
    let [r, g, b] = planes;
    Ok(RgbImage::new([
        ImagePlane::from_data(w, h, r)?,
        ImagePlane::from_data(w, h, g)?,
        ImagePlane::from_data(w, h, b)?,
    ])?)
}

/// Binary PPM (P6) parser. Header tokens may be separated by any whitespace
/// and `#` comments; maxval must be 255; exactly one whitespace byte follows
/// the maxval before the raw pixel bytes.
fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, ImageReadError> {
    debug_assert!(bytes.starts_with(b"P6"));
    let mut pos = 2;

    let width = ppm_token(bytes, &mut pos)?;
    let height = ppm_token(bytes, &mut pos)?;
    let maxval = ppm_token(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(ImageReadError::PpmMaxval(maxval));
    }
    // Single whitespace byte terminates the header.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(ImageReadError::PpmHeader(
                "missing whitespace after maxval".into(),
            ))
        }
    }

    if width == 0 || height == 0 {
        return Err(ImageReadError::ZeroDimension);
    }
    if width > u64::from(MAX_DIMENSION) || height > u64::from(MAX_DIMENSION) {
        return Err(ImageReadError::TooLarge {
            width,
            height,
            max: MAX_DIMENSION,
        });
    }
    let (w, h) = (width as usize, height as usize);
    let expected = w * h * 3;
    let actual = bytes.len() - pos;
    if actual < expected {
        return Err(ImageReadError::PpmTruncated { expected, actual });
    }
    if actual > expected {
        return Err(ImageReadError::PpmTrailing(actual - expected));
    }

    let pixels = &bytes[pos..];
    let mut planes = [
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
    ];
    for px in pixels.chunks_exact(3) {
        for c in 0..3 {
            planes[c].push(f64::from(px[c]) / 255.0);
        }
    }
    let [r, g, b] = planes;
    Ok(RgbImage::new([
        ImagePlane::from_data(w, h, r)?,
        ImagePlane::from_data(w, h, g)?,
        ImagePlane::from_data(w, h, b)?,
    ])?)
}

/// Reads one decimal header token, skipping whitespace and `#` comments.
fn ppm_token(bytes: &[u8], pos: &mut usize) -> Result<u64, ImageReadError> {
    // Skip separators.
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(ImageReadError::PpmHeader("unexpected end of header".into())),
        }
    }
    let start = *pos;
    let mut value: u64 = 0;
    while let Some(&b) = bytes.get(*pos) {
        if !b.is_ascii_digit() {
            break;
        }
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add(u64::from(b - b'0')))
            .ok_or_else(|| ImageReadError::PpmHeader("numeric overflow in header".into()))?;
        *pos += 1;
    }
    if *pos == start {
        return Err(ImageReadError::PpmHeader(format!(
            "expected digit at offset {start}"
        )));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ppm_bytes(w: usize, h: usize, rgb: &[u8]) -> Vec<u8> {
        let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
        out.extend_from_slice(rgb);
        out
    }

    #[test]
    fn quantization_rule() {
        assert_eq!(intensity_to_byte(1.0), 255);
        assert_eq!(intensity_to_byte(0.0), 0);
        // 0.5 * 255 = 127.5, rounds half away from zero.
        assert_eq!(intensity_to_byte(0.5), 128);
        assert_eq!(intensity_to_byte(128.0 / 255.0), 128);
    }

    #[test]
    fn ppm_single_pixel_normalizes() {
        let img = decode_image(&ppm_bytes(1, 1, &[255, 0, 128])).unwrap();
        assert_eq!(img.plane(0).get(0, 0), 1.0);
        assert_eq!(img.plane(1).get(0, 0), 0.0);
        assert_eq!(img.plane(2).get(0, 0), 128.0 / 255.0);
    }

    #[test]
    fn ppm_all_black() {
        let img = decode_image(&ppm_bytes(2, 2, &[0; 12])).unwrap();
        for plane in img.planes() {
            assert!(plane.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ppm_header_comments_are_skipped() {
        let mut bytes = b"P6 # a comment\n# another\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.plane(2).get(1, 0), 6.0 / 255.0);
    }

    #[test]
    fn ppm_rejects_wrong_maxval() {
        let mut bytes = b"P6\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0; 6]);
        assert!(matches!(
            decode_image(&bytes),
            Err(ImageReadError::PpmMaxval(65535))
        ));
    }

    #[test]
    fn ppm_rejects_truncation_and_trailing() {
        let good = ppm_bytes(2, 2, &[7; 12]);
        assert!(matches!(
            decode_image(&good[..good.len() - 1]),
            Err(ImageReadError::PpmTruncated { .. })
        ));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(
            decode_image(&long),
            Err(ImageReadError::PpmTrailing(1))
        ));
    }

    #[test]
    fn ppm_rejects_zero_dimension() {
        let bytes = b"P6\n0 4\n255\n".to_vec();
        assert!(matches!(
            decode_image(&bytes),
            Err(ImageReadError::ZeroDimension)
        ));
    }

    #[test]
    fn unknown_magic_is_unsupported() {
        assert!(matches!(
            decode_image(b"BM not an image"),
            Err(ImageReadError::UnsupportedFormat)
        ));
        assert!(matches!(
            decode_image(b""),
            Err(ImageReadError::UnsupportedFormat)
        ));
    }

    #[test]
    fn png_round_trip_preserves_within_quantization() {
        let data: Vec<f64> = (0..48).map(|i| (i as f64 * 0.613).fract()).collect();
        let planes = [
            ImagePlane::from_data(4, 4, data[0..16].to_vec()).unwrap(),
            ImagePlane::from_data(4, 4, data[16..32].to_vec()).unwrap(),
            ImagePlane::from_data(4, 4, data[32..48].to_vec()).unwrap(),
        ];
        let img = RgbImage::new(planes).unwrap();
        let decoded = decode_image(&encode_png(&img).unwrap()).unwrap();
        assert_eq!((decoded.width(), decoded.height()), (4, 4));
        for c in 0..3 {
            for (a, b) in img
                .plane(c)
                .as_slice()
                .iter()
                .zip(decoded.plane(c).as_slice())
            {
                assert!((a - b).abs() <= 1.0 / 510.0, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn png_gray_replicates_planes() {
        let gray = image::GrayImage::from_fn(2, 2, |x, y| image::Luma([(40 * (x + y)) as u8]));
        let mut bytes = Cursor::new(Vec::new());
        gray.write_to(&mut bytes, ImageFormat::Png).unwrap();
        let img = decode_image(bytes.get_ref()).unwrap();
        assert_eq!(img.plane(0), img.plane(1));
        assert_eq!(img.plane(1), img.plane(2));
        assert_eq!(img.plane(0).get(1, 1), 80.0 / 255.0);
    }

    #[test]
    fn png_alpha_is_dropped() {
        let rgba = image::RgbaImage::from_pixel(2, 2, image::Rgba([10, 20, 30, 77]));
        let mut bytes = Cursor::new(Vec::new());
        rgba.write_to(&mut bytes, ImageFormat::Png).unwrap();
        let img = decode_image(bytes.get_ref()).unwrap();
        assert_eq!(img.plane(0).get(0, 0), 10.0 / 255.0);
        assert_eq!(img.plane(2).get(1, 1), 30.0 / 255.0);
    }

    #[test]
    fn png_16_bit_is_rejected() {
        let wide = image::ImageBuffer::<image::Rgb<u16>, _>::from_pixel(1, 1, image::Rgb([512u16; 3]));
        let mut bytes = Cursor::new(Vec::new());
        wide.write_to(&mut bytes, ImageFormat::Png).unwrap();
        assert!(matches!(
            decode_image(bytes.get_ref()),
            Err(ImageReadError::UnsupportedPixelFormat(_))
        ));
    }

    #[test]
    fn save_and_load_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let img = RgbImage::constant(3, 2, [0.25, 0.5, 0.75]).unwrap();
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!((back.width(), back.height()), (3, 2));
        for c in 0..3 {
            for (a, b) in img
                .plane(c)
                .as_slice()
                .iter()
                .zip(back.plane(c).as_slice())
            {
                assert!((a - b).abs() <= 1.0 / 510.0);
            }
        }
    }

    #[test]
    fn load_missing_file_reports_path() {
        let err = load_image("/nonexistent/nope.png").unwrap_err();
        assert!(matches!(err, ImageReadError::Read { .. }));
        assert!(err.to_string().contains("nope.png"));
    }
}
