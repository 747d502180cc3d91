//! Seeded synthetic image corpora.
//!
//! Three texture families with deliberately different patch statistics,
//! usable as stand-in categories when no photographic corpus is at hand:
//!
//! * `blobs` — smooth color gradients with Gaussian bumps,
//! * `stripes` — quasi-square oriented gratings,
//! * `tiles` — piecewise-shaded cells with hard boundaries.
//!
//! Everything is a pure function of the seed, so corpora are reproducible
//! across runs and machines.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::derive_seed;
use crate::io::ImageWriteError;
use crate::raster::{ImagePlane, RgbImage};

/// The built-in category names, in manifest order.
pub const CATEGORIES: [&str; 3] = ["blobs", "stripes", "tiles"];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown synthetic category {0:?} (expected one of blobs, stripes, tiles)")]
    UnknownCategory(String),
    #[error("synthetic images must have even dimensions of at least 16, got {0}x{1}")]
    BadSize(usize, usize),
    #[error(transparent)]
    Write(#[from] ImageWriteError),
    #[error("cannot create {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Renders one image of the given category, deterministically from the seed.
pub fn synth_image(
    category: &str,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<RgbImage, SynthError> {
    if width < 16 || height < 16 || width % 2 != 0 || height % 2 != 0 {
        return Err(SynthError::BadSize(width, height));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = match category {
        "blobs" => blobs(width, height, &mut rng),
        "stripes" => stripes(width, height, &mut rng),
        "tiles" => tiles(width, height, &mut rng),
        other => return Err(SynthError::UnknownCategory(other.to_string())),
    };
    Ok(planes_from_pixels(width, height, pixels))
}

/// Interleaved [r, g, b] per pixel -> RgbImage, clamped into a safe
/// mid-range so sigmoid outputs can represent every target.
fn planes_from_pixels(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> RgbImage {
    let mut planes = [
        Vec::with_capacity(width * height),
        Vec::with_capacity(width * height),
        Vec::with_capacity(width * height),
    ];
    for px in pixels {
        for c in 0..3 {
            planes[c].push(px[c].clamp(0.03, 0.97));
        }
    }
    let [r, g, b] = planes;
    RgbImage::new([
        ImagePlane::from_data(width, height, r).expect("clamped data"),
        ImagePlane::from_data(width, height, g).expect("clamped data"),
        ImagePlane::from_data(width, height, b).expect("clamped data"),
    ])
    .expect("equal plane sizes")
}

fn random_color(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [f64; 3] {
    [
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
    ]
}

/// Smooth background gradient plus a dozen soft Gaussian bumps.
fn blobs(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let top = random_color(rng, 0.2, 0.8);
    let bottom = random_color(rng, 0.2, 0.8);

    struct Blob {
        cx: f64,
        cy: f64,
        inv_two_sigma_sq: f64,
        amp: [f64; 3],
    }
    let blobs: Vec<Blob> = (0..12)
        .map(|_| {
            let sigma = rng.random_range(w as f64 / 24.0..=w as f64 / 6.0);
            Blob {
                cx: rng.random_range(0.0..w as f64),
                cy: rng.random_range(0.0..h as f64),
                inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
                amp: [
                    rng.random_range(-0.45..=0.45),
                    rng.random_range(-0.45..=0.45),
                    rng.random_range(-0.45..=0.45),
                ],
            }
        })
        .collect();

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let t = y as f64 / (h - 1) as f64;
        for x in 0..w {
            let mut px = [
                top[0] + t * (bottom[0] - top[0]),
                top[1] + t * (bottom[1] - top[1]),
                top[2] + t * (bottom[2] - top[2]),
            ];
            for blob in &blobs {
                let (dx, dy) = (x as f64 - blob.cx, y as f64 - blob.cy);
                let g = (-(dx * dx + dy * dy) * blob.inv_two_sigma_sq).exp();
                for c in 0..3 {
                    px[c] += blob.amp[c] * g;
                }
            }
            out.push(px);
        }
    }
    out
}

/// Two-color quasi-square gratings: a dominant orientation with a weaker
/// secondary one for texture. The orientation and frequency bands are
/// category style constants (every stripes image shares them), so the
/// family has coherent statistics a specialized model can exploit;
/// per-image variation comes from the colors, phases and jitter.
fn stripes(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let c0 = random_color(rng, 0.1, 0.9);
    let c1 = random_color(rng, 0.1, 0.9);
    let theta = 0.5 + rng.random_range(-0.12..=0.12);
    let freq = rng.random_range(0.07..=0.10);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let theta2 = theta + std::f64::consts::FRAC_PI_2 + rng.random_range(-0.2..=0.2);
    let freq2 = rng.random_range(0.03..=0.05);
    let phase2 = rng.random_range(0.0..std::f64::consts::TAU);
    let (dir_x, dir_y) = (theta.cos(), theta.sin());
    let (dir2_x, dir2_y) = (theta2.cos(), theta2.sin());

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let u = x as f64 * dir_x + y as f64 * dir_y;
            let v = x as f64 * dir2_x + y as f64 * dir2_y;
            let main = (3.0 * (std::f64::consts::TAU * freq * u + phase).sin()).tanh();
            let minor = (std::f64::consts::TAU * freq2 * v + phase2).sin();
            let t = ((main + 1.0) / 2.0 + 0.12 * minor).clamp(0.0, 1.0);
            out.push([
                c0[0] + t * (c1[0] - c0[0]),
                c0[1] + t * (c1[1] - c0[1]),
                c0[2] + t * (c1[2] - c0[2]),
            ]);
        }
    }
    out
}

/// Nearest-site cells with per-cell colors and gentle interior shading;
/// boundaries stay hard.
fn tiles(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    struct Site {
        x: f64,
        y: f64,
        color: [f64; 3],
        shade_x: f64,
        shade_y: f64,
    }
    let count = rng.random_range(18..=30usize);
    let sites: Vec<Site> = (0..count)
        .map(|_| {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            Site {
                x: rng.random_range(0.0..w as f64),
                y: rng.random_range(0.0..h as f64),
                color: random_color(rng, 0.08, 0.92),
                shade_x: angle.cos(),
                shade_y: angle.sin(),
            }
        })
        .collect();

    let shade_scale = 0.25 / w as f64;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, s) in sites.iter().enumerate() {
                let (dx, dy) = (x as f64 - s.x, y as f64 - s.y);
                let d = dx * dx + dy * dy;
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            let s = &sites[best];
            let shade = ((x as f64 - s.x) * s.shade_x + (y as f64 - s.y) * s.shade_y) * shade_scale;
            out.push([
                s.color[0] + shade,
                s.color[1] + shade,
                s.color[2] + shade,
            ]);
        }
    }
    out
}

/// Manifest paths and image listing of a generated demo corpus.
#[derive(Debug, Clone)]
pub struct DemoCorpus {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub images: Vec<(String, PathBuf)>,
}

/// Writes `per_category` images per built-in category under
/// `dir/images/`, holding out the last image of each category as a test
/// image, and writes `train.tsv` / `test.tsv` manifests next to them.
pub fn write_demo_corpus(
    dir: impl AsRef<Path>,
    seed: u64,
    per_category: usize,
    size: usize,
) -> Result<DemoCorpus, SynthError> {
    let dir = dir.as_ref();
    let image_dir = dir.join("images");
    std::fs::create_dir_all(&image_dir).map_err(|source| SynthError::Io {
        path: image_dir.clone(),
        source,
    })?;

    let mut train_lines = String::new();
    let mut test_lines = String::new();
    let mut images = Vec::new();
    for category in CATEGORIES {
        for index in 0..per_category {
            let img_seed = derive_seed(seed, &format!("synth/{category}/{index}"));
            let img = synth_image(category, size, size, img_seed)?;
            let name = format!("{category}_{index:02}.png");
            let path = image_dir.join(&name);
            crate::io::save_image(&img, &path)?;
            let line = format!("{category}\timages/{name}\n");
            if index + 1 == per_category {
                test_lines.push_str(&line);
            } else {
                train_lines.push_str(&line);
            }
            images.push((category.to_string(), path));
        }
    }

    let train_manifest = dir.join("train.tsv");
    let test_manifest = dir.join("test.tsv");
    std::fs::write(&train_manifest, train_lines).map_err(|source| SynthError::Io {
        path: train_manifest.clone(),
        source,
    })?;
    std::fs::write(&test_manifest, test_lines).map_err(|source| SynthError::Io {
        path: test_manifest.clone(),
        source,
    })?;

    Ok(DemoCorpus {
        train_manifest,
        test_manifest,
        images,
    })
}
