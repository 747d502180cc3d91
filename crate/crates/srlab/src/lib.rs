//! srlab — a small super-resolution laboratory.
//!
//! Trains a one-hidden-layer perceptron to 2x-upscale images from 3x3
//! low-resolution patches and benchmarks it against classical
//! interpolation upscalers (nearest, bilinear, bicubic, FCBI-style,
//! ICBI-style) under MSE / PSNR / SSIM.
//!
//! * [`raster`] — normalized image planes and raster ops,
//! * [`io`] — PNG/PPM decoding, PNG encoding,
//! * [`interp`] — the classical 2x upscalers,
//! * [`mlp`] — the network, training and model persistence,
//! * [`dataset`] — patch extraction, splits, manifests, sample caches,
//! * [`metrics`] — MSE, PSNR and windowed SSIM,
//! * [`bench`] — the end-to-end benchmark harness,
//! * [`synth`] — seeded synthetic demo corpora.

pub mod bench;
pub mod dataset;
pub mod interp;
pub mod io;
pub mod metrics;
pub mod mlp;
pub mod raster;
pub mod synth;

/// Stable sub-seed derivation: SHA-256 over the base seed and a role tag,
/// truncated to 64 bits. Keeps independently seeded stages (splits, inits,
/// training orders, synthetic images) decoupled from iteration order.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[0..8].try_into().expect("digest is 32 bytes"))
}
