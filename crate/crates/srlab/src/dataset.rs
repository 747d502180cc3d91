//! Patch dataset construction: LR/HR pair generation, 3x3 -> 2x2 sample
//! extraction per channel, seeded shuffling, the 6:2:2 split, corpus
//! manifests and the binary sample cache.
//!
//! The LR image is always derived from the HR reference by 2x box
//! downsampling, so every HR pixel has a ground-truth mapping.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::io::ImageReadError;
use crate::raster::RgbImage;

/// Inputs per sample: a row-major 3x3 LR neighbourhood.
pub const SAMPLE_INPUTS: usize = 9;
/// Targets per sample: the HR 2x2 block, row-major.
pub const SAMPLE_TARGETS: usize = 4;

const CACHE_MAGIC: &[u8; 4] = b"SRDS";
const CACHE_VERSION: u32 = 1;
const CACHE_HEADER_LEN: usize = 32;
const CACHE_RECORD_LEN: usize = (SAMPLE_INPUTS + SAMPLE_TARGETS) * 8;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("expected even image dimensions, got {width}x{height} (crop-even can trim this)")]
    OddDimensions { width: usize, height: usize },
    #[error("need at least {min} samples for a 6:2:2 split, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("corpus contains no images")]
    EmptyCorpus,
    #[error("specific-mode corpus mixes categories {0:?} and {1:?}")]
    MixedCategories(String, String),
    #[error("cannot load corpus image {path}: {source}")]
    Image {
        path: PathBuf,
        source: ImageReadError,
    },
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("cannot read manifest {path}: {source}")]
    ManifestIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Cache(#[from] CacheFormatError),
}

#[derive(Debug, Error)]
pub enum CacheFormatError {
    #[error("dataset cache truncated: need {expected} bytes, have {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("bad dataset cache magic")]
    BadMagic,
    #[error("unsupported dataset cache version {0}")]
    UnsupportedVersion(u32),
    #[error("reserved dataset cache header bytes must be zero")]
    ReservedNonZero,
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(u64),
    #[error("record {record} value #{field} is {value}, outside [0, 1]")]
    ValueOutOfRange {
        record: u64,
        field: usize,
        value: f64,
    },
    #[error("cannot access dataset cache {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Where a sample came from: image index within its corpus, channel and the
/// LR coordinates of the patch center. Absent for samples reloaded from a
/// cache file, which stores values only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub image: u32,
    pub channel: u8,
    pub x: u32,
    pub y: u32,
}

/// One training example: 9 normalized LR inputs and 4 normalized HR targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub input: [f64; SAMPLE_INPUTS],
    pub target: [f64; SAMPLE_TARGETS],
    pub provenance: Option<Provenance>,
}

/// Shuffled, disjoint train/validation/test partitions at 6:2:2.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<PatchSample>,
    pub validation: Vec<PatchSample>,
    pub test: Vec<PatchSample>,
    pub rng_seed: u64,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Derives the LR image and emits one sample per channel per LR pixel:
/// the replicate-padded 3x3 LR neighbourhood around (x, y) and the HR 2x2
/// block at (2x, 2y). Total samples: 3 * (W/2) * (H/2).
pub fn extract_samples(hr: &RgbImage, image_id: u32) -> Result<Vec<PatchSample>, DatasetError> {
    if hr.width() % 2 != 0 || hr.height() % 2 != 0 {
        return Err(DatasetError::OddDimensions {
            width: hr.width(),
            height: hr.height(),
        });
    }
    let lr = hr.downsample_2x().expect("even dimensions checked above");
    let (lw, lh) = (lr.width(), lr.height());

    let mut samples = Vec::with_capacity(3 * lw * lh);
    for channel in 0..3u8 {
        let hr_plane = hr.plane(channel as usize);
        let padded = lr.plane(channel as usize).pad_replicate(1);
        for y in 0..lh {
            for x in 0..lw {
                let mut input = [0.0; SAMPLE_INPUTS];
                for dy in 0..3 {
                    for dx in 0..3 {
                        input[dy * 3 + dx] = padded.get(x + dx, y + dy);
                    }
                }
                let target = [
                    hr_plane.get(2 * x, 2 * y),
                    hr_plane.get(2 * x + 1, 2 * y),
                    hr_plane.get(2 * x, 2 * y + 1),
                    hr_plane.get(2 * x + 1, 2 * y + 1),
                ];
                samples.push(PatchSample {
                    input,
                    target,
                    provenance: Some(Provenance {
                        image: image_id,
                        channel,
                        x: x as u32,
                        y: y as u32,
                    }),
                });
            }
        }
    }
    Ok(samples)
}

/// Seeded shuffle followed by cuts at floor(0.6n) and floor(0.6n)+floor(0.2n);
/// the remainder goes to the test partition.
pub fn build_split(mut samples: Vec<PatchSample>, rng_seed: u64) -> Result<DatasetSplit, DatasetError> {
    let n = samples.len();
    if n < 5 {
        return Err(DatasetError::TooFewSamples { min: 5, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    samples.shuffle(&mut rng);

    let train_len = n * 6 / 10;
    let val_len = n * 2 / 10;
    let rest = samples.split_off(train_len);
    let mut validation = rest;
    let test = validation.split_off(val_len);

    Ok(DatasetSplit {
        train: samples,
        validation,
        test,
        rng_seed,
    })
}

/// Deterministically keeps `limit` samples (seeded selection); a no-op when
/// the pool is already small enough. Used to equalize sample budgets across
/// corpora.
pub fn subsample(mut samples: Vec<PatchSample>, limit: usize, rng_seed: u64) -> Vec<PatchSample> {
    if samples.len() <= limit {
        return samples;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    samples.shuffle(&mut rng);
    samples.truncate(limit);
    samples
}

/// Whether a corpus pools several categories (for the general model) or is
/// restricted to one (for a specialized model).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusMode {
    General,
    Specific,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub category: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSpec {
    pub mode: CorpusMode,
    pub entries: Vec<CorpusEntry>,
}

impl CorpusSpec {
    pub fn general(entries: Vec<CorpusEntry>) -> CorpusSpec {
        CorpusSpec {
            mode: CorpusMode::General,
            entries,
        }
    }

    pub fn specific(entries: Vec<CorpusEntry>) -> CorpusSpec {
        CorpusSpec {
            mode: CorpusMode::Specific,
            entries,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.entries.is_empty() {
            return Err(DatasetError::EmptyCorpus);
        }
        if self.mode == CorpusMode::Specific {
            let first = &self.entries[0].category;
            for entry in &self.entries[1..] {
                if entry.category != *first {
                    return Err(DatasetError::MixedCategories(
                        first.clone(),
                        entry.category.clone(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Loads every corpus image, extracts samples in manifest order (image,
/// channel, y, x) and delegates to [`build_split`] over the pooled samples.
pub fn build_corpus(
    spec: &CorpusSpec,
    rng_seed: u64,
    crop_even: bool,
) -> Result<DatasetSplit, DatasetError> {
    let samples = corpus_samples(spec, crop_even)?;
    build_split(samples, rng_seed)
}

/// The pooled, unshuffled sample list for a corpus (ordering as documented
/// on [`build_corpus`]).
pub fn corpus_samples(spec: &CorpusSpec, crop_even: bool) -> Result<Vec<PatchSample>, DatasetError> {
    spec.validate()?;
    let mut samples = Vec::new();
    for (index, entry) in spec.entries.iter().enumerate() {
        let image = load_corpus_image(&entry.path, crop_even)?;
        samples.extend(extract_samples(&image, index as u32)?);
    }
    Ok(samples)
}

pub(crate) fn load_corpus_image(path: &Path, crop_even: bool) -> Result<RgbImage, DatasetError> {
    let image = crate::io::load_image(path).map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    if crop_even {
        image.crop_even().map_err(|_| DatasetError::OddDimensions {
            width: image.width(),
            height: image.height(),
        })
    } else {
        Ok(image)
    }
}

/// Parses manifest text: one `category<TAB>path` entry per line. Blank
/// lines and lines starting with `#` are skipped; the first tab separates
/// the fields.
pub fn parse_manifest(text: &str) -> Result<Vec<CorpusEntry>, DatasetError> {
    let mut entries = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (category, path) = line.split_once('\t').ok_or_else(|| DatasetError::Manifest {
            line: index + 1,
            reason: "expected `category<TAB>path`".into(),
        })?;
        if category.is_empty() || path.is_empty() {
            return Err(DatasetError::Manifest {
                line: index + 1,
                reason: "category and path must be non-empty".into(),
            });
        }
        entries.push(CorpusEntry {
            category: category.to_string(),
            path: PathBuf::from(path),
        });
    }
    Ok(entries)
}

/// Reads a manifest file; relative image paths are resolved against the
/// manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<CorpusEntry>, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::ManifestIo {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    Ok(parse_manifest(&text)?
        .into_iter()
        .map(|mut entry| {
            if entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
            entry
        })
        .collect())
}

/// Serializes samples to the binary cache format: a 32-byte header (magic
/// `SRDS`, version, record count, seed, reserved zeros) followed by 13
/// little-endian f64 values per record. Provenance is not stored.
pub fn samples_to_bytes(samples: &[PatchSample], rng_seed: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(CACHE_HEADER_LEN + samples.len() * CACHE_RECORD_LEN);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    out.extend_from_slice(&rng_seed.to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    for sample in samples {
        for v in sample.input.iter().chain(sample.target.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parses the binary cache format, validating every value into [0, 1].
/// Returns the samples and the stored shuffle seed.
pub fn samples_from_bytes(bytes: &[u8]) -> Result<(Vec<PatchSample>, u64), CacheFormatError> {
    if bytes.len() < CACHE_HEADER_LEN {
        return Err(CacheFormatError::Truncated {
            expected: CACHE_HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[0..4] != CACHE_MAGIC {
        return Err(CacheFormatError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("slice length 4"));
    if version != CACHE_VERSION {
        return Err(CacheFormatError::UnsupportedVersion(version));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("slice length 8"));
    let seed = u64::from_le_bytes(bytes[16..24].try_into().expect("slice length 8"));
    if bytes[24..32].iter().any(|&b| b != 0) {
        return Err(CacheFormatError::ReservedNonZero);
    }

    let expected = count
        .checked_mul(CACHE_RECORD_LEN as u64)
        .and_then(|v| v.checked_add(CACHE_HEADER_LEN as u64))
        .ok_or(CacheFormatError::Truncated {
            expected: u64::MAX,
            actual: bytes.len() as u64,
        })?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(CacheFormatError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(CacheFormatError::TrailingBytes(actual - expected));
    }

    let mut samples = Vec::with_capacity(count as usize);
    let mut offset = CACHE_HEADER_LEN;
    for record in 0..count {
        let mut values = [0.0f64; SAMPLE_INPUTS + SAMPLE_TARGETS];
        for (field, v) in values.iter_mut().enumerate() {
            let raw = bytes[offset..offset + 8].try_into().expect("slice length 8");
            *v = f64::from_le_bytes(raw);
            offset += 8;
            if !v.is_finite() || !(0.0..=1.0).contains(v) {
                return Err(CacheFormatError::ValueOutOfRange {
                    record,
                    field,
                    value: *v,
                });
            }
        }
        let mut input = [0.0; SAMPLE_INPUTS];
        let mut target = [0.0; SAMPLE_TARGETS];
        input.copy_from_slice(&values[..SAMPLE_INPUTS]);
        target.copy_from_slice(&values[SAMPLE_INPUTS..]);
        samples.push(PatchSample {
            input,
            target,
            provenance: None,
        });
    }
    Ok((samples, seed))
}

pub fn save_cache(
    path: impl AsRef<Path>,
    samples: &[PatchSample],
    rng_seed: u64,
) -> Result<(), CacheFormatError> {
    let path = path.as_ref();
    std::fs::write(path, samples_to_bytes(samples, rng_seed)).map_err(|source| {
        CacheFormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}

pub fn load_cache(path: impl AsRef<Path>) -> Result<(Vec<PatchSample>, u64), CacheFormatError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CacheFormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    samples_from_bytes(&bytes)
}
