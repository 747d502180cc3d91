//! Benchmark harness: trains the general and per-category models, runs
//! every configured upscaler on held-out test images, computes
//! MSE/PSNR/SSIM against the references and writes reports, upscaled
//! images and difference images.

pub mod config;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{BenchConfig, ConfigError};

use crate::dataset::{self, CorpusEntry, DatasetError, PatchSample};
use crate::derive_seed;
use crate::interp::{self, InterpError, UpscaleMethod};
use crate::io::{ImageReadError, ImageWriteError};
use crate::metrics::{self, MetricError, MetricReport, MetricRow};
use crate::mlp::{self, MlpError, MlpModel, PATCH_INPUTS, PATCH_OUTPUTS};
use crate::raster::{ImagePlane, PixelDepth, RgbImage};
use report::ReportError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("cannot read test image {path}: {source}")]
    TestImage {
        path: PathBuf,
        source: ImageReadError,
    },
    #[error(transparent)]
    ImageWrite(#[from] ImageWriteError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("test image {test} leaks into the training corpus ({train}: {reason})")]
    Leakage {
        test: PathBuf,
        train: PathBuf,
        reason: &'static str,
    },
    #[error("no training images for test category {0:?}")]
    MissingCategory(String),
    #[error("model shape {input}->{output} does not fit the 3x3 -> 2x2 patch pipeline")]
    ModelShape { input: usize, output: usize },
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("difference gain must be positive, got {0}")]
    InvalidGain(f64),
}

/// Applies the trained network over the LR image: for every channel and LR
/// pixel, the padded 3x3 neighbourhood is forwarded and the four outputs
/// land in the 2x2 HR block at (2x, 2y). Every HR pixel is written exactly
/// once (the blocks tile the output).
pub fn upscale_with_mlp(model: &MlpModel, lr: &RgbImage) -> Result<RgbImage, BenchError> {
    if model.input_size() != PATCH_INPUTS || model.output_size() != PATCH_OUTPUTS {
        return Err(BenchError::ModelShape {
            input: model.input_size(),
            output: model.output_size(),
        });
    }
    let mut hidden = vec![0.0; model.hidden_size()];
    let mut output = vec![0.0; PATCH_OUTPUTS];
    let mut input = [0.0; PATCH_INPUTS];

    lr.try_map_planes(|plane| {
        let (w, h) = (plane.width(), plane.height());
        let padded = plane.pad_replicate(1);
        let (ow, oh) = (2 * w, 2 * h);
        let mut data = vec![0.0; ow * oh];
        for y in 0..h {
            for x in 0..w {
                for dy in 0..3 {
                    for dx in 0..3 {
                        input[dy * 3 + dx] = padded.get(x + dx, y + dy);
                    }
                }
                model.forward_into(&input, &mut hidden, &mut output);
                data[(2 * y) * ow + 2 * x] = output[0];
                data[(2 * y) * ow + 2 * x + 1] = output[1];
                data[(2 * y + 1) * ow + 2 * x] = output[2];
                data[(2 * y + 1) * ow + 2 * x + 1] = output[3];
            }
        }
        Ok(ImagePlane::from_data(ow, oh, data).expect("sigmoid outputs lie in (0, 1)"))
    })
}

/// Inverted, gain-scaled absolute residual: `1 - clamp(gain·|ref - cand|)`.
/// Bright means agreement.
pub fn difference_image(
    reference: &RgbImage,
    candidate: &RgbImage,
    gain: f64,
) -> Result<RgbImage, BenchError> {
    if !(gain > 0.0) {
        return Err(BenchError::InvalidGain(gain));
    }
    if reference.width() != candidate.width() || reference.height() != candidate.height() {
        return Err(BenchError::DimensionMismatch(
            reference.width(),
            reference.height(),
            candidate.width(),
            candidate.height(),
        ));
    }
    let mut planes = Vec::with_capacity(3);
    for c in 0..3 {
        let (r, k) = (reference.plane(c), candidate.plane(c));
        let data = r
            .as_slice()
            .iter()
            .zip(k.as_slice())
            .map(|(&a, &b)| 1.0 - (gain * (a - b).abs()).clamp(0.0, 1.0))
            .collect();
        planes.push(ImagePlane::from_data(r.width(), r.height(), data).expect("clamped"));
    }
    let [r, g, b]: [ImagePlane; 3] = planes.try_into().expect("three channels");
    Ok(RgbImage::new([r, g, b]).expect("equal dimensions"))
}

/// Everything a benchmark run leaves behind.
#[derive(Debug)]
pub struct BenchOutcome {
    pub report: MetricReport,
    pub output_dir: PathBuf,
    pub model_files: Vec<PathBuf>,
}

struct TrainImage {
    entry: CorpusEntry,
    samples: Vec<PatchSample>,
}

/// Runs the full benchmark described by `cfg`. See the crate README for
/// the output layout (`report.csv`, `report.md`, `images/`, `diffs/`,
/// `models/`).
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    let methods = cfg.method_list()?;
    let needs_mlp = methods.iter().any(|m| matches!(m, UpscaleMethod::Mlp));

    let train_entries = dataset::load_manifest(&cfg.train_manifest)?;
    let test_entries = dataset::load_manifest(&cfg.test_manifest)?;
    if test_entries.is_empty() {
        return Err(DatasetError::EmptyCorpus.into());
    }
    if needs_mlp && train_entries.is_empty() {
        return Err(DatasetError::EmptyCorpus.into());
    }

    check_leakage(&test_entries, &train_entries)?;

    // Load the training corpus once; sample image ids follow manifest order.
    let mut train_images: Vec<TrainImage> = Vec::with_capacity(train_entries.len());
    if needs_mlp {
        for (index, entry) in train_entries.iter().enumerate() {
            let image = dataset::load_corpus_image(&entry.path, cfg.crop_even)?;
            let samples = dataset::extract_samples(&image, index as u32)?;
            train_images.push(TrainImage {
                entry: entry.clone(),
                samples,
            });
        }
    }

    let test_categories: BTreeSet<String> =
        test_entries.iter().map(|e| e.category.clone()).collect();

    let mut general_model: Option<MlpModel> = None;
    let mut category_models: BTreeMap<String, MlpModel> = BTreeMap::new();
    if needs_mlp {
        let pooled: Vec<PatchSample> = train_images
            .iter()
            .flat_map(|t| t.samples.iter().cloned())
            .collect();
        general_model = Some(train_one(cfg, pooled, "gen")?);

        for category in &test_categories {
            let samples: Vec<PatchSample> = train_images
                .iter()
                .filter(|t| &t.entry.category == category)
                .flat_map(|t| t.samples.iter().cloned())
                .collect();
            if samples.is_empty() {
                return Err(BenchError::MissingCategory(category.clone()));
            }
            let model = train_one(cfg, samples, &format!("sp/{category}"))?;
            category_models.insert(category.clone(), model);
        }
    }
    drop(train_images);

    let out = &cfg.output_dir;
    make_dir(out)?;
    let mut model_files = Vec::new();
    if let Some(model) = &general_model {
        let dir = out.join("models");
        make_dir(&dir)?;
        let path = dir.join("mlp_gen.mlpsr");
        model.save(&path).map_err(MlpError::from)?;
        model_files.push(path);
        for (category, model) in &category_models {
            let path = dir.join(format!("mlp_sp_{}.mlpsr", sanitize(category)));
            model.save(&path).map_err(MlpError::from)?;
            model_files.push(path);
        }
    }

    let mut report = MetricReport::default();
    for entry in &test_entries {
        let hr = load_test_image(&entry.path, cfg.crop_even)?;
        let lr = hr.downsample_2x().map_err(|_| {
            BenchError::Dataset(DatasetError::OddDimensions {
                width: hr.width(),
                height: hr.height(),
            })
        })?;
        let stem = entry
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".to_string());
        let label = sanitize(&format!("{}-{}", entry.category, stem));
        eprintln!("bench: {label} ({}x{} -> 2x)", lr.width(), lr.height());

        for method in &methods {
            let outputs: Vec<(String, RgbImage)> = match method {
                UpscaleMethod::Mlp => {
                    let gen = general_model.as_ref().expect("trained above");
                    let sp = category_models
                        .get(&entry.category)
                        .expect("per-category model trained above");
                    vec![
                        ("mlp_gen".to_string(), upscale_with_mlp(gen, &lr)?),
                        ("mlp_sp".to_string(), upscale_with_mlp(sp, &lr)?),
                    ]
                }
                classical => vec![(
                    classical.label().to_string(),
                    interp::upscale(&lr, classical)?,
                )],
            };

            for (method_label, upscaled) in outputs {
                debug_assert_eq!(
                    (upscaled.width(), upscaled.height()),
                    (hr.width(), hr.height())
                );
                let row = evaluate_pair(cfg, &label, &method_label, &hr, &upscaled)?;
                let image_dir = out.join("images").join(&label);
                make_dir(&image_dir)?;
                crate::io::save_image(&upscaled, image_dir.join(format!("{method_label}.png")))?;
                let diff = difference_image(&hr, &upscaled, cfg.difference_gain)?;
                let diff_dir = out.join("diffs").join(&label);
                make_dir(&diff_dir)?;
                crate::io::save_image(&diff, diff_dir.join(format!("{method_label}.png")))?;
                report.rows.push(row);
            }
        }
    }

    report::write_reports(&report, out)?;
    Ok(BenchOutcome {
        report,
        output_dir: out.clone(),
        model_files,
    })
}

fn train_one(
    cfg: &BenchConfig,
    samples: Vec<PatchSample>,
    tag: &str,
) -> Result<MlpModel, BenchError> {
    let samples = match cfg.sample_limit {
        Some(limit) => dataset::subsample(samples, limit, derive_seed(cfg.seed, &format!("subsample/{tag}"))),
        None => samples,
    };
    let count = samples.len();
    let split = dataset::build_split(samples, derive_seed(cfg.seed, &format!("split/{tag}")))?;
    let init = MlpModel::init(cfg.hidden_size, derive_seed(cfg.seed, &format!("init/{tag}")));
    let mut train_cfg = cfg.train_config();
    train_cfg.rng_seed = derive_seed(cfg.seed, &format!("train/{tag}"));
    eprintln!(
        "bench: training mlp_{tag} on {count} samples ({} train)",
        split.train.len()
    );
    let (model, report) = mlp::train(&init, &split, &train_cfg)?;
    eprintln!(
        "bench: mlp_{tag} best validation mse {:.6} at epoch {} after {} epochs",
        report.best_validation_mse(),
        report.best_epoch,
        report.epochs_run()
    );
    Ok(model)
}

fn evaluate_pair(
    cfg: &BenchConfig,
    image_label: &str,
    method_label: &str,
    hr: &RgbImage,
    upscaled: &RgbImage,
) -> Result<MetricRow, BenchError> {
    let (reference, candidate) = if cfg.quantize_metrics {
        (hr.quantized(), upscaled.quantized())
    } else {
        (hr.clone(), upscaled.clone())
    };
    let mse = metrics::mse_rgb(&reference, &candidate)?;
    let psnr = metrics::psnr(mse, PixelDepth::EIGHT_BIT)?;
    let ssim = metrics::ssim_rgb(&reference, &candidate, &cfg.ssim)?;
    Ok(MetricRow {
        image: image_label.to_string(),
        method: method_label.to_string(),
        mse,
        psnr,
        ssim,
    })
}

fn load_test_image(path: &Path, crop_even: bool) -> Result<RgbImage, BenchError> {
    let img = crate::io::load_image(path).map_err(|source| BenchError::TestImage {
        path: path.to_path_buf(),
        source,
    })?;
    if crop_even {
        Ok(img.crop_even().expect("image is non-empty"))
    } else {
        Ok(img)
    }
}

/// Rejects any test image that is also a training image, by canonical path
/// or by file content (SHA-256).
fn check_leakage(test: &[CorpusEntry], train: &[CorpusEntry]) -> Result<(), BenchError> {
    let canon = |p: &Path| -> Result<PathBuf, BenchError> {
        p.canonicalize().map_err(|source| BenchError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let hash = |p: &Path| -> Result<[u8; 32], BenchError> {
        let bytes = std::fs::read(p).map_err(|source| BenchError::Io {
            path: p.to_path_buf(),
            source,
        })?;
        Ok(Sha256::digest(&bytes).into())
    };

    let mut train_paths: BTreeMap<PathBuf, &CorpusEntry> = BTreeMap::new();
    let mut train_hashes: BTreeMap<[u8; 32], &CorpusEntry> = BTreeMap::new();
    for entry in train {
        train_paths.insert(canon(&entry.path)?, entry);
        train_hashes.insert(hash(&entry.path)?, entry);
    }
    for entry in test {
        if let Some(hit) = train_paths.get(&canon(&entry.path)?) {
            return Err(BenchError::Leakage {
                test: entry.path.clone(),
                train: hit.path.clone(),
                reason: "same file path",
            });
        }
        if let Some(hit) = train_hashes.get(&hash(&entry.path)?) {
            return Err(BenchError::Leakage {
                test: entry.path.clone(),
                train: hit.path.clone(),
                reason: "identical content",
            });
        }
    }
    Ok(())
}

fn make_dir(path: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Keeps labels filesystem-friendly.
fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}
