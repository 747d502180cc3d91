//! Acceptance suite: one test per release criterion, each printing a
//! pass line. Run with `cargo test -p srlab --test acceptance -- --nocapture`
//! to see the per-criterion output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use srlab::bench::{self, BenchConfig};
use srlab::dataset::{self, PatchSample};
use srlab::derive_seed;
use srlab::interp::{self, UpscaleMethod};
use srlab::metrics::{self, SsimParams};
use srlab::mlp::{self, MlpModel, ModelFormatError, TrainConfig};
use srlab::raster::{ImagePlane, PixelDepth, RgbImage};
use srlab::synth;

fn random_plane(w: usize, h: usize, rng: &mut ChaCha8Rng) -> ImagePlane {
    let data = (0..w * h).map(|_| rng.random_range(0.0..=1.0)).collect();
    ImagePlane::from_data(w, h, data).unwrap()
}

fn category_corpus(category: &str, count: usize, size: usize, seed: u64) -> Vec<RgbImage> {
    (0..count)
        .map(|i| {
            let s = derive_seed(seed, &format!("{category}/{i}"));
            synth::synth_image(category, size, size, s).unwrap()
        })
        .collect()
}

fn pooled_samples(images: &[RgbImage]) -> Vec<PatchSample> {
    images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| dataset::extract_samples(img, i as u32).unwrap())
        .collect()
}

fn train_patch_model(samples: Vec<PatchSample>, seed: u64) -> MlpModel {
    let split = dataset::build_split(samples, derive_seed(seed, "split")).unwrap();
    let cfg = TrainConfig {
        max_epochs: 25,
        patience: 6,
        rng_seed: derive_seed(seed, "train"),
        ..TrainConfig::default()
    };
    let init = MlpModel::init(20, derive_seed(seed, "init"));
    mlp::train(&init, &split, &cfg).unwrap().0
}

/// Criterion 1: the PSNR formula reproduces the published MSE/PSNR pairs
/// with MAX = 255.
#[test]
fn acceptance_1_psnr_anchors() {
    let depth = PixelDepth::EIGHT_BIT;
    let cases = [(20.61, 34.99), (32.08, 33.07), (60.22, 30.33)];
    for (mse, want) in cases {
        let got = metrics::psnr(mse, depth).unwrap();
        assert!(
            (got - want).abs() <= 0.01,
            "psnr({mse}) = {got}, expected {want} ±0.01"
        );
    }
    println!("acceptance 1 (MSE<->PSNR anchor rows, MAX=255): PASS");
}

/// Criterion 2: analytic gradients match central finite differences
/// (h = 1e-5, relative error < 1e-4) for 100 random (model, input, target)
/// triples across every parameter.
#[test]
fn acceptance_2_gradient_check() {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0usize;
    for trial in 0..100u64 {
        let model = MlpModel::init(20, derive_seed(9, &format!("grad/{trial}")));
        let input: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..=1.0)).collect();
        let target: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..=1.0)).collect();
        let analytic = model.backward(&input, &target).unwrap();

        let flat: Vec<f64> = analytic
            .w1
            .iter()
            .chain(&analytic.b1)
            .chain(&analytic.w2)
            .chain(&analytic.b2)
            .copied()
            .collect();

        // Perturb each parameter through the serialized layout, which is
        // w1 | b1 | w2 | b2 — the same order as `flat`.
        let base = model.to_bytes();
        const HEADER: usize = 22;
        for (k, &a) in flat.iter().enumerate() {
            let offset = HEADER + 8 * k;
            let original = f64::from_le_bytes(base[offset..offset + 8].try_into().unwrap());

            let loss_at = |v: f64| -> f64 {
                let mut bytes = base.clone();
                bytes[offset..offset + 8].copy_from_slice(&v.to_le_bytes());
                MlpModel::from_bytes(&bytes)
                    .unwrap()
                    .sample_loss(&input, &target)
                    .unwrap()
            };
            let numeric = (loss_at(original + h) - loss_at(original - h)) / (2.0 * h);
            let denom = numeric.abs().max(a.abs()).max(1e-8);
            let rel = (numeric - a).abs() / denom;
            assert!(
                rel < 1e-4,
                "trial {trial} parameter {k}: relative error {rel} ({numeric} vs {a})"
            );
            checked += 1;
        }
    }
    println!("acceptance 2 (gradient vs finite differences, {checked} parameters): PASS");
}

/// Criterion 3: metric identities and oracle equivalence of MSE and SSIM
/// against naive double-loop implementations on 20 random 32x32 pairs.
#[test]
fn acceptance_3_metric_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = SsimParams::default();

    for pair in 0..20 {
        let a = random_plane(32, 32, &mut rng);
        let b = random_plane(32, 32, &mut rng);

        assert_eq!(metrics::mse_plane(&a, &a).unwrap(), 0.0);
        assert_eq!(metrics::ssim_plane(&a, &a, &params).unwrap(), 1.0);

        let mse_ab = metrics::mse_plane(&a, &b).unwrap();
        let mse_ba = metrics::mse_plane(&b, &a).unwrap();
        assert!((mse_ab - mse_ba).abs() <= 1e-9 * mse_ab.max(1.0));
        let ssim_ab = metrics::ssim_plane(&a, &b, &params).unwrap();
        let ssim_ba = metrics::ssim_plane(&b, &a, &params).unwrap();
        assert!((ssim_ab - ssim_ba).abs() < 1e-9);

        assert!(
            (mse_ab - mse_oracle(&a, &b)).abs() < 1e-6,
            "pair {pair}: MSE oracle deviation"
        );
        assert!(
            (ssim_ab - ssim_oracle(&a, &b, &params)).abs() < 1e-6,
            "pair {pair}: SSIM oracle deviation"
        );
    }
    println!("acceptance 3 (metric identities + double-loop oracles, 20 pairs): PASS");
}

/// Naive double-loop MSE in the 8-bit domain.
fn mse_oracle(a: &ImagePlane, b: &ImagePlane) -> f64 {
    let mut sum = 0.0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            let d = a.get(x, y) * 255.0 - b.get(x, y) * 255.0;
            sum += d * d;
        }
    }
    sum / (a.width() * a.height()) as f64
}

/// Naive per-window SSIM with an explicitly normalized 2-D Gaussian window.
fn ssim_oracle(a: &ImagePlane, b: &ImagePlane, params: &SsimParams) -> f64 {
    let win = params.window;
    let center = (win as f64 - 1.0) / 2.0;
    let mut weights = vec![0.0; win * win];
    let mut total = 0.0;
    for j in 0..win {
        for i in 0..win {
            let (dx, dy) = (i as f64 - center, j as f64 - center);
            let v = (-(dx * dx + dy * dy) / (2.0 * params.sigma * params.sigma)).exp();
            weights[j * win + i] = v;
            total += v;
        }
    }
    for v in &mut weights {
        *v /= total;
    }
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);

    let mut sum = 0.0;
    let mut count = 0usize;
    for y0 in 0..=(a.height() - win) {
        for x0 in 0..=(a.width() - win) {
            let (mut ma, mut mb) = (0.0, 0.0);
            for j in 0..win {
                for i in 0..win {
                    let w = weights[j * win + i];
                    ma += w * a.get(x0 + i, y0 + j) * 255.0;
                    mb += w * b.get(x0 + i, y0 + j) * 255.0;
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for j in 0..win {
                for i in 0..win {
                    let w = weights[j * win + i];
                    let da = a.get(x0 + i, y0 + j) * 255.0 - ma;
                    let db = b.get(x0 + i, y0 + j) * 255.0 - mb;
                    va += w * da * da;
                    vb += w * db * db;
                    cov += w * da * db;
                }
            }
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}

/// Criterion 4: upscaler invariants — 2x dimensions, exact constant
/// preservation, [0,1] outputs for all six paths; ICBI(0) == FCBI
/// bit-for-bit; ICBI energy non-increasing; MLP reproduces a constant to
/// |error| < 0.02 after overfitting a constant corpus.
#[test]
fn acceptance_4_upscaler_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let textured = RgbImage::new([
        random_plane(10, 8, &mut rng),
        random_plane(10, 8, &mut rng),
        random_plane(10, 8, &mut rng),
    ])
    .unwrap();
    let constant = RgbImage::constant(10, 8, [0.21, 0.58, 0.93]).unwrap();

    let methods = [
        UpscaleMethod::Nearest,
        UpscaleMethod::Bilinear,
        UpscaleMethod::Bicubic { a: -0.5 },
        UpscaleMethod::Fcbi,
        UpscaleMethod::Icbi {
            iterations: 10,
            step: 0.1,
        },
    ];
    for method in &methods {
        let up = interp::upscale(&textured, method).unwrap();
        assert_eq!((up.width(), up.height()), (20, 16), "{method:?}");
        for c in 0..3 {
            assert!(up
                .plane(c)
                .as_slice()
                .iter()
                .all(|&v| (0.0..=1.0).contains(&v)));
        }
        let up = interp::upscale(&constant, method).unwrap();
        for c in 0..3 {
            let want = constant.plane(c).get(0, 0);
            assert!(
                up.plane(c).as_slice().iter().all(|&v| v == want),
                "{method:?} did not preserve a constant exactly"
            );
        }
    }

    // ICBI with zero iterations is FCBI, bit for bit.
    assert_eq!(
        interp::upscale_icbi(&textured, 0, 0.1).unwrap(),
        interp::upscale_fcbi(&textured)
    );
    // Energy is non-increasing across iterations.
    for c in 0..3 {
        let (_, trace) = interp::icbi_plane_with_energy(textured.plane(c), 10, 0.1);
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    // The MLP path: overfit a constant corpus, then verify the upscaled
    // output of a constant image stays within 0.02 of the constant.
    let c = 0.42;
    let images: Vec<RgbImage> = (0..2)
        .map(|_| RgbImage::constant(16, 16, [c; 3]).unwrap())
        .collect();
    let model = train_patch_model(pooled_samples(&images), 44);
    let lr = RgbImage::constant(8, 8, [c; 3]).unwrap();
    let up = bench::upscale_with_mlp(&model, &lr).unwrap();
    assert_eq!((up.width(), up.height()), (16, 16));
    for plane in up.planes() {
        for &v in plane.as_slice() {
            assert!((v - c).abs() < 0.02, "MLP constant output {v} vs {c}");
            assert!((0.0..=1.0).contains(&v));
        }
    }
    println!("acceptance 4 (upscaler invariants, six paths): PASS");
}

/// Criterion 5: on a seeded same-category corpus (6 images, 5 train /
/// 1 held-out, 128x128 LR), the specialized model beats bicubic in MSE on
/// the held-out image. Ordering-only check.
#[test]
fn acceptance_5_learning_beats_bicubic() {
    let images = category_corpus("stripes", 6, 256, 505);
    let (train_imgs, held_out) = images.split_at(5);
    let model = train_patch_model(pooled_samples(train_imgs), 505);

    let hr = &held_out[0];
    let lr = hr.downsample_2x().unwrap();
    let mse_mlp = metrics::mse_rgb(hr, &bench::upscale_with_mlp(&model, &lr).unwrap()).unwrap();
    let mse_bicubic =
        metrics::mse_rgb(hr, &interp::upscale_bicubic(&lr, -0.5).unwrap()).unwrap();

    assert!(
        mse_mlp < mse_bicubic,
        "MLP_sp mse {mse_mlp:.2} is not below bicubic {mse_bicubic:.2}"
    );
    println!(
        "acceptance 5 (MLP_sp {mse_mlp:.2} < bicubic {mse_bicubic:.2} on held-out): PASS"
    );
}

/// Criterion 6: specialization trend — with equal sample budgets, the
/// specialized model is at or below the general model's MSE on in-category
/// held-out images for at least 2 of 3 seeded category corpora. Each
/// category's outcome is logged; inversions are tolerated up to one.
#[test]
fn acceptance_6_specialization_trend() {
    let seed = 606u64;
    let mut corpora = Vec::new();
    for category in synth::CATEGORIES {
        let images = category_corpus(category, 6, 256, derive_seed(seed, category));
        corpora.push((category, images));
    }

    let budget = corpora
        .iter()
        .map(|(_, images)| pooled_samples(&images[..5]).len())
        .min()
        .unwrap();

    let pooled: Vec<PatchSample> = corpora
        .iter()
        .flat_map(|(_, images)| pooled_samples(&images[..5]))
        .collect();
    let pooled = dataset::subsample(pooled, budget, derive_seed(seed, "sub/gen"));
    let general = train_patch_model(pooled, derive_seed(seed, "gen"));

    let mut wins = 0usize;
    for (category, images) in &corpora {
        let sp_pool = dataset::subsample(
            pooled_samples(&images[..5]),
            budget,
            derive_seed(seed, &format!("sub/{category}")),
        );
        let specialized = train_patch_model(sp_pool, derive_seed(seed, &format!("sp/{category}")));

        let hr = &images[5];
        let lr = hr.downsample_2x().unwrap();
        let mse_sp =
            metrics::mse_rgb(hr, &bench::upscale_with_mlp(&specialized, &lr).unwrap()).unwrap();
        let mse_gen =
            metrics::mse_rgb(hr, &bench::upscale_with_mlp(&general, &lr).unwrap()).unwrap();
        let ok = mse_sp <= mse_gen;
        wins += usize::from(ok);
        println!(
            "acceptance 6 [{category}]: mlp_sp {mse_sp:.2} vs mlp_gen {mse_gen:.2} -> {}",
            if ok { "sp wins" } else { "inversion" }
        );
    }
    assert!(
        wins >= 2,
        "specialization trend held for only {wins} of 3 categories"
    );
    println!("acceptance 6 (specialization trend, {wins}/3 categories): PASS");
}

/// Criterion 7: two end-to-end bench runs with identical seeds produce
/// byte-identical CSV reports and model files.
#[test]
fn acceptance_7_bench_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth::write_demo_corpus(dir.path().join("corpus"), 7, 3, 64).unwrap();

    let run = |out: &str| -> (Vec<u8>, Vec<(String, Vec<u8>)>) {
        let mut cfg = BenchConfig::new(
            corpus.train_manifest.clone(),
            corpus.test_manifest.clone(),
        );
        cfg.output_dir = dir.path().join(out);
        cfg.methods = vec!["nearest".into(), "bicubic".into(), "mlp".into()];
        cfg.seed = 11;
        cfg.max_epochs = 3;
        cfg.patience = 2;
        cfg.ssim.window = 9; // test images are 64x64; keep plenty of windows
        let outcome = bench::run_benchmark(&cfg).unwrap();
        let csv = std::fs::read(cfg.output_dir.join("report.csv")).unwrap();
        let mut models: Vec<(String, Vec<u8>)> = outcome
            .model_files
            .iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(p).unwrap(),
                )
            })
            .collect();
        models.sort_by(|a, b| a.0.cmp(&b.0));
        (csv, models)
    };

    let (csv_a, models_a) = run("out-a");
    let (csv_b, models_b) = run("out-b");
    assert_eq!(csv_a, csv_b, "report.csv differs between identical runs");
    assert_eq!(
        models_a.len(),
        models_b.len(),
        "model file sets differ"
    );
    assert!(!models_a.is_empty());
    for ((name_a, bytes_a), (name_b, bytes_b)) in models_a.iter().zip(&models_b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "model {name_a} differs between runs");
    }
    println!(
        "acceptance 7 (bench determinism: {} byte-identical model files + CSV): PASS",
        models_a.len()
    );
}

/// Criterion 8: model and dataset-cache persistence round trips are
/// bit-exact; corrupted magic and truncation are rejected with distinct
/// errors.
#[test]
fn acceptance_8_persistence_round_trips() {
    let dir = tempfile::tempdir().unwrap();

    // Model file.
    let model = MlpModel::init(20, 808);
    let model_path = dir.path().join("model.mlpsr");
    model.save(&model_path).unwrap();
    let reloaded = MlpModel::load(&model_path).unwrap();
    assert_eq!(reloaded, model);
    assert_eq!(reloaded.to_bytes(), model.to_bytes());

    let bytes = model.to_bytes();
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xFF;
    assert!(matches!(
        MlpModel::from_bytes(&bad_magic),
        Err(ModelFormatError::BadMagic)
    ));
    assert!(matches!(
        MlpModel::from_bytes(&bytes[..bytes.len() - 1]),
        Err(ModelFormatError::Truncated { .. })
    ));

    // Dataset cache.
    let img = synth::synth_image("tiles", 16, 16, 88).unwrap();
    let samples = dataset::extract_samples(&img, 0).unwrap();
    let cache_path = dir.path().join("cache.srds");
    dataset::save_cache(&cache_path, &samples, 99).unwrap();
    let (back, stored_seed) = dataset::load_cache(&cache_path).unwrap();
    assert_eq!(stored_seed, 99);
    assert_eq!(back.len(), samples.len());
    for (a, b) in samples.iter().zip(&back) {
        assert_eq!(a.input, b.input);
        assert_eq!(a.target, b.target);
    }
    assert_eq!(
        dataset::samples_to_bytes(&back, 99),
        dataset::samples_to_bytes(
            &samples
                .iter()
                .map(|s| PatchSample {
                    provenance: None,
                    ..s.clone()
                })
                .collect::<Vec<_>>(),
            99
        )
    );

    let cache_bytes = dataset::samples_to_bytes(&samples, 99);
    let mut bad_cache_magic = cache_bytes.clone();
    bad_cache_magic[0] ^= 0xFF;
    assert!(matches!(
        dataset::samples_from_bytes(&bad_cache_magic),
        Err(dataset::CacheFormatError::BadMagic)
    ));
    assert!(matches!(
        dataset::samples_from_bytes(&cache_bytes[..cache_bytes.len() - 7]),
        Err(dataset::CacheFormatError::Truncated { .. })
    ));

    println!("acceptance 8 (model + dataset cache persistence): PASS");
}
