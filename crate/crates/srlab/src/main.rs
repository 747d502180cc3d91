use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use srlab::bench::{self, BenchConfig};
use srlab::dataset::{self, CorpusSpec};
use srlab::derive_seed;
use srlab::interp::{self, UpscaleMethod};
use srlab::io;
use srlab::metrics::{self, SsimParams};
use srlab::mlp::{MlpModel, TrainConfig};
use srlab::raster::PixelDepth;
use srlab::synth;

#[derive(Parser)]
#[command(
    name = "srlab",
    version,
    about = "Patch-based MLP super-resolution lab: train, upscale, evaluate, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an upscaling model from a corpus manifest or a sample cache
    Train(TrainArgs),
    /// 2x-upscale one image with a classical method or a trained model
    Upscale(UpscaleArgs),
    /// Compute MSE / PSNR / SSIM between a reference and a candidate image
    Eval(EvalArgs),
    /// Run the full benchmark: train models, upscale test images, report
    Bench(BenchArgs),
    /// Generate a seeded synthetic demo corpus with manifests
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus manifest: `category<TAB>path` per line
    #[arg(long, required_unless_present = "from_cache")]
    manifest: Option<PathBuf>,
    /// Restrict training to one category (a specialized model)
    #[arg(long)]
    category: Option<String>,
    /// Where to write the trained model
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = srlab::mlp::DEFAULT_HIDDEN_SIZE)]
    hidden_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    max_epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    patience: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    /// Cap the pooled sample count (seeded subsampling)
    #[arg(long)]
    sample_limit: Option<usize>,
    /// Trim one row/column from odd-sized images instead of failing
    #[arg(long)]
    crop_even: bool,
    /// Also write the extracted samples as a dataset cache
    #[arg(long)]
    cache_out: Option<PathBuf>,
    /// Train from a dataset cache instead of extracting from images
    #[arg(long, conflicts_with = "manifest")]
    from_cache: Option<PathBuf>,
}

#[derive(Args)]
struct UpscaleArgs {
    /// One of: nearest, bilinear, bicubic, fcbi, icbi, mlp
    #[arg(long)]
    method: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Trained model file (required for --method mlp)
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = interp::DEFAULT_BICUBIC_A, allow_negative_numbers = true)]
    bicubic_a: f64,
    #[arg(long = "icbi-iters", default_value_t = interp::DEFAULT_ICBI_ITERATIONS)]
    icbi_iterations: u32,
    #[arg(long, default_value_t = interp::DEFAULT_ICBI_STEP)]
    icbi_step: f64,
    #[arg(long)]
    crop_even: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    candidate: PathBuf,
    /// Snap both images onto the 8-bit grid before measuring
    #[arg(long)]
    quantize_metrics: bool,
    #[arg(long, default_value_t = SsimParams::default().window)]
    ssim_window: usize,
    #[arg(long, default_value_t = SsimParams::default().sigma)]
    ssim_sigma: f64,
    #[arg(long, default_value_t = SsimParams::default().k1)]
    ssim_k1: f64,
    #[arg(long, default_value_t = SsimParams::default().k2)]
    ssim_k2: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Key-value config file; any flag below overrides it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train_manifest: Option<PathBuf>,
    #[arg(long)]
    test_manifest: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Comma-separated method list
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    sample_limit: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    bicubic_a: Option<f64>,
    #[arg(long = "icbi-iters")]
    icbi_iterations: Option<u32>,
    #[arg(long)]
    icbi_step: Option<f64>,
    #[arg(long)]
    ssim_window: Option<usize>,
    #[arg(long)]
    ssim_sigma: Option<f64>,
    #[arg(long)]
    ssim_k1: Option<f64>,
    #[arg(long)]
    ssim_k2: Option<f64>,
    #[arg(long)]
    difference_gain: Option<f64>,
    #[arg(long)]
    quantize_metrics: bool,
    #[arg(long)]
    crop_even: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Images generated per category (the last one is held out for testing)
    #[arg(long, default_value_t = 6)]
    per_category: usize,
    /// Square image size in pixels (must be even)
    #[arg(long, default_value_t = 256)]
    size: usize,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => run_train(args),
        Command::Upscale(args) => run_upscale(args),
        Command::Eval(args) => run_eval(args),
        Command::Bench(args) => run_bench(args),
        Command::Synth(args) => run_synth(args),
    }
}

fn run_train(args: TrainArgs) -> Result<()> {
    let samples = if let Some(cache) = &args.from_cache {
        let (samples, cache_seed) = dataset::load_cache(cache)?;
        eprintln!(
            "loaded {} samples from {} (stored seed {cache_seed})",
            samples.len(),
            cache.display()
        );
        samples
    } else {
        let manifest = args.manifest.as_ref().expect("required by clap");
        let mut entries = dataset::load_manifest(manifest)?;
        let spec = if let Some(category) = &args.category {
            entries.retain(|e| &e.category == category);
            if entries.is_empty() {
                bail!("manifest has no images in category {category:?}");
            }
            CorpusSpec::specific(entries)
        } else {
            CorpusSpec::general(entries)
        };
        spec.validate()?;
        dataset::corpus_samples(&spec, args.crop_even)?
    };

    let samples = match args.sample_limit {
        Some(limit) => dataset::subsample(samples, limit, derive_seed(args.seed, "subsample")),
        None => samples,
    };
    eprintln!("training pool: {} samples", samples.len());

    if let Some(cache_out) = &args.cache_out {
        dataset::save_cache(cache_out, &samples, args.seed)?;
        eprintln!("wrote dataset cache {}", cache_out.display());
    }

    let split = dataset::build_split(samples, derive_seed(args.seed, "split"))?;
    let cfg = TrainConfig {
        learning_rate: args.learning_rate,
        max_epochs: args.max_epochs,
        patience: args.patience,
        batch_size: args.batch_size,
        rng_seed: derive_seed(args.seed, "train"),
    };
    let init = MlpModel::init(args.hidden_size, derive_seed(args.seed, "init"));
    let (model, report) = srlab::mlp::train(&init, &split, &cfg)?;
    model.save(&args.model_out)?;
    println!(
        "trained {} epochs (stop: {:?}), best validation mse {:.6} at epoch {}",
        report.epochs_run(),
        report.stop_reason,
        report.best_validation_mse(),
        report.best_epoch
    );
    println!("model written to {}", args.model_out.display());
    Ok(())
}

fn run_upscale(args: UpscaleArgs) -> Result<()> {
    let mut image = io::load_image(&args.input)?;
    if args.crop_even {
        image = image.crop_even()?;
    }
    let method = UpscaleMethod::from_name(&args.method).ok_or_else(|| {
        anyhow!(
            "unknown method {:?} (expected one of {})",
            args.method,
            UpscaleMethod::NAMES.join(", ")
        )
    })?;
    let upscaled = match method {
        UpscaleMethod::Mlp => {
            let model_path = args
                .model
                .as_ref()
                .context("--method mlp needs --model <file>")?;
            let model = MlpModel::load(model_path)?;
            bench::upscale_with_mlp(&model, &image)?
        }
        UpscaleMethod::Bicubic { .. } => {
            interp::upscale_bicubic(&image, args.bicubic_a)?
        }
        UpscaleMethod::Icbi { .. } => {
            interp::upscale_icbi(&image, args.icbi_iterations, args.icbi_step)?
        }
        other => interp::upscale(&image, &other)?,
    };
    io::save_image(&upscaled, &args.output)?;
    println!(
        "{} -> {} ({}x{} -> {}x{}, {})",
        args.input.display(),
        args.output.display(),
        image.width(),
        image.height(),
        upscaled.width(),
        upscaled.height(),
        method.label()
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let mut reference = io::load_image(&args.reference)?;
    let mut candidate = io::load_image(&args.candidate)?;
    if args.quantize_metrics {
        reference = reference.quantized();
        candidate = candidate.quantized();
    }
    let params = SsimParams {
        window: args.ssim_window,
        sigma: args.ssim_sigma,
        k1: args.ssim_k1,
        k2: args.ssim_k2,
        ..SsimParams::default()
    };
    let mse = metrics::mse_rgb(&reference, &candidate)?;
    let psnr = metrics::psnr(mse, PixelDepth::EIGHT_BIT)?;
    let ssim = metrics::ssim_rgb(&reference, &candidate, &params)?;
    println!("mse={mse}");
    println!("psnr={psnr}");
    println!("ssim={ssim}");
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => BenchConfig::from_file(path)?,
        None => {
            let train = args.train_manifest.clone().context(
                "either --config or both --train-manifest and --test-manifest are required",
            )?;
            let test = args.test_manifest.clone().context(
                "either --config or both --train-manifest and --test-manifest are required",
            )?;
            BenchConfig::new(train, test)
        }
    };

    if let Some(v) = args.train_manifest {
        cfg.train_manifest = v;
    }
    if let Some(v) = args.test_manifest {
        cfg.test_manifest = v;
    }
    if let Some(v) = args.output_dir {
        cfg.output_dir = v;
    }
    if let Some(v) = args.methods {
        cfg.methods = v
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.hidden_size {
        cfg.hidden_size = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = args.patience {
        cfg.patience = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.sample_limit {
        cfg.sample_limit = Some(v);
    }
    if let Some(v) = args.bicubic_a {
        cfg.bicubic_a = v;
    }
    if let Some(v) = args.icbi_iterations {
        cfg.icbi_iterations = v;
    }
    if let Some(v) = args.icbi_step {
        cfg.icbi_step = v;
    }
    if let Some(v) = args.ssim_window {
        cfg.ssim.window = v;
    }
    if let Some(v) = args.ssim_sigma {
        cfg.ssim.sigma = v;
    }
    if let Some(v) = args.ssim_k1 {
        cfg.ssim.k1 = v;
    }
    if let Some(v) = args.ssim_k2 {
        cfg.ssim.k2 = v;
    }
    if let Some(v) = args.difference_gain {
        cfg.difference_gain = v;
    }
    if args.quantize_metrics {
        cfg.quantize_metrics = true;
    }
    if args.crop_even {
        cfg.crop_even = true;
    }

    let outcome = bench::run_benchmark(&cfg)?;
    print!("{}", bench::report::render_markdown(&outcome.report));
    println!();
    println!(
        "wrote {} rows to {}",
        outcome.report.rows.len(),
        outcome.output_dir.join("report.csv").display()
    );
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let corpus = synth::write_demo_corpus(&args.output_dir, args.seed, args.per_category, args.size)?;
    println!("wrote {} images under {}", corpus.images.len(), args.output_dir.display());
    println!("train manifest: {}", corpus.train_manifest.display());
    println!("test manifest:  {}", corpus.test_manifest.display());
    println!(
        "next: srlab bench --train-manifest {} --test-manifest {} --output-dir {}",
        corpus.train_manifest.display(),
        corpus.test_manifest.display(),
        args.output_dir.join("bench-out").display()
    );
    Ok(())
}
