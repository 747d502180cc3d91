//! Plain-text key-value bench configuration.
//!
//! Syntax: one `key = value` pair per line; blank lines and `#` comments
//! are skipped. Unknown and duplicate keys are errors. Every key has a
//! matching CLI flag that overrides it.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::interp::{
    UpscaleMethod, DEFAULT_BICUBIC_A, DEFAULT_ICBI_ITERATIONS, DEFAULT_ICBI_STEP,
};
use crate::metrics::SsimParams;
use crate::mlp::{TrainConfig, DEFAULT_HIDDEN_SIZE};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("config line {line}: invalid value for {key}: {reason}")]
    InvalidValue {
        line: usize,
        key: &'static str,
        reason: String,
    },
    #[error("config is missing the required key {0:?}")]
    MissingKey(&'static str),
    #[error("unknown upscaling method {0:?} (expected one of {1})")]
    UnknownMethod(String, String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Fully resolved benchmark settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub output_dir: PathBuf,
    /// Method names in report order; `mlp` expands to the general and the
    /// per-category specialized model at run time.
    pub methods: Vec<String>,
    pub seed: u64,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub sample_limit: Option<usize>,
    pub bicubic_a: f64,
    pub icbi_iterations: u32,
    pub icbi_step: f64,
    pub ssim: SsimParams,
    pub difference_gain: f64,
    pub quantize_metrics: bool,
    pub crop_even: bool,
}

impl BenchConfig {
    /// Defaults for everything except the two manifests.
    pub fn new(train_manifest: PathBuf, test_manifest: PathBuf) -> BenchConfig {
        let train = TrainConfig::default();
        BenchConfig {
            train_manifest,
            test_manifest,
            output_dir: PathBuf::from("bench-out"),
            methods: UpscaleMethod::NAMES.iter().map(|s| s.to_string()).collect(),
            seed: 0,
            hidden_size: DEFAULT_HIDDEN_SIZE,
            learning_rate: train.learning_rate,
            max_epochs: train.max_epochs,
            patience: train.patience,
            batch_size: train.batch_size,
            sample_limit: None,
            bicubic_a: DEFAULT_BICUBIC_A,
            icbi_iterations: DEFAULT_ICBI_ITERATIONS,
            icbi_step: DEFAULT_ICBI_STEP,
            ssim: SsimParams::default(),
            difference_gain: 4.0,
            quantize_metrics: false,
            crop_even: false,
        }
    }

    /// Parses config text. Relative paths are kept as written; use
    /// [`BenchConfig::from_file`] to resolve them against the config's
    /// directory.
    pub fn parse(text: &str) -> Result<BenchConfig, ConfigError> {
        let mut train_manifest: Option<PathBuf> = None;
        let mut test_manifest: Option<PathBuf> = None;
        let mut cfg = BenchConfig::new(PathBuf::new(), PathBuf::new());
        let mut seen: Vec<String> = Vec::new();

        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(key.to_string());

            match key {
                "train_manifest" => train_manifest = Some(PathBuf::from(value)),
                "test_manifest" => test_manifest = Some(PathBuf::from(value)),
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "methods" => cfg.methods = parse_methods(value)?,
                "seed" => cfg.seed = parse_num(line, "seed", value)?,
                "hidden_size" => cfg.hidden_size = parse_num(line, "hidden_size", value)?,
                "learning_rate" => cfg.learning_rate = parse_num(line, "learning_rate", value)?,
                "max_epochs" => cfg.max_epochs = parse_num(line, "max_epochs", value)?,
                "patience" => cfg.patience = parse_num(line, "patience", value)?,
                "batch_size" => cfg.batch_size = parse_num(line, "batch_size", value)?,
                "sample_limit" => {
                    cfg.sample_limit = Some(parse_num(line, "sample_limit", value)?)
                }
                "bicubic_a" => cfg.bicubic_a = parse_num(line, "bicubic_a", value)?,
                "icbi_iterations" => {
                    cfg.icbi_iterations = parse_num(line, "icbi_iterations", value)?
                }
                "icbi_step" => cfg.icbi_step = parse_num(line, "icbi_step", value)?,
                "ssim_window" => cfg.ssim.window = parse_num(line, "ssim_window", value)?,
                "ssim_sigma" => cfg.ssim.sigma = parse_num(line, "ssim_sigma", value)?,
                "ssim_k1" => cfg.ssim.k1 = parse_num(line, "ssim_k1", value)?,
                "ssim_k2" => cfg.ssim.k2 = parse_num(line, "ssim_k2", value)?,
                "difference_gain" => {
                    cfg.difference_gain = parse_num(line, "difference_gain", value)?
                }
                "quantize_metrics" => {
                    cfg.quantize_metrics = parse_bool(line, "quantize_metrics", value)?
                }
                "crop_even" => cfg.crop_even = parse_bool(line, "crop_even", value)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }

        cfg.train_manifest = train_manifest.ok_or(ConfigError::MissingKey("train_manifest"))?;
        cfg.test_manifest = test_manifest.ok_or(ConfigError::MissingKey("test_manifest"))?;
        Ok(cfg)
    }

    /// Reads and parses a config file, resolving relative manifest and
    /// output paths against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<BenchConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = BenchConfig::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for p in [
            &mut cfg.train_manifest,
            &mut cfg.test_manifest,
            &mut cfg.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(p.as_path());
            }
        }
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            rng_seed: self.seed,
        }
    }

    /// Materializes the method list with this config's parameters.
    pub fn method_list(&self) -> Result<Vec<UpscaleMethod>, ConfigError> {
        self.methods
            .iter()
            .map(|name| match UpscaleMethod::from_name(name) {
                Some(UpscaleMethod::Bicubic { .. }) => Ok(UpscaleMethod::Bicubic {
                    a: self.bicubic_a,
                }),
                Some(UpscaleMethod::Icbi { .. }) => Ok(UpscaleMethod::Icbi {
                    iterations: self.icbi_iterations,
                    step: self.icbi_step,
                }),
                Some(m) => Ok(m),
                None => Err(ConfigError::UnknownMethod(
                    name.clone(),
                    UpscaleMethod::NAMES.join(", "),
                )),
            })
            .collect()
    }
}

fn parse_methods(value: &str) -> Result<Vec<String>, ConfigError> {
    let names: Vec<String> = value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    for name in &names {
        if UpscaleMethod::from_name(name).is_none() {
            return Err(ConfigError::UnknownMethod(
                name.clone(),
                UpscaleMethod::NAMES.join(", "),
            ));
        }
    }
    if names.is_empty() {
        return Err(ConfigError::UnknownMethod(
            value.to_string(),
            UpscaleMethod::NAMES.join(", "),
        ));
    }
    Ok(names)
}

fn parse_num<T: std::str::FromStr>(
    line: usize,
    key: &'static str,
    value: &str,
) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        line,
        key,
        reason: e.to_string(),
    })
}

fn parse_bool(line: usize, key: &'static str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(ConfigError::InvalidValue {
            line,
            key,
            reason: format!("expected true or false, got {other:?}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# demo bench
train_manifest = corpora/train.tsv
test_manifest = corpora/test.tsv
output_dir = out
methods = nearest, bicubic, mlp
seed = 7
hidden_size = 16
learning_rate = 0.02
max_epochs = 40
patience = 5
batch_size = 4
sample_limit = 10000
bicubic_a = -0.75
icbi_iterations = 6
icbi_step = 0.2
ssim_window = 9
difference_gain = 8
quantize_metrics = true
crop_even = true
";
        let cfg = BenchConfig::parse(text).unwrap();
        assert_eq!(cfg.train_manifest, PathBuf::from("corpora/train.tsv"));
        assert_eq!(cfg.methods, vec!["nearest", "bicubic", "mlp"]);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.hidden_size, 16);
        assert_eq!(cfg.sample_limit, Some(10_000));
        assert_eq!(cfg.bicubic_a, -0.75);
        assert_eq!(cfg.ssim.window, 9);
        assert!(cfg.quantize_metrics && cfg.crop_even);

        let methods = cfg.method_list().unwrap();
        assert_eq!(methods[1], UpscaleMethod::Bicubic { a: -0.75 });
    }

    #[test]
    fn defaults_cover_optional_keys() {
        let cfg =
            BenchConfig::parse("train_manifest = a\ntest_manifest = b\n").unwrap();
        assert_eq!(cfg.methods.len(), 6);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.hidden_size, DEFAULT_HIDDEN_SIZE);
        assert_eq!(cfg.difference_gain, 4.0);
        assert!(!cfg.quantize_metrics);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(
            BenchConfig::parse("just words\n"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(
            BenchConfig::parse("mystery = 1\n"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            BenchConfig::parse("seed = 1\nseed = 2\n"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            BenchConfig::parse("seed = banana\n"),
            Err(ConfigError::InvalidValue { key: "seed", .. })
        ));
        assert!(matches!(
            BenchConfig::parse("train_manifest = a\n"),
            Err(ConfigError::MissingKey("test_manifest"))
        ));
        assert!(matches!(
            BenchConfig::parse("train_manifest = a\ntest_manifest = b\nmethods = lanczos\n"),
            Err(ConfigError::UnknownMethod(..))
        ));
    }

    #[test]
    fn from_file_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.cfg");
        std::fs::write(&path, "train_manifest = train.tsv\ntest_manifest = test.tsv\n").unwrap();
        let cfg = BenchConfig::from_file(&path).unwrap();
        assert_eq!(cfg.train_manifest, dir.path().join("train.tsv"));
        assert_eq!(cfg.output_dir, dir.path().join("bench-out"));
    }
}
