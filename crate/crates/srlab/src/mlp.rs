//! The feedforward network behind the learned upscaler: one tanh hidden
//! layer, a sigmoid output layer, mean-squared-error loss, per-sample SGD
//! with validation-based early stopping, and binary model persistence.
//!
//! The default shape is 9 inputs (a 3x3 LR neighbourhood) -> 20 hidden ->
//! 4 outputs (the 2x2 HR block). The sigmoid output matches the normalized
//! pixel range; note it can never emit exactly 0 or 1, so perfect black or
//! white carries a small irreducible loss.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{DatasetSplit, PatchSample};

/// Default patch geometry: 3x3 inputs and 2x2 outputs.
pub const PATCH_INPUTS: usize = 9;
pub const PATCH_OUTPUTS: usize = 4;
pub const DEFAULT_HIDDEN_SIZE: usize = 20;

const MODEL_MAGIC: &[u8; 5] = b"MLPSR";
const MODEL_VERSION: u8 = 0x01;
/// Sanity cap on any serialized layer size; larger values are treated as
/// corrupt headers, not allocation requests.
const MAX_LAYER_SIZE: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("input length {got} does not match the model's {expected} inputs")]
    InputSize { expected: usize, got: usize },
    #[error("target length {got} does not match the model's {expected} outputs")]
    TargetSize { expected: usize, got: usize },
    #[error("training requires non-empty train and validation sets")]
    EmptySplit,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Format(#[from] ModelFormatError),
}

#[derive(Debug, Error)]
pub enum ModelFormatError {
    #[error("model file truncated: need {expected} bytes, have {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("bad model magic")]
    BadMagic,
    #[error("unsupported model version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("model dimensions {input}x{hidden}x{output} overflow the sanity limit")]
    DimensionOverflow { input: u32, hidden: u32, output: u32 },
    #[error("reserved model header field must be zero")]
    ReservedNonZero,
    #[error("{0} trailing bytes after the last parameter")]
    TrailingBytes(u64),
    #[error("parameter #{index} is not finite")]
    NonFiniteParameter { index: usize },
    #[error("cannot access model file {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Weights and biases of the two dense layers. `w1` is hidden x input and
/// `w2` output x hidden, both row-major; activations are fixed (tanh then
/// sigmoid).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_size: usize,
    hidden_size: usize,
    output_size: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

/// Parameter gradients with the same layout as [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros(model: &MlpModel) -> Gradients {
        Gradients {
            w1: vec![0.0; model.w1.len()],
            b1: vec![0.0; model.b1.len()],
            w2: vec![0.0; model.w2.len()],
            b2: vec![0.0; model.b2.len()],
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl MlpModel {
    /// Fresh 9 -> hidden -> 4 model with uniform Xavier weights in
    /// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]` per layer
    /// and zero biases; deterministic for a given seed.
    pub fn init(hidden_size: usize, rng_seed: u64) -> MlpModel {
        MlpModel::init_sized(PATCH_INPUTS, hidden_size, PATCH_OUTPUTS, rng_seed)
    }

    pub fn init_sized(
        input_size: usize,
        hidden_size: usize,
        output_size: usize,
        rng_seed: u64,
    ) -> MlpModel {
        assert!(input_size >= 1 && hidden_size >= 1 && output_size >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut layer = |rows: usize, cols: usize| -> Vec<f64> {
            let r = (6.0 / (rows + cols) as f64).sqrt();
            (0..rows * cols).map(|_| rng.random_range(-r..=r)).collect()
        };
        MlpModel {
            input_size,
            hidden_size,
            output_size,
            w1: layer(hidden_size, input_size),
            b1: vec![0.0; hidden_size],
            w2: layer(output_size, hidden_size),
            b2: vec![0.0; output_size],
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    /// Total number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// hidden = tanh(w1·x + b1); output = sigmoid(w2·hidden + b2).
    /// Every output lies strictly inside (0, 1).
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.check_input(input)?;
        let mut hidden = vec![0.0; self.hidden_size];
        let mut output = vec![0.0; self.output_size];
        self.forward_into(input, &mut hidden, &mut output);
        Ok(output)
    }

    fn check_input(&self, input: &[f64]) -> Result<(), MlpError> {
        if input.len() != self.input_size {
            return Err(MlpError::InputSize {
                expected: self.input_size,
                got: input.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn forward_into(&self, input: &[f64], hidden: &mut [f64], output: &mut [f64]) {
        for j in 0..self.hidden_size {
            let row = &self.w1[j * self.input_size..(j + 1) * self.input_size];
            let mut z = self.b1[j];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            hidden[j] = z.tanh();
        }
        for i in 0..self.output_size {
            let row = &self.w2[i * self.hidden_size..(i + 1) * self.hidden_size];
            let mut z = self.b2[i];
            for (w, h) in row.iter().zip(hidden.iter()) {
                z += w * h;
            }
            output[i] = sigmoid(z);
        }
    }

    /// Mean squared error over the outputs for one sample:
    /// `L = (1/output_size) · Σ (output_i − target_i)²`.
    pub fn sample_loss(&self, input: &[f64], target: &[f64]) -> Result<f64, MlpError> {
        if target.len() != self.output_size {
            return Err(MlpError::TargetSize {
                expected: self.output_size,
                got: target.len(),
            });
        }
        let output = self.forward(input)?;
        let sum: f64 = output
            .iter()
            .zip(target)
            .map(|(o, t)| (o - t) * (o - t))
            .sum();
        Ok(sum / self.output_size as f64)
    }

    /// Gradients of the per-sample loss with respect to every parameter,
    /// by the chain rule through sigmoid and tanh.
    pub fn backward(&self, input: &[f64], target: &[f64]) -> Result<Gradients, MlpError> {
        self.check_input(input)?;
        if target.len() != self.output_size {
            return Err(MlpError::TargetSize {
                expected: self.output_size,
                got: target.len(),
            });
        }
        let mut grads = Gradients::zeros(self);
        let mut hidden = vec![0.0; self.hidden_size];
        let mut output = vec![0.0; self.output_size];
        let mut delta_out = vec![0.0; self.output_size];
        self.accumulate(
            input,
            target,
            &mut grads,
            &mut hidden,
            &mut output,
            &mut delta_out,
        );
        Ok(grads)
    }

    /// Adds this sample's gradients into `grads` and returns its loss.
    fn accumulate(
        &self,
        input: &[f64],
        target: &[f64],
        grads: &mut Gradients,
        hidden: &mut [f64],
        output: &mut [f64],
        delta_out: &mut [f64],
    ) -> f64 {
        self.forward_into(input, hidden, output);

        let inv_n = 1.0 / self.output_size as f64;
        let mut loss = 0.0;
        for i in 0..self.output_size {
            let err = output[i] - target[i];
            loss += err * err;
            // dL/dz2 = (2/n)(o - t) · o(1 - o)
            delta_out[i] = 2.0 * inv_n * err * output[i] * (1.0 - output[i]);
        }

        for i in 0..self.output_size {
            let d = delta_out[i];
            grads.b2[i] += d;
            let row = &mut grads.w2[i * self.hidden_size..(i + 1) * self.hidden_size];
            for (g, h) in row.iter_mut().zip(hidden.iter()) {
                *g += d * h;
            }
        }

        for j in 0..self.hidden_size {
            let mut back = 0.0;
            for i in 0..self.output_size {
                back += delta_out[i] * self.w2[i * self.hidden_size + j];
            }
            let d = back * (1.0 - hidden[j] * hidden[j]);
            grads.b1[j] += d;
            let row = &mut grads.w1[j * self.input_size..(j + 1) * self.input_size];
            for (g, x) in row.iter_mut().zip(input) {
                *g += d * x;
            }
        }

        loss * inv_n
    }

    fn apply_update(&mut self, grads: &Gradients, scale: f64) {
        for (w, g) in self.w1.iter_mut().zip(&grads.w1) {
            *w -= scale * g;
        }
        for (b, g) in self.b1.iter_mut().zip(&grads.b1) {
            *b -= scale * g;
        }
        for (w, g) in self.w2.iter_mut().zip(&grads.w2) {
            *w -= scale * g;
        }
        for (b, g) in self.b2.iter_mut().zip(&grads.b2) {
            *b -= scale * g;
        }
    }

    /// Serializes to the binary model format: magic `MLPSR`, version 0x01,
    /// four u32 little-endian sizes (input, hidden, output, reserved 0),
    /// then w1, b1, w2, b2 as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(22 + 8 * self.parameter_count());
        out.extend_from_slice(MODEL_MAGIC);
        out.push(MODEL_VERSION);
        for v in [
            self.input_size as u32,
            self.hidden_size as u32,
            self.output_size as u32,
            0u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self
            .w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the binary model format; any deviation (magic, version,
    /// implausible dimensions, truncation, trailing bytes, non-finite
    /// parameters) is rejected with a distinct error.
    pub fn from_bytes(bytes: &[u8]) -> Result<MlpModel, ModelFormatError> {
        const HEADER: usize = 5 + 1 + 16;
        if bytes.len() < HEADER {
            return Err(ModelFormatError::Truncated {
                expected: HEADER as u64,
                actual: bytes.len() as u64,
            });
        }
        if &bytes[0..5] != MODEL_MAGIC {
            return Err(ModelFormatError::BadMagic);
        }
        if bytes[5] != MODEL_VERSION {
            return Err(ModelFormatError::UnsupportedVersion(bytes[5]));
        }
        let word = |i: usize| -> u32 {
            u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().expect("length 4"))
        };
        let (input, hidden, output, reserved) = (word(0), word(1), word(2), word(3));
        if reserved != 0 {
            return Err(ModelFormatError::ReservedNonZero);
        }
        if input == 0
            || hidden == 0
            || output == 0
            || input > MAX_LAYER_SIZE
            || hidden > MAX_LAYER_SIZE
            || output > MAX_LAYER_SIZE
        {
            return Err(ModelFormatError::DimensionOverflow {
                input,
                hidden,
                output,
            });
        }
        let (input, hidden, output) = (input as u64, hidden as u64, output as u64);
        let params = hidden * input + hidden + output * hidden + output;
        let expected = HEADER as u64 + 8 * params;
        let actual = bytes.len() as u64;
        if actual < expected {
            return Err(ModelFormatError::Truncated { expected, actual });
        }
        if actual > expected {
            return Err(ModelFormatError::TrailingBytes(actual - expected));
        }

        let mut offset = HEADER;
        let mut read_vec = |len: u64| -> Vec<f64> {
            let mut v = Vec::with_capacity(len as usize);
            for _ in 0..len {
                let raw = bytes[offset..offset + 8].try_into().expect("length 8");
                v.push(f64::from_le_bytes(raw));
                offset += 8;
            }
            v
        };
        let w1 = read_vec(hidden * input);
        let b1 = read_vec(hidden);
        let w2 = read_vec(output * hidden);
        let b2 = read_vec(output);

        for (index, v) in w1.iter().chain(&b1).chain(&w2).chain(&b2).enumerate() {
            if !v.is_finite() {
                return Err(ModelFormatError::NonFiniteParameter { index });
            }
        }

        Ok(MlpModel {
            input_size: input as usize,
            hidden_size: hidden as usize,
            output_size: output as usize,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelFormatError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| ModelFormatError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MlpModel, ModelFormatError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| ModelFormatError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        MlpModel::from_bytes(&bytes)
    }
}

/// Stochastic-gradient training settings. Defaults: learning rate 0.05,
/// at most 200 epochs, patience 10, per-sample updates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            max_epochs: 200,
            patience: 10,
            batch_size: 1,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), MlpError> {
        if !(self.learning_rate > 0.0) {
            return Err(MlpError::InvalidConfig("learning rate must be positive".into()));
        }
        if self.max_epochs < 1 {
            return Err(MlpError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if self.patience < 1 {
            return Err(MlpError::InvalidConfig("patience must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(MlpError::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

/// Per-epoch loss curves plus the checkpoint bookkeeping of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_mse: Vec<f64>,
    pub validation_mse: Vec<f64>,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.validation_mse.len()
    }

    pub fn best_validation_mse(&self) -> f64 {
        self.validation_mse[self.best_epoch]
    }
}

/// Trains a copy of `model` by SGD over seed-shuffled epochs, evaluating
/// the validation MSE after every epoch and keeping the parameters of the
/// best validation epoch. Stops at `max_epochs` or after `patience` epochs
/// without validation improvement.
pub fn train(
    model: &MlpModel,
    split: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainReport), MlpError> {
    cfg.validate()?;
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(MlpError::EmptySplit);
    }

    let mut current = model.clone();
    let mut best = current.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs_since_best = 0usize;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..split.train.len()).collect();

    let mut train_curve = Vec::new();
    let mut val_curve = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    let mut hidden = vec![0.0; current.hidden_size];
    let mut output = vec![0.0; current.output_size];
    let mut delta_out = vec![0.0; current.output_size];
    let mut grads = Gradients::zeros(&current);

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.w1.fill(0.0);
            grads.b1.fill(0.0);
            grads.w2.fill(0.0);
            grads.b2.fill(0.0);
            for &index in batch {
                let sample: &PatchSample = &split.train[index];
                loss_sum += current.accumulate(
                    &sample.input,
                    &sample.target,
                    &mut grads,
                    &mut hidden,
                    &mut output,
                    &mut delta_out,
                );
            }
            current.apply_update(&grads, cfg.learning_rate / batch.len() as f64);
        }
        let train_mse = loss_sum / split.train.len() as f64;
        if !train_mse.is_finite() {
            return Err(MlpError::Diverged { epoch });
        }

        let mut val_sum = 0.0;
        for sample in &split.validation {
            val_sum += current.sample_loss(&sample.input, &sample.target)?;
        }
        let val_mse = val_sum / split.validation.len() as f64;
        if !val_mse.is_finite() {
            return Err(MlpError::Diverged { epoch });
        }

        train_curve.push(train_mse);
        val_curve.push(val_mse);

        if val_mse < best_val {
            best_val = val_mse;
            best_epoch = epoch;
            best = current.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                stop_reason = StopReason::Patience;
                break;
            }
        }
    }

    Ok((
        best,
        TrainReport {
            train_mse: train_curve,
            validation_mse: val_curve,
            best_epoch,
            stop_reason,
        },
    ))
}
