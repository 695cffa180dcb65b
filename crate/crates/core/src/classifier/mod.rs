//! Residual-stack waveform classifier.
//!
//! Each stack is a 1×1 entry convolution followed by two residual units and a
//! max-pool, so five convolutions per stack. Pooling halves every spatial
//! dimension that is still at least 2. Two ReLU dense layers and an 18-way
//! output layer follow the last stack.

mod metrics;

pub use metrics::{evaluate, evaluate_predictions, MetricsReport, Predictor, SnrBucket, REFERENCE_PARAMETER_COUNT};

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::{sample_augmentation, AugmentPolicy};
use crate::error::{ensure, Error, Result};
use crate::frame::{IqFrame, GRID_H, GRID_W, NUM_CLASSES};
use crate::nn::{
    self, softmax_cross_entropy, Adam, Conv2d, ConvGeom, Dense, Flatten, Layer, MaxPool2d, Param, Relu, ResidualBlock,
    Sequential, Tensor,
};
use crate::rng::{child, mix};
use crate::vqvae::frames_to_tensor;

/// Frames per inference chunk.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub stacks: usize,
    /// Channels inside every stack.
    pub width: usize,
    pub dense_width: usize,
    pub input_shape: [usize; 3],
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { stacks: 8, width: 32, dense_width: 128, input_shape: [2, GRID_H, GRID_W] }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.stacks >= 1, "need at least one residual stack");
        ensure!(self.width >= 1 && self.dense_width >= 1, "layer widths must be positive");
        ensure!(self.input_shape.iter().all(|&d| d >= 1), "empty input shape {:?}", self.input_shape);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Online augmentation, drawn afresh for every frame in every epoch.
    pub augmentation: Option<AugmentPolicy>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, batch_size: 32, learning_rate: 1e-4, augmentation: None, seed: 0 }
    }
}

/// Per-epoch training curve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean cross-entropy over the epoch's batches.
    pub epoch_losses: Vec<f64>,
    /// Fraction of training frames classified correctly during the epoch.
    pub epoch_accuracy: Vec<f64>,
}

pub struct Classifier {
    pub config: ClassifierConfig,
    pub net: Sequential,
}

impl Classifier {
    /// Deterministic initialization; layer `i` draws from stream `i` of `seed`.
    pub fn new(config: ClassifierConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut stream = 0u64;
        let mut r = || {
            stream += 1;
            child(seed, stream - 1)
        };
        let one = ConvGeom::new(1, 1, 0);
        let [mut c, mut h, mut w] = config.input_shape;
        let mut net = Sequential::new();
        for _ in 0..config.stacks {
            net.push(Conv2d::new(c, config.width, one, &mut r())?);
            net.push(ResidualBlock::new(config.width, &mut r())?);
            net.push(ResidualBlock::new(config.width, &mut r())?);
            let (ph, pw) = (pool_window(h), pool_window(w));
            if ph * pw > 1 {
                net.push(MaxPool2d::new(ph, pw)?);
            }
            (c, h, w) = (config.width, h / ph, w / pw);
        }
        net.push(Flatten::new());
        net.push(Dense::new(c * h * w, config.dense_width, &mut r()));
        net.push(Relu::new());
        net.push(Dense::new(config.dense_width, config.dense_width, &mut r()));
        net.push(Relu::new());
        net.push(Dense::new(config.dense_width, NUM_CLASSES, &mut r()));
        Ok(Self { config, net })
    }

    pub fn params(&self) -> Vec<&Param> {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }

    pub fn param_count(&self) -> usize {
        nn::param_count(&self.params())
    }

    pub fn macs_per_sample(&self) -> u64 {
        self.net.macs(&self.config.input_shape)
    }

    /// Logits `[N, 18]` for a batch already in the network layout.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        ensure!(
            x.shape().len() == 4 && x.shape()[1..] == self.config.input_shape,
            "classifier expects N×{:?} input, got {:?}",
            self.config.input_shape,
            x.shape()
        );
        self.net.forward(x)
    }

    /// Logits for frames, each scaled to unit average power first.
    pub fn logits(&self, frames: &[IqFrame]) -> Result<Tensor> {
        ensure!(!frames.is_empty(), "no frames to classify");
        let mut data = Vec::with_capacity(frames.len() * NUM_CLASSES);
        for chunk in frames.chunks(CHUNK) {
            data.extend_from_slice(self.forward(&frames_to_tensor(chunk, true)?)?.data());
        }
        Tensor::new(vec![frames.len(), NUM_CLASSES], data)
    }

    /// Cross-entropy training over `real ∪ synth`. Each epoch visits every
    /// frame once in an order drawn from the seed; with augmentation on,
    /// every visit gets its own draw.
    pub fn train(&mut self, real: &[IqFrame], synth: &[IqFrame], cfg: &TrainConfig) -> Result<TrainReport> {
        ensure!(!real.is_empty(), "empty training set");
        ensure!(cfg.batch_size >= 1, "batch size must be positive");
        if let Some(p) = &cfg.augmentation {
            p.validate()?;
        }
        let pool: Vec<&IqFrame> = real.iter().chain(synth).collect();
        let mut opt = Adam::new(cfg.learning_rate);
        let mut report = TrainReport::default();
        for epoch in 0..cfg.epochs as u64 {
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.shuffle(&mut child(cfg.seed, epoch));
            let aug_seed = mix(mix(cfg.seed, u64::MAX), epoch);
            let (mut loss_sum, mut batches, mut correct) = (0.0, 0usize, 0usize);
            for idx in order.chunks(cfg.batch_size) {
                let mut batch = Vec::with_capacity(idx.len());
                for &i in idx {
                    batch.push(match &cfg.augmentation {
                        Some(p) => sample_augmentation(pool[i], p, mix(aug_seed, i as u64))?,
                        None => pool[i].clone(),
                    });
                }
                let labels: Vec<usize> = batch.iter().map(|f| f.class_id as usize).collect();
                let x = frames_to_tensor(&batch, true)?;
                nn::zero_grads(&mut self.net);
                let logits = self.net.forward_train(&x)?;
                let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
                if !loss.is_finite() {
                    return Err(Error::Training(format!("non-finite classifier loss at epoch {epoch}")));
                }
                self.net.backward(&grad)?;
                opt.step(&mut self.net.params_mut())?;
                correct += argmax_rows(&logits).iter().zip(&labels).filter(|(p, l)| **p as usize == **l).count();
                loss_sum += loss;
                batches += 1;
            }
            report.epoch_losses.push(loss_sum / batches as f64);
            report.epoch_accuracy.push(correct as f64 / pool.len() as f64);
        }
        Ok(report)
    }

    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        nn::write_tensors(w, &self.params().iter().map(|p| &p.value).collect::<Vec<_>>())
    }

    pub fn load<R: Read>(config: ClassifierConfig, r: &mut R) -> Result<Self> {
        let mut m = Self::new(config, 0)?;
        let tensors = nn::read_tensors(r)?;
        nn::load_params(&mut m.params_mut(), &tensors)?;
        Ok(m)
    }
}

impl Predictor for Classifier {
    fn predict(&self, frames: &[IqFrame]) -> Result<Vec<u8>> {
        Ok(argmax_rows(&self.logits(frames)?))
    }

    fn parameter_count(&self) -> usize {
        self.param_count()
    }

    fn macs_per_sample(&self) -> u64 {
        Classifier::macs_per_sample(self)
    }
}

fn pool_window(dim: usize) -> usize {
    if dim >= 2 {
        2
    } else {
        1
    }
}

/// Row-wise argmax of `[N, K]` logits; ties go to the lower class.
pub fn argmax_rows(logits: &Tensor) -> Vec<u8> {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best as u8
        })
        .collect()
}
