//! Vector-quantized autoencoder over the 2×32×64 frame layout, with an EMA
//! codebook and the latent-noise samplers used to make labeled synthetic
//! frames.

mod codebook;

pub use codebook::{perplexity, Assignment, Codebook};

use crate::error::{ensure, Error, Result};
use crate::frame::{IqFrame, GRID_H, GRID_W};
use crate::nn::{
    self, mse, Adam, Conv2d, ConvGeom, ConvTranspose2d, Layer, Param, Relu, ResidualBlock, Sequential, Tensor,
};
use crate::rng::{child, mix};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

const CODEBOOK_MAGIC: &[u8; 4] = b"CBK1";
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqVaeConfig {
    /// K.
    pub codebook_size: usize,
    /// D.
    pub embedding_dim: usize,
    /// Commitment weight.
    pub beta: f64,
    /// EMA decay is `1 - perplexity_weight`.
    pub perplexity_weight: f64,
    /// Laplace smoothing of the EMA counts.
    pub smoothing: f64,
    /// Std-dev of the jitter added to first-batch latents at codebook init.
    pub init_jitter: f64,
    /// Widths of the three stride-2 stages.
    pub channels: [usize; 3],
    pub input_shape: [usize; 3],
}

impl Default for VqVaeConfig {
    fn default() -> Self {
        Self {
            codebook_size: 128,
            embedding_dim: 64,
            beta: 0.25,
            perplexity_weight: 0.001,
            smoothing: 1e-5,
            init_jitter: 0.01,
            channels: [32, 64, 64],
            input_shape: [2, GRID_H, GRID_W],
        }
    }
}

impl VqVaeConfig {
    pub fn decay(&self) -> f64 {
        1.0 - self.perplexity_weight
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.perplexity_weight > 0.0 && self.perplexity_weight < 1.0,
            "perplexity weight {} outside (0, 1)",
            self.perplexity_weight
        );
        ensure!(self.beta >= 0.0, "negative commitment weight {}", self.beta);
        ensure!(
            self.codebook_size >= 2 && self.embedding_dim >= 1,
            "codebook {}×{}",
            self.codebook_size,
            self.embedding_dim
        );
        ensure!(self.channels.iter().all(|&c| c > 0), "zero-width stage in {:?}", self.channels);
        let [_, h, w] = self.input_shape;
        ensure!(h % 8 == 0 && w % 8 == 0 && h > 0 && w > 0, "input {h}×{w} must divide by 8");
        Ok(())
    }
}

/// Loss terms of one batch. `total = reconstruction + beta * commitment`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub reconstruction: f64,
    pub commitment: f64,
    pub total: f64,
}

/// Mean squared reconstruction error plus `beta` times the mean squared
/// distance between encoder outputs and their codes, all in f64.
pub fn vqvae_loss(x: &Tensor, x_hat: &Tensor, z_e: &Tensor, z_q: &Tensor, beta: f64) -> Result<LossTerms> {
    ensure!(x.shape() == x_hat.shape() && z_e.shape() == z_q.shape(), "loss operand shapes disagree");
    let mean_sq = |a: &[f32], b: &[f32]| -> f64 {
        a.iter().zip(b).map(|(p, q)| (*p as f64 - *q as f64).powi(2)).sum::<f64>() / a.len().max(1) as f64
    };
    let reconstruction = mean_sq(x.data(), x_hat.data());
    let commitment = mean_sq(z_e.data(), z_q.data());
    Ok(LossTerms { reconstruction, commitment, total: reconstruction + beta * commitment })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub loss: LossTerms,
    pub perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Seeds the per-epoch visiting order.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 32, learning_rate: 1e-3, seed: 0 }
    }
}

/// Training statistics over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// Frame-weighted mean of the batch reconstruction MSEs.
    pub reconstruction: f64,
    pub commitment: f64,
    pub perplexity_min: f64,
    pub perplexity_max: f64,
}

/// Everything one forward/backward pass produced, for inspection.
#[derive(Debug, Clone)]
pub struct Pass {
    pub stats: StepStats,
    pub z_e: Tensor,
    pub z_q: Tensor,
    pub indices: Vec<usize>,
    /// Reconstruction gradient at the decoder input.
    pub grad_z_q: Tensor,
    /// Reconstruction part of the gradient handed to the encoder output.
    pub grad_z_e_recon: Tensor,
}

/// Synthetic frames and the code indices each one was decoded from.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub frames: Vec<IqFrame>,
    pub indices: Vec<Vec<usize>>,
}

/// `[N, D, H, W]` latents as rows of D values ordered by (n, y, x).
pub fn to_vectors(z: &Tensor) -> Vec<f64> {
    let s = z.shape();
    let (n, d, plane) = (s[0], s[1], s[2] * s[3]);
    let mut out = Vec::with_capacity(z.len());
    for i in 0..n {
        let item = z.item(i);
        for p in 0..plane {
            out.extend((0..d).map(|c| item[c * plane + p] as f64));
        }
    }
    out
}

/// Inverse of [`to_vectors`].
pub fn from_vectors(v: &[f64], shape: &[usize]) -> Result<Tensor> {
    ensure!(shape.len() == 4 && v.len() == shape.iter().product::<usize>(), "{} values for latent {shape:?}", v.len());
    let (n, d, plane) = (shape[0], shape[1], shape[2] * shape[3]);
    let mut t = Tensor::zeros(shape);
    let data = t.data_mut();
    for i in 0..n {
        for p in 0..plane {
            for c in 0..d {
                data[(i * d + c) * plane + p] = v[(i * plane + p) * d + c] as f32;
            }
        }
    }
    Ok(t)
}

/// Stacks frames into `[N, 2, 32, 64]`.
pub fn frames_to_tensor(frames: &[IqFrame], normalize: bool) -> Result<Tensor> {
    let grids: Vec<Vec<f32>> =
        frames.iter().map(|f| if normalize { f.normalized().to_grid() } else { f.to_grid() }).collect();
    let refs: Vec<&[f32]> = grids.iter().map(Vec::as_slice).collect();
    Tensor::stack(&refs, &[2, GRID_H, GRID_W])
}

pub struct VqVae {
    pub config: VqVaeConfig,
    pub encoder: Sequential,
    pub decoder: Sequential,
    pub codebook: Option<Codebook>,
    seed: u64,
}

impl VqVae {
    /// Fresh model; layer `i` draws its initial weights from stream `i` of
    /// `seed`. The codebook is initialized from the first training batch.
    pub fn new(config: VqVaeConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let [c1, c2, c3] = config.channels;
        let (cin, d) = (config.input_shape[0], config.embedding_dim);
        let down = ConvGeom::new(4, 2, 1);
        let one = ConvGeom::new(1, 1, 0);
        let mut idx = 0u64;
        let mut r = || {
            idx += 1;
            child(seed, idx)
        };

        let mut encoder = Sequential::new();
        encoder.push(Conv2d::new(cin, c1, down, &mut r())?);
        encoder.push(Relu::new());
        encoder.push(Conv2d::new(c1, c2, down, &mut r())?);
        encoder.push(Relu::new());
        encoder.push(Conv2d::new(c2, c3, down, &mut r())?);
        encoder.push(ResidualBlock::new(c3, &mut r())?);
        encoder.push(Conv2d::new(c3, d, one, &mut r())?);

        let mut decoder = Sequential::new();
        decoder.push(Conv2d::new(d, c3, one, &mut r())?);
        decoder.push(ResidualBlock::new(c3, &mut r())?);
        decoder.push(Relu::new());
        decoder.push(ConvTranspose2d::new(c3, c2, down, &mut r())?);
        decoder.push(Relu::new());
        decoder.push(ConvTranspose2d::new(c2, c1, down, &mut r())?);
        decoder.push(Relu::new());
        decoder.push(ConvTranspose2d::new(c1, cin, down, &mut r())?);

        Ok(Self { config, encoder, decoder, codebook: None, seed })
    }

    /// `[D, H', W']` of one latent grid.
    pub fn latent_shape(&self) -> Result<Vec<usize>> {
        self.encoder.out_shape(&self.config.input_shape)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }

    pub fn param_count(&self) -> usize {
        nn::param_count(&self.params())
    }

    pub fn macs_per_sample(&self) -> u64 {
        let latent = self.latent_shape().unwrap_or_default();
        self.encoder.macs(&self.config.input_shape) + self.decoder.macs(&latent)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        ensure!(
            x.shape().len() == 4 && x.shape()[1..] == self.config.input_shape,
            "input {:?} does not match {:?}",
            x.shape(),
            self.config.input_shape
        );
        Ok(())
    }

    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        self.encoder.forward(x)
    }

    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        let want = self.latent_shape()?;
        ensure!(z.shape().len() == 4 && z.shape()[1..] == want[..], "latent {:?} does not match {want:?}", z.shape());
        self.decoder.forward(z)
    }

    fn book(&self) -> Result<&Codebook> {
        self.codebook.as_ref().ok_or_else(|| Error::Contract("codebook not initialized; train first".into()))
    }

    /// Snaps every latent vector to its nearest code.
    pub fn quantize(&self, z_e: &Tensor) -> Result<(Tensor, Assignment)> {
        let book = self.book()?;
        ensure!(
            z_e.shape().len() == 4 && z_e.shape()[1] == book.d(),
            "latent {:?} against D = {}",
            z_e.shape(),
            book.d()
        );
        let a = book.assign(&to_vectors(z_e))?;
        let q: Vec<f64> = a.indices.iter().flat_map(|&i| book.embedding(i).iter().copied()).collect();
        Ok((from_vectors(&q, z_e.shape())?, a))
    }

    /// Forward and backward through the straight-through estimator, leaving
    /// parameter gradients accumulated. Initializes the codebook on first use.
    pub fn accumulate_gradients(&mut self, x: &Tensor) -> Result<Pass> {
        self.check_input(x)?;
        let z_e = self.encoder.forward_train(x)?;
        if self.codebook.is_none() {
            let c = &self.config;
            self.codebook = Some(Codebook::init_from_vectors(
                &to_vectors(&z_e),
                c.codebook_size,
                c.embedding_dim,
                c.decay(),
                c.smoothing,
                c.init_jitter,
                mix(self.seed, 0xC0DE),
            )?);
        }
        let (z_q, a) = self.quantize(&z_e)?;
        let x_hat = self.decoder.forward_train(&z_q)?;
        let loss = vqvae_loss(x, &x_hat, &z_e, &z_q, self.config.beta)?;
        let (_, g_hat) = mse(&x_hat, x)?;
        let grad_z_q = self.decoder.backward(&g_hat)?;
        // Straight-through: the decoder-input gradient is passed unchanged.
        let grad_z_e_recon = grad_z_q.clone();
        let mut g = grad_z_e_recon.clone();
        let scale = 2.0 * self.config.beta / z_e.len() as f64;
        for ((gv, e), q) in g.data_mut().iter_mut().zip(z_e.data()).zip(z_q.data()) {
            *gv += (scale * (*e as f64 - *q as f64)) as f32;
        }
        self.encoder.backward(&g)?;
        Ok(Pass {
            stats: StepStats { loss, perplexity: a.perplexity },
            z_e,
            z_q,
            indices: a.indices,
            grad_z_q,
            grad_z_e_recon,
        })
    }

    /// One optimizer step plus one EMA codebook update.
    pub fn train_step(&mut self, x: &Tensor, opt: &mut Adam) -> Result<StepStats> {
        self.params_mut().into_iter().for_each(Param::zero_grad);
        let pass = self.accumulate_gradients(x)?;
        if !pass.stats.loss.total.is_finite() {
            return Err(Error::Training(format!("non-finite VQ-VAE loss {}", pass.stats.loss.total)));
        }
        opt.step(&mut self.params_mut())?;
        let book = self.codebook.as_mut().expect("initialized by the pass");
        book.ema_update(&to_vectors(&pass.z_e), &pass.indices)?;
        Ok(pass.stats)
    }

    /// Minibatch training over `frames` as given (no power normalization).
    pub fn fit(&mut self, frames: &[IqFrame], cfg: &FitConfig) -> Result<Vec<EpochStats>> {
        self.check_frames(frames)?;
        ensure!(cfg.batch_size >= 1, "batch size must be positive");
        let mut opt = Adam::new(cfg.learning_rate);
        let mut out = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs as u64 {
            let mut order: Vec<usize> = (0..frames.len()).collect();
            order.shuffle(&mut child(cfg.seed, epoch));
            let mut e =
                EpochStats { reconstruction: 0.0, commitment: 0.0, perplexity_min: f64::MAX, perplexity_max: 0.0 };
            for idx in order.chunks(cfg.batch_size) {
                let batch: Vec<IqFrame> = idx.iter().map(|&i| frames[i].clone()).collect();
                let s = self.train_step(&frames_to_tensor(&batch, false)?, &mut opt)?;
                let w = idx.len() as f64 / frames.len() as f64;
                e.reconstruction += w * s.loss.reconstruction;
                e.commitment += w * s.loss.commitment;
                e.perplexity_min = e.perplexity_min.min(s.perplexity);
                e.perplexity_max = e.perplexity_max.max(s.perplexity);
            }
            out.push(e);
        }
        Ok(out)
    }

    /// Mean reconstruction MSE and loss terms over `x`, without training.
    pub fn evaluate(&self, x: &Tensor) -> Result<StepStats> {
        let z_e = self.encode(x)?;
        let (z_q, a) = self.quantize(&z_e)?;
        let x_hat = self.decode(&z_q)?;
        Ok(StepStats { loss: vqvae_loss(x, &x_hat, &z_e, &z_q, self.config.beta)?, perplexity: a.perplexity })
    }

    fn check_frames(&self, frames: &[IqFrame]) -> Result<()> {
        ensure!(self.config.input_shape == [2, GRID_H, GRID_W], "frame samplers need the 2×{GRID_H}×{GRID_W} layout");
        ensure!(!frames.is_empty(), "no frames to sample from");
        Ok(())
    }

    /// Encodes, perturbs each latent coordinate with N(0, sigma2), quantizes
    /// and decodes. Frame `i` uses noise stream `i` of `seed`.
    pub fn sample_latent_noise(&self, frames: &[IqFrame], sigma2: f64, seed: u64) -> Result<Sampled> {
        self.check_frames(frames)?;
        ensure!(sigma2 >= 0.0 && sigma2.is_finite(), "latent noise variance {sigma2} is invalid");
        let noise = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::Contract(e.to_string()))?;
        let mut out = Sampled { frames: Vec::with_capacity(frames.len()), indices: Vec::with_capacity(frames.len()) };
        for (c, chunk) in frames.chunks(CHUNK).enumerate() {
            let mut z = self.encode(&frames_to_tensor(chunk, false)?)?;
            if sigma2 > 0.0 {
                let per = z.len() / chunk.len();
                for (j, item) in z.data_mut().chunks_mut(per).enumerate() {
                    let mut rng = child(seed, (c * CHUNK + j) as u64);
                    item.iter_mut().for_each(|v| *v += noise.sample(&mut rng) as f32);
                }
            }
            let (z_q, a) = self.quantize(&z)?;
            let x_hat = self.decode(&z_q)?;
            let per_code = a.indices.len() / chunk.len();
            for (j, f) in chunk.iter().enumerate() {
                let i = (c * CHUNK + j) as u64;
                out.frames.push(IqFrame::from_grid(x_hat.item(j), f.class_id, f.snr_db, mix(seed, i))?);
                out.indices.push(a.indices[j * per_code..(j + 1) * per_code].to_vec());
            }
        }
        Ok(out)
    }

    /// Plain reconstruction through the codebook.
    pub fn reconstruct(&self, frames: &[IqFrame]) -> Result<Vec<IqFrame>> {
        Ok(self
            .sample_latent_noise(frames, 0.0, 0)?
            .frames
            .into_iter()
            .zip(frames)
            .map(|(mut r, f)| {
                r.seed = f.seed;
                r
            })
            .collect())
    }

    /// Two latent-noise passes, the second applied to the output of the first.
    pub fn sample_double_pass(
        &self,
        frames: &[IqFrame],
        sigma2_a: f64,
        sigma2_b: f64,
        seed: u64,
    ) -> Result<Vec<IqFrame>> {
        let first = self.sample_latent_noise(frames, sigma2_a, mix(seed, 0))?;
        Ok(self.sample_latent_noise(&first.frames, sigma2_b, mix(seed, 1))?.frames)
    }

    /// Mean encoder output over frames of one class, shape `[1, D, H', W']`.
    pub fn class_center_latent(&self, frames: &[IqFrame]) -> Result<Tensor> {
        self.check_frames(frames)?;
        ensure!(frames.iter().all(|f| f.class_id == frames[0].class_id), "class center over mixed classes");
        let shape = self.latent_shape()?;
        let mut acc = vec![0.0f64; shape.iter().product()];
        for chunk in frames.chunks(CHUNK) {
            let z = self.encode(&frames_to_tensor(chunk, false)?)?;
            for j in 0..chunk.len() {
                acc.iter_mut().zip(z.item(j)).for_each(|(a, v)| *a += *v as f64);
            }
        }
        let n = frames.len() as f64;
        Tensor::new([&[1], &shape[..]].concat(), acc.into_iter().map(|v| (v / n) as f32).collect())
    }

    pub fn sample_class_center(&self, frames: &[IqFrame], seed: u64) -> Result<IqFrame> {
        let z = self.class_center_latent(frames)?;
        let (z_q, _) = self.quantize(&z)?;
        IqFrame::from_grid(self.decode(&z_q)?.data(), frames[0].class_id, frames[0].snr_db, seed)
    }

    /// Decodes the quantized point `(1 - lambda) z_a + lambda z_b` between the
    /// latents of two frames of the same class.
    pub fn sample_interpolation(&self, a: &IqFrame, b: &IqFrame, lambda: f64, seed: u64) -> Result<IqFrame> {
        self.check_frames(std::slice::from_ref(a))?;
        ensure!(a.class_id == b.class_id, "interpolation across classes {} and {}", a.class_id, b.class_id);
        let z = self.encode(&frames_to_tensor(&[a.clone(), b.clone()], false)?)?;
        let per = z.len() / 2;
        let za = Tensor::new(z.shape()[1..].to_vec(), z.item(0).to_vec())?;
        let zb = Tensor::new(z.shape()[1..].to_vec(), z.item(1).to_vec())?;
        let zi = interpolate_latent(&za, &zb, lambda)?.reshape(&[1, z.shape()[1], z.shape()[2], z.shape()[3]])?;
        debug_assert_eq!(zi.len(), per);
        let (z_q, _) = self.quantize(&zi)?;
        IqFrame::from_grid(self.decode(&z_q)?.data(), a.class_id, a.snr_db, seed)
    }

    /// NNCK parameters followed by the codebook section.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        nn::write_tensors(w, &self.params().iter().map(|p| &p.value).collect::<Vec<_>>())?;
        w.write_all(CODEBOOK_MAGIC)?;
        self.book()?.write(w)
    }

    pub fn load<R: Read>(config: VqVaeConfig, r: &mut R) -> Result<Self> {
        let mut m = Self::new(config, 0)?;
        let tensors = nn::read_tensors(r)?;
        nn::load_params(&mut m.params_mut(), &tensors)?;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::Format(format!("missing codebook section: {e}")))?;
        if &magic != CODEBOOK_MAGIC {
            return Err(Error::Format("bad codebook section magic".into()));
        }
        let book = Codebook::read(r)?;
        ensure!(
            book.k() == m.config.codebook_size && book.d() == m.config.embedding_dim,
            "codebook {}×{} against config",
            book.k(),
            book.d()
        );
        m.codebook = Some(book);
        Ok(m)
    }
}

/// `(1 - lambda) a + lambda b` for `lambda` in [0, 1].
pub fn interpolate_latent(a: &Tensor, b: &Tensor, lambda: f64) -> Result<Tensor> {
    ensure!((0.0..=1.0).contains(&lambda), "interpolation weight {lambda} outside [0, 1]");
    ensure!(a.shape() == b.shape(), "latents {:?} and {:?}", a.shape(), b.shape());
    let data =
        a.data().iter().zip(b.data()).map(|(x, y)| ((1.0 - lambda) * *x as f64 + lambda * *y as f64) as f32).collect();
    Tensor::new(a.shape().to_vec(), data)
}
