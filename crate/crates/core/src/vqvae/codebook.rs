use crate::error::{ensure, Error, Result};
use crate::rng::child;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use std::io::{Read, Write};

/// K×D embedding table tracked by exponential moving averages. All state is
/// f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    k: usize,
    d: usize,
    pub embeddings: Vec<f64>,
    pub ema_counts: Vec<f64>,
    pub ema_sums: Vec<f64>,
    pub decay: f64,
    pub smoothing: f64,
}

/// Nearest-code assignment of a batch of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub indices: Vec<usize>,
    pub perplexity: f64,
}

impl Codebook {
    /// Starts from explicit embeddings with unit counts, so the first EMA
    /// update blends against them.
    pub fn from_embeddings(k: usize, d: usize, embeddings: Vec<f64>, decay: f64, smoothing: f64) -> Result<Self> {
        ensure!(k >= 2 && d >= 1, "codebook needs K ≥ 2 and D ≥ 1, got {k}×{d}");
        ensure!(embeddings.len() == k * d, "{} embedding values for {k}×{d}", embeddings.len());
        ensure!((0.0..1.0).contains(&decay), "decay {decay} outside [0, 1)");
        ensure!(smoothing >= 0.0, "negative smoothing {smoothing}");
        Ok(Self { k, d, ema_sums: embeddings.clone(), embeddings, ema_counts: vec![1.0; k], decay, smoothing })
    }

    /// Draws K of `vectors` (rows of D) with replacement when there are fewer
    /// than K, and adds Gaussian jitter of standard deviation `jitter`.
    pub fn init_from_vectors(
        vectors: &[f64],
        k: usize,
        d: usize,
        decay: f64,
        smoothing: f64,
        jitter: f64,
        seed: u64,
    ) -> Result<Self> {
        ensure!(
            d >= 1 && !vectors.is_empty() && vectors.len() % d == 0,
            "cannot draw {d}-dim codes from {} values",
            vectors.len()
        );
        let n = vectors.len() / d;
        let mut rng = child(seed, 0);
        let noise = Normal::new(0.0, jitter.max(0.0)).map_err(|e| Error::Contract(e.to_string()))?;
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut e = Vec::with_capacity(k * d);
        for j in 0..k {
            let src = if j < n { order[j] } else { rng.random_range(0..n) };
            e.extend(vectors[src * d..(src + 1) * d].iter().map(|v| v + noise.sample(&mut rng)));
        }
        Self::from_embeddings(k, d, e, decay, smoothing)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn embedding(&self, i: usize) -> &[f64] {
        &self.embeddings[i * self.d..(i + 1) * self.d]
    }

    /// Index and squared distance of the nearest code; ties go to the lowest
    /// index.
    pub fn nearest(&self, v: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, e) in self.embeddings.chunks_exact(self.d).enumerate() {
            let dist: f64 = e.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best.1 {
                best = (i, dist);
            }
        }
        best
    }

    /// Assigns each row of `vectors` (n×D) to its nearest code.
    pub fn assign(&self, vectors: &[f64]) -> Result<Assignment> {
        ensure!(vectors.len() % self.d == 0, "{} values are not rows of {}", vectors.len(), self.d);
        let indices: Vec<usize> = vectors.chunks_exact(self.d).map(|v| self.nearest(v).0).collect();
        let perplexity = perplexity(&indices, self.k)?;
        Ok(Assignment { indices, perplexity })
    }

    /// One EMA step from a batch of vectors and their assignments.
    pub fn ema_update(&mut self, vectors: &[f64], indices: &[usize]) -> Result<()> {
        let d = self.d;
        ensure!(vectors.len() == indices.len() * d, "{} vectors for {} assignments", vectors.len() / d, indices.len());
        let mut counts = vec![0.0; self.k];
        let mut sums = vec![0.0; self.k * d];
        for (v, &i) in vectors.chunks_exact(d).zip(indices) {
            ensure!(i < self.k, "assignment {i} outside codebook of {}", self.k);
            counts[i] += 1.0;
            sums[i * d..(i + 1) * d].iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
        let g = self.decay;
        for (n, c) in self.ema_counts.iter_mut().zip(&counts) {
            *n = g * *n + (1.0 - g) * c;
        }
        for (m, s) in self.ema_sums.iter_mut().zip(&sums) {
            *m = g * *m + (1.0 - g) * s;
        }
        let total: f64 = self.ema_counts.iter().sum();
        let denom = total + self.k as f64 * self.smoothing;
        for i in 0..self.k {
            let smoothed = (self.ema_counts[i] + self.smoothing) / denom * total;
            ensure!(smoothed > 0.0, "code {i} has no mass; raise the smoothing");
            for j in 0..d {
                self.embeddings[i * d + j] = self.ema_sums[i * d + j] / smoothed;
            }
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.k as u64).to_le_bytes())?;
        w.write_all(&(self.d as u64).to_le_bytes())?;
        w.write_all(&self.decay.to_le_bytes())?;
        w.write_all(&self.smoothing.to_le_bytes())?;
        for v in self.embeddings.iter().chain(&self.ema_counts).chain(&self.ema_sums) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut b8 = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b8).map_err(|e| Error::Format(format!("truncated codebook: {e}")))?;
            Ok(b8)
        };
        let k = u64::from_le_bytes(next(r)?) as usize;
        let d = u64::from_le_bytes(next(r)?) as usize;
        if k < 2 || d == 0 || k.saturating_mul(d) > 1 << 24 {
            return Err(Error::Format(format!("implausible codebook size {k}×{d}")));
        }
        let decay = f64::from_le_bytes(next(r)?);
        let smoothing = f64::from_le_bytes(next(r)?);
        let mut vals =
            |n: usize, r: &mut R| -> Result<Vec<f64>> { (0..n).map(|_| Ok(f64::from_le_bytes(next(r)?))).collect() };
        let embeddings = vals(k * d, r)?;
        let ema_counts = vals(k, r)?;
        let ema_sums = vals(k * d, r)?;
        Ok(Self { k, d, embeddings, ema_counts, ema_sums, decay, smoothing })
    }
}

/// exp of the entropy of the usage histogram of `indices` over `k` codes.
pub fn perplexity(indices: &[usize], k: usize) -> Result<f64> {
    ensure!(!indices.is_empty(), "perplexity of an empty batch");
    let mut hist = vec![0usize; k];
    for &i in indices {
        ensure!(i < k, "index {i} outside {k} codes");
        hist[i] += 1;
    }
    let n = indices.len() as f64;
    let h: f64 = hist.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum();
    Ok(h.exp())
}
