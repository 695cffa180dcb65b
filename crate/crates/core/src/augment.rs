//! The five online training transforms: DC offset, circular time shift,
//! amplitude scale, zero-masking, and low-level AWGN.

use num_complex::Complex32;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::frame::{IqFrame, FRAME_LEN};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub dc_range: (f32, f32),
    pub time_shift_range: (i32, i32),
    pub scale_range: (f32, f32),
    pub max_mask_len: usize,
    pub awgn_variance: f32,
    pub per_transform_probability: f64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            dc_range: (0.0, 1e-4),
            time_shift_range: (-40, 40),
            scale_range: (0.8, 1.2),
            max_mask_len: 25,
            awgn_variance: 1e-5,
            per_transform_probability: 0.5,
        }
    }
}

impl AugmentPolicy {
    pub fn validate(&self) -> Result<()> {
        ensure!((0.0..=1.0).contains(&self.per_transform_probability), "transform probability must lie in [0, 1]");
        ensure!(self.dc_range.0 <= self.dc_range.1, "empty DC range");
        ensure!(self.time_shift_range.0 <= self.time_shift_range.1, "empty shift range");
        ensure!(self.scale_range.0 <= self.scale_range.1, "empty scale range");
        ensure!(self.max_mask_len <= FRAME_LEN, "mask longer than a frame");
        ensure!(self.awgn_variance >= 0.0, "negative noise variance");
        Ok(())
    }
}

/// The parameters one policy draw selected; `None` means the transform was
/// skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentDraw {
    pub dc: Option<f32>,
    pub shift: Option<i32>,
    pub scale: Option<f32>,
    /// (start, len)
    pub mask: Option<(usize, usize)>,
    pub awgn_seed: Option<u64>,
}

pub fn apply_dc(frame: &IqFrame, c: f32) -> IqFrame {
    let d = Complex32::new(c, c);
    frame.with_samples(frame.samples.iter().map(|s| s + d).collect())
}

/// Circular shift: sample n moves to (n + s) mod len.
pub fn apply_time_shift(frame: &IqFrame, s: i32) -> IqFrame {
    let mut out = frame.samples.clone();
    let len = out.len() as i64;
    if len > 0 {
        out.rotate_right((s as i64).rem_euclid(len) as usize);
    }
    frame.with_samples(out)
}

pub fn apply_scale(frame: &IqFrame, a: f32) -> IqFrame {
    frame.with_samples(frame.samples.iter().map(|s| s * a).collect())
}

pub fn apply_zero_mask(frame: &IqFrame, start: usize, len: usize) -> Result<IqFrame> {
    ensure!(start + len <= frame.samples.len(), "mask window {start}..{} exceeds frame", start + len);
    let mut out = frame.samples.clone();
    out[start..start + len].fill(Complex32::new(0.0, 0.0));
    Ok(frame.with_samples(out))
}

/// Zero-mean complex Gaussian noise of total variance `variance`.
pub fn apply_awgn_aug(frame: &IqFrame, variance: f32, seed: u64) -> IqFrame {
    let normal = Normal::new(0.0f32, (variance / 2.0).sqrt()).expect("valid sigma");
    let mut r = rng::rng(seed);
    frame.with_samples(
        frame.samples.iter().map(|s| s + Complex32::new(normal.sample(&mut r), normal.sample(&mut r))).collect(),
    )
}

/// Decides which transforms fire and with what parameters.
pub fn draw(policy: &AugmentPolicy, len: usize, seed: u64) -> AugmentDraw {
    let mut r = rng::rng(seed);
    let p = policy.per_transform_probability;
    let fire = |r: &mut rng::Rng| r.random_bool(p);
    let dc = fire(&mut r).then(|| r.random_range(policy.dc_range.0..=policy.dc_range.1));
    let shift = fire(&mut r).then(|| r.random_range(policy.time_shift_range.0..=policy.time_shift_range.1));
    let scale = fire(&mut r).then(|| r.random_range(policy.scale_range.0..=policy.scale_range.1));
    let mask = fire(&mut r).then(|| {
        let n = r.random_range(0..=policy.max_mask_len.min(len));
        (r.random_range(0..=len - n), n)
    });
    let awgn_seed = fire(&mut r).then(|| r.random());
    AugmentDraw { dc, shift, scale, mask, awgn_seed }
}

pub fn apply_draw(frame: &IqFrame, d: &AugmentDraw, policy: &AugmentPolicy) -> Result<IqFrame> {
    let mut out = frame.clone();
    if let Some(c) = d.dc {
        out = apply_dc(&out, c);
    }
    if let Some(s) = d.shift {
        out = apply_time_shift(&out, s);
    }
    if let Some(a) = d.scale {
        out = apply_scale(&out, a);
    }
    if let Some((start, len)) = d.mask {
        out = apply_zero_mask(&out, start, len)?;
    }
    if let Some(seed) = d.awgn_seed {
        out = apply_awgn_aug(&out, policy.awgn_variance, seed);
    }
    Ok(out)
}

/// Each transform fires independently with the policy probability, in the
/// order DC → shift → scale → mask → AWGN. Labels and tags are preserved.
pub fn sample_augmentation(frame: &IqFrame, policy: &AugmentPolicy, seed: u64) -> Result<IqFrame> {
    policy.validate()?;
    let d = draw(policy, frame.samples.len(), seed);
    apply_draw(frame, &d, policy)
}
