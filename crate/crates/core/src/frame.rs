//! The complex baseband record shared by every stage of the pipeline.

use crate::error::{ensure, Result};
use num_complex::Complex32;

pub const FRAME_LEN: usize = 2048;
pub const SAMPLE_RATE_HZ: f64 = 6000.0;
pub const NUM_CLASSES: usize = 18;

/// Height and width of the 2-channel image each frame is folded into before
/// it reaches a convolutional network (I and Q, each row-major).
pub const GRID_H: usize = 32;
pub const GRID_W: usize = 64;

pub fn frame_duration_s() -> f64 {
    FRAME_LEN as f64 / SAMPLE_RATE_HZ
}

/// One labeled I/Q record at 6 kHz.
///
/// `snr_db == None` marks a clean (unimpaired) frame.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    pub samples: Vec<Complex32>,
    pub class_id: u8,
    pub snr_db: Option<f32>,
    pub seed: u64,
}

impl IqFrame {
    pub fn new(samples: Vec<Complex32>, class_id: u8, seed: u64) -> Result<Self> {
        ensure!(samples.len() == FRAME_LEN, "frame must hold {FRAME_LEN} samples, got {}", samples.len());
        ensure!((class_id as usize) < NUM_CLASSES, "class id {class_id} out of range");
        Ok(Self { samples, class_id, snr_db: None, seed })
    }

    pub fn zeros(class_id: u8) -> Self {
        Self { samples: vec![Complex32::new(0.0, 0.0); FRAME_LEN], class_id, snr_db: None, seed: 0 }
    }

    pub fn sample_rate_hz(&self) -> f64 {
        SAMPLE_RATE_HZ
    }

    /// Mean of |s[n]|², accumulated in f64.
    pub fn average_power(&self) -> f64 {
        average_power(&self.samples)
    }

    /// Same label and tags, new samples.
    pub fn with_samples(&self, samples: Vec<Complex32>) -> Self {
        Self { samples, class_id: self.class_id, snr_db: self.snr_db, seed: self.seed }
    }

    /// Scaled copy with unit average power. An all-zero frame is returned as is.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        normalize_power(&mut out.samples);
        out
    }

    /// Folds I and Q row-major into a `[2, 32, 64]` channel-first buffer.
    pub fn to_grid(&self) -> Vec<f32> {
        let mut out = vec![0.0; 2 * FRAME_LEN];
        let (i_part, q_part) = out.split_at_mut(FRAME_LEN);
        for (n, s) in self.samples.iter().enumerate() {
            i_part[n] = s.re;
            q_part[n] = s.im;
        }
        out
    }

    /// Inverse of [`IqFrame::to_grid`].
    pub fn from_grid(grid: &[f32], class_id: u8, snr_db: Option<f32>, seed: u64) -> Result<Self> {
        ensure!(grid.len() == 2 * FRAME_LEN, "grid must hold 2x{GRID_H}x{GRID_W} values");
        let samples = (0..FRAME_LEN).map(|n| Complex32::new(grid[n], grid[FRAME_LEN + n])).collect();
        Ok(Self { samples, class_id, snr_db, seed })
    }
}

pub fn average_power(samples: &[Complex32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr() as f64).sum::<f64>() / samples.len() as f64
}

pub fn normalize_power(samples: &mut [Complex32]) {
    let p = average_power(samples);
    if p > 0.0 {
        let g = (1.0 / p).sqrt() as f32;
        samples.iter_mut().for_each(|s| *s *= g);
    }
}

/// Converts an f64 baseband buffer to a unit-power f32 frame buffer.
pub(crate) fn to_unit_power_f32(samples: &[num_complex::Complex64]) -> Vec<Complex32> {
    let p = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len().max(1) as f64;
    let g = if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 };
    samples.iter().map(|s| Complex32::new((s.re * g) as f32, (s.im * g) as f32)).collect()
}
