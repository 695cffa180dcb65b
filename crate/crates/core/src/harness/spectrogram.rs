use std::path::Path;

use num_complex::Complex64;

use crate::dsp::{fft, hann};
use crate::error::{ensure, Result};
use crate::frame::{IqFrame, SAMPLE_RATE_HZ};

/// 8-bit grayscale image, row-major, row 0 on top.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Spectrogram {
    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Binary PGM (`P5`).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm())?;
        Ok(())
    }
}

/// Image row holding frequency `hz` for a `window`-point transform. Rows run
/// from the highest frequency (row 0) down to −fs/2 (last row).
pub fn row_of_freq(hz: f64, window: usize) -> Option<usize> {
    let k = (hz * window as f64 / SAMPLE_RATE_HZ).round() as i64;
    let half = (window / 2) as i64;
    let row = half - 1 - k;
    (0..window as i64).contains(&row).then_some(row as usize)
}

/// Hann-windowed short-time FFT magnitude in dB, mapped linearly from its
/// minimum to 0 and its maximum to 255. One column per hop; a flat input
/// gives a uniform zero image.
pub fn render_spectrogram(frame: &IqFrame, window: usize, hop: usize) -> Result<Spectrogram> {
    let n = frame.samples.len();
    ensure!(window >= 2 && window <= n, "window {window} must lie in [2, {n}]");
    ensure!(hop >= 1, "hop must be positive");
    let cols = (n - window) / hop + 1;
    let w = hann(window);
    let mut db = vec![0.0f64; window * cols];
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    for c in 0..cols {
        for (i, b) in buf.iter_mut().enumerate() {
            let s = frame.samples[c * hop + i];
            *b = Complex64::new(s.re as f64, s.im as f64) * w[i];
        }
        fft(&mut buf);
        for (k, v) in buf.iter().enumerate() {
            // bin k sits at signed index k or k - window
            let signed = if k >= window / 2 { k as i64 - window as i64 } else { k as i64 };
            let row = (window / 2) as i64 - 1 - signed;
            db[row as usize * cols + c] = 20.0 * (v.norm() + 1e-12).log10();
        }
    }
    let lo = db.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let pixels = db.iter().map(|v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 }).collect();
    Ok(Spectrogram { width: cols, height: window, pixels })
}
