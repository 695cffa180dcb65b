//! Thin FFT helpers over `rustfft`.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward DFT, unnormalized.
pub fn fft(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Inverse DFT scaled by 1/n.
pub fn ifft(buf: &mut [Complex64]) {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= s);
}

/// Frequency in Hz of DFT bin `k` for an `n`-point transform, in (-fs/2, fs/2].
pub fn bin_freq(k: usize, n: usize, fs: f64) -> f64 {
    let k = if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
    k * fs / n as f64
}

/// Power spectrum |X[k]|² of a complex sequence.
pub fn power_spectrum(x: &[Complex64]) -> Vec<f64> {
    let mut buf = x.to_vec();
    fft(&mut buf);
    buf.iter().map(|v| v.norm_sqr()).collect()
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos()).collect()
}
