//! Independent measurement oracles shared by the integration suites. Nothing
//! here calls into the code paths it is used to check.
#![allow(dead_code)]

use num_complex::{Complex32, Complex64};
use rustfft::FftPlanner;

pub mod gradcheck;

pub const FS: f64 = 6000.0;

pub fn to_c64(x: &[Complex32]) -> Vec<Complex64> {
    x.iter().map(|v| Complex64::new(v.re as f64, v.im as f64)).collect()
}

pub fn power_spectrum(x: &[Complex64]) -> Vec<f64> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|v| v.norm_sqr()).collect()
}

pub fn bin_hz(k: usize, n: usize) -> f64 {
    let k = if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
    k * FS / n as f64
}

pub fn peak_freq(x: &[Complex64]) -> f64 {
    let p = power_spectrum(x);
    let k = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    bin_hz(k, p.len())
}

/// Tone frequencies of an FSK/MFSK signal: per-window FFT peaks over
/// half-symbol Hann windows (zero-padded to 8192), histogrammed, and the `m`
/// strongest clusters refined by their median. Works for any modulation index
/// because each window sees at most one tone transition.
pub fn fsk_tones(x: &[Complex64], baud: f64, m: usize, spacing: f64) -> Vec<f64> {
    let len = ((FS / baud) * 0.5).floor() as usize;
    let nfft = 8192;
    let w: Vec<f64> =
        (0..len).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos()).collect();
    let mut freqs = Vec::new();
    let mut s = 0;
    while s + len <= x.len() {
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for i in 0..len {
            buf[i] = x[s + i] * w[i];
        }
        freqs.push(peak_freq(&buf));
        s += len / 2;
    }
    let bw = spacing / 4.0;
    let lo = freqs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = freqs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let nb = ((hi - lo) / bw) as usize + 1;
    let mut hist = vec![0usize; nb];
    for f in &freqs {
        hist[((f - lo) / bw) as usize] += 1;
    }
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|&a, &b| hist[b].cmp(&hist[a]));
    let mut centers: Vec<f64> = Vec::new();
    for b in order {
        let c = lo + (b as f64 + 0.5) * bw;
        if centers.iter().all(|q| (q - c).abs() > spacing * 0.6) {
            centers.push(c);
        }
        if centers.len() == m {
            break;
        }
    }
    let mut tones: Vec<f64> = centers
        .iter()
        .filter_map(|&c| {
            let mut v: Vec<f64> = freqs.iter().cloned().filter(|f| (f - c).abs() <= spacing * 0.4).collect();
            v.sort_by(|a, b| a.total_cmp(b));
            v.get(v.len() / 2).copied()
        })
        .collect();
    tones.sort_by(|a, b| a.total_cmp(b));
    tones
}

/// Mean spacing of sorted tones.
pub fn mean_spacing(tones: &[f64]) -> f64 {
    (tones[tones.len() - 1] - tones[0]) / (tones.len() - 1) as f64
}

/// Symbol rate from transition event times (in samples): the shortest gap
/// seeds the period, every gap is rounded to a whole number of periods, and
/// the total span is divided by the total period count.
pub fn rate_from_events(events: &[f64]) -> f64 {
    let gaps: Vec<f64> = events.windows(2).map(|w| w[1] - w[0]).collect();
    let t0 = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let periods: f64 = gaps.iter().map(|g| (g / t0).round()).sum();
    let span: f64 = gaps.iter().sum();
    FS / (span / periods)
}

/// PSK transitions: runs where the sample-to-sample change exceeds 20% of
/// its maximum; each run contributes its argmax as the event time.
pub fn psk_transition_events(x: &[Complex64]) -> Vec<f64> {
    let d: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let thresh = 0.2 * d.iter().cloned().fold(0.0, f64::max);
    let mut events = Vec::new();
    let mut n = 0;
    while n < d.len() {
        if d[n] > thresh {
            let start = n;
            while n < d.len() && d[n] > thresh {
                n += 1;
            }
            let best = (start..n).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
            events.push(best as f64 + 0.5);
        } else {
            n += 1;
        }
    }
    events
}

/// FSK transitions: jumps in instantaneous frequency larger than half the
/// tone spacing.
pub fn fsk_transition_events(x: &[Complex64], spacing: f64) -> Vec<f64> {
    let inst: Vec<f64> = x.windows(2).map(|w| (w[1] * w[0].conj()).arg() * FS / (2.0 * std::f64::consts::PI)).collect();
    inst.windows(2)
        .enumerate()
        .filter(|(_, w)| (w[1] - w[0]).abs() > spacing / 2.0)
        .map(|(i, _)| i as f64 + 1.0)
        .collect()
}

/// Fraction of DFT energy at strictly negative frequencies.
pub fn negative_energy_fraction(x: &[Complex64]) -> f64 {
    let p = power_spectrum(x);
    let n = p.len();
    let total: f64 = p.iter().sum();
    let neg: f64 = (0..n).filter(|&k| bin_hz(k, n) < 0.0).map(|k| p[k]).sum();
    neg / total
}

/// Lengths of constant runs of a boolean sequence.
pub fn run_lengths(bits: &[bool]) -> Vec<(bool, usize)> {
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &b in bits {
        match runs.last_mut() {
            Some((v, n)) if *v == b => *n += 1,
            _ => runs.push((b, 1)),
        }
    }
    runs
}
