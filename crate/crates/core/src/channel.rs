//! HF channel impairments: two-path Watterson fading, random frequency and
//! phase offset, and AWGN at a target SNR, applied in that order.

use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{ensure, Result};
use crate::frame::{self, IqFrame, FRAME_LEN, SAMPLE_RATE_HZ};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    /// Target SNR; `None` leaves the frame clean.
    pub snr_db: Option<f64>,
    pub watterson_enabled: bool,
    pub path_delay_s: f64,
    /// Two-sided spread (2σ of the Gaussian Doppler spectrum).
    pub doppler_spread_hz: f64,
    /// Expected power of each path.
    pub path_gains: [f64; 2],
    pub offsets_enabled: bool,
    /// Frequency offsets are drawn uniformly from ±this range.
    pub freq_offset_range_hz: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            snr_db: None,
            watterson_enabled: true,
            path_delay_s: 1e-3,
            doppler_spread_hz: 0.5,
            path_gains: [0.5, 0.5],
            offsets_enabled: true,
            freq_offset_range_hz: 50.0,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    /// Every impairment off: `impair` is the identity.
    pub fn clean() -> Self {
        Self { watterson_enabled: false, offsets_enabled: false, ..Self::default() }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = Some(snr_db);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.doppler_spread_hz >= 0.0, "negative Doppler spread");
        ensure!(self.path_delay_s >= 0.0, "negative path delay");
        ensure!(self.path_gains.iter().all(|g| *g >= 0.0), "negative path gain");
        ensure!(self.freq_offset_range_hz >= 0.0, "negative offset range");
        if let Some(s) = self.snr_db {
            ensure!(s.is_finite(), "SNR must be finite");
        }
        Ok(())
    }
}

/// Zero-mean complex Gaussian process with unit expected power and a
/// Gaussian Doppler spectrum of two-sided spread `spread_hz` (σ = spread/2).
///
/// The process is shaped in the frequency domain at a low rate of 32× the
/// spread and linearly interpolated up to `fs`. A zero spread yields a
/// constant Rayleigh draw.
pub fn fading_process(len: usize, spread_hz: f64, fs: f64, seed: u64) -> Vec<Complex64> {
    let mut r = rng::rng(seed);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
    let mut cgauss = || Complex64::new(normal.sample(&mut r), normal.sample(&mut r));
    if spread_hz <= 0.0 {
        return vec![cgauss(); len];
    }
    let sigma = spread_hz / 2.0;
    let fs_low = (32.0 * spread_hz).min(fs);
    let needed = ((len.max(1) - 1) as f64 * fs_low / fs).ceil() as usize + 2;
    let n = needed.next_power_of_two().max(256);

    let mut filt: Vec<f64> = (0..n)
        .map(|k| {
            let f = dsp::bin_freq(k, n, fs_low);
            (-f * f / (4.0 * sigma * sigma)).exp()
        })
        .collect();
    let energy: f64 = filt.iter().map(|h| h * h).sum();
    let g = (n as f64 / energy).sqrt();
    filt.iter_mut().for_each(|h| *h *= g);

    let mut buf: Vec<Complex64> = (0..n).map(|_| cgauss()).collect();
    dsp::fft(&mut buf);
    buf.iter_mut().zip(&filt).for_each(|(v, h)| *v *= h);
    dsp::ifft(&mut buf);

    (0..len)
        .map(|i| {
            let pos = i as f64 * fs_low / fs;
            let j = pos.floor() as usize;
            let frac = pos - j as f64;
            buf[j] * (1.0 - frac) + buf[j + 1] * frac
        })
        .collect()
}

/// g₁(t)·x(t) + g₂(t)·x(t−τ) without renormalization. Samples before the
/// delayed path arrives see only the direct path.
pub fn watterson_raw(samples: &[Complex32], cfg: &ChannelConfig, seed: u64) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let n = samples.len();
    let delay = (cfg.path_delay_s * SAMPLE_RATE_HZ).round() as usize;
    ensure!(delay < n, "path delay of {delay} samples must be shorter than the {n}-sample frame");
    let g1 = fading_process(n, cfg.doppler_spread_hz, SAMPLE_RATE_HZ, rng::mix(seed, 0));
    let g2 = fading_process(n, cfg.doppler_spread_hz, SAMPLE_RATE_HZ, rng::mix(seed, 1));
    let a1 = cfg.path_gains[0].sqrt();
    let a2 = cfg.path_gains[1].sqrt();
    let x = |i: usize| Complex64::new(samples[i].re as f64, samples[i].im as f64);
    Ok((0..n)
        .map(|i| {
            let direct = g1[i] * a1 * x(i);
            if i >= delay && a2 > 0.0 {
                direct + g2[i] * a2 * x(i - delay)
            } else {
                direct
            }
        })
        .collect())
}

/// Two-path Watterson fading, renormalized to unit average power.
pub fn apply_watterson(frame: &IqFrame, cfg: &ChannelConfig) -> Result<IqFrame> {
    ensure!(cfg.watterson_enabled, "Watterson fading is disabled in this config");
    let raw = watterson_raw(&frame.samples, cfg, cfg.seed)?;
    Ok(frame.with_samples(frame::to_unit_power_f32(&raw)))
}

/// Adds circular complex Gaussian noise of total variance 10^(−snr/10) to a
/// unit-power frame and tags it. `None` is the clean identity.
pub fn apply_awgn(frame: &IqFrame, snr_db: Option<f64>, seed: u64) -> Result<IqFrame> {
    let Some(snr) = snr_db else {
        return Ok(frame.clone());
    };
    ensure!(snr.is_finite(), "SNR must be finite");
    let p = frame.average_power();
    ensure!((p - 1.0).abs() < 1e-3, "AWGN expects a unit-power frame, got power {p}");
    let variance = 10f64.powf(-snr / 10.0);
    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("valid sigma");
    let mut r = rng::rng(seed);
    let samples = frame
        .samples
        .iter()
        .map(|s| {
            let n = Complex32::new(normal.sample(&mut r) as f32, normal.sample(&mut r) as f32);
            s + n
        })
        .collect();
    let mut out = frame.with_samples(samples);
    out.snr_db = Some(snr as f32);
    Ok(out)
}

/// s'[n] = s[n]·exp(j(2π·Δf·n/fs + φ)).
pub fn apply_offsets(frame: &IqFrame, freq_offset_hz: f64, phase_rad: f64) -> Result<IqFrame> {
    ensure!(
        freq_offset_hz.abs() < SAMPLE_RATE_HZ / 2.0,
        "offset {freq_offset_hz} Hz aliases at {SAMPLE_RATE_HZ} Hz sampling"
    );
    let samples = frame
        .samples
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let rot = Complex64::from_polar(1.0, 2.0 * PI * freq_offset_hz * n as f64 / SAMPLE_RATE_HZ + phase_rad);
            let v = Complex64::new(s.re as f64, s.im as f64) * rot;
            Complex32::new(v.re as f32, v.im as f32)
        })
        .collect();
    Ok(frame.with_samples(samples))
}

/// Offsets drawn for a given config: (Hz, radians).
pub fn draw_offsets(cfg: &ChannelConfig) -> (f64, f64) {
    let mut r = rng::child(cfg.seed, 1);
    let df = if cfg.freq_offset_range_hz > 0.0 {
        r.random_range(-cfg.freq_offset_range_hz..=cfg.freq_offset_range_hz)
    } else {
        0.0
    };
    (df, r.random_range(0.0..2.0 * PI))
}

/// Full impairment chain: Watterson → frequency/phase offset → AWGN.
pub fn impair(frame: &IqFrame, cfg: &ChannelConfig) -> Result<IqFrame> {
    cfg.validate()?;
    ensure!(frame.samples.len() == FRAME_LEN, "impair expects a {FRAME_LEN}-sample frame");
    let mut out = frame.clone();
    if cfg.watterson_enabled {
        let faded = ChannelConfig { seed: rng::mix(cfg.seed, 0), ..cfg.clone() };
        out = apply_watterson(&out, &faded)?;
    }
    if cfg.offsets_enabled {
        let (df, phase) = draw_offsets(cfg);
        out = apply_offsets(&out, df, phase)?;
    }
    if cfg.snr_db.is_some() {
        // offsets are unit-modulus, but a clean input may not be normalized
        frame::normalize_power(&mut out.samples);
        out = apply_awgn(&out, cfg.snr_db, rng::mix(cfg.seed, 2))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal;

    fn tone(f0: f64) -> IqFrame {
        let samples = (0..FRAME_LEN)
            .map(|n| {
                let v = Complex64::from_polar(1.0, 2.0 * PI * f0 * n as f64 / SAMPLE_RATE_HZ);
                Complex32::new(v.re as f32, v.im as f32)
            })
            .collect();
        IqFrame::new(samples, 0, 0).unwrap()
    }

    #[test]
    fn static_single_path_is_a_constant_rotation() {
        let x = signal::synthesize_frame(signal::class(1).unwrap(), 3).unwrap();
        let cfg = ChannelConfig { doppler_spread_hz: 0.0, path_gains: [1.0, 0.0], seed: 4, ..Default::default() };
        let y = apply_watterson(&x, &cfg).unwrap();
        let ratio = y.samples[100] / x.samples[100];
        assert!((ratio.norm() - 1.0).abs() < 1e-4);
        for (a, b) in x.samples.iter().zip(&y.samples) {
            assert!((a * ratio - b).norm() < 1e-4);
        }
    }

    #[test]
    fn delayed_path_echoes_six_samples_later() {
        let mut x = IqFrame::zeros(0);
        for n in (0..FRAME_LEN).step_by(200) {
            x.samples[n] = Complex32::new(1.0, 0.0);
        }
        let cfg = ChannelConfig { doppler_spread_hz: 0.0, seed: 1, ..Default::default() };
        let y = watterson_raw(&x.samples, &cfg, 1).unwrap();
        for (n, v) in y.iter().enumerate() {
            let expect_nonzero = n % 200 == 0 || (n >= 6 && (n - 6) % 200 == 0);
            assert_eq!(v.norm() > 1e-9, expect_nonzero, "sample {n}");
        }
    }

    #[test]
    fn delay_longer_than_frame_is_rejected() {
        let x = IqFrame::zeros(0);
        let cfg = ChannelConfig { path_delay_s: 0.5, ..Default::default() };
        assert!(apply_watterson(&x, &cfg).is_err());
        let cfg = ChannelConfig { doppler_spread_hz: -1.0, ..Default::default() };
        assert!(apply_watterson(&x, &cfg).is_err());
    }

    #[test]
    fn awgn_tags_and_requires_unit_power() {
        let x = tone(100.0);
        let y = apply_awgn(&x, Some(0.0), 1).unwrap();
        assert_eq!(y.snr_db, Some(0.0));
        assert_eq!(apply_awgn(&x, None, 1).unwrap(), x);
        let mut half = x.clone();
        half.samples.iter_mut().for_each(|s| *s *= 0.5);
        assert!(apply_awgn(&half, Some(10.0), 1).is_err());
    }

    #[test]
    fn zero_db_noise_has_half_variance_per_component() {
        let x = IqFrame::new(vec![Complex32::new(1.0, 0.0); FRAME_LEN], 0, 0).unwrap();
        let mut re = 0.0;
        let mut im = 0.0;
        let trials = 50;
        for seed in 0..trials {
            let y = apply_awgn(&x, Some(0.0), seed).unwrap();
            for (a, b) in y.samples.iter().zip(&x.samples) {
                let d = a - b;
                re += (d.re as f64).powi(2);
                im += (d.im as f64).powi(2);
            }
        }
        let count = (trials as usize * FRAME_LEN) as f64;
        assert!((re / count - 0.5).abs() < 0.01);
        assert!((im / count - 0.5).abs() < 0.01);
    }

    #[test]
    fn offsets_identity_and_negation() {
        let x = signal::synthesize_frame(signal::class(7).unwrap(), 1).unwrap();
        assert_eq!(apply_offsets(&x, 0.0, 0.0).unwrap(), x);
        let y = apply_offsets(&x, 0.0, PI).unwrap();
        for (a, b) in x.samples.iter().zip(&y.samples) {
            assert!((a + b).norm() < 1e-6);
        }
        assert!(apply_offsets(&x, 3000.0, 0.0).is_err());
    }

    #[test]
    fn clean_config_is_identity() {
        let x = signal::synthesize_frame(signal::class(12).unwrap(), 8).unwrap();
        assert_eq!(impair(&x, &ChannelConfig::clean()).unwrap(), x);
    }

    #[test]
    fn impair_is_deterministic_and_tags_snr() {
        let x = signal::synthesize_frame(signal::class(2).unwrap(), 8).unwrap();
        let cfg = ChannelConfig::default().with_snr(5.0).with_seed(99);
        let a = impair(&x, &cfg).unwrap();
        assert_eq!(a, impair(&x, &cfg).unwrap());
        assert_eq!(a.snr_db, Some(5.0));
        assert_eq!(a.class_id, x.class_id);
        assert_ne!(a, impair(&x, &cfg.clone().with_seed(100)).unwrap());
    }

    #[test]
    fn offset_draws_stay_in_range() {
        for seed in 0..1000 {
            let (df, ph) = draw_offsets(&ChannelConfig::default().with_seed(seed));
            assert!(df.abs() <= 50.0);
            assert!((0.0..2.0 * PI).contains(&ph));
        }
    }
}
