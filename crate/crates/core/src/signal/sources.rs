//! Message sources for the analog modes: a synthetic audio program for
//! AM/SSB and a periodic scanline for radiofax.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp;
use crate::rng;

pub const AUDIO_LOW_HZ: f64 = 300.0;
pub const AUDIO_HIGH_HZ: f64 = 2700.0;
/// Band-limited noise power relative to the tone power.
pub const AUDIO_NOISE_REL_DB: f64 = -10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Tone {
    pub freq_hz: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Three random tones in 300–2700 Hz plus band-limited noise, held as the
/// analytic (positive-frequency) signal so AM, USB, and LSB all derive from
/// one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSource {
    pub tones: Vec<Tone>,
    analytic: Vec<Complex64>,
}

impl AudioSource {
    pub fn synthetic(seed: u64, len: usize, fs: f64) -> Self {
        let mut r = rng::rng(seed);
        let tones: Vec<Tone> = (0..3)
            .map(|_| Tone {
                freq_hz: r.random_range(AUDIO_LOW_HZ..AUDIO_HIGH_HZ),
                amplitude: r.random_range(0.3..1.0),
                phase: r.random_range(0.0..2.0 * PI),
            })
            .collect();
        // real audio power of the tones
        let tone_power: f64 = tones.iter().map(|t| t.amplitude * t.amplitude / 2.0).sum();

        let mut noise = vec![Complex64::new(0.0, 0.0); len];
        let mut in_band = 0usize;
        for (k, v) in noise.iter_mut().enumerate() {
            let f = dsp::bin_freq(k, len, fs);
            if (AUDIO_LOW_HZ..=AUDIO_HIGH_HZ).contains(&f) {
                let re: f64 = StandardNormal.sample(&mut r);
                let im: f64 = StandardNormal.sample(&mut r);
                *v = Complex64::new(re, im);
                in_band += 1;
            }
        }
        dsp::ifft(&mut noise);
        // analytic noise power splits evenly between its real and imaginary parts
        let raw = noise.iter().map(|v| v.norm_sqr()).sum::<f64>() / len as f64;
        let target = 2.0 * tone_power * 10f64.powf(AUDIO_NOISE_REL_DB / 10.0);
        let g = if in_band > 0 && raw > 0.0 { (target / raw).sqrt() } else { 0.0 };

        let analytic = (0..len)
            .map(|n| {
                let t = n as f64 / fs;
                let tones: Complex64 = tones
                    .iter()
                    .map(|tn| Complex64::from_polar(tn.amplitude, 2.0 * PI * tn.freq_hz * t + tn.phase))
                    .sum();
                tones + noise[n] * g
            })
            .collect();
        Self { tones, analytic }
    }

    pub fn len(&self) -> usize {
        self.analytic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.analytic.is_empty()
    }

    /// Real audio waveform.
    pub fn real(&self) -> impl Iterator<Item = f64> + '_ {
        self.analytic.iter().map(|v| v.re)
    }

    pub fn analytic(&self) -> &[Complex64] {
        &self.analytic
    }
}

/// Fax line at 120 lines/min: alternating black/white bars of random widths.
#[derive(Debug, Clone, PartialEq)]
pub struct Scanline {
    pub line_period_s: f64,
    /// Bar boundaries as fractions of the line, strictly increasing, ending at 1.
    pub edges: Vec<f64>,
    pub start_offset_s: f64,
}

pub const FAX_LINE_PERIOD_S: f64 = 0.5;
/// Baseband frequency deviation for black (−) and white (+).
pub const FAX_DEVIATION_HZ: f64 = 400.0;

impl Scanline {
    pub fn synthetic(seed: u64) -> Self {
        let mut r = rng::rng(seed);
        let bars = r.random_range(4..=12usize) * 2;
        let mut widths: Vec<f64> = (0..bars).map(|_| r.random_range(0.2..1.0)).collect();
        let total: f64 = widths.iter().sum();
        let mut acc = 0.0;
        for w in widths.iter_mut() {
            acc += *w / total;
            *w = acc;
        }
        *widths.last_mut().unwrap() = 1.0;
        Self { line_period_s: FAX_LINE_PERIOD_S, edges: widths, start_offset_s: r.random_range(0.0..FAX_LINE_PERIOD_S) }
    }

    /// Pixel level in {0, 1} at time `t` seconds.
    pub fn level(&self, t: f64) -> f64 {
        let x = ((t + self.start_offset_s) / self.line_period_s).fract();
        let bar = self.edges.iter().position(|&e| x < e).unwrap_or(self.edges.len() - 1);
        (bar % 2) as f64
    }
}
