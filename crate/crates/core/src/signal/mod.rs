//! Clean baseband synthesis for the 18 HF transmission modes.
//!
//! Digital modes are driven by pseudorandom symbol streams and rendered at
//! tone/keying level centered on 0 Hz. AM and SSB carry a synthetic audio
//! program; radiofax frequency-modulates a synthetic scanline. Every output
//! is normalized to unit average power and is a pure function of its seed.

mod modes;
pub mod morse;
mod sources;

use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rand::Rng as _;

pub use modes::{
    class, class_by_name, Baud, ModulationKind, WaveformClass, CLASSES, MT63_CARRIERS, MT63_CARRIER_SPACING_HZ,
};
pub use sources::{AudioSource, Scanline, Tone, AUDIO_HIGH_HZ, AUDIO_LOW_HZ, FAX_DEVIATION_HZ};

use crate::error::{ensure, Error, Result};
use crate::frame::{self, IqFrame, FRAME_LEN, SAMPLE_RATE_HZ};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    pub symbols: Vec<u32>,
    pub symbol_rate: f64,
    pub alphabet_size: u32,
}

impl SymbolStream {
    pub fn new(symbols: Vec<u32>, symbol_rate: f64, alphabet_size: u32) -> Result<Self> {
        ensure!(alphabet_size >= 1, "empty alphabet");
        ensure!(symbol_rate > 0.0, "symbol rate must be positive");
        ensure!(symbols.iter().all(|&s| s < alphabet_size), "symbol outside alphabet of size {alphabet_size}");
        Ok(Self { symbols, symbol_rate, alphabet_size })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// What a modulator consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Symbols(SymbolStream),
    Audio(AudioSource),
    Scanline(Scanline),
}

/// Uniform random symbols long enough to cover `min_duration_s`.
///
/// MT63 streams hold one binary symbol per subcarrier per symbol period, so
/// their length is a multiple of [`MT63_CARRIERS`].
pub fn make_symbol_stream(mode: &WaveformClass, seed: u64, min_duration_s: f64) -> Result<SymbolStream> {
    let (Some(alphabet), Some(rate)) = (mode.alphabet_size(), mode.stream_rate()) else {
        return Err(Error::UnsupportedMode(format!("{} is not driven by a symbol stream", mode.name)));
    };
    ensure!(min_duration_s >= 0.0, "negative duration");
    let mut count = (min_duration_s * rate).ceil() as usize;
    if mode.kind == ModulationKind::Multicarrier {
        count *= MT63_CARRIERS;
    }
    let mut r = rng::rng(seed);
    let symbols = (0..count).map(|_| r.random_range(0..alphabet)).collect();
    SymbolStream::new(symbols, rate, alphabet)
}

/// Default message for `mode`, sized for `len` samples.
pub fn make_message(mode: &WaveformClass, seed: u64, len: usize) -> Result<Message> {
    let duration = len as f64 / SAMPLE_RATE_HZ;
    Ok(match mode.kind {
        ModulationKind::Usb | ModulationKind::Lsb | ModulationKind::Am => {
            Message::Audio(AudioSource::synthetic(seed, len, SAMPLE_RATE_HZ))
        }
        ModulationKind::Radiofax => Message::Scanline(Scanline::synthetic(seed)),
        _ => {
            // one extra symbol covers the random timing offset
            let rate = mode.stream_rate().unwrap_or(1.0);
            Message::Symbols(make_symbol_stream(mode, seed, duration + 1.0 / rate)?)
        }
    })
}

/// Renders a clean 2048-sample frame. Frame-level randomness (carrier phase,
/// symbol timing, Morse speed) is drawn from `seed`.
pub fn modulate(mode: &WaveformClass, message: &Message, seed: u64) -> Result<IqFrame> {
    let samples = modulate_len(mode, message, seed, FRAME_LEN)?;
    let mut f = IqFrame::new(frame::to_unit_power_f32(&samples), mode.id, seed)?;
    f.snr_db = None;
    Ok(f)
}

/// [`modulate`] for an arbitrary number of samples, unnormalized.
pub fn modulate_len(mode: &WaveformClass, message: &Message, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    let mut r = rng::rng(seed);
    let phase0 = r.random_range(0.0..2.0 * PI);
    let carrier = Complex64::from_polar(1.0, phase0);
    use ModulationKind::*;
    match (mode.kind, message) {
        (Usb, Message::Audio(a)) | (Lsb, Message::Audio(a)) | (Am, Message::Audio(a)) => {
            ensure!(a.len() >= len, "audio source shorter than {len} samples");
            Ok(match mode.kind {
                Usb => a.analytic()[..len].iter().map(|v| v * carrier).collect(),
                Lsb => a.analytic()[..len].iter().map(|v| v.conj() * carrier).collect(),
                _ => {
                    let peak = a.real().take(len).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
                    a.real().take(len).map(|v| carrier * (1.0 + 0.8 * v / peak)).collect()
                }
            })
        }
        (Radiofax, Message::Scanline(s)) => {
            let mut phase = phase0;
            Ok((0..len)
                .map(|n| {
                    let t = n as f64 / SAMPLE_RATE_HZ;
                    let f = FAX_DEVIATION_HZ * (2.0 * s.level(t) - 1.0);
                    let v = Complex64::from_polar(1.0, phase);
                    phase = (phase + 2.0 * PI * f / SAMPLE_RATE_HZ) % (2.0 * PI);
                    v
                })
                .collect())
        }
        (kind, Message::Symbols(stream)) if kind.is_digital() => {
            let alphabet = mode.alphabet_size().unwrap_or(0);
            ensure!(
                stream.alphabet_size == alphabet,
                "{} expects alphabet {alphabet}, stream has {}",
                mode.name,
                stream.alphabet_size
            );
            match kind {
                Ook => render_morse(&stream.symbols, len, carrier, &mut r),
                Psk | Qpsk => {
                    let rate = mode.baud.rate().unwrap_or(1.0);
                    render_psk(&stream.symbols, alphabet, rate, len, carrier, &mut r)
                }
                Fsk => {
                    let half = mode.fsk_shift_hz.unwrap_or(0.0) / 2.0;
                    render_cpfsk(stream, &[-half, half], mode.baud.rate().unwrap_or(1.0), len, phase0, &mut r)
                }
                Mfsk => {
                    let m = alphabet as usize;
                    let spacing = mode.tone_spacing_hz.unwrap_or(0.0);
                    let tones: Vec<f64> = (0..m).map(|k| (k as f64 - (m as f64 - 1.0) / 2.0) * spacing).collect();
                    render_cpfsk(stream, &tones, mode.baud.rate().unwrap_or(1.0), len, phase0, &mut r)
                }
                Multicarrier => render_mt63(&stream.symbols, mode.baud.rate().unwrap_or(1.0), len, &mut r),
                _ => unreachable!(),
            }
        }
        _ => Err(Error::Contract(format!("message type does not match mode {}", mode.name))),
    }
}

/// Clean labeled frame for `mode`, deterministic in `(mode, seed)`.
pub fn synthesize_frame(mode: &WaveformClass, seed: u64) -> Result<IqFrame> {
    let message = make_message(mode, rng::mix(seed, 1), FRAME_LEN)?;
    modulate(mode, &message, rng::mix(seed, 2)).map(|mut f| {
        f.seed = seed;
        f
    })
}

/// Unit-power synthesis of arbitrary length, for spectral measurements that
/// need more resolution than one frame provides.
pub fn synthesize_samples(mode: &WaveformClass, seed: u64, len: usize) -> Result<Vec<Complex32>> {
    let message = make_message(mode, rng::mix(seed, 1), len)?;
    let raw = modulate_len(mode, &message, rng::mix(seed, 2), len)?;
    Ok(frame::to_unit_power_f32(&raw))
}

fn symbol_timing(rate: f64, len: usize, available: usize, r: &mut rng::Rng) -> Result<(f64, f64)> {
    let period = SAMPLE_RATE_HZ / rate;
    let offset = r.random_range(0.0..period);
    let needed = ((len as f64 - 1.0 + offset) / period).floor() as usize + 1;
    ensure!(available >= needed, "stream has {available} symbols, {needed} needed");
    Ok((period, offset))
}

/// Constellation points joined by raised-cosine interpolation across each
/// symbol period; repeated symbols hold a constant phase.
fn render_psk(
    symbols: &[u32],
    alphabet: u32,
    rate: f64,
    len: usize,
    carrier: Complex64,
    r: &mut rng::Rng,
) -> Result<Vec<Complex64>> {
    let (period, offset) = symbol_timing(rate, len, symbols.len(), r)?;
    let point = |s: u32| Complex64::from_polar(1.0, 2.0 * PI * s as f64 / alphabet as f64);
    Ok((0..len)
        .map(|n| {
            let t = (n as f64 + offset) / period;
            let j = t.floor() as usize;
            let frac = t - j as f64;
            let cur = point(symbols[j]);
            let prev = point(symbols[j.saturating_sub(1)]);
            let w = 0.5 * (1.0 + (PI * frac).cos());
            carrier * (prev * w + cur * (1.0 - w))
        })
        .collect())
}

/// Continuous-phase keying among `tones` (Hz).
fn render_cpfsk(
    stream: &SymbolStream,
    tones: &[f64],
    rate: f64,
    len: usize,
    phase0: f64,
    r: &mut rng::Rng,
) -> Result<Vec<Complex64>> {
    let (period, offset) = symbol_timing(rate, len, stream.len(), r)?;
    let mut phase = phase0;
    Ok((0..len)
        .map(|n| {
            let j = ((n as f64 + offset) / period).floor() as usize;
            let f = tones[stream.symbols[j] as usize];
            let v = Complex64::from_polar(1.0, phase);
            phase = (phase + 2.0 * PI * f / SAMPLE_RATE_HZ) % (2.0 * PI);
            v
        })
        .collect())
}

fn render_morse(symbols: &[u32], len: usize, carrier: Complex64, r: &mut rng::Rng) -> Result<Vec<Complex64>> {
    let unit = r.random_range(morse::MIN_UNIT_SAMPLES..=morse::MAX_UNIT_SAMPLES);
    let runs = morse::key_runs(symbols);
    let first_on = runs.iter().position(|r| r.0).ok_or_else(|| Error::Contract("Morse stream keys nothing".into()))?;
    let mut skip = r.random_range(0..unit);
    let mut out = Vec::with_capacity(len);
    for &(on, units) in &runs[first_on..] {
        let run = units * unit;
        let take = run.saturating_sub(skip).min(len - out.len());
        skip = skip.saturating_sub(run);
        let v = if on { carrier } else { Complex64::new(0.0, 0.0) };
        out.extend(std::iter::repeat_n(v, take));
        if out.len() == len {
            return Ok(out);
        }
    }
    Err(Error::Contract(format!("Morse stream covers {} of {len} samples", out.len())))
}

/// 64 BPSK subcarriers with cosine-shaped symbol transitions, centered on 0 Hz.
fn render_mt63(symbols: &[u32], rate: f64, len: usize, r: &mut rng::Rng) -> Result<Vec<Complex64>> {
    let (period, offset) = symbol_timing(rate, len, symbols.len() / MT63_CARRIERS, r)?;
    let carriers: Vec<(f64, f64)> = (0..MT63_CARRIERS)
        .map(|c| {
            let f = (c as f64 - (MT63_CARRIERS as f64 - 1.0) / 2.0) * MT63_CARRIER_SPACING_HZ;
            (f, r.random_range(0.0..2.0 * PI))
        })
        .collect();
    let sign = |s: u32| if s == 0 { 1.0 } else { -1.0 };
    Ok((0..len)
        .map(|n| {
            let t = (n as f64 + offset) / period;
            let j = t.floor() as usize;
            let w = 0.5 * (1.0 + (PI * (t - j as f64)).cos());
            let tsec = n as f64 / SAMPLE_RATE_HZ;
            carriers
                .iter()
                .enumerate()
                .map(|(c, &(f, ph))| {
                    let cur = sign(symbols[j * MT63_CARRIERS + c]);
                    let prev = sign(symbols[j.saturating_sub(1) * MT63_CARRIERS + c]);
                    Complex64::from_polar(prev * w + cur * (1.0 - w), 2.0 * PI * f * tsec + ph)
                })
                .sum()
        })
        .collect())
}
