//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary so the lines always show. A failing criterion is reported, but the
//! exit status only turns non-zero with `VQAUG_ACCEPTANCE_STRICT=1`, so one
//! open criterion does not stop `cargo test` before the remaining suites.
//!
//! Pass a substring (e.g. `cargo test --test acceptance -- quantizer`) to run
//! only matching criteria. Criteria 11 and 12 reuse the model trained by 10.

mod common;

use std::error::Error;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::gradcheck::{check, check_with_step, clear_vqvae_kinks, random_tensor, rms, set_margin, Pairs};
use common::*;
use num_complex::Complex64;
use rand::Rng;
use vqaug::augment::{self, AugmentPolicy};
use vqaug::channel::{self, ChannelConfig};
use vqaug::classifier::ClassifierConfig;
use vqaug::classifier::{evaluate, evaluate_predictions, Predictor};
use vqaug::harness::dataset::{HEADER_BYTES, RECORD_BYTES};
use vqaug::harness::{
    generate_dataset, load_dataset, preset, reference_result, run_experiment_on, save_dataset, ExperimentConfig,
    SNR_GRID_DB,
};
use vqaug::nn::{
    mse, softmax_cross_entropy, Conv2d, ConvGeom, ConvTranspose2d, Dense, Flatten, Layer, MaxPool2d, Relu,
    ResidualBlock, Tensor,
};
use vqaug::rng::{mix, rng};
use vqaug::signal::{self, ModulationKind, CLASSES};
use vqaug::vqvae::{from_vectors, perplexity, vqvae_loss, Codebook, FitConfig, VqVae, VqVaeConfig};
use vqaug::{IqFrame, FRAME_LEN, NUM_CLASSES};

type Outcome = Result<Verdict, Box<dyn Error>>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Outcome {
    Ok(Verdict { pass, detail: detail.into() })
}

/// Desk-scale state shared by the training criteria.
#[derive(Default)]
struct Desk {
    train: Vec<IqFrame>,
    vqvae: Option<VqVae>,
}

// ---------------------------------------------------------------- 1

fn exhaustive(vectors: &[f64], book: &[f64], d: usize) -> Vec<usize> {
    vectors
        .chunks(d)
        .map(|v| {
            let (mut best, mut best_d) = (0, f64::INFINITY);
            for (j, e) in book.chunks(d).enumerate() {
                let dist: f64 = v.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best_d {
                    best_d = dist;
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn quantizer_oracle(_: &mut Desk) -> Outcome {
    let t = Instant::now();
    let mut r = rng(1001);
    let mut mismatches = 0;
    for inst in 0..1000 {
        let k = r.random_range(2..=16usize);
        let d = r.random_range(1..=8usize);
        let mut book: Vec<f64> = (0..k * d).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut z: Vec<f64> = (0..64 * d).map(|_| r.random_range(-1.5..1.5)).collect();
        if inst % 10 == 0 {
            // exact ties: the last code repeats the first, some inputs sit on it
            let first = book[..d].to_vec();
            book[(k - 1) * d..].copy_from_slice(&first);
            z[..d].copy_from_slice(&first);
        }
        let cb = Codebook::from_embeddings(k, d, book.clone(), 0.99, 1e-5)?;
        let got = cb.assign(&z)?.indices;
        mismatches += got.iter().zip(exhaustive(&z, &book, d)).filter(|(a, b)| **a != *b).count();
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(mismatches == 0 && secs < 10.0, format!("{mismatches} mismatches over 1000 instances in {secs:.2} s"))
}

// ---------------------------------------------------------------- 2

fn perplexity_extremes(_: &mut Desk) -> Outcome {
    let mut worst_one: f64 = 0.0;
    let mut worst_k: f64 = 0.0;
    for k in [2usize, 7, 16, 128] {
        worst_one = worst_one.max((perplexity(&vec![k - 1; 500], k)? - 1.0).abs());
        let uniform: Vec<usize> = (0..10 * k).map(|i| i % k).collect();
        worst_k = worst_k.max((perplexity(&uniform, k)? - k as f64).abs());
    }
    verdict(
        worst_one <= 1e-9 && worst_k <= 1e-6,
        format!("degenerate |p−1| = {worst_one:.1e}, uniform |p−K| = {worst_k:.1e}"),
    )
}

// ---------------------------------------------------------------- 3

/// Embeddings after two EMA steps from unit counts and sums equal to the
/// initial embeddings, written out in closed form.
fn ema_closed_form(g: f64, eps: f64, e0: [f64; 2], b1: (&[f64], &[usize]), b2: (&[f64], &[usize])) -> [f64; 2] {
    let count = |b: (&[f64], &[usize]), i: usize| b.1.iter().filter(|&&j| j == i).count() as f64;
    let sum =
        |b: (&[f64], &[usize]), i: usize| b.0.iter().zip(b.1).filter(|(_, &j)| j == i).map(|(v, _)| v).sum::<f64>();
    let n: Vec<f64> = (0..2).map(|i| g * g + g * (1.0 - g) * count(b1, i) + (1.0 - g) * count(b2, i)).collect();
    let m: Vec<f64> = (0..2).map(|i| g * g * e0[i] + g * (1.0 - g) * sum(b1, i) + (1.0 - g) * sum(b2, i)).collect();
    let tot = n[0] + n[1];
    [0, 1].map(|i| m[i] * (tot + 2.0 * eps) / ((n[i] + eps) * tot))
}

fn ema_recurrence(_: &mut Desk) -> Outcome {
    let b1: (&[f64], &[usize]) = (&[0.4, 0.6, 2.5], &[0, 0, 1]);
    let b2: (&[f64], &[usize]) = (&[1.9, 2.2, 0.1, -0.3], &[1, 1, 0, 0]);
    let mut worst: f64 = 0.0;
    for gamma in [0.0, 0.99, 0.999] {
        let mut cb = Codebook::from_embeddings(2, 1, vec![0.0, 2.0], gamma, 1e-5)?;
        cb.ema_update(b1.0, b1.1)?;
        cb.ema_update(b2.0, b2.1)?;
        let want = ema_closed_form(gamma, 1e-5, [0.0, 2.0], b1, b2);
        for i in 0..2 {
            worst = worst.max((cb.embeddings[i] - want[i]).abs());
        }
    }
    verdict(worst <= 1e-9, format!("max deviation {worst:.1e} over γ ∈ {{0, 0.99, 0.999}}"))
}

// ---------------------------------------------------------------- 4

fn loss_fd(f: impl Fn(&Tensor) -> f64, x: &Tensor, grad: &Tensor) -> f64 {
    let h = 1e-3f32;
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut p = x.clone();
        p.data_mut()[i] += h;
        let lp = f(&p);
        p.data_mut()[i] -= 2.0 * h;
        let num = (lp - f(&p)) / (2.0 * h as f64);
        worst = worst.max((num - grad.data()[i] as f64).abs() / num.abs().max(1e-3));
    }
    worst
}

fn tiny_vqvae() -> VqVaeConfig {
    VqVaeConfig {
        codebook_size: 8,
        embedding_dim: 4,
        channels: [4, 4, 4],
        input_shape: [2, 16, 16],
        ..Default::default()
    }
}

fn gradient_checks(_: &mut Desk) -> Outcome {
    let mut errs: Vec<(&str, f64)> = Vec::new();
    let mut r = rng(4004);
    for (i, g) in [ConvGeom::new(3, 1, 1), ConvGeom::new(4, 2, 1), ConvGeom::new(1, 1, 0)].into_iter().enumerate() {
        let mut l = Conv2d::new(3, 4, g, &mut r)?;
        l.bias.value = random_tensor(&[4], 50 + i as u64);
        errs.push(("conv2d", check(&mut l, &random_tensor(&[2, 3, 8, 10], i as u64), 7, 60)));
    }
    for (i, g) in [ConvGeom::new(4, 2, 1), ConvGeom::new(3, 1, 1)].into_iter().enumerate() {
        let mut l = ConvTranspose2d::new(4, 3, g, &mut r)?;
        errs.push(("conv_transpose2d", check(&mut l, &random_tensor(&[2, 4, 4, 6], 10 + i as u64), 8, 60)));
    }
    errs.push(("dense", check(&mut Dense::new(12, 5, &mut r), &random_tensor(&[3, 12], 20), 9, 60)));
    errs.push(("relu", check(&mut Relu::new(), &random_tensor(&[2, 3, 4, 4], 21), 10, 60)));
    errs.push(("maxpool", check(&mut MaxPool2d::new(2, 2)?, &random_tensor(&[2, 3, 4, 6], 22), 11, 60)));
    errs.push(("flatten", check(&mut Flatten::new(), &random_tensor(&[2, 3, 2, 2], 24), 13, 60)));

    let mut b = ResidualBlock::new(3, &mut r)?;
    let x = random_tensor(&[2, 3, 6, 6], 30);
    let pre = b.conv1.forward(&x)?;
    set_margin(&mut b.conv1.bias, &pre);
    errs.push(("residual_block", check_with_step(&mut b, &x, 14, 60, 1.0)));

    let z = random_tensor(&[3, 7], 40);
    let labels = [1, 6, 0];
    let (_, g) = softmax_cross_entropy(&z, &labels)?;
    errs.push(("softmax_cross_entropy", loss_fd(|t| softmax_cross_entropy(t, &labels).unwrap().0, &z, &g)));
    let (t, p) = (random_tensor(&[2, 5], 41), random_tensor(&[2, 5], 42));
    let (_, g) = mse(&p, &t)?;
    errs.push(("mse", loss_fd(|q| mse(q, &t).unwrap().0, &p, &g)));

    // end to end: the straight-through gradient is the exact gradient of a
    // surrogate that holds the quantization offset constant
    let mut m = VqVae::new(tiny_vqvae(), 4)?;
    let x = random_tensor(&[2, 2, 16, 16], 9);
    clear_vqvae_kinks(&mut m, &x);
    m.accumulate_gradients(&x)?;
    m.params_mut().into_iter().for_each(|p| p.zero_grad());
    let pass = m.accumulate_gradients(&x)?;
    let identity = pass.grad_z_e_recon == pass.grad_z_q;
    let offset: Vec<f32> = pass.z_q.data().iter().zip(pass.z_e.data()).map(|(q, e)| q - e).collect();
    let (beta, z_q) = (m.config.beta, pass.z_q.clone());
    let surrogate = |m: &VqVae| -> f64 {
        let z = m.encoder.forward(&x).unwrap();
        let mut shifted = z.clone();
        shifted.data_mut().iter_mut().zip(&offset).for_each(|(v, o)| *v += o);
        let (rec, _) = mse(&m.decoder.forward(&shifted).unwrap(), &x).unwrap();
        let com =
            z.data().iter().zip(z_q.data()).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum::<f64>() / z.len() as f64;
        rec + beta * com
    };
    let grads: Vec<Tensor> = m.params().iter().map(|p| p.grad.clone()).collect();
    let all: Vec<f32> = grads.iter().flat_map(|g| g.data().iter().copied()).collect();
    let mut pairs = Pairs::quadratic(1.0, rms(&all));
    for (ti, g) in grads.iter().enumerate() {
        for i in (0..g.len()).step_by((g.len() / 12).max(1)) {
            pairs.push(g.data()[i] as f64, |d| {
                let orig = m.params_mut()[ti].value.data()[i];
                m.params_mut()[ti].value.data_mut()[i] = orig + d;
                let l = surrogate(&m);
                m.params_mut()[ti].value.data_mut()[i] = orig;
                l
            });
        }
    }
    errs.push(("vqvae_end_to_end", pairs.finish("vqvae end to end")));

    let (name, worst) = errs.iter().cloned().fold(("", 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
    verdict(
        worst < 1e-3 && identity,
        format!(
            "{} checks, worst relative error {worst:.1e} ({name}); z_e/z_q gradient identity {}",
            errs.len(),
            if identity { "exact" } else { "BROKEN" }
        ),
    )
}

// ---------------------------------------------------------------- 5

fn loss_identity(_: &mut Desk) -> Outcome {
    let mut m = VqVae::new(tiny_vqvae(), 5)?;
    let x = random_tensor(&[2, 2, 16, 16], 3);
    m.accumulate_gradients(&x)?;
    let book = m.codebook.clone().expect("initialized");
    let shape = m.encode(&x)?.shape().to_vec();
    let n = shape[0] * shape[2] * shape[3];
    let on_book: Vec<f64> = (0..n)
        .flat_map(|i| book.embedding(i % book.k()).iter().map(|&v| v as f32 as f64).collect::<Vec<_>>())
        .collect();
    let z_e = from_vectors(&on_book, &shape)?;
    let (z_q, _) = m.quantize(&z_e)?;
    let zero = vqvae_loss(&x, &x, &z_e, &z_q, m.config.beta)?.total;

    let z_e = m.encode(&x)?;
    let (z_q, _) = m.quantize(&z_e)?;
    let x_hat = m.decode(&z_q)?;
    let at = |b: f64| vqvae_loss(&x, &x_hat, &z_e, &z_q, b).map(|l| l.total);
    let (l0, l1) = (at(0.0)?, at(1.0)?);
    let mut worst: f64 = 0.0;
    for b in [0.1, 0.25, 0.5, 2.0, 10.0] {
        worst = worst.max(((at(b)? - l0) - b * (l1 - l0)).abs() / (b * (l1 - l0)));
    }
    verdict(
        zero.abs() <= 1e-9 && worst <= 1e-9 && l1 > l0,
        format!("perfect loss {zero:.1e}; commitment linearity deviation {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 6

fn measured_snr_db(pairs: &[(IqFrame, IqFrame)]) -> f64 {
    let (mut sig, mut noise) = (0.0, 0.0);
    for (clean, noisy) in pairs {
        for (c, n) in clean.samples.iter().zip(&noisy.samples) {
            sig += c.norm_sqr() as f64;
            noise += (n - c).norm_sqr() as f64;
        }
    }
    10.0 * (sig / noise).log10()
}

/// Two-sided RMS spread (2σ) from the Hann-tapered periodogram.
fn rms_spread_hz(x: &[Complex64]) -> f64 {
    let n = x.len().next_power_of_two();
    let len = x.len() as f64;
    let mut padded: Vec<Complex64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| v * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len).cos()))
        .collect();
    padded.resize(n, Complex64::new(0.0, 0.0));
    let p = power_spectrum(&padded);
    let (mut m0, mut m2) = (0.0, 0.0);
    for (k, v) in p.iter().enumerate() {
        let f = bin_hz(k, n);
        m0 += v;
        m2 += f * f * v;
    }
    2.0 * (m2 / m0).sqrt()
}

fn channel_calibration(_: &mut Desk) -> Outcome {
    let t = Instant::now();
    let mut worst_snr: f64 = 0.0;
    for snr in SNR_GRID_DB {
        let pairs: Vec<_> = (0..100u64)
            .map(|i| {
                let clean = signal::synthesize_frame(signal::class((i % 18) as u8).unwrap(), 600 + i).unwrap();
                let noisy = channel::apply_awgn(&clean, Some(snr), mix(snr.to_bits(), i)).unwrap();
                (clean, noisy)
            })
            .collect();
        worst_snr = worst_snr.max((measured_snr_db(&pairs) - snr).abs());
    }
    let mut worst_spread: f64 = 0.0;
    for (i, spread) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let g = channel::fading_process(1_000_000, spread, FS, 31 + i as u64);
        worst_spread = worst_spread.max((rms_spread_hz(&g) - spread).abs() / spread);
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst_snr <= 0.2 && worst_spread <= 0.2 && secs < 120.0,
        format!(
            "worst SNR error {worst_snr:.3} dB, worst Doppler spread error {:.1}%, {secs:.1} s",
            100.0 * worst_spread
        ),
    )
}

// ---------------------------------------------------------------- 7

fn modulator_spectra(_: &mut Desk) -> Outcome {
    let bin = FS / FRAME_LEN as f64;
    let mut worst_spacing: f64 = 0.0;
    let mut fsk_modes = 0;
    for mode in CLASSES.iter().filter(|c| matches!(c.kind, ModulationKind::Fsk | ModulationKind::Mfsk)) {
        let m = mode.mfsk_tones.unwrap_or(2) as usize;
        let spacing = mode.tone_spacing_hz.or(mode.fsk_shift_hz).expect("keyed mode has a spacing");
        let x = to_c64(&signal::synthesize_samples(mode, 5, 60_000)?);
        let tones = fsk_tones(&x, mode.baud.rate().expect("keyed mode has a rate"), m, spacing);
        if tones.len() != m {
            return verdict(false, format!("{}: found {} of {m} tones", mode.name, tones.len()));
        }
        worst_spacing = worst_spacing.max((mean_spacing(&tones) - spacing).abs());
        fsk_modes += 1;
    }
    let mut worst_rate: f64 = 0.0;
    for id in [1u8, 2] {
        let mode = signal::class(id)?;
        let baud = mode.baud.rate().expect("PSK has a rate");
        let x = to_c64(&signal::synthesize_samples(mode, 9, 60_000)?);
        worst_rate = worst_rate.max((rate_from_events(&psk_transition_events(&x)) - baud).abs() / baud);
    }
    verdict(
        worst_spacing <= bin && worst_rate < 0.05,
        format!("{fsk_modes} FSK/MFSK modes, worst spacing error {worst_spacing:.2} Hz (bin {bin:.2}); PSK31/63 worst rate error {:.2}%", 100.0 * worst_rate),
    )
}

// ---------------------------------------------------------------- 8

fn augmentation_ranges(_: &mut Desk) -> Outcome {
    let mut bad = 0;
    for p in [1.0, 0.5] {
        let policy = AugmentPolicy { per_transform_probability: p, ..Default::default() };
        for seed in 0..10_000u64 {
            let d = augment::draw(&policy, FRAME_LEN, mix(seed, p.to_bits()));
            bad += d.dc.is_some_and(|c| !(0.0..=1e-4).contains(&c)) as usize;
            bad += d.shift.is_some_and(|s| !(-40..=40).contains(&s)) as usize;
            bad += d.scale.is_some_and(|a| !(0.8..=1.2).contains(&a)) as usize;
            bad += d.mask.is_some_and(|(s, n)| n > 25 || s + n > FRAME_LEN) as usize;
            if p == 1.0 {
                bad += [d.dc.is_none(), d.shift.is_none(), d.scale.is_none(), d.mask.is_none(), d.awgn_seed.is_none()]
                    .iter()
                    .filter(|&&m| m)
                    .count();
            }
        }
    }
    let (mut sq, mut n) = (0.0f64, 0usize);
    for seed in 0..(1_000_000 / FRAME_LEN + 1) as u64 {
        for s in augment::apply_awgn_aug(&IqFrame::zeros(0), 1e-5, seed).samples {
            sq += s.norm_sqr() as f64;
            n += 1;
        }
    }
    let var = sq / n as f64;
    let rel = (var - 1e-5).abs() / 1e-5;
    verdict(
        bad == 0 && rel <= 0.05,
        format!("{bad} out-of-range parameters in 2×10⁴ draws; AWGN variance {var:.3e} ({:.2}% off)", 100.0 * rel),
    )
}

// ---------------------------------------------------------------- 9

fn dataset_format(_: &mut Desk) -> Outcome {
    let frames = generate_dataset(1, &SNR_GRID_DB[..4], 909, &ChannelConfig::default())?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("acceptance.sigd");
    save_dataset(&path, &frames)?;
    let bytes = std::fs::metadata(&path)?.len() as usize;
    let back = load_dataset(&path)?;
    let bits = |f: &IqFrame| -> Vec<u32> { f.samples.iter().flat_map(|s| [s.re.to_bits(), s.im.to_bits()]).collect() };
    let exact = back.len() == frames.len()
        && frames.iter().zip(&back).all(|(a, b)| {
            a.class_id == b.class_id
                && a.seed == b.seed
                && a.snr_db.map(f32::to_bits) == b.snr_db.map(f32::to_bits)
                && bits(a) == bits(b)
        });
    verdict(
        frames.len() == 72 && RECORD_BYTES == 16397 && bytes == HEADER_BYTES + 72 * RECORD_BYTES && exact,
        format!("{} records, {bytes} bytes, record size {RECORD_BYTES}, bit-exact {exact}", back.len()),
    )
}

// ---------------------------------------------------------------- 10

/// 18 classes × 50 impaired frames, SNRs cycling through the grid.
fn desk_train_set() -> vqaug::Result<Vec<IqFrame>> {
    let mut out = Vec::with_capacity(18 * 50);
    for class in &CLASSES {
        for i in 0..50 {
            let seed = mix(10_000, out.len() as u64);
            let clean = signal::synthesize_frame(class, seed)?;
            let cfg = ChannelConfig {
                snr_db: Some(SNR_GRID_DB[i % SNR_GRID_DB.len()]),
                seed: mix(seed, 1),
                ..Default::default()
            };
            let mut f = channel::impair(&clean, &cfg)?;
            f.seed = seed;
            out.push(f);
        }
    }
    Ok(out)
}

/// Reduced-width model with the codebook rate of the strongest grid row.
fn desk_vqvae_config() -> VqVaeConfig {
    VqVaeConfig { channels: [16, 32, 32], perplexity_weight: 0.001, ..Default::default() }
}

fn vqvae_trainability(desk: &mut Desk) -> Outcome {
    let t = Instant::now();
    desk.train = desk_train_set()?;
    let normalized: Vec<IqFrame> = desk.train.iter().map(IqFrame::normalized).collect();
    let cfg = desk_vqvae_config();
    let k = cfg.codebook_size as f64;
    let mut m = VqVae::new(cfg, 1010)?;
    let fit = FitConfig { epochs: 30, batch_size: 32, learning_rate: 1e-3, seed: 1011 };
    let stats = m.fit(&normalized, &fit)?;
    desk.vqvae = Some(m);
    let secs = t.elapsed().as_secs_f64();
    let (first, last) = (stats[0].reconstruction, stats[stats.len() - 1].reconstruction);
    let ratio = first / last;
    let lo = stats.iter().map(|s| s.perplexity_min).fold(f64::INFINITY, f64::min);
    let hi = stats.iter().map(|s| s.perplexity_max).fold(0.0, f64::max);
    let in_range = lo >= 1.0 - 1e-9 && hi <= k + 1e-9;
    verdict(
        ratio >= 5.0 && in_range && secs <= 1800.0,
        format!("MSE {first:.4} → {last:.4} ({ratio:.2}× reduction, need 5×); perplexity within [{lo:.1}, {hi:.1}] of [1, {k}]; {secs:.0} s"),
    )
}

// ---------------------------------------------------------------- 11

fn flip_rate(base: &[Vec<usize>], noisy: &[Vec<usize>]) -> f64 {
    let per: Vec<f64> = base
        .iter()
        .zip(noisy)
        .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64)
        .collect();
    per.iter().sum::<f64>() / per.len() as f64
}

fn diversity_monotonicity(desk: &mut Desk) -> Outcome {
    let Some(m) = desk.vqvae.as_ref() else {
        return verdict(false, "no trained desk-scale VQ-VAE (trainability criterion did not run)");
    };
    let sources: Vec<IqFrame> = (0..1000).map(|i| desk.train[i % desk.train.len()].normalized()).collect();
    let base = m.sample_latent_noise(&sources, 0.0, 0)?.indices;
    let mut rates = Vec::new();
    for (i, s2) in [0.0, 0.1, 1.0, 1.5].into_iter().enumerate() {
        let noisy = m.sample_latent_noise(&sources, s2, 1100 + i as u64)?.indices;
        rates.push((s2, flip_rate(&base, &noisy)));
    }
    let monotone = rates.windows(2).all(|w| w[1].1 >= w[0].1);
    let shown: Vec<String> = rates.iter().map(|(s, r)| format!("σ²={s}: {r:.4}")).collect();
    verdict(
        monotone && rates[0].1 == 0.0 && rates[3].1 > 0.0,
        format!("code-flip rate over {} frames: {}", sources.len(), shown.join(", ")),
    )
}

// ---------------------------------------------------------------- 12

const TREND_SEEDS: [u64; 3] = [1, 2, 3];
const TREND_EPOCHS: usize = 20;
/// Shared by both rows; the reference rate is too slow for a desk budget.
const TREND_LR: f64 = 1e-3;

fn trend_row(name: &str, seed: u64) -> vqaug::Result<ExperimentConfig> {
    let mut cfg = preset(name)?;
    cfg.learning_rate = TREND_LR;
    cfg.epochs = TREND_EPOCHS;
    cfg.seed = seed;
    cfg.classifier = ClassifierConfig { width: 8, dense_width: 32, ..Default::default() };
    Ok(cfg)
}

fn directional_trend(desk: &mut Desk) -> Outcome {
    let t = Instant::now();
    let Some(vq) = desk.vqvae.as_ref() else {
        return verdict(false, "no trained desk-scale VQ-VAE (trainability criterion did not run)");
    };
    let test = generate_dataset(20, &[-10.0, 25.0], 12_000, &ChannelConfig::default())?;
    let (mut base, mut noise) = (Vec::new(), Vec::new());
    for seed in TREND_SEEDS {
        let b = run_experiment_on(&trend_row("Base 1", seed)?, &desk.train, &test, None)?;
        let n = run_experiment_on(&trend_row("Noise 6", seed)?, &desk.train, &test, Some(vq))?;
        let low =
            |r: &vqaug::harness::ExperimentResult| r.report.accuracy_at(-10.0).expect("test set has −10 dB frames");
        println!(
            "      seed {seed}: Base-1-style {:.4} (overall {:.4}), Noise-6-style {:.4} (overall {:.4}) at −10 dB",
            low(&b),
            b.report.overall_accuracy,
            low(&n),
            n.report.overall_accuracy
        );
        base.push(low(&b));
        noise.push(low(&n));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mb, mn) = (mean(&base), mean(&noise));
    let (rb, rn) = (reference_result("Base 1").expect("row"), reference_result("Noise 6").expect("row"));
    verdict(
        mn >= mb,
        format!(
            "mean −10 dB accuracy Base-1-style {mb:.4} vs Noise-6-style {mn:.4} over {} seeds (reference {:.4} vs {:.4}); {:.0} s",
            TREND_SEEDS.len(),
            rb.at_minus_10_db,
            rn.at_minus_10_db,
            t.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 13

struct Oracle;

impl Predictor for Oracle {
    fn predict(&self, frames: &[IqFrame]) -> vqaug::Result<Vec<u8>> {
        Ok(frames.iter().map(|f| f.class_id).collect())
    }
}

fn evaluation_identities(_: &mut Desk) -> Outcome {
    let mut r = rng(1313);
    let mut violations = 0;
    for _ in 0..200 {
        let n = r.random_range(1..400);
        let frames: Vec<IqFrame> = (0..n)
            .map(|_| IqFrame {
                snr_db: Some(SNR_GRID_DB[r.random_range(0..8)] as f32),
                ..IqFrame::zeros(r.random_range(0..NUM_CLASSES as u8))
            })
            .collect();
        // biased toward the truth so accuracies span the range
        let preds: Vec<u8> = frames
            .iter()
            .map(|f| if r.random_bool(0.6) { f.class_id } else { r.random_range(0..NUM_CLASSES as u8) })
            .collect();
        let m = evaluate_predictions(&frames, &preds)?;
        let trace: u64 = (0..NUM_CLASSES).map(|i| m.confusion[i][i]).sum();
        violations += (trace as f64 / m.total as f64 != m.overall_accuracy) as usize;
        let correct: u64 = m.per_snr.iter().map(|b| (b.accuracy * b.total as f64).round() as u64).sum();
        let total: u64 = m.per_snr.iter().map(|b| b.total).sum();
        violations += (correct as f64 / total as f64 != m.overall_accuracy) as usize;
        violations += (total != n as u64) as usize;
    }
    let frames = generate_dataset(2, &[-10.0, 25.0], 1314, &ChannelConfig::default())?;
    let oracle = evaluate(&Oracle, &frames)?.overall_accuracy;
    verdict(
        violations == 0 && oracle == 1.0,
        format!("{violations} identity violations over 200 random reports; oracle accuracy {oracle}"),
    )
}

// ----------------------------------------------------------------

type Criterion = (&'static str, fn(&mut Desk) -> Outcome);

const CRITERIA: [Criterion; 13] = [
    ("quantizer oracle equivalence", quantizer_oracle),
    ("perplexity extremes", perplexity_extremes),
    ("EMA recurrence", ema_recurrence),
    ("straight-through and gradient checks", gradient_checks),
    ("loss identity", loss_identity),
    ("channel calibration", channel_calibration),
    ("modulator spectra", modulator_spectra),
    ("augmentation ranges", augmentation_ranges),
    ("dataset format", dataset_format),
    ("VQ-VAE trainability", vqvae_trainability),
    ("diversity monotonicity", diversity_monotonicity),
    ("directional trend", directional_trend),
    ("evaluation identities", evaluation_identities),
];

fn main() {
    let filters: Vec<String> =
        std::env::args().skip(1).filter(|a| !a.starts_with('-')).map(|a| a.to_lowercase()).collect();
    let mut desk = Desk::default();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in CRITERIA.iter().enumerate() {
        let selected = filters.is_empty()
            || filters.iter().any(|f| name.to_lowercase().contains(f.as_str()))
            // the later training criteria need the model from the trainability run
            || (i == 9 && filters.iter().any(|f| "diversity monotonicity directional trend".contains(f.as_str())));
        if !selected {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(|| run(&mut desk))) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => Verdict { pass: false, detail: format!("error: {e}") },
            Err(p) => {
                let msg =
                    p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
                Verdict { pass: false, detail: format!("panic: {}", msg.unwrap_or_default()) }
            }
        };
        failed += (!outcome.pass) as usize;
        println!(
            "{} {:>2}. {name}: {} [{:.1} s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} criteria passed, {failed} FAILED", ran - failed);
    let strict = std::env::var("VQAUG_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
