//! `vqaug` command line: dataset generation, VQ-VAE and classifier training,
//! synthesis, evaluation, spectrograms and the experiment grid.
//!
//! Checkpoints are written with a JSON sidecar (`<checkpoint>.json`) holding
//! the architecture, so later commands can rebuild the network.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use vqaug::augment::AugmentPolicy;
use vqaug::channel::ChannelConfig;
use vqaug::classifier::{evaluate, Classifier, ClassifierConfig, TrainConfig};
use vqaug::harness::experiment::ExperimentResult;
use vqaug::harness::{
    emit_report, generate_dataset, load_dataset, load_grid, preset, render_spectrogram, run_experiment, save_dataset,
    synthesize_training_data, NoiseSpec, SNR_GRID_DB,
};
use vqaug::rng::mix;
use vqaug::vqvae::{FitConfig, VqVae, VqVaeConfig};
use vqaug::IqFrame;

#[derive(Parser)]
#[command(name = "vqaug", version, about = "HF waveform synthesis, VQ-VAE augmentation and classification")]
struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a balanced, impaired dataset file.
    Datagen(Datagen),
    /// Train a VQ-VAE on a dataset.
    TrainVqvae(TrainVqvae),
    /// Draw labeled synthetic frames from a trained VQ-VAE.
    Synth(Synth),
    /// Train the waveform classifier.
    TrainClf(TrainClf),
    /// Evaluate a classifier and write a report directory.
    Eval(Eval),
    /// Render one frame as a PGM spectrogram.
    Spectrogram(Spectro),
    /// Run experiment rows (a grid file or a named preset).
    Experiment(Experiment),
}

#[derive(Args)]
struct Datagen {
    #[arg(long, default_value_t = 10)]
    per_class: usize,
    /// Comma-separated SNRs in dB (default: −10 to 25 in 5 dB steps).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snrs: Vec<f64>,
    /// Skip the two-path fading channel.
    #[arg(long)]
    no_fading: bool,
    /// Skip the random frequency and phase offsets.
    #[arg(long)]
    no_offsets: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainVqvae {
    #[arg(long)]
    data: PathBuf,
    /// JSON architecture file; defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    perplexity_weight: Option<f64>,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Synth {
    #[arg(long)]
    vqvae: PathBuf,
    /// Source frames; their labels and SNR tags carry over.
    #[arg(long)]
    data: PathBuf,
    /// Latent noise variance, e.g. `1.5` or `1+0.1` for two passes.
    #[arg(long, default_value = "1.5")]
    noise: NoiseSpec,
    /// Synthetic frames per source frame.
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainClf {
    #[arg(long)]
    data: PathBuf,
    /// Extra synthetic training frames.
    #[arg(long)]
    synth: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    /// Apply the online augmentation policy.
    #[arg(long)]
    augment: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Eval {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Spectro {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, default_value_t = 128)]
    window: usize,
    #[arg(long, default_value_t = 32)]
    hop: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Experiment {
    /// JSON file with one row or an array of rows.
    #[arg(long, conflicts_with = "preset")]
    grid: Option<PathBuf>,
    /// Named row such as "Base 1" or "Noise 6".
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    vqvae: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Row whose accuracy anchors the deltas (default: the first).
    #[arg(long)]
    baseline: Option<String>,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(v)?).with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> Result<Vec<IqFrame>> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn checkpoint_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_vqvae(path: &Path) -> Result<VqVae> {
    let cfg: VqVaeConfig = read_json(&sidecar(path))?;
    Ok(VqVae::load(cfg, &mut BufReader::new(File::open(path)?))?)
}

fn datagen(a: Datagen, seed: u64) -> Result<()> {
    let snrs = if a.snrs.is_empty() { SNR_GRID_DB.to_vec() } else { a.snrs };
    let channel =
        ChannelConfig { watterson_enabled: !a.no_fading, offsets_enabled: !a.no_offsets, ..Default::default() };
    let frames = generate_dataset(a.per_class, &snrs, seed, &channel)?;
    save_dataset(&a.out, &frames)?;
    println!("wrote {} frames to {}", frames.len(), a.out.display());
    Ok(())
}

fn train_vqvae(a: TrainVqvae, seed: u64) -> Result<()> {
    let mut cfg: VqVaeConfig = a.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
    if let Some(p) = a.perplexity_weight {
        cfg.perplexity_weight = p;
    }
    let frames: Vec<IqFrame> = load(&a.data)?.iter().map(IqFrame::normalized).collect();
    let mut model = VqVae::new(cfg.clone(), seed)?;
    let fit = FitConfig { epochs: a.epochs, batch_size: a.batch_size, learning_rate: a.lr, seed: mix(seed, 1) };
    for (e, s) in model.fit(&frames, &fit)?.iter().enumerate() {
        println!(
            "epoch {:>3}  recon {:.5}  commit {:.5}  perplexity {:.1}..{:.1}",
            e + 1,
            s.reconstruction,
            s.commitment,
            s.perplexity_min,
            s.perplexity_max
        );
    }
    let mut w = checkpoint_writer(&a.out)?;
    model.save(&mut w)?;
    w.flush()?;
    write_json(&sidecar(&a.out), &cfg)
}

fn synth(a: Synth, seed: u64) -> Result<()> {
    let model = load_vqvae(&a.vqvae)?;
    let src = load(&a.data)?;
    let out = synthesize_training_data(&model, &src, a.noise, a.ratio, seed)?;
    save_dataset(&a.out, &out)?;
    println!("wrote {} synthetic frames to {}", out.len(), a.out.display());
    Ok(())
}

fn train_clf(a: TrainClf, seed: u64) -> Result<()> {
    let cfg: ClassifierConfig = a.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
    let real = load(&a.data)?;
    let synth = a.synth.as_deref().map(load).transpose()?.unwrap_or_default();
    let mut model = Classifier::new(cfg.clone(), seed)?;
    let train = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        augmentation: a.augment.then(AugmentPolicy::default),
        seed: mix(seed, 1),
    };
    let report = model.train(&real, &synth, &train)?;
    for (e, (l, acc)) in report.epoch_losses.iter().zip(&report.epoch_accuracy).enumerate() {
        println!("epoch {:>3}  loss {l:.4}  train accuracy {acc:.4}", e + 1);
    }
    let mut w = checkpoint_writer(&a.out)?;
    model.save(&mut w)?;
    w.flush()?;
    write_json(&sidecar(&a.out), &cfg)
}

fn eval(a: Eval) -> Result<()> {
    let cfg: ClassifierConfig = read_json(&sidecar(&a.model))?;
    let model = Classifier::load(cfg, &mut BufReader::new(File::open(&a.model)?))?;
    let report = evaluate(&model, &load(&a.data)?)?;
    println!("overall accuracy {:.4} on {} frames", report.overall_accuracy, report.total);
    for (snr, acc) in report.per_snr_accuracy() {
        println!("  {snr:>5} dB  {acc:.4}");
    }
    let name = a.model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    let result = ExperimentResult { name, report, training: Default::default(), synthetic_frames: 0 };
    emit_report(&a.out, &[result], None)?;
    Ok(())
}

fn spectrogram(a: Spectro) -> Result<()> {
    let frames = load(&a.data)?;
    let Some(f) = frames.get(a.index) else {
        bail!("index {} out of range for {} frames", a.index, frames.len());
    };
    render_spectrogram(f, a.window, a.hop)?.write_pgm(&a.out)?;
    Ok(())
}

fn experiment(a: Experiment, seed: u64) -> Result<()> {
    let mut rows = match (&a.grid, &a.preset) {
        (Some(g), _) => load_grid(g)?,
        (None, Some(p)) => vec![preset(p)?],
        (None, None) => bail!("pass --grid or --preset"),
    };
    for r in &mut rows {
        r.seed = seed;
        r.train_path = a.train.clone().or(r.train_path.take());
        r.test_path = a.test.clone().or(r.test_path.take());
        r.vqvae_path = a.vqvae.clone().or(r.vqvae_path.take());
        if let Some(e) = a.epochs {
            r.epochs = e;
        }
        if r.is_noise_row() {
            if let Some(p) = &r.vqvae_path {
                r.vqvae = read_json(&sidecar(p))?;
            }
        }
    }
    let mut results = Vec::new();
    for r in &rows {
        let res = run_experiment(r).with_context(|| format!("row {}", r.name))?;
        println!("{:<10} overall {:.4}", res.name, res.report.overall_accuracy);
        results.push(res);
    }
    emit_report(&a.out, &results, a.baseline.as_deref())?;
    println!("report in {}", a.out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Command::Datagen(a) => datagen(a, cli.seed),
        Command::TrainVqvae(a) => train_vqvae(a, cli.seed),
        Command::Synth(a) => synth(a, cli.seed),
        Command::TrainClf(a) => train_clf(a, cli.seed),
        Command::Eval(a) => eval(a),
        Command::Spectrogram(a) => spectrogram(a),
        Command::Experiment(a) => experiment(a, cli.seed),
    }
}
