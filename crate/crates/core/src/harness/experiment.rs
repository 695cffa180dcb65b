use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dataset::load_dataset;
use crate::augment::AugmentPolicy;
use crate::classifier::{evaluate, Classifier, ClassifierConfig, MetricsReport, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::frame::IqFrame;
use crate::rng::mix;
use crate::vqvae::{VqVae, VqVaeConfig};

/// Latent noise variance for synthetic data: one pass, or two passes with
/// their own variances (written `a+b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseRepr", into = "String")]
pub enum NoiseSpec {
    Single(f64),
    DoublePass(f64, f64),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NoiseRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<NoiseRepr> for NoiseSpec {
    type Error = Error;

    fn try_from(r: NoiseRepr) -> Result<Self> {
        match r {
            NoiseRepr::Number(v) => NoiseSpec::Single(v).checked(),
            NoiseRepr::Text(s) => s.parse(),
        }
    }
}

impl From<NoiseSpec> for String {
    fn from(n: NoiseSpec) -> String {
        n.to_string()
    }
}

impl NoiseSpec {
    fn checked(self) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        let valid = match self {
            NoiseSpec::Single(a) => ok(a),
            NoiseSpec::DoublePass(a, b) => ok(a) && ok(b),
        };
        if valid {
            Ok(self)
        } else {
            Err(Error::Config(format!("latent noise variance {self} must be finite and non-negative")))
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad noise variance {s:?}")));
        match s.split_once('+') {
            Some((a, b)) => NoiseSpec::DoublePass(num(a)?, num(b)?),
            None => NoiseSpec::Single(num(s)?),
        }
        .checked()
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Single(a) => write!(f, "{a}"),
            NoiseSpec::DoublePass(a, b) => write!(f, "{a}+{b}"),
        }
    }
}

/// One row of the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub learning_rate: f64,
    pub augmentation: bool,
    /// VQ-VAE perplexity weight the synthetic data was trained with; Noise
    /// rows only.
    pub perplexity_weight: Option<f64>,
    /// Latent noise for synthetic data; `None` makes a Base row.
    pub noise: Option<NoiseSpec>,
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub vqvae_path: Option<PathBuf>,
    /// Seeds the classifier initialization, which every row shares, as well
    /// as training order, augmentation and latent noise.
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Synthetic frames per real training frame.
    pub synth_ratio: f64,
    pub classifier: ClassifierConfig,
    /// Architecture of the VQ-VAE checkpoint.
    pub vqvae: VqVaeConfig,
    pub augment_policy: AugmentPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: String::new(),
            learning_rate: 1e-4,
            augmentation: false,
            perplexity_weight: None,
            noise: None,
            train_path: None,
            test_path: None,
            vqvae_path: None,
            seed: 0,
            epochs: 10,
            batch_size: 32,
            synth_ratio: 1.0,
            classifier: ClassifierConfig::default(),
            vqvae: VqVaeConfig::default(),
            augment_policy: AugmentPolicy::default(),
        }
    }
}

/// Accuracies a named row is compared against: overall, at −10 dB and at
/// 25 dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceResult {
    pub overall: f64,
    pub at_minus_10_db: f64,
    pub at_25_db: f64,
}

/// Row name, learning rate, augmentation, perplexity weight, noise, and the
/// reference accuracies.
type Row = (&'static str, f64, bool, Option<f64>, Option<NoiseSpec>, ReferenceResult);

const fn reference(overall: f64, at_minus_10_db: f64, at_25_db: f64) -> ReferenceResult {
    ReferenceResult { overall, at_minus_10_db, at_25_db }
}

const ROWS: [Row; 10] = [
    ("Base 1", 1e-4, false, None, None, reference(0.9078, 0.6236, 0.9759)),
    ("Base 2", 1e-3, false, None, None, reference(0.9158, 0.6361, 0.9825)),
    ("Base 3", 1e-3, true, None, None, reference(0.9321, 0.7060, 0.9843)),
    ("Base 4", 1e-4, true, None, None, reference(0.9337, 0.7180, 0.9836)),
    ("Noise 1", 1e-4, true, Some(0.01), Some(NoiseSpec::Single(0.0)), reference(0.9295, 0.7128, 0.9834)),
    ("Noise 2", 1e-4, true, Some(0.001), Some(NoiseSpec::Single(0.0)), reference(0.9306, 0.6939, 0.9855)),
    ("Noise 3", 1e-4, true, Some(0.001), Some(NoiseSpec::Single(0.1)), reference(0.9371, 0.7282, 0.9855)),
    ("Noise 4", 1e-4, true, Some(0.001), Some(NoiseSpec::Single(1.0)), reference(0.9397, 0.7508, 0.9820)),
    ("Noise 5", 1e-4, true, Some(0.001), Some(NoiseSpec::DoublePass(1.0, 0.1)), reference(0.9445, 0.7638, 0.9857)),
    ("Noise 6", 1e-4, true, Some(0.001), Some(NoiseSpec::Single(1.5)), reference(0.9484, 0.7822, 0.9853)),
];

pub fn preset_names() -> Vec<&'static str> {
    ROWS.iter().map(|r| r.0).collect()
}

fn find_row(name: &str) -> Option<&'static Row> {
    let key = |s: &str| s.to_ascii_lowercase().replace([' ', '_', '-'], "");
    ROWS.iter().find(|r| key(r.0) == key(name))
}

/// A named grid row (`"Base 1"`, `"noise6"`, ...), with default paths and
/// sizes.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let &(row, lr, aug, p, noise, _) =
        find_row(name).ok_or_else(|| Error::Config(format!("unknown experiment row {name:?}")))?;
    let mut cfg = ExperimentConfig {
        name: row.into(),
        learning_rate: lr,
        augmentation: aug,
        perplexity_weight: p,
        noise,
        ..Default::default()
    };
    if let Some(p) = p {
        cfg.vqvae.perplexity_weight = p;
    }
    Ok(cfg)
}

/// Reference accuracies recorded for a named row.
pub fn reference_result(name: &str) -> Option<ReferenceResult> {
    find_row(name).map(|r| r.5)
}

impl ExperimentConfig {
    pub fn is_noise_row(&self) -> bool {
        self.noise.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{}: {m}", self.name)));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive".into());
        }
        match (self.noise, self.perplexity_weight) {
            (Some(n), Some(p)) => {
                n.checked()?;
                if !(p > 0.0 && p < 1.0) {
                    return bad(format!("perplexity weight {p} outside (0, 1)"));
                }
                if !(self.synth_ratio > 0.0 && self.synth_ratio.is_finite()) {
                    return bad(format!("synthetic ratio {}", self.synth_ratio));
                }
            }
            (Some(_), None) => return bad("a Noise row needs the VQ-VAE perplexity weight".into()),
            (None, Some(_)) => return bad("a Base row takes no synthetic data, so no perplexity weight".into()),
            (None, None) => {}
        }
        self.classifier.validate()?;
        if self.augmentation {
            self.augment_policy.validate()?;
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            augmentation: self.augmentation.then(|| self.augment_policy.clone()),
            seed: mix(self.seed, 1),
        }
    }
}

/// A grid file holds one row object or an array of them.
pub fn load_grid(path: &Path) -> Result<Vec<ExperimentConfig>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Grid {
        Many(Vec<ExperimentConfig>),
        One(Box<ExperimentConfig>),
    }
    let grid: Grid = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let rows = match grid {
        Grid::Many(v) => v,
        Grid::One(c) => vec![*c],
    };
    rows.iter().try_for_each(ExperimentConfig::validate)?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub report: MetricsReport,
    pub training: TrainReport,
    pub synthetic_frames: usize,
}

/// Labeled synthetic frames from the VQ-VAE: `round(ratio · |train|)`
/// frames, cycling through the training set as sources. Sources are scaled
/// to unit power first, matching what the VQ-VAE was trained on.
pub fn synthesize_training_data(
    vqvae: &VqVae,
    train: &[IqFrame],
    noise: NoiseSpec,
    ratio: f64,
    seed: u64,
) -> Result<Vec<IqFrame>> {
    let count = (ratio * train.len() as f64).round() as usize;
    if count == 0 || train.is_empty() {
        return Ok(Vec::new());
    }
    let sources: Vec<IqFrame> = (0..count).map(|i| train[i % train.len()].normalized()).collect();
    match noise {
        NoiseSpec::Single(s2) => Ok(vqvae.sample_latent_noise(&sources, s2, seed)?.frames),
        NoiseSpec::DoublePass(a, b) => vqvae.sample_double_pass(&sources, a, b, seed),
    }
}

/// Runs one row on in-memory data. Noise rows need `vqvae`, and its codebook
/// decay must match the row's perplexity weight.
pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    train: &[IqFrame],
    test: &[IqFrame],
    vqvae: Option<&VqVae>,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let synth = match (cfg.noise, vqvae) {
        (None, _) => Vec::new(),
        (Some(_), None) => return Err(Error::Config(format!("{}: a Noise row needs a trained VQ-VAE", cfg.name))),
        (Some(noise), Some(model)) => {
            let p = cfg.perplexity_weight.expect("validated");
            let decay = model.codebook.as_ref().map(|c| c.decay);
            if decay.is_none_or(|d| (d - (1.0 - p)).abs() > 1e-12) {
                return Err(Error::Config(format!(
                    "{}: VQ-VAE decay {decay:?} does not match perplexity weight {p}",
                    cfg.name
                )));
            }
            synthesize_training_data(model, train, noise, cfg.synth_ratio, mix(cfg.seed, 2))?
        }
    };
    let mut model = Classifier::new(cfg.classifier.clone(), cfg.seed)?;
    let training = model.train(train, &synth, &cfg.train_config())?;
    let report = evaluate(&model, test)?;
    Ok(ExperimentResult { name: cfg.name.clone(), report, training, synthetic_frames: synth.len() })
}

/// Runs one row from its files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let need = |p: &Option<PathBuf>, what: &str| {
        p.clone().ok_or_else(|| Error::Config(format!("{}: no {what} path", cfg.name)))
    };
    let train = load_dataset(&need(&cfg.train_path, "training set")?)?;
    let test = load_dataset(&need(&cfg.test_path, "test set")?)?;
    let vqvae = match cfg.noise {
        Some(_) => {
            let path = need(&cfg.vqvae_path, "VQ-VAE checkpoint")?;
            let mut r = BufReader::new(File::open(&path)?);
            Some(VqVae::load(cfg.vqvae.clone(), &mut r)?)
        }
        None => None,
    };
    run_experiment_on(cfg, &train, &test, vqvae.as_ref())
}
