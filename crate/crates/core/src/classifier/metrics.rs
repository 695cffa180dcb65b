use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::frame::{IqFrame, NUM_CLASSES};

/// Parameter count quoted for the full-size reference network. Reported next
/// to the measured count, never compared against it.
pub const REFERENCE_PARAMETER_COUNT: u64 = 31_700_000;

/// Anything that labels frames.
pub trait Predictor {
    fn predict(&self, frames: &[IqFrame]) -> Result<Vec<u8>>;

    fn parameter_count(&self) -> usize {
        0
    }

    fn macs_per_sample(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrBucket {
    pub snr_db: f32,
    pub total: u64,
    pub correct: u64,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: u64,
    pub correct: u64,
    pub overall_accuracy: f64,
    /// `confusion[true][predicted]` over every SNR.
    pub confusion: Vec<Vec<u64>>,
    /// Ascending SNR.
    pub per_snr: Vec<SnrBucket>,
    pub parameter_count: usize,
    pub macs_per_sample: u64,
    pub reference_parameter_count: u64,
}

impl MetricsReport {
    pub fn per_snr_accuracy(&self) -> Vec<(f32, f64)> {
        self.per_snr.iter().map(|b| (b.snr_db, b.accuracy)).collect()
    }

    pub fn accuracy_at(&self, snr_db: f32) -> Option<f64> {
        self.per_snr.iter().find(|b| b.snr_db == snr_db).map(|b| b.accuracy)
    }
}

pub fn evaluate(predictor: &dyn Predictor, frames: &[IqFrame]) -> Result<MetricsReport> {
    let predictions = predictor.predict(frames)?;
    let mut r = evaluate_predictions(frames, &predictions)?;
    r.parameter_count = predictor.parameter_count();
    r.macs_per_sample = predictor.macs_per_sample();
    Ok(r)
}

/// Tallies predictions against the frames' labels and SNR tags.
pub fn evaluate_predictions(frames: &[IqFrame], predictions: &[u8]) -> Result<MetricsReport> {
    ensure!(!frames.is_empty(), "empty test set");
    ensure!(frames.len() == predictions.len(), "{} predictions for {} frames", predictions.len(), frames.len());
    let mut confusion = vec![vec![0u64; NUM_CLASSES]; NUM_CLASSES];
    let mut buckets: Vec<SnrBucket> = Vec::new();
    for (f, &p) in frames.iter().zip(predictions) {
        let snr = f.snr_db.ok_or_else(|| crate::Error::Contract("test frame without an SNR tag".into()))?;
        ensure!(snr.is_finite(), "non-finite SNR tag");
        ensure!((p as usize) < NUM_CLASSES, "predicted class {p} out of range");
        let (t, p) = (f.class_id as usize, p as usize);
        confusion[t][p] += 1;
        let b = match buckets.iter().position(|b| b.snr_db == snr) {
            Some(i) => &mut buckets[i],
            None => {
                buckets.push(SnrBucket {
                    snr_db: snr,
                    total: 0,
                    correct: 0,
                    accuracy: 0.0,
                    confusion: vec![vec![0; NUM_CLASSES]; NUM_CLASSES],
                });
                buckets.last_mut().expect("just pushed")
            }
        };
        b.confusion[t][p] += 1;
        b.total += 1;
        b.correct += (t == p) as u64;
    }
    buckets.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
    for b in &mut buckets {
        b.accuracy = b.correct as f64 / b.total as f64;
    }
    let total = frames.len() as u64;
    let correct: u64 = (0..NUM_CLASSES).map(|i| confusion[i][i]).sum();
    Ok(MetricsReport {
        total,
        correct,
        overall_accuracy: correct as f64 / total as f64,
        confusion,
        per_snr: buckets,
        parameter_count: 0,
        macs_per_sample: 0,
        reference_parameter_count: REFERENCE_PARAMETER_COUNT,
    })
}
