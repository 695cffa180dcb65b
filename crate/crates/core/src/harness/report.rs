//! On-disk experiment reports: a JSON summary, confusion matrices as CSV and
//! an accuracy-versus-SNR table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::{reference_result, ExperimentResult, ReferenceResult};
use crate::error::Result;
use crate::signal::CLASSES;

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub overall_accuracy: f64,
    pub accuracy_at_minus_10_db: Option<f64>,
    pub accuracy_at_25_db: Option<f64>,
    /// Percentage points over the baseline row, when one was run.
    pub delta_overall_pct: Option<f64>,
    pub delta_minus_10_db_pct: Option<f64>,
    pub synthetic_frames: usize,
    pub parameter_count: usize,
    pub macs_per_sample: u64,
    pub reference_parameter_count: u64,
    pub reference: Option<ReferenceResult>,
}

/// Percentage-point gain of `acc` over `base`.
pub fn delta_pct(acc: f64, base: f64) -> f64 {
    (acc - base) * 100.0
}

/// Summary rows. The row named `baseline` (default: the first) anchors the
/// deltas.
pub fn summarize(results: &[ExperimentResult], baseline: Option<&str>) -> Vec<SummaryRow> {
    let base = match baseline {
        Some(name) => results.iter().find(|r| r.name == name),
        None => results.first(),
    };
    results
        .iter()
        .map(|r| {
            let m = &r.report;
            let low = m.accuracy_at(-10.0);
            SummaryRow {
                name: r.name.clone(),
                overall_accuracy: m.overall_accuracy,
                accuracy_at_minus_10_db: low,
                accuracy_at_25_db: m.accuracy_at(25.0),
                delta_overall_pct: base.map(|b| delta_pct(m.overall_accuracy, b.report.overall_accuracy)),
                delta_minus_10_db_pct: base
                    .and_then(|b| b.report.accuracy_at(-10.0))
                    .zip(low)
                    .map(|(b, a)| delta_pct(a, b)),
                synthetic_frames: r.synthetic_frames,
                parameter_count: m.parameter_count,
                macs_per_sample: m.macs_per_sample,
                reference_parameter_count: m.reference_parameter_count,
                reference: reference_result(&r.name),
            }
        })
        .collect()
}

/// Header of class names, then one line of counts per true class.
pub fn confusion_csv(confusion: &[Vec<u64>]) -> String {
    let mut out = CLASSES.iter().map(|c| c.name).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in confusion {
        let line: Vec<String> = row.iter().map(u64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// `snr_db,<row name>...`, one line per SNR present in any result.
pub fn accuracy_vs_snr_csv(results: &[ExperimentResult]) -> String {
    let mut snrs: Vec<f32> = results.iter().flat_map(|r| r.report.per_snr.iter().map(|b| b.snr_db)).collect();
    snrs.sort_by(f32::total_cmp);
    snrs.dedup();
    let mut out = String::from("snr_db");
    for r in results {
        out.push(',');
        out.push_str(&r.name);
    }
    out.push('\n');
    for s in snrs {
        let _ = write!(out, "{s}");
        for r in results {
            out.push(',');
            if let Some(a) = r.report.accuracy_at(s) {
                let _ = write!(out, "{a:.6}");
            }
        }
        out.push('\n');
    }
    out
}

fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect()
}

/// Writes `summary.json`, `accuracy_vs_snr.csv`, and per row
/// `<row>_confusion.csv` plus `<row>_confusion_<snr>dB.csv`. Returns the
/// files written.
pub fn emit_report(dir: &Path, results: &[ExperimentResult], baseline: Option<&str>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: &[u8]| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    #[derive(Serialize)]
    struct Summary<'a> {
        rows: Vec<SummaryRow>,
        results: &'a [ExperimentResult],
    }
    let summary = Summary { rows: summarize(results, baseline), results };
    put("summary.json".into(), &serde_json::to_vec_pretty(&summary)?)?;
    put("accuracy_vs_snr.csv".into(), accuracy_vs_snr_csv(results).as_bytes())?;
    for r in results {
        let s = slug(&r.name);
        put(format!("{s}_confusion.csv"), confusion_csv(&r.report.confusion).as_bytes())?;
        for b in &r.report.per_snr {
            put(format!("{s}_confusion_{}dB.csv", b.snr_db), confusion_csv(&b.confusion).as_bytes())?;
        }
    }
    Ok(written)
}
