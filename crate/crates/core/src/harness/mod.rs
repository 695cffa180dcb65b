//! Dataset files, spectrogram rendering, and the experiment grid.

pub mod dataset;
pub mod experiment;
pub mod report;
pub mod spectrogram;

pub use dataset::{generate_dataset, load_dataset, read_dataset, save_dataset, write_dataset, SNR_GRID_DB};
pub use experiment::{
    load_grid, preset, preset_names, reference_result, run_experiment, run_experiment_on, synthesize_training_data,
    ExperimentConfig, ExperimentResult, NoiseSpec, ReferenceResult,
};
pub use report::{emit_report, summarize, SummaryRow};
pub use spectrogram::{render_spectrogram, Spectrogram};
