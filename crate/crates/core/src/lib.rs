//! Synthetic HF waveform data, Watterson channel impairments, VQ-VAE
//! latent-noise augmentation, and a residual-stack waveform classifier.
//!
//! The pipeline: [`signal`] synthesizes clean frames, [`channel`] impairs
//! them, [`augment`] applies the online training transforms, [`vqvae`]
//! learns a discrete latent model whose noisy reconstructions serve as extra
//! labeled training data, and [`classifier`] trains and evaluates the
//! waveform classifier. [`harness`] ties it together with file formats and
//! the experiment grid.

pub mod augment;
pub mod channel;
pub mod classifier;
pub mod dsp;
pub mod error;
pub mod frame;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod vqvae;

pub use error::{Error, Result};
pub use frame::{IqFrame, FRAME_LEN, NUM_CLASSES, SAMPLE_RATE_HZ};
