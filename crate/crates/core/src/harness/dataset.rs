//! "SIGD" dataset files and balanced dataset generation.
//!
//! Layout, little-endian: magic `SIGD`, u16 version, u32 record count, then
//! per record u8 class id, f32 SNR in dB, u64 seed and 2048 interleaved
//! (I, Q) f32 pairs. A clean frame stores NaN as its SNR.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex32;

use crate::channel::{impair, ChannelConfig};
use crate::error::{ensure, Error, Result};
use crate::frame::{IqFrame, FRAME_LEN, NUM_CLASSES};
use crate::rng::mix;
use crate::signal::{synthesize_frame, CLASSES};

pub const DATASET_MAGIC: &[u8; 4] = b"SIGD";
pub const DATASET_VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 4 + 2 + 4;
pub const RECORD_BYTES: usize = 1 + 4 + 8 + FRAME_LEN * 8;

/// −10 … 25 dB in 5 dB steps.
pub const SNR_GRID_DB: [f64; 8] = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0];

pub fn write_dataset<W: Write>(w: &mut W, frames: &[IqFrame]) -> Result<()> {
    let count = u32::try_from(frames.len()).map_err(|_| Error::Contract("too many records".into()))?;
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    let mut rec = Vec::with_capacity(RECORD_BYTES);
    for f in frames {
        ensure!(f.samples.len() == FRAME_LEN, "record must hold {FRAME_LEN} samples");
        rec.clear();
        rec.push(f.class_id);
        rec.extend_from_slice(&f.snr_db.unwrap_or(f32::NAN).to_le_bytes());
        rec.extend_from_slice(&f.seed.to_le_bytes());
        for s in &f.samples {
            rec.extend_from_slice(&s.re.to_le_bytes());
            rec.extend_from_slice(&s.im.to_le_bytes());
        }
        w.write_all(&rec)?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<Vec<IqFrame>> {
    let mut header = [0u8; HEADER_BYTES];
    r.read_exact(&mut header).map_err(|e| Error::Format(format!("dataset header: {e}")))?;
    if &header[..4] != DATASET_MAGIC {
        return Err(Error::Format("not a SIGD dataset".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let count = u32::from_le_bytes(header[6..10].try_into().expect("4 bytes")) as usize;
    let mut frames = Vec::with_capacity(count.min(1 << 16));
    let mut rec = vec![0u8; RECORD_BYTES];
    for i in 0..count {
        r.read_exact(&mut rec).map_err(|e| Error::Format(format!("record {i} of {count}: {e}")))?;
        let class_id = rec[0];
        if class_id as usize >= NUM_CLASSES {
            return Err(Error::Format(format!("record {i}: class id {class_id}")));
        }
        let snr = f32::from_le_bytes(rec[1..5].try_into().expect("4 bytes"));
        let seed = u64::from_le_bytes(rec[5..13].try_into().expect("8 bytes"));
        let samples = rec[13..]
            .chunks_exact(8)
            .map(|b| {
                Complex32::new(
                    f32::from_le_bytes(b[..4].try_into().expect("4 bytes")),
                    f32::from_le_bytes(b[4..].try_into().expect("4 bytes")),
                )
            })
            .collect();
        frames.push(IqFrame { samples, class_id, snr_db: (!snr.is_nan()).then_some(snr), seed });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format(format!("trailing bytes after {count} records")));
    }
    Ok(frames)
}

pub fn save_dataset(path: &Path, frames: &[IqFrame]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, frames)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Vec<IqFrame>> {
    read_dataset(&mut BufReader::new(File::open(path)?))
}

/// Balanced set, ordered class-major, then SNR, then index. Record `r` is
/// synthesized and impaired from seed `mix(seed, r)`, so any record can be
/// regenerated on its own.
pub fn generate_dataset(per_class: usize, snrs_db: &[f64], seed: u64, channel: &ChannelConfig) -> Result<Vec<IqFrame>> {
    ensure!(per_class >= 1, "need at least one frame per class");
    ensure!(!snrs_db.is_empty(), "empty SNR list");
    ensure!(snrs_db.iter().all(|s| (-10.0..=25.0).contains(s)), "SNRs must lie within [-10, 25] dB");
    let mut out = Vec::with_capacity(CLASSES.len() * snrs_db.len() * per_class);
    for class in &CLASSES {
        for &snr in snrs_db {
            for _ in 0..per_class {
                let record_seed = mix(seed, out.len() as u64);
                let clean = synthesize_frame(class, record_seed)?;
                let cfg = ChannelConfig { snr_db: Some(snr), seed: mix(record_seed, 1), ..channel.clone() };
                let mut f = impair(&clean, &cfg)?;
                f.seed = record_seed;
                out.push(f);
            }
        }
    }
    Ok(out)
}
