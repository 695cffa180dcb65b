//! `NNCK` parameter files: magic, u16 version, u64 tensor count, then per
//! tensor a u32 rank, u64 dims and little-endian f32 values.

use super::{Param, Tensor};
use crate::error::{ensure, Error, Result};
use std::io::{Read, Write};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NNCK";
pub const CHECKPOINT_VERSION: u16 = 1;

const MAX_RANK: u32 = 8;
const MAX_ELEMS: u64 = 1 << 31;

pub fn write_tensors<W: Write>(w: &mut W, tensors: &[&Tensor]) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 4);
        t.data().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

pub fn read_tensors<R: Read>(r: &mut R) -> Result<Vec<Tensor>> {
    let magic: [u8; 4] = read_array(r)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not an NNCK checkpoint".into()));
    }
    let version = u16::from_le_bytes(read_array(r)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = u64::from_le_bytes(read_array(r)?);
    let mut out = Vec::new();
    for _ in 0..count {
        let rank = u32::from_le_bytes(read_array(r)?);
        if rank > MAX_RANK {
            return Err(Error::Format(format!("tensor rank {rank} too large")));
        }
        let mut shape = Vec::with_capacity(rank as usize);
        let mut n = 1u64;
        for _ in 0..rank {
            let d = u64::from_le_bytes(read_array(r)?);
            n = n.saturating_mul(d);
            shape.push(d as usize);
        }
        if n > MAX_ELEMS {
            return Err(Error::Format(format!("tensor of {n} elements too large")));
        }
        let mut bytes = vec![0u8; n as usize * 4];
        r.read_exact(&mut bytes).map_err(|e| Error::Format(format!("truncated checkpoint: {e}")))?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        out.push(Tensor::new(shape, data)?);
    }
    Ok(out)
}

/// Copies `tensors` into `params`, requiring matching count and shapes.
pub fn load_params(params: &mut [&mut Param], tensors: &[Tensor]) -> Result<()> {
    ensure!(params.len() == tensors.len(), "checkpoint has {} tensors, model has {}", tensors.len(), params.len());
    for (i, (p, t)) in params.iter_mut().zip(tensors).enumerate() {
        ensure!(p.value.shape() == t.shape(), "tensor {i}: checkpoint {:?}, model {:?}", t.shape(), p.value.shape());
        p.value = t.clone();
        p.zero_grad();
    }
    Ok(())
}
