//! Binary checkpoints of the full coefficient vectors.
//!
//! Layout (little endian): magic `QLCK`, `u32` version, `u32` dimension,
//! `u64` step, `f64` time, `u64` velocity count, `u64` pressure count, then
//! the velocity and pressure coefficients as `f64`.

use std::io::{Read, Write};
use std::path::Path;

use super::IoError;
use crate::scalar::Real;
use crate::solver::FlowState;

const MAGIC: &[u8; 4] = b"QLCK";
const VERSION: u32 = 1;

pub fn write_checkpoint<T: Real>(path: &Path, dim: usize, state: &FlowState<T>) -> Result<(), IoError> {
    let io = |e| IoError::File { path: path.to_path_buf(), source: e };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    (|| -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(dim as u32).to_le_bytes())?;
        w.write_all(&(state.step as u64).to_le_bytes())?;
        w.write_all(&state.time.to_f64_lossy().to_le_bytes())?;
        w.write_all(&(state.u.len() as u64).to_le_bytes())?;
        w.write_all(&(state.p.len() as u64).to_le_bytes())?;
        for v in state.u.iter().chain(&state.p) {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        w.flush()
    })()
    .map_err(io)
}

/// Reads a checkpoint; returns the stored dimension and state.
pub fn read_checkpoint<T: Real>(path: &Path) -> Result<(usize, FlowState<T>), IoError> {
    let bad = |m: String| IoError::Checkpoint { path: path.to_path_buf(), message: m };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| IoError::File { path: path.to_path_buf(), source: e })?;
    let mut pos = 0;
    let mut take = |n: usize| -> Result<&[u8], IoError> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated file".into()))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());
    let version = u32_at(take(4)?);
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let dim = u32_at(take(4)?) as usize;
    let step = u64_at(take(8)?) as usize;
    let time = f64::from_le_bytes(take(8)?.try_into().unwrap());
    let nu = u64_at(take(8)?) as usize;
    let np = u64_at(take(8)?) as usize;
    let mut read = |n: usize| -> Result<Vec<T>, IoError> {
        (0..n).map(|_| Ok(T::of(f64::from_le_bytes(take(8)?.try_into().unwrap())))).collect()
    };
    let u = read(nu)?;
    let p = read(np)?;
    if pos != bytes.len() {
        return Err(bad("trailing bytes after the coefficients".into()));
    }
    Ok((dim, FlowState { step, time: T::of(time), u, p }))
}
