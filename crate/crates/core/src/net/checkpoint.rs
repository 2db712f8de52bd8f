//! Checkpoint files.
//!
//! Layout: the five ASCII bytes `HSEP1`, a little-endian `u32` byte length,
//! that many bytes of `NetConfig` JSON, then every layer in declared order as
//! its weights (`[c_out][c_in][k]`) followed by its biases, each value a
//! little-endian IEEE-754 `f64`. Nothing may follow the last layer.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{NetConfig, NetError, SepNet};

const MAGIC: &[u8; 5] = b"HSEP1";
const MAX_HEADER: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("malformed config header: {0}")]
    Header(String),
    #[error("checkpoint ends before all parameters were read")]
    Truncated,
    #[error("unexpected bytes after the last layer")]
    TrailingBytes,
    #[error(transparent)]
    Net(#[from] NetError),
}

pub fn write_checkpoint<W: Write>(net: &SepNet, mut w: W) -> Result<(), CheckpointError> {
    let header =
        serde_json::to_vec(net.config()).map_err(|e| CheckpointError::Header(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    for layer in net.layers() {
        for &v in &net.params()[layer.weight_range()] {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in &net.params()[layer.bias_range()] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), CheckpointError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => CheckpointError::Truncated,
        _ => CheckpointError::Io(e),
    })
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<SepNet, CheckpointError> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| CheckpointError::BadMagic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut len = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_HEADER {
        return Err(CheckpointError::Header(format!("header of {len} bytes")));
    }
    let mut header = vec![0u8; len];
    read_exact_or_truncated(&mut r, &mut header)?;
    let cfg: NetConfig =
        serde_json::from_slice(&header).map_err(|e| CheckpointError::Header(e.to_string()))?;
    cfg.validate()?;

    let (_, total) = super::build_layers(&cfg);
    // Layers are contiguous weights-then-bias, so the file order is the
    // flat parameter order.
    let mut params = Vec::with_capacity(total);
    let mut buf = [0u8; 8];
    for _ in 0..total {
        read_exact_or_truncated(&mut r, &mut buf)?;
        params.push(f64::from_le_bytes(buf));
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(CheckpointError::TrailingBytes);
    }
    Ok(SepNet::from_parts(cfg, params)?)
}

pub fn save_checkpoint(net: &SepNet, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    write_checkpoint(net, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SepNet, CheckpointError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
