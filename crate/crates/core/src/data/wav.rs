//! Mono 16-bit PCM RIFF/WAVE reading and writing.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
}

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Maps a sample in `[-1, 1]` to a 16-bit code, rounding half away from
/// zero and clipping to the representable range.
pub fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn dequantize(q: i16) -> f64 {
    f64::from(q) / 32768.0
}

/// Rounds a signal onto the 16-bit grid without leaving `f64`.
pub fn snap_to_pcm16(signal: &[f64]) -> Vec<f64> {
    signal.iter().map(|&x| dequantize(quantize(x))).collect()
}

pub fn encode_wav<W: Write>(mut w: W, signal: &[f64], sample_rate: u32) -> Result<(), WavError> {
    let data_len = u32::try_from(signal.len() * 2)
        .map_err(|_| WavError::UnsupportedFormat("signal too long for RIFF".into()))?;
    w.write_all(b"RIFF")?;
    w.write_all(&(36 + data_len).to_le_bytes())?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_all(&16u32.to_le_bytes())?;
    w.write_all(&FORMAT_PCM.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?;
    w.write_all(&sample_rate.to_le_bytes())?;
    w.write_all(&(sample_rate * 2).to_le_bytes())?;
    w.write_all(&2u16.to_le_bytes())?;
    w.write_all(&16u16.to_le_bytes())?;
    w.write_all(b"data")?;
    w.write_all(&data_len.to_le_bytes())?;
    for &x in signal {
        w.write_all(&quantize(x).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses a complete WAV file held in memory.
pub fn decode_wav(bytes: &[u8]) -> Result<(Vec<f64>, u32), WavError> {
    let corrupt = |m: &str| WavError::CorruptHeader(m.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(corrupt("missing RIFF/WAVE signature"));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u32)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| corrupt("chunk size overflow"))?;
        match id {
            b"fmt " => {
                if size < 16 || body_end > bytes.len() {
                    return Err(corrupt("fmt chunk too short"));
                }
                let body = &bytes[body_start..body_end];
                let mut tag = u16_at(body, 0);
                let channels = u16_at(body, 2);
                let rate = u32_at(body, 4);
                let bits = u16_at(body, 14);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(corrupt("extensible fmt chunk too short"));
                    }
                    tag = u16_at(body, 24);
                }
                if tag != FORMAT_PCM {
                    return Err(WavError::UnsupportedFormat(format!(
                        "format tag {tag:#06x}"
                    )));
                }
                if channels != 1 {
                    return Err(WavError::UnsupportedFormat(format!("{channels} channels")));
                }
                if bits != 16 {
                    return Err(WavError::UnsupportedFormat(format!("{bits}-bit samples")));
                }
                if rate == 0 {
                    return Err(corrupt("zero sample rate"));
                }
                format = Some((tag, rate));
            }
            b"data" => {
                let (_, rate) = format.ok_or_else(|| corrupt("data chunk before fmt chunk"))?;
                if body_end > bytes.len() {
                    return Err(corrupt("data chunk runs past end of file"));
                }
                if size % 2 == 1 {
                    return Err(corrupt("odd data length for 16-bit samples"));
                }
                let samples = bytes[body_start..body_end]
                    .chunks_exact(2)
                    .map(|c| dequantize(i16::from_le_bytes([c[0], c[1]])))
                    .collect();
                return Ok((samples, rate));
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }
    Err(corrupt(if format.is_some() {
        "missing data chunk"
    } else {
        "missing fmt chunk"
    }))
}

/// Reads a mono 16-bit WAV into samples in `[-1, 1)` and its sample rate.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32), WavError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_wav(&bytes)
}

pub fn write_wav(path: impl AsRef<Path>, signal: &[f64], sample_rate: u32) -> Result<(), WavError> {
    encode_wav(BufWriter::new(File::create(path)?), signal, sample_rate)
}
