//! Synthetic two-source songs.
//!
//! Vocals are phrases of harmonic tones with vibrato and soft note envelopes,
//! separated by silent gaps; the accompaniment is low-passed noise under a few
//! sustained low tones. Both sources are snapped to the 16-bit grid before
//! mixing, so the stored mixture is exactly the sum of the stored sources.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::wav::{snap_to_pcm16, write_wav};
use super::{assign_splits, DataError, DatasetManifest, Song, SongEntry, MANIFEST_FILE};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n_songs: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl GenParams {
    fn validate(&self) -> Result<(), DataError> {
        if self.n_songs == 0 {
            return Err(DataError::InvalidParams("need at least one song".into()));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(DataError::InvalidParams(format!(
                "duration {} s",
                self.duration_s
            )));
        }
        if self.sample_rate < 1000 {
            return Err(DataError::InvalidParams(format!(
                "sample rate {} Hz is below 1 kHz",
                self.sample_rate
            )));
        }
        Ok(())
    }

    fn samples(&self) -> usize {
        (self.duration_s * f64::from(self.sample_rate)).round() as usize
    }
}

/// A sounding interval, in samples.
#[derive(Debug, Clone, Copy)]
struct Note {
    start: usize,
    len: usize,
}

/// Notes separated by gaps of at least a quarter of the preceding note,
/// with a lead-in gap; every note and its trailing gap fit in the song.
fn plan_notes(rng: &mut ChaCha8Rng, total: usize, rate: f64) -> Vec<Note> {
    let mut notes = Vec::new();
    let mut t = (rng.gen_range(0.1..0.3) * rate) as usize;
    let min_note = (0.15 * rate) as usize;
    while t < total {
        let remaining = total - t;
        let wanted = (rng.gen_range(0.3..1.0) * rate) as usize;
        let gap_ratio = rng.gen_range(0.25..0.6);
        let len = wanted.min((remaining as f64 / (1.0 + gap_ratio)) as usize);
        if len < min_note {
            break;
        }
        notes.push(Note { start: t, len });
        t += len + ((len as f64 * gap_ratio).ceil() as usize);
    }
    notes
}

/// Raised-cosine attack and release inside the note.
fn note_envelope(i: usize, len: usize, rate: f64) -> f64 {
    let attack = ((0.02 * rate) as usize).clamp(1, len / 2 + 1);
    let release = ((0.03 * rate) as usize).clamp(1, len / 2 + 1);
    let ramp = |x: f64| 0.5 - 0.5 * (std::f64::consts::PI * x.clamp(0.0, 1.0)).cos();
    let a = ramp(i as f64 / attack as f64);
    let r = ramp((len - i) as f64 / release as f64);
    // slight decay over the note
    a * r * (1.0 - 0.3 * i as f64 / len as f64)
}

fn synth_vocals(rng: &mut ChaCha8Rng, total: usize, rate: f64) -> Vec<f64> {
    let tones = rng.gen_range(1..=3usize);
    let nyquist_margin = 0.45 * rate;
    let mut out = vec![0.0; total];
    for note in plan_notes(rng, total, rate) {
        for _ in 0..tones {
            let f0: f64 = rng.gen_range(200.0..600.0);
            let vib_rate: f64 = rng.gen_range(4.0..7.0);
            let vib_depth: f64 = rng.gen_range(0.005..0.02);
            let harmonics = ((nyquist_margin / (f0 * (1.0 + vib_depth))) as usize).clamp(1, 8);
            let mut phase = rng.gen_range(0.0..TAU);
            for i in 0..note.len {
                let t = i as f64 / rate;
                let f = f0 * (1.0 + vib_depth * (TAU * vib_rate * t).sin());
                phase = (phase + TAU * f / rate) % TAU;
                let voice: f64 = (1..=harmonics)
                    .map(|k| (k as f64 * phase).sin() / k as f64)
                    .sum();
                out[note.start + i] += voice * note_envelope(i, note.len, rate);
            }
        }
    }
    out
}

fn synth_accompaniment(rng: &mut ChaCha8Rng, total: usize, rate: f64) -> Vec<f64> {
    let cutoff: f64 = rng.gen_range(300.0..800.0);
    let alpha = 1.0 - (-TAU * cutoff / rate).exp();
    let mut noise = Vec::with_capacity(total);
    let mut y = 0.0;
    for _ in 0..total {
        let x: f64 = rng.sample(StandardNormal);
        y += alpha * (x - y);
        noise.push(y);
    }
    let noise_peak = peak(&noise).max(f64::MIN_POSITIVE);
    let noise_gain = rng.gen_range(0.2..0.5) / noise_peak;

    let n_tones = rng.gen_range(2..=3usize);
    let tones: Vec<(f64, f64, f64, f64)> = (0..n_tones)
        .map(|_| {
            (
                rng.gen_range(55.0..200.0),
                rng.gen_range(0.3..1.0),
                rng.gen_range(0.1..0.5),
                rng.gen_range(0.0..TAU),
            )
        })
        .collect();
    (0..total)
        .map(|i| {
            let t = i as f64 / rate;
            let pad: f64 = tones
                .iter()
                .map(|&(f, amp, lfo, ph)| {
                    amp * (0.75 + 0.25 * (TAU * lfo * t).sin()) * (TAU * f * t + ph).sin()
                })
                .sum();
            noise[i] * noise_gain + pad
        })
        .collect()
}

fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn normalize_to(x: &mut [f64], target: f64) {
    let p = peak(x);
    if p > 0.0 {
        let g = target / p;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Generates one song in memory from its own seeded stream.
pub fn synth_song(params: &GenParams, index: usize) -> Song {
    let mut rng = rng::substream(params.seed, Stream::Dataset, index as u64);
    let rate = f64::from(params.sample_rate);
    let total = params.samples();
    let mut vocals = synth_vocals(&mut rng, total, rate);
    let mut accompaniment = synth_accompaniment(&mut rng, total, rate);
    // each source peaks below 0.45, so the mixture stays inside [-0.9, 0.9]
    normalize_to(&mut vocals, rng.gen_range(0.3..0.45));
    normalize_to(&mut accompaniment, rng.gen_range(0.3..0.45));
    let vocals = snap_to_pcm16(&vocals);
    let accompaniment = snap_to_pcm16(&accompaniment);
    Song::from_sources(song_name(index), vocals, accompaniment, params.sample_rate)
        .expect("sources share a length")
}

fn song_name(index: usize) -> String {
    format!("song_{index:03}")
}

/// Writes `n_songs` synthetic songs and a manifest into `out_dir`.
pub fn generate_dataset(
    params: &GenParams,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest, DataError> {
    params.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| DataError::io(out_dir, e))?;
    let splits = assign_splits(params.n_songs, params.seed);

    let entries = (0..params.n_songs)
        .into_par_iter()
        .map(|index| -> Result<SongEntry, DataError> {
            let song = synth_song(params, index);
            let folder = PathBuf::from(&song.name);
            let abs = out_dir.join(&folder);
            fs::create_dir_all(&abs).map_err(|e| DataError::io(&abs, e))?;
            let write = |file: &str, signal: &[f64]| {
                let path = abs.join(file);
                write_wav(&path, signal, params.sample_rate)
                    .map_err(|e| DataError::Wav { path, source: e })
            };
            write("vocals.wav", &song.vocals)?;
            write("accompaniment.wav", &song.accompaniment)?;
            write("mixture.wav", &song.mixture)?;
            Ok(SongEntry {
                name: song.name,
                split: splits[index],
                vocals: folder.join("vocals.wav"),
                accompaniment: folder.join("accompaniment.wav"),
                mixture: Some(folder.join("mixture.wav")),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let manifest = DatasetManifest {
        sample_rate: params.sample_rate,
        seed: params.seed,
        generator: Some(params.clone()),
        songs: entries,
    };
    manifest.save(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Fraction of `signal` in 10 ms frames whose RMS is below `threshold`.
pub fn silent_fraction(signal: &[f64], sample_rate: u32, threshold: f64) -> f64 {
    let frame = (sample_rate as usize / 100).max(1);
    let frames: Vec<&[f64]> = signal.chunks_exact(frame).collect();
    if frames.is_empty() {
        return 0.0;
    }
    let silent = frames
        .iter()
        .filter(|f| (f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64).sqrt() < threshold)
        .count();
    silent as f64 / frames.len() as f64
}
