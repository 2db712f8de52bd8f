//! Songs, dataset manifests and loaders.
//!
//! A dataset is a directory with one folder per song holding `vocals.wav`,
//! `accompaniment.wav` and optionally `mixture.wav`, described by a JSON
//! manifest that assigns every song to the train, validation or test split.

pub mod synth;
pub mod wav;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};
pub use synth::{generate_dataset, GenParams};
pub use wav::{read_wav, write_wav, WavError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Wav { path: PathBuf, source: WavError },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("song '{song}': {reason}")]
    InvalidSong { song: String, reason: String },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}

/// One two-source song. All three signals share a length and sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Song {
    pub name: String,
    pub vocals: Vec<f64>,
    pub accompaniment: Vec<f64>,
    pub mixture: Vec<f64>,
    pub sample_rate: u32,
}

impl Song {
    /// Builds a song whose mixture is the sum of its sources.
    pub fn from_sources(
        name: impl Into<String>,
        vocals: Vec<f64>,
        accompaniment: Vec<f64>,
        sample_rate: u32,
    ) -> Result<Song, DataError> {
        let name = name.into();
        if vocals.len() != accompaniment.len() {
            return Err(DataError::InvalidSong {
                song: name,
                reason: format!(
                    "vocals have {} samples, accompaniment {}",
                    vocals.len(),
                    accompaniment.len()
                ),
            });
        }
        let mixture = vocals
            .iter()
            .zip(&accompaniment)
            .map(|(v, a)| v + a)
            .collect();
        Ok(Song {
            name,
            vocals,
            accompaniment,
            mixture,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SongEntry {
    pub name: String,
    pub split: Split,
    /// Paths are relative to the manifest's directory unless absolute.
    pub vocals: PathBuf,
    pub accompaniment: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub sample_rate: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GenParams>,
    pub songs: Vec<SongEntry>,
}

impl DatasetManifest {
    pub fn names_in(&self, split: Split) -> Vec<&str> {
        self.songs
            .iter()
            .filter(|s| s.split == split)
            .map(|s| s.name.as_str())
            .collect()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut names: Vec<&str> = self.songs.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(DataError::Manifest(format!("song '{}' listed twice", w[0])));
        }
        if self.sample_rate == 0 {
            return Err(DataError::Manifest("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        let text =
            serde_json::to_string_pretty(self).map_err(|e| DataError::Manifest(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| DataError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DatasetManifest, DataError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| DataError::Manifest(format!("{}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }
}

/// Split sizes for `n` songs: a third for test and a quarter of the rest
/// for validation, keeping at least one training song.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let test = n / 3;
    let dev = n - test;
    let validation = if dev >= 2 { (dev / 4).max(1) } else { 0 };
    (dev - validation, validation, test)
}

/// Seeded random split assignment, one entry per song in input order.
pub fn assign_splits(n: usize, seed: u64) -> Vec<Split> {
    let (train, validation, _) = split_sizes(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Stream::Split));
    let mut splits = vec![Split::Test; n];
    for (rank, &idx) in order.iter().enumerate() {
        splits[idx] = if rank < train {
            Split::Train
        } else if rank < train + validation {
            Split::Validation
        } else {
            Split::Test
        };
    }
    splits
}

/// Builds a manifest for a directory of song folders, each holding
/// `vocals.wav` and `accompaniment.wav`. Folders are taken in name order.
pub fn scan_wav_dir(dir: impl AsRef<Path>, seed: u64) -> Result<DatasetManifest, DataError> {
    let dir = dir.as_ref();
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| DataError::io(dir, e))? {
        let entry = entry.map_err(|e| DataError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir()
            && path.join("vocals.wav").is_file()
            && path.join("accompaniment.wav").is_file()
        {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    if names.is_empty() {
        return Err(DataError::Manifest(format!(
            "no song folders in {}",
            dir.display()
        )));
    }
    names.sort();
    let first = Path::new(&names[0]).join("vocals.wav");
    let (_, sample_rate) = read_wav(dir.join(&first)).map_err(|e| DataError::Wav {
        path: dir.join(&first),
        source: e,
    })?;
    let splits = assign_splits(names.len(), seed);
    let songs = names
        .into_iter()
        .zip(splits)
        .map(|(name, split)| {
            let folder = PathBuf::from(&name);
            let mixture = folder.join("mixture.wav");
            SongEntry {
                vocals: folder.join("vocals.wav"),
                accompaniment: folder.join("accompaniment.wav"),
                mixture: dir.join(&mixture).is_file().then_some(mixture),
                name,
                split,
            }
        })
        .collect();
    Ok(DatasetManifest {
        sample_rate,
        seed,
        generator: None,
        songs,
    })
}

fn read_checked(path: &Path, rate: u32, song: &str) -> Result<Vec<f64>, DataError> {
    let (signal, r) = read_wav(path).map_err(|e| DataError::Wav {
        path: path.to_path_buf(),
        source: e,
    })?;
    if r != rate {
        return Err(DataError::InvalidSong {
            song: song.to_string(),
            reason: format!("{} has rate {r}, expected {rate}", path.display()),
        });
    }
    Ok(signal)
}

/// Songs grouped by split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<Song>,
    pub validation: Vec<Song>,
    pub test: Vec<Song>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Song] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    /// Loads every song of a manifest; relative paths resolve against `root`.
    pub fn load(manifest: &DatasetManifest, root: impl AsRef<Path>) -> Result<Dataset, DataError> {
        let root = root.as_ref();
        let mut ds = Dataset::default();
        for entry in &manifest.songs {
            let rate = manifest.sample_rate;
            let vocals = read_checked(&root.join(&entry.vocals), rate, &entry.name)?;
            let accompaniment = read_checked(&root.join(&entry.accompaniment), rate, &entry.name)?;
            let mut song = Song::from_sources(entry.name.clone(), vocals, accompaniment, rate)?;
            if let Some(m) = &entry.mixture {
                let mixture = read_checked(&root.join(m), rate, &entry.name)?;
                if mixture.len() != song.len() {
                    return Err(DataError::InvalidSong {
                        song: entry.name.clone(),
                        reason: "mixture length differs from sources".into(),
                    });
                }
                song.mixture = mixture;
            }
            match entry.split {
                Split::Train => ds.train.push(song),
                Split::Validation => ds.validation.push(song),
                Split::Test => ds.test.push(song),
            }
        }
        Ok(ds)
    }

    /// Loads from a manifest file, or scans a song directory when `path`
    /// is a directory without one.
    pub fn open(
        path: impl AsRef<Path>,
        seed: u64,
    ) -> Result<(DatasetManifest, Dataset), DataError> {
        let path = path.as_ref();
        let (manifest, root) = if path.is_dir() {
            let file = path.join(MANIFEST_FILE);
            if file.is_file() {
                (DatasetManifest::load(&file)?, path.to_path_buf())
            } else {
                (scan_wav_dir(path, seed)?, path.to_path_buf())
            }
        } else {
            let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (DatasetManifest::load(path)?, root)
        };
        let ds = Dataset::load(&manifest, &root)?;
        Ok((manifest, ds))
    }
}
