//! Segment-wise signal-to-distortion ratio and its summary statistics.
//!
//! Signals are cut into non-overlapping one-second frames, each frame is
//! scored independently, and the scores are summarized per song and over the
//! dataset with mean, median, standard deviation and median absolute
//! deviation.

use std::io::{self, Write};

use thiserror::Error;

/// Bounds every SDR value so silent frames cannot produce infinities.
pub const SDR_CLAMP_DB: f64 = 100.0;
const SDR_EPS: f64 = 1e-20;
/// Reference frames with mean power below this (-60 dBFS) count as silent.
pub const SILENCE_POWER: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdrError {
    #[error("signal is empty")]
    EmptySignal,
    #[error("sample rate must be positive")]
    InvalidRate,
    #[error("reference has {reference} samples but estimate has {estimate}")]
    LengthMismatch { reference: usize, estimate: usize },
    #[error("no segments to aggregate")]
    NoSegments,
}

/// Consecutive frames of exactly `sample_rate` samples; a trailing partial
/// frame is dropped.
pub fn segment(signal: &[f64], sample_rate: u32) -> Result<Vec<&[f64]>, SdrError> {
    if sample_rate == 0 {
        return Err(SdrError::InvalidRate);
    }
    if signal.is_empty() {
        return Err(SdrError::EmptySignal);
    }
    Ok(signal.chunks_exact(sample_rate as usize).collect())
}

/// `10 log10((|ref|^2 + eps) / (|ref - est|^2 + eps))`, clamped to ±100 dB.
pub fn segment_sdr(reference: &[f64], estimate: &[f64]) -> Result<f64, SdrError> {
    if reference.len() != estimate.len() {
        return Err(SdrError::LengthMismatch {
            reference: reference.len(),
            estimate: estimate.len(),
        });
    }
    let signal: f64 = reference.iter().map(|r| r * r).sum();
    let error: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| (r - e) * (r - e))
        .sum();
    let db = 10.0 * ((signal + SDR_EPS) / (error + SDR_EPS)).log10();
    Ok(db.clamp(-SDR_CLAMP_DB, SDR_CLAMP_DB))
}

fn is_silent(frame: &[f64]) -> bool {
    let power = frame.iter().map(|r| r * r).sum::<f64>() / frame.len() as f64;
    power < SILENCE_POWER
}

/// Mean, median, standard deviation and MAD of one population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub sd: f64,
    /// `median(|x - median(x)|)`
    pub mad: f64,
}

fn median_of(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        // Sum in sorted order so the result does not depend on input order.
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n;
        let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let median = median_of(&sorted);
        let deviations: Vec<f64> = sorted.iter().map(|v| (v - median).abs()).collect();
        Some(Summary {
            count: values.len(),
            mean,
            median,
            sd: var.sqrt(),
            mad: median_of(&deviations),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Vocals,
    Accompaniment,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Vocals => "vocals",
            Source::Accompaniment => "accompaniment",
        }
    }
}

/// Segment SDRs of one song for one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SongScores {
    pub song: String,
    pub source: Source,
    pub segments: Vec<f64>,
    /// Segments whose reference was silent.
    pub silent_segments: usize,
}

impl SongScores {
    /// Scores `estimate` against `reference` frame by frame.
    pub fn score(
        song: impl Into<String>,
        source: Source,
        reference: &[f64],
        estimate: &[f64],
        sample_rate: u32,
    ) -> Result<SongScores, SdrError> {
        if reference.len() != estimate.len() {
            return Err(SdrError::LengthMismatch {
                reference: reference.len(),
                estimate: estimate.len(),
            });
        }
        let refs = segment(reference, sample_rate)?;
        let ests = segment(estimate, sample_rate)?;
        let segments = refs
            .iter()
            .zip(&ests)
            .map(|(r, e)| segment_sdr(r, e))
            .collect::<Result<Vec<_>, _>>()?;
        let silent_segments = refs.iter().filter(|r| is_silent(r)).count();
        Ok(SongScores {
            song: song.into(),
            source,
            segments,
            silent_segments,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SongSummary {
    pub song: String,
    pub source: Source,
    pub stats: Summary,
    pub silent_segments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub source: Source,
    /// Statistics over song-level values: mean and SD over song means,
    /// median and MAD over song medians.
    pub songs: Summary,
    /// Statistics over all segments pooled together.
    pub pooled: Summary,
    pub silent_segments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdrReport {
    /// Song summaries sorted by (song, source).
    pub per_song: Vec<SongSummary>,
    /// One entry per source present, sorted by source.
    pub dataset: Vec<DatasetSummary>,
}

/// Summarizes segment scores per song and over the dataset. Songs without
/// any full segment are skipped.
pub fn aggregate(scores: &[SongScores]) -> Result<SdrReport, SdrError> {
    let mut per_song: Vec<SongSummary> = scores
        .iter()
        .filter_map(|s| {
            Summary::of(&s.segments).map(|stats| SongSummary {
                song: s.song.clone(),
                source: s.source,
                stats,
                silent_segments: s.silent_segments,
            })
        })
        .collect();
    if per_song.is_empty() {
        return Err(SdrError::NoSegments);
    }
    per_song.sort_by(|a, b| (&a.song, a.source).cmp(&(&b.song, b.source)));

    let mut sources: Vec<Source> = per_song.iter().map(|s| s.source).collect();
    sources.sort();
    sources.dedup();

    let dataset = sources
        .into_iter()
        .map(|source| {
            let songs: Vec<&SongSummary> = per_song.iter().filter(|s| s.source == source).collect();
            let means: Vec<f64> = songs.iter().map(|s| s.stats.mean).collect();
            let medians: Vec<f64> = songs.iter().map(|s| s.stats.median).collect();
            let by_mean = Summary::of(&means).expect("at least one song");
            let by_median = Summary::of(&medians).expect("at least one song");
            let pooled_values: Vec<f64> = scores
                .iter()
                .filter(|s| s.source == source)
                .flat_map(|s| s.segments.iter().copied())
                .collect();
            DatasetSummary {
                source,
                songs: Summary {
                    count: songs.len(),
                    mean: by_mean.mean,
                    sd: by_mean.sd,
                    median: by_median.median,
                    mad: by_median.mad,
                },
                pooled: Summary::of(&pooled_values).expect("at least one segment"),
                silent_segments: songs.iter().map(|s| s.silent_segments).sum(),
            }
        })
        .collect();

    Ok(SdrReport { per_song, dataset })
}

/// Row label used for the dataset summary over song-level values.
pub const DATASET_ROW: &str = "__dataset__";
/// Row label used for the statistics over pooled segments.
pub const POOLED_ROW: &str = "__pooled__";

impl SdrReport {
    pub fn dataset_summary(&self, source: Source) -> Option<&DatasetSummary> {
        self.dataset.iter().find(|d| d.source == source)
    }

    /// Writes `song,source,segments,mean,median,sd,mad`, one row per song and
    /// source, then the dataset and pooled summary rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "song,source,segments,mean,median,sd,mad")?;
        let row = |w: &mut W, song: &str, source: Source, s: &Summary| {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                song,
                source.name(),
                s.count,
                s.mean,
                s.median,
                s.sd,
                s.mad
            )
        };
        for s in &self.per_song {
            row(&mut w, &s.song, s.source, &s.stats)?;
        }
        for d in &self.dataset {
            let pooled_segments = Summary {
                count: d.pooled.count,
                ..d.songs
            };
            row(&mut w, DATASET_ROW, d.source, &pooled_segments)?;
        }
        for d in &self.dataset {
            row(&mut w, POOLED_ROW, d.source, &d.pooled)?;
        }
        w.flush()
    }
}
