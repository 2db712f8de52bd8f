//! End-to-end steps shared by the CLI and the tests: the two-phase training
//! protocol, test-set evaluation and per-layer energy inspection.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{Dataset, Song};
use crate::energy::{
    layer_energy, normalized_layer_energy, pair_distance, project_to_sphere, Distance, EnergyError,
    FilterBank, MheConfig, DEFAULT_CLAMP_EPSILON,
};
use crate::net::{NetError, SepNet};
use crate::sdr::{aggregate, SdrError, SdrReport, SongScores, Source};
use crate::train::{finetune, train, TrainConfig, TrainError, TrainLog};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Sdr(#[from] SdrError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("no test songs to evaluate")]
    NoTestSongs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub net: SepNet,
    pub val_loss: f64,
    /// Both phases, with epoch numbers continuing across the boundary.
    pub log: TrainLog,
}

/// Trains `net`, then fine-tunes the best parameters when enabled.
pub fn run_protocol(
    net: SepNet,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<RunOutcome, PipelineError> {
    let first = train(net, data, cfg)?;
    let mut log = first.log;
    if !cfg.finetune.enabled {
        return Ok(RunOutcome {
            net: first.best,
            val_loss: first.best_val_loss,
            log,
        });
    }
    let second = finetune(first.best, data, cfg, log.last_epoch())?;
    log.extend(second.log);
    Ok(RunOutcome {
        net: second.best,
        val_loss: second.best_val_loss,
        log,
    })
}

fn score_song(net: &SepNet, song: &Song) -> Result<[SongScores; 2], PipelineError> {
    let (vocals, accompaniment) = net.separate(&song.mixture)?;
    let rate = song.sample_rate;
    Ok([
        SongScores::score(&song.name, Source::Vocals, &song.vocals, &vocals, rate)?,
        SongScores::score(
            &song.name,
            Source::Accompaniment,
            &song.accompaniment,
            &accompaniment,
            rate,
        )?,
    ])
}

/// Separates every song and scores both sources segment by segment.
pub fn evaluate(net: &SepNet, songs: &[Song]) -> Result<SdrReport, PipelineError> {
    if songs.is_empty() {
        return Err(PipelineError::NoTestSongs);
    }
    let scores = songs
        .par_iter()
        .map(|song| score_song(net, song))
        .collect::<Result<Vec<_>, _>>()?;
    let flat: Vec<SongScores> = scores.into_iter().flatten().collect();
    Ok(aggregate(&flat)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerEnergy {
    pub layer_id: usize,
    pub neurons: usize,
    pub dim: usize,
    pub energy: f64,
    pub normalized_energy: f64,
    pub clamped_pairs: usize,
}

pub const ENERGY_HEADER: &str = "layer_id,N,D,energy,normalized_energy,clamped_pairs";

/// Energy of every regularized layer of `net`.
pub fn inspect_energy(
    net: &SepNet,
    cfg: &MheConfig,
    include_output: bool,
) -> Result<Vec<LayerEnergy>, PipelineError> {
    net.collect_filter_banks(include_output)
        .iter()
        .map(|bank| {
            let raw = layer_energy(bank, cfg)?;
            let normalized = normalized_layer_energy(bank, cfg)?;
            Ok(LayerEnergy {
                layer_id: bank.layer_id(),
                neurons: bank.neurons(),
                dim: bank.dim(),
                energy: raw.energy,
                normalized_energy: normalized.energy,
                clamped_pairs: raw.clamped_pairs,
            })
        })
        .collect()
}

pub fn write_energy_csv<W: Write>(rows: &[LayerEnergy], mut w: W) -> io::Result<()> {
    writeln!(w, "{ENERGY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.layer_id, r.neurons, r.dim, r.energy, r.normalized_energy, r.clamped_pairs
        )?;
    }
    w.flush()
}

/// Smallest angle between any two filters of a bank, in radians.
pub fn min_pairwise_angle(bank: &FilterBank) -> Result<f64, EnergyError> {
    let (unit, _) = project_to_sphere(bank.weights(), DEFAULT_CLAMP_EPSILON)?;
    let mut min = f64::INFINITY;
    for i in 0..unit.nrows() {
        for k in i + 1..unit.nrows() {
            min = min.min(pair_distance(
                unit.row(i),
                unit.row(k),
                Distance::Angular,
                0.0,
            ));
        }
    }
    Ok(min)
}
