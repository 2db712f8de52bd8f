//! Training with the MHE-regularized loss.
//!
//! The objective is the per-sample MSE of the vocal estimate plus
//! `lambda * sum_j E_j / (N_j (N_j - 1))` over the hidden conv layers. Training
//! runs in epochs of a fixed number of random-crop batches, validates after
//! every epoch and stops after `patience_epochs` epochs without improvement.
//! An optional fine-tuning phase continues from the best checkpoint with a
//! larger batch and a smaller learning rate.

mod adam;
mod log;

pub use adam::{adam_step, AdamParams, AdamState};
pub use log::{EpochRecord, TrainLog, LOG_HEADER};

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Song};
use crate::energy::{mhe_penalty, EnergyError, MheConfig};
use crate::net::{NetConfig, NetError, SepNet};
use crate::rng::{self, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("signals differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}

/// How the regularization weight is derived from the hidden layer count `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaMode {
    #[serde(rename = "half_inv_L")]
    HalfInvL,
    #[serde(rename = "inv_L")]
    InvL,
    #[serde(rename = "one")]
    One,
    #[serde(rename = "custom")]
    Custom(f64),
    #[serde(rename = "off")]
    Off,
}

impl LambdaMode {
    pub fn resolve(&self, hidden_layers: usize) -> f64 {
        let l = hidden_layers as f64;
        match *self {
            LambdaMode::HalfInvL => 1.0 / (2.0 * l),
            LambdaMode::InvL => 1.0 / l,
            LambdaMode::One => 1.0,
            LambdaMode::Custom(v) => v,
            LambdaMode::Off => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub enabled: bool,
    pub batch_multiplier: usize,
    pub learning_rate: f64,
    /// Epoch cap for the fine-tuning phase; `None` runs until patience.
    pub max_epochs: Option<usize>,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            batch_multiplier: 2,
            learning_rate: 1e-5,
            max_epochs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub iterations_per_epoch: usize,
    pub patience_epochs: usize,
    /// Epoch cap for the first phase; `None` runs until patience.
    pub max_epochs: Option<usize>,
    pub lambda_mode: LambdaMode,
    pub mhe: MheConfig,
    /// Regularize the output layer too (it then counts towards `L`).
    pub include_output_layer: bool,
    pub finetune: FinetuneConfig,
    /// Vocal attenuation factors are drawn uniformly from this range.
    pub augment_range: [f64; 2],
    /// Average the vocal and accompaniment MSE instead of vocals only.
    pub loss_on_both: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            iterations_per_epoch: 1000,
            patience_epochs: 10,
            max_epochs: None,
            lambda_mode: LambdaMode::InvL,
            mhe: MheConfig::default(),
            include_output_layer: false,
            finetune: FinetuneConfig::default(),
            augment_range: [0.7, 1.0],
            loss_on_both: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.batch_size == 0 || self.iterations_per_epoch == 0 || self.patience_epochs == 0 {
            return bad(
                "batch_size, iterations_per_epoch and patience_epochs must be positive".into(),
            );
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("adam_epsilon", self.adam_epsilon),
            ("finetune.learning_rate", self.finetune.learning_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        let [lo, hi] = self.augment_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad(format!("augment_range [{lo}, {hi}] must lie within (0, 1]"));
        }
        if self.finetune.batch_multiplier == 0 {
            return bad("finetune.batch_multiplier must be positive".into());
        }
        if let LambdaMode::Custom(v) = self.lambda_mode {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("custom lambda must be non-negative, got {v}"));
            }
        }
        self.mhe.validate()?;
        Ok(())
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }

    /// Regularization weight for `net` under this configuration.
    pub fn lambda_for(&self, net: &SepNet) -> f64 {
        let layers = net.hidden_layer_count() + usize::from(self.include_output_layer);
        self.lambda_mode.resolve(layers)
    }
}

/// A training config file: the training fields plus the network under `net`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub net: NetConfig,
    #[serde(flatten)]
    pub train: TrainConfig,
}

/// One aligned crop of a song.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub mixture: Vec<f64>,
    pub vocals: Vec<f64>,
    pub accompaniment: Vec<f64>,
}

/// Attenuates the vocals by `factor` and rebuilds the mixture from the
/// attenuated vocals.
pub fn augment_with_factor(
    vocals: &[f64],
    accompaniment: &[f64],
    factor: f64,
) -> Result<(Vec<f64>, Vec<f64>), TrainError> {
    if vocals.len() != accompaniment.len() {
        return Err(TrainError::LengthMismatch(
            vocals.len(),
            accompaniment.len(),
        ));
    }
    let v: Vec<f64> = vocals.iter().map(|x| factor * x).collect();
    let m = accompaniment.iter().zip(&v).map(|(a, v)| a + v).collect();
    Ok((v, m))
}

/// [`augment_with_factor`] with a factor drawn uniformly from `range`.
pub fn augment<R: Rng>(
    vocals: &[f64],
    accompaniment: &[f64],
    range: [f64; 2],
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>), TrainError> {
    let factor = if range[0] == range[1] {
        range[0]
    } else {
        rng.gen_range(range[0]..=range[1])
    };
    augment_with_factor(vocals, accompaniment, factor)
}

fn crop(song: &Song, start: usize, len: usize) -> Example {
    let take = |x: &[f64]| {
        let mut v: Vec<f64> = x.iter().skip(start).take(len).copied().collect();
        v.resize(len, 0.0);
        v
    };
    Example {
        mixture: take(&song.mixture),
        vocals: take(&song.vocals),
        accompaniment: take(&song.accompaniment),
    }
}

/// A uniformly random song and crop start, then random vocal attenuation.
fn sample_example(
    songs: &[Song],
    len: usize,
    range: [f64; 2],
    sampling: &mut ChaCha8Rng,
    augmentation: &mut ChaCha8Rng,
) -> Result<Example, TrainError> {
    let song = &songs[sampling.gen_range(0..songs.len())];
    let start = if song.len() > len {
        sampling.gen_range(0..=song.len() - len)
    } else {
        0
    };
    let mut ex = crop(song, start, len);
    let (vocals, mixture) = augment(&ex.vocals, &ex.accompaniment, range, augmentation)?;
    ex.vocals = vocals;
    ex.mixture = mixture;
    Ok(ex)
}

/// Non-overlapping windows covering each song; a song shorter than one
/// window is zero-padded, otherwise the partial tail is dropped.
pub fn windows(songs: &[Song], len: usize) -> Vec<Example> {
    let mut out = Vec::new();
    for song in songs {
        if song.len() < len {
            out.push(crop(song, 0, len));
        } else {
            out.extend((0..song.len() / len).map(|i| crop(song, i * len, len)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub loss: f64,
    pub mse: f64,
    pub penalty: f64,
    pub lambda: f64,
    pub gradients: Vec<f64>,
}

/// Squared error and its gradient with respect to the vocal estimate for one
/// example, before averaging.
fn example_error(net: &SepNet, ex: &Example, both: bool) -> Result<(f64, Vec<f64>), TrainError> {
    let out = net.forward(&ex.mixture)?;
    let mut d_vocals = Vec::with_capacity(ex.vocals.len());
    let mut sq = 0.0;
    for i in 0..ex.vocals.len() {
        let ev = out.vocals[i] - ex.vocals[i];
        if both {
            let ea = out.accompaniment[i] - ex.accompaniment[i];
            sq += 0.5 * (ev * ev + ea * ea);
            d_vocals.push(ev - ea);
        } else {
            sq += ev * ev;
            d_vocals.push(2.0 * ev);
        }
    }
    Ok((sq, net.backward(&out, &d_vocals)?))
}

/// Full objective on a batch and its gradient with respect to every parameter.
pub fn compute_loss(
    net: &SepNet,
    batch: &[Example],
    cfg: &TrainConfig,
) -> Result<LossBreakdown, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyDataset("empty batch".into()));
    }
    let per_item = batch
        .par_iter()
        .map(|ex| example_error(net, ex, cfg.loss_on_both))
        .collect::<Result<Vec<_>, _>>()?;
    let count = (batch.len() * net.config().input_len) as f64;
    let mut gradients = vec![0.0; net.param_count()];
    let mut sq_total = 0.0;
    // fixed summation order keeps the result independent of thread timing
    for (sq, g) in &per_item {
        sq_total += sq;
        for (acc, gi) in gradients.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    gradients.iter_mut().for_each(|g| *g /= count);
    let mse = sq_total / count;

    let lambda = cfg.lambda_for(net);
    let penalty = if lambda > 0.0 {
        let banks = net.collect_filter_banks(cfg.include_output_layer);
        let p = mhe_penalty(&banks, &cfg.mhe, lambda)?;
        for (bank, g) in banks.iter().zip(&p.gradients) {
            net.add_bank_gradient(bank.layer_id(), g.view(), &mut gradients);
        }
        p.penalty
    } else {
        0.0
    };
    Ok(LossBreakdown {
        loss: mse + penalty,
        mse,
        penalty,
        lambda,
        gradients,
    })
}

/// The weighted penalty of `net` as configured; zero when lambda is zero.
pub fn penalty_of(net: &SepNet, cfg: &TrainConfig) -> Result<f64, TrainError> {
    let lambda = cfg.lambda_for(net);
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let banks = net.collect_filter_banks(cfg.include_output_layer);
    Ok(mhe_penalty(&banks, &cfg.mhe, lambda)?.penalty)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub loss: f64,
    pub mse: f64,
    pub penalty: f64,
}

/// Validation MSE over fixed windows, plus the current penalty.
pub fn validate(
    net: &SepNet,
    windows: &[Example],
    cfg: &TrainConfig,
) -> Result<Validation, TrainError> {
    if windows.is_empty() {
        return Err(TrainError::EmptyDataset("no validation windows".into()));
    }
    let errors = windows
        .par_iter()
        .map(|ex| -> Result<f64, TrainError> {
            let out = net.infer(&ex.mixture)?;
            let mut sq = 0.0;
            for i in 0..ex.vocals.len() {
                let ev = out.vocals[i] - ex.vocals[i];
                sq += if cfg.loss_on_both {
                    let ea = out.accompaniment[i] - ex.accompaniment[i];
                    0.5 * (ev * ev + ea * ea)
                } else {
                    ev * ev
                };
            }
            Ok(sq)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mse = errors.iter().sum::<f64>() / (windows.len() * net.config().input_len) as f64;
    let penalty = penalty_of(net, cfg)?;
    Ok(Validation {
        loss: mse + penalty,
        mse,
        penalty,
    })
}

/// Patience-based stopping rule; only strict improvements reset the count.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    Improved,
    Stale,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self::with_best(patience, f64::INFINITY, 0)
    }

    pub fn with_best(patience: usize, best: f64, best_epoch: usize) -> Self {
        Self {
            patience,
            best,
            best_epoch,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Observation {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            Observation::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                Observation::Stop
            } else {
                Observation::Stale
            }
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss seen.
    pub best: SepNet,
    pub best_val_loss: f64,
    /// Epoch the best parameters come from (0 when they are the input).
    pub best_epoch: usize,
    pub log: TrainLog,
}

struct Phase {
    batch_size: usize,
    adam: AdamParams,
    max_epochs: Option<usize>,
    sampling: ChaCha8Rng,
    augmentation: ChaCha8Rng,
}

fn check_data(data: &Dataset) -> Result<(), TrainError> {
    if data.train.is_empty() {
        return Err(TrainError::EmptyDataset("no training songs".into()));
    }
    if data.validation.is_empty() {
        return Err(TrainError::EmptyDataset("no validation songs".into()));
    }
    if data.train.iter().all(Song::is_empty) {
        return Err(TrainError::EmptyDataset("training songs are empty".into()));
    }
    Ok(())
}

fn run_phase(
    mut net: SepNet,
    data: &Dataset,
    cfg: &TrainConfig,
    mut phase: Phase,
    first_epoch: usize,
    mut stopping: EarlyStopping,
    mut best: SepNet,
) -> Result<TrainOutcome, TrainError> {
    let len = net.config().input_len;
    let val_windows = windows(&data.validation, len);
    let mut state = AdamState::new(net.param_count());
    let mut log = TrainLog::default();
    let lambda = cfg.lambda_for(&net);

    let mut epoch = first_epoch;
    while phase.max_epochs.is_none_or(|cap| epoch - first_epoch < cap) {
        epoch += 1;
        let started = Instant::now();
        let mut mse_sum = 0.0;
        for _ in 0..cfg.iterations_per_epoch {
            let batch = (0..phase.batch_size)
                .map(|_| {
                    sample_example(
                        &data.train,
                        len,
                        cfg.augment_range,
                        &mut phase.sampling,
                        &mut phase.augmentation,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            let step = compute_loss(&net, &batch, cfg)?;
            mse_sum += step.mse;
            adam_step(net.params_mut(), &step.gradients, &mut state, &phase.adam)?;
        }
        let val = validate(&net, &val_windows, cfg)?;
        log.push(EpochRecord {
            epoch,
            mse: mse_sum / cfg.iterations_per_epoch as f64,
            mhe_penalty: val.penalty,
            val_loss: val.loss,
            lambda,
            seconds: started.elapsed().as_secs_f64(),
            val_mse: val.mse,
        });
        match stopping.observe(epoch, val.loss) {
            Observation::Improved => best = net.clone(),
            Observation::Stale => {}
            Observation::Stop => break,
        }
    }
    Ok(TrainOutcome {
        best,
        best_val_loss: stopping.best(),
        best_epoch: stopping.best_epoch(),
        log,
    })
}

/// First training phase from freshly initialized (or given) parameters.
pub fn train(net: SepNet, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    check_data(data)?;
    let phase = Phase {
        batch_size: cfg.batch_size,
        adam: cfg.adam(),
        max_epochs: cfg.max_epochs,
        sampling: rng::stream(cfg.seed, Stream::Sampling),
        augmentation: rng::stream(cfg.seed, Stream::Augmentation),
    };
    let best = net.clone();
    run_phase(
        net,
        data,
        cfg,
        phase,
        0,
        EarlyStopping::new(cfg.patience_epochs),
        best,
    )
}

/// Continues from `net` with a multiplied batch size, the fine-tuning
/// learning rate and fresh optimizer state. Epoch numbers continue after
/// `after_epoch`. The input parameters compete for "best", so the returned
/// validation loss never exceeds the input's.
pub fn finetune(
    net: SepNet,
    data: &Dataset,
    cfg: &TrainConfig,
    after_epoch: usize,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    check_data(data)?;
    let start = validate(
        &net,
        &windows(&data.validation, net.config().input_len),
        cfg,
    )?;
    let phase = Phase {
        batch_size: cfg.batch_size * cfg.finetune.batch_multiplier,
        adam: AdamParams {
            learning_rate: cfg.finetune.learning_rate,
            ..cfg.adam()
        },
        max_epochs: cfg.finetune.max_epochs,
        sampling: rng::stream(cfg.seed, Stream::FinetuneSampling),
        augmentation: rng::stream(cfg.seed, Stream::FinetuneAugmentation),
    };
    let stopping = EarlyStopping::with_best(cfg.patience_epochs, start.loss, 0);
    let best = net.clone();
    run_phase(net, data, cfg, phase, after_epoch, stopping, best)
}

/// Batch size used by the fine-tuning phase.
pub fn finetune_batch_size(cfg: &TrainConfig) -> usize {
    cfg.batch_size * cfg.finetune.batch_multiplier
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_net;
    use rand::SeedableRng;

    #[test]
    fn lambda_resolution() {
        assert_eq!(LambdaMode::HalfInvL.resolve(8), 0.0625);
        assert_eq!(LambdaMode::InvL.resolve(8), 0.125);
        assert_eq!(LambdaMode::One.resolve(8), 1.0);
        assert_eq!(LambdaMode::Off.resolve(8), 0.0);
        assert_eq!(LambdaMode::Custom(0.3).resolve(8), 0.3);
    }

    #[test]
    fn lambda_mode_json_names() {
        let m: LambdaMode = serde_json::from_str("\"half_inv_L\"").unwrap();
        assert_eq!(m, LambdaMode::HalfInvL);
        let m: LambdaMode = serde_json::from_str(r#"{"custom": 0.5}"#).unwrap();
        assert_eq!(m, LambdaMode::Custom(0.5));
        assert_eq!(
            serde_json::to_string(&LambdaMode::InvL).unwrap(),
            "\"inv_L\""
        );
    }

    #[test]
    fn run_config_reads_partial_json() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"net": {"depth": 2, "input_len": 64}, "lambda_mode": "off", "batch_size": 4,
                "mhe": {"space": "half", "distance": "euclidean", "s_power": 2}}"#,
        )
        .unwrap();
        assert_eq!(cfg.net.depth, 2);
        assert_eq!(cfg.net.down_kernel, 15);
        assert_eq!(cfg.train.batch_size, 4);
        assert_eq!(cfg.train.learning_rate, 1e-4);
        assert_eq!(cfg.train.lambda_mode, LambdaMode::Off);
        assert_eq!(cfg.train.mhe.name(), "half_mhe_2");
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn defaults_follow_protocol() {
        let c = TrainConfig::default();
        assert_eq!(
            (c.batch_size, c.learning_rate, c.beta1, c.beta2),
            (16, 1e-4, 0.9, 0.999)
        );
        assert_eq!(c.iterations_per_epoch, 1000);
        assert_eq!(c.augment_range, [0.7, 1.0]);
        assert_eq!(finetune_batch_size(&c), 32);
        assert_eq!(c.finetune.learning_rate, 1e-5);
        assert!(c.validate().is_ok());
        assert!(TrainConfig {
            augment_range: [0.0, 1.0],
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig { batch_size: 0, ..c }.validate().is_err());
    }

    #[test]
    fn augmentation_examples() {
        let v = vec![1.0; 4];
        let a = vec![0.0; 4];
        let (v2, m2) = augment_with_factor(&v, &a, 1.0).unwrap();
        assert_eq!((v2, m2), (v.clone(), v.clone()));
        let (_, m) = augment_with_factor(&v, &a, 0.7).unwrap();
        assert_eq!(m, vec![0.7; 4]);
        assert!(augment_with_factor(&v, &a[..2], 0.9).is_err());
    }

    #[test]
    fn augmentation_factor_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let (v, _) = augment(&[1.0], &[0.0], [0.7, 1.0], &mut rng).unwrap();
            assert!((0.7..=1.0).contains(&v[0]));
            sum += v[0];
        }
        assert!((sum / n as f64 - 0.85).abs() < 0.01);
    }

    #[test]
    fn stopping_rule() {
        let mut s = EarlyStopping::new(3);
        let losses = [5.0, 4.0, 3.0, 2.0, 1.0, 1.5, 1.0, 2.0];
        let mut stopped = None;
        for (i, &l) in losses.iter().enumerate() {
            if s.observe(i + 1, l) == Observation::Stop {
                stopped = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped, Some(8));
        assert_eq!(s.best_epoch(), 5);
    }

    fn tiny_net() -> SepNet {
        init_net(&NetConfig {
            depth: 1,
            down_kernel: 3,
            up_kernel: 3,
            base_features: 2,
            input_len: 16,
            seed: 1,
            ..NetConfig::default()
        })
        .unwrap()
    }

    fn batch(n: usize) -> Vec<Example> {
        (0..n)
            .map(|k| {
                let vocals: Vec<f64> = (0..16)
                    .map(|t| 0.3 * ((t + k) as f64 * 0.7).sin())
                    .collect();
                let accompaniment: Vec<f64> = (0..16)
                    .map(|t| 0.2 * ((t * k) as f64 * 0.3).cos())
                    .collect();
                let mixture = vocals
                    .iter()
                    .zip(&accompaniment)
                    .map(|(v, a)| v + a)
                    .collect();
                Example {
                    mixture,
                    vocals,
                    accompaniment,
                }
            })
            .collect()
    }

    #[test]
    fn loss_without_regularizer_is_mse() {
        let cfg = TrainConfig {
            lambda_mode: LambdaMode::Off,
            ..TrainConfig::default()
        };
        let l = compute_loss(&tiny_net(), &batch(3), &cfg).unwrap();
        assert_eq!(l.loss, l.mse);
        assert_eq!(l.penalty, 0.0);
        assert!(compute_loss(&tiny_net(), &[], &cfg).is_err());
    }

    #[test]
    fn zero_output_net_has_pure_penalty_loss() {
        let mut net = tiny_net();
        let out = net.layers().last().unwrap().clone();
        net.params_mut()[out.weight_range()].fill(0.0);
        net.params_mut()[out.bias_range()].fill(0.0);
        let mut b = batch(2);
        for ex in &mut b {
            ex.vocals.fill(0.0);
        }
        let cfg = TrainConfig::default();
        let l = compute_loss(&net, &b, &cfg).unwrap();
        assert_eq!(l.mse, 0.0);
        assert_eq!(l.loss, l.penalty);
        assert!(l.penalty != 0.0);
        assert_eq!(l.penalty, penalty_of(&net, &cfg).unwrap());
    }

    #[test]
    fn loss_is_deterministic() {
        let cfg = TrainConfig::default();
        let a = compute_loss(&tiny_net(), &batch(8), &cfg).unwrap();
        let b = compute_loss(&tiny_net(), &batch(8), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn windows_cover_songs() {
        let song = Song::from_sources("s", vec![0.1; 40], vec![0.2; 40], 8000).unwrap();
        let w = windows(std::slice::from_ref(&song), 16);
        assert_eq!(w.len(), 2);
        let short = Song::from_sources("t", vec![0.1; 5], vec![0.2; 5], 8000).unwrap();
        let w = windows(&[short], 16);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].vocals[5..], [0.0; 11]);
    }
}
