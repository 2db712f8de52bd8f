//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use hypersep_core::data::{synth::synth_song, Dataset, GenParams};
use hypersep_core::energy::{Distance, MheConfig, Space};
use hypersep_core::net::{init_net, NetConfig, SepNet};
use hypersep_core::train::{compute_loss, Example, TrainConfig};
use ndarray::Array2;
use rand::Rng;

/// Ordered-pair energy by a literal double loop over all i != k.
pub fn brute_force_energy(weights: &Array2<f64>, cfg: &MheConfig) -> f64 {
    pair_terms(weights, cfg).iter().sum()
}

/// Sum of the magnitudes of all ordered-pair terms; sets the scale of
/// rounding noise in any evaluation of the energy.
pub fn pair_term_magnitude(weights: &Array2<f64>, cfg: &MheConfig) -> f64 {
    pair_terms(weights, cfg).iter().map(|t| t.abs()).sum()
}

fn pair_terms(weights: &Array2<f64>, cfg: &MheConfig) -> Vec<f64> {
    let mut points: Vec<Vec<f64>> = Vec::new();
    for row in weights.rows() {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        points.push(row.iter().map(|x| x / norm).collect());
    }
    if cfg.space == Space::Half {
        let negated: Vec<Vec<f64>> = points
            .iter()
            .map(|p| p.iter().map(|x| -x).collect())
            .collect();
        points.extend(negated);
    }
    let mut terms = Vec::new();
    for i in 0..points.len() {
        for k in 0..points.len() {
            if i == k {
                continue;
            }
            let z = match cfg.distance {
                Distance::Euclidean => points[i]
                    .iter()
                    .zip(&points[k])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt(),
                Distance::Angular => {
                    let dot: f64 = points[i].iter().zip(&points[k]).map(|(a, b)| a * b).sum();
                    dot.clamp(-1.0 + 1e-12, 1.0 - 1e-12).acos()
                }
            }
            .max(cfg.clamp_epsilon);
            terms.push(if cfg.s_power == 0 {
                -z.ln()
            } else {
                z.powf(-f64::from(cfg.s_power))
            });
        }
    }
    terms
}

/// Entries uniform in [-2, 2], every row with norm at least 0.1.
pub fn random_bank<R: Rng>(rng: &mut R, n: usize, d: usize) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((n, d));
    for mut row in out.rows_mut() {
        loop {
            row.iter_mut().for_each(|x| *x = rng.gen_range(-2.0..=2.0));
            if row.dot(&row).sqrt() >= 0.1 {
                break;
            }
        }
    }
    out
}

/// Central differences of `f` at `x` with step `h`, one coordinate at a time.
pub fn central_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error with the denominator floored at `floor`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n, floor))
        .fold(0.0, f64::max)
}

/// Median by sorting; mean of the two middle values for even lengths.
pub fn naive_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn tiny_net_config(depth: usize, seed: u64) -> NetConfig {
    NetConfig {
        depth,
        down_kernel: 5,
        up_kernel: 3,
        base_features: 3,
        input_len: 32,
        seed,
        ..NetConfig::default()
    }
}

pub fn tiny_net(depth: usize, seed: u64) -> SepNet {
    init_net(&tiny_net_config(depth, seed)).unwrap()
}

/// Random two-source examples of length `len`.
pub fn random_batch<R: Rng>(rng: &mut R, n: usize, len: usize) -> Vec<Example> {
    (0..n)
        .map(|_| {
            let vocals: Vec<f64> = (0..len).map(|_| rng.gen_range(-0.4..0.4)).collect();
            let accompaniment: Vec<f64> = (0..len).map(|_| rng.gen_range(-0.4..0.4)).collect();
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

/// Loss of `net` with its parameters replaced by `params`.
pub fn loss_at(net: &SepNet, params: &[f64], batch: &[Example], cfg: &TrainConfig) -> f64 {
    let mut probe = net.clone();
    probe.params_mut().copy_from_slice(params);
    compute_loss(&probe, batch, cfg).unwrap().loss
}

/// An in-memory synthetic dataset split 2/1/1 (train/validation/test).
pub fn synthetic_dataset(seconds: f64, seed: u64) -> Dataset {
    let params = GenParams {
        n_songs: 4,
        duration_s: seconds,
        sample_rate: 8000,
        seed,
    };
    let mut songs: Vec<_> = (0..4).map(|i| synth_song(&params, i)).collect();
    let test = vec![songs.pop().unwrap()];
    let validation = vec![songs.pop().unwrap()];
    Dataset {
        train: songs,
        validation,
        test,
    }
}
