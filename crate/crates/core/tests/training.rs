mod common;

use common::synthetic_dataset;
use hypersep_core::net::{init_net, NetConfig, SepNet};
use hypersep_core::pipeline::run_protocol;
use hypersep_core::train::{
    finetune, penalty_of, train, FinetuneConfig, LambdaMode, TrainConfig, TrainLog,
};

fn small_net(seed: u64) -> SepNet {
    init_net(&NetConfig {
        depth: 2,
        down_kernel: 5,
        up_kernel: 3,
        base_features: 3,
        input_len: 128,
        seed,
        ..NetConfig::default()
    })
    .unwrap()
}

fn quick(lambda_mode: LambdaMode) -> TrainConfig {
    TrainConfig {
        batch_size: 2,
        learning_rate: 1e-3,
        iterations_per_epoch: 5,
        max_epochs: Some(4),
        patience_epochs: 3,
        lambda_mode,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn without_timing(log: &TrainLog) -> Vec<[f64; 6]> {
    log.records
        .iter()
        .map(|r| {
            [
                r.epoch as f64,
                r.mse,
                r.mhe_penalty,
                r.val_loss,
                r.lambda,
                r.val_mse,
            ]
        })
        .collect()
}

#[test]
fn disabled_regularizer_matches_zero_lambda() {
    let data = synthetic_dataset(1.0, 2);
    let off = train(small_net(1), &data, &quick(LambdaMode::Off)).unwrap();
    let zero = train(small_net(1), &data, &quick(LambdaMode::Custom(0.0))).unwrap();
    assert!(off
        .log
        .records
        .iter()
        .all(|r| r.mhe_penalty == 0.0 && r.lambda == 0.0));
    assert!(off.log.records.iter().all(|r| r.val_loss == r.val_mse));
    assert_eq!(without_timing(&off.log), without_timing(&zero.log));
    assert_eq!(off.best, zero.best);
}

#[test]
fn training_is_deterministic() {
    let data = synthetic_dataset(1.0, 4);
    let a = train(small_net(2), &data, &quick(LambdaMode::InvL)).unwrap();
    let b = train(small_net(2), &data, &quick(LambdaMode::InvL)).unwrap();
    assert_eq!(without_timing(&a.log), without_timing(&b.log));
    assert_eq!(a.best, b.best);
    let c = train(
        small_net(2),
        &data,
        &TrainConfig {
            seed: 4,
            ..quick(LambdaMode::InvL)
        },
    )
    .unwrap();
    assert_ne!(without_timing(&a.log), without_timing(&c.log));
}

#[test]
fn logged_penalty_matches_checkpoint() {
    let data = synthetic_dataset(1.0, 6);
    let cfg = quick(LambdaMode::HalfInvL);
    let out = train(small_net(3), &data, &cfg).unwrap();
    assert!(out.best_epoch >= 1);
    let record = &out.log.records[out.best_epoch - 1];
    assert_eq!(record.mhe_penalty, penalty_of(&out.best, &cfg).unwrap());
    assert_eq!(record.val_loss, out.best_val_loss);
    assert_eq!(out.log.best().unwrap().epoch, out.best_epoch);
    let lambda = 1.0 / (2.0 * out.best.hidden_layer_count() as f64);
    assert!(out.log.records.iter().all(|r| r.lambda == lambda));
}

#[test]
fn finetuning_continues_epochs_and_never_loses_ground() {
    let data = synthetic_dataset(1.0, 8);
    let cfg = TrainConfig {
        finetune: FinetuneConfig {
            enabled: true,
            max_epochs: Some(2),
            ..FinetuneConfig::default()
        },
        ..quick(LambdaMode::InvL)
    };
    let first = train(small_net(4), &data, &cfg).unwrap();
    let second = finetune(first.best.clone(), &data, &cfg, first.log.last_epoch()).unwrap();
    assert_eq!(second.log.records[0].epoch, first.log.last_epoch() + 1);
    assert!(second.best_val_loss <= first.best_val_loss + 1e-12);

    let run = run_protocol(small_net(4), &data, &cfg).unwrap();
    assert_eq!(run.log.len(), first.log.len() + second.log.len());
    assert_eq!(run.net, second.best);
    let epochs: Vec<usize> = run.log.records.iter().map(|r| r.epoch).collect();
    assert_eq!(epochs, (1..=run.log.len()).collect::<Vec<_>>());
}

#[test]
fn training_stops_after_patience_without_improvement() {
    let data = synthetic_dataset(1.0, 10);
    // a vanishing learning rate leaves the parameters bit-identical, so no epoch improves on the first
    let cfg = TrainConfig {
        learning_rate: 1e-300,
        max_epochs: None,
        patience_epochs: 4,
        ..quick(LambdaMode::InvL)
    };
    let out = train(small_net(5), &data, &cfg).unwrap();
    assert_eq!(out.log.len(), 5);
    assert_eq!(out.best_epoch, 1);
}

#[test]
fn empty_splits_are_rejected() {
    let mut data = synthetic_dataset(1.0, 1);
    data.validation.clear();
    assert!(train(small_net(1), &data, &quick(LambdaMode::Off)).is_err());
}
