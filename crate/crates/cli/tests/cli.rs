use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hypersep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypersep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn thomson_two_points_are_antipodal() {
    let out = hypersep(&[
        "thomson",
        "--n",
        "2",
        "--d",
        "3",
        "--s",
        "1",
        "--distance",
        "euclidean",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("N,d,s,distance,best_energy,reference_energy,relative_gap")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..4], ["2", "3", "1", "euclidean"]);
    let best: f64 = row[4].parse().unwrap();
    assert!((best - 1.0).abs() < 1e-6, "{best}");
    assert_eq!(row[5].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn thomson_without_known_optimum_leaves_reference_empty() {
    let out = hypersep(&[
        "thomson",
        "--n",
        "5",
        "--d",
        "3",
        "--s",
        "2",
        "--distance",
        "angular",
        "--restarts",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("5,3,2,angular,"));
    assert!(row.ends_with(",,"));
}

#[test]
fn usage_errors_exit_with_one() {
    let out = hypersep(&["thomson", "--n", "2", "--bogus-flag", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--bogus-flag"));

    let out = hypersep(&["thomson", "--n", "two", "--d", "3", "--s", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--n"));

    assert_eq!(hypersep(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hypersep(&[]).status.code(), Some(1));
    assert_eq!(hypersep(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ckpt");
    let out = hypersep(&[
        "energy-inspect",
        "--ckpt",
        path(&missing),
        "--out",
        path(&dir.path().join("e.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.ckpt"));

    let out = hypersep(&["thomson", "--n", "1", "--d", "3", "--s", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generated_data_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = hypersep(&[
            "gen-data",
            "--songs",
            "2",
            "--seconds",
            "1",
            "--seed",
            "4",
            "--out",
            path(&dir.path().join(name)),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for file in [
        "manifest.json",
        "song_000/vocals.wav",
        "song_001/mixture.wav",
    ] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = hypersep(&[
        "gen-data",
        "--songs",
        "4",
        "--seconds",
        "2",
        "--seed",
        "1",
        "--out",
        path(&data),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"net": {"depth": 2, "base_features": 3, "down_kernel": 5, "up_kernel": 3, "input_len": 256},
            "batch_size": 2, "iterations_per_epoch": 3, "max_epochs": 2, "learning_rate": 0.001,
            "lambda_mode": "off", "finetune": {"enabled": true, "max_epochs": 1}}"#,
    )
    .unwrap();
    let ckpt = dir.path().join("model.ckpt");
    let log = dir.path().join("logs/train.csv");
    let out = hypersep(&[
        "train",
        "--config",
        path(&config),
        "--data",
        path(&data.join("manifest.json")),
        "--out",
        path(&ckpt),
        "--log",
        path(&log),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let log_text = fs::read_to_string(&log).unwrap();
    let mut lines = log_text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("epoch,mse,mhe_penalty,val_loss,lambda,seconds"));
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 0.0));

    let report = dir.path().join("report.csv");
    let out = hypersep(&[
        "evaluate",
        "--ckpt",
        path(&ckpt),
        "--data",
        path(&data),
        "--report",
        path(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report_text = fs::read_to_string(&report).unwrap();
    assert!(report_text.starts_with("song,source,segments,mean,median,sd,mad\n"));
    assert!(report_text.contains("__dataset__,vocals,"));
    for line in report_text.lines().skip(1) {
        assert!(
            line.split(',')
                .skip(3)
                .all(|v| v.parse::<f64>().unwrap().is_finite()),
            "{line}"
        );
    }

    let energies = dir.path().join("energies.csv");
    let mhe_file = dir.path().join("mhe.json");
    fs::write(
        &mhe_file,
        r#"{"space": "half", "distance": "angular", "s_power": 1}"#,
    )
    .unwrap();
    for value in ["half_mhe_a1", path(&mhe_file)] {
        let out = hypersep(&[
            "energy-inspect",
            "--ckpt",
            path(&ckpt),
            "--mhe-config",
            value,
            "--out",
            path(&energies),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let text = fs::read_to_string(&energies).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("layer_id,N,D,energy,normalized_energy,clamped_pairs")
    );
    assert_eq!(lines.count(), 4);
}
