use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use hypersep_core::data::{generate_dataset, Dataset, GenParams, MANIFEST_FILE};
use hypersep_core::energy::{Distance, MheConfig, Space};
use hypersep_core::net::{init_net, load_checkpoint, save_checkpoint};
use hypersep_core::pipeline::{evaluate, inspect_energy, run_protocol, write_energy_csv};
use hypersep_core::thomson::{minimize_energy, reference_energy, MinimizeOptions, Shape};
use hypersep_core::train::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "hypersep",
    version,
    about = "Hyperspherical energy regularized vocal separation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic two-source dataset with a manifest.
    GenData {
        #[arg(long)]
        songs: usize,
        #[arg(long)]
        seconds: f64,
        #[arg(long, default_value_t = 8000)]
        rate: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a separator and save the best checkpoint.
    Train {
        /// JSON training configuration; omitted fields take their defaults.
        #[arg(long)]
        config: PathBuf,
        /// Manifest file or dataset directory.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
    /// Score a checkpoint on the test split and write an SDR report.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Seed for split assignment when `--data` is a bare directory.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Minimize the energy of free points on a sphere.
    Thomson {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        s: u8,
        #[arg(long, value_enum, default_value_t = DistanceArg::Euclidean)]
        distance: DistanceArg,
        #[arg(long, value_enum, default_value_t = SpaceArg::Full)]
        space: SpaceArg,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 3000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the energy of every regularized layer of a checkpoint.
    EnergyInspect {
        #[arg(long)]
        ckpt: PathBuf,
        /// A variant name such as `half_mhe_a1`, or a JSON file.
        #[arg(long, default_value = "mhe_0")]
        mhe_config: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        include_output: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistanceArg {
    Euclidean,
    Angular,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpaceArg {
    Full,
    Half,
}

fn at(path: &Path) -> impl Fn(&dyn std::fmt::Display) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

fn create(path: &Path) -> Result<BufWriter<File>, String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| at(dir)(&e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| at(path)(&e))
}

fn gen_data(songs: usize, seconds: f64, rate: u32, seed: u64, out: &Path) -> Result<(), String> {
    let params = GenParams {
        n_songs: songs,
        duration_s: seconds,
        sample_rate: rate,
        seed,
    };
    let manifest = generate_dataset(&params, out).map_err(|e| e.to_string())?;
    println!(
        "wrote {} songs to {}",
        manifest.songs.len(),
        out.join(MANIFEST_FILE).display()
    );
    Ok(())
}

fn train(config: &Path, data: &Path, out: &Path, log: &Path) -> Result<(), String> {
    let text = fs::read_to_string(config).map_err(|e| at(config)(&e))?;
    let run: RunConfig = serde_json::from_str(&text).map_err(|e| at(config)(&e))?;
    let (_, dataset) = Dataset::open(data, run.train.seed).map_err(|e| e.to_string())?;
    let net = init_net(&run.net).map_err(|e| e.to_string())?;
    let outcome = run_protocol(net, &dataset, &run.train).map_err(|e| e.to_string())?;
    outcome
        .log
        .write_csv(create(log)?)
        .map_err(|e| at(log)(&e))?;
    save_checkpoint(&outcome.net, out).map_err(|e| at(out)(&e))?;
    println!(
        "trained {} epochs, best validation loss {}",
        outcome.log.last_epoch(),
        outcome.val_loss
    );
    Ok(())
}

fn evaluate_cmd(ckpt: &Path, data: &Path, report: &Path, seed: u64) -> Result<(), String> {
    let net = load_checkpoint(ckpt).map_err(|e| at(ckpt)(&e))?;
    let (_, dataset) = Dataset::open(data, seed).map_err(|e| e.to_string())?;
    let sdr = evaluate(&net, &dataset.test).map_err(|e| e.to_string())?;
    sdr.write_csv(create(report)?).map_err(|e| at(report)(&e))?;
    for d in &sdr.dataset {
        println!(
            "{}: median {:.3} dB over {} songs",
            d.source.name(),
            d.songs.median,
            d.songs.count
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn thomson(
    n: usize,
    d: usize,
    s: u8,
    distance: DistanceArg,
    space: SpaceArg,
    restarts: usize,
    steps: usize,
    seed: u64,
) -> Result<(), String> {
    let distance = match distance {
        DistanceArg::Euclidean => Distance::Euclidean,
        DistanceArg::Angular => Distance::Angular,
    };
    let space = match space {
        SpaceArg::Full => Space::Full,
        SpaceArg::Half => Space::Half,
    };
    let cfg = MheConfig::new(space, distance, s).map_err(|e| e.to_string())?;
    let opts = MinimizeOptions {
        steps,
        restarts,
        seed,
        ..MinimizeOptions::default()
    };
    let (best, _) = minimize_energy(n, d, &cfg, &opts).map_err(|e| e.to_string())?;
    let reference = match (space, Shape::for_problem(n, d)) {
        (Space::Full, Some(shape)) => {
            Some(reference_energy(shape, d, &cfg).map_err(|e| e.to_string())?)
        }
        _ => None,
    };
    let name = match distance {
        Distance::Euclidean => "euclidean",
        Distance::Angular => "angular",
    };
    let (reference, gap) = match reference {
        Some(r) => (r.to_string(), ((best - r) / r.abs()).to_string()),
        None => (String::new(), String::new()),
    };
    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "N,d,s,distance,best_energy,reference_energy,relative_gap"
    )
    .map_err(|e| e.to_string())?;
    writeln!(stdout, "{n},{d},{s},{name},{best},{reference},{gap}").map_err(|e| e.to_string())
}

fn parse_mhe_config(value: &str) -> Result<MheConfig, String> {
    if let Ok(cfg) = value.parse::<MheConfig>() {
        return Ok(cfg);
    }
    let path = Path::new(value);
    if !path.exists() {
        return Err(format!(
            "'{value}' is neither an MHE variant name nor a file"
        ));
    }
    let text = fs::read_to_string(path).map_err(|e| at(path)(&e))?;
    let cfg: MheConfig = serde_json::from_str(&text).map_err(|e| at(path)(&e))?;
    cfg.validate().map_err(|e| at(path)(&e))?;
    Ok(cfg)
}

fn energy_inspect(
    ckpt: &Path,
    mhe_config: &str,
    out: &Path,
    include_output: bool,
) -> Result<(), String> {
    let cfg = parse_mhe_config(mhe_config)?;
    let net = load_checkpoint(ckpt).map_err(|e| at(ckpt)(&e))?;
    let rows = inspect_energy(&net, &cfg, include_output).map_err(|e| e.to_string())?;
    write_energy_csv(&rows, create(out)?).map_err(|e| at(out)(&e))
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::GenData {
            songs,
            seconds,
            rate,
            seed,
            out,
        } => gen_data(songs, seconds, rate, seed, &out),
        Command::Train {
            config,
            data,
            out,
            log,
        } => train(&config, &data, &out, &log),
        Command::Evaluate {
            ckpt,
            data,
            report,
            seed,
        } => evaluate_cmd(&ckpt, &data, &report, seed),
        Command::Thomson {
            n,
            d,
            s,
            distance,
            space,
            restarts,
            steps,
            seed,
        } => thomson(n, d, s, distance, space, restarts, steps, seed),
        Command::EnergyInspect {
            ckpt,
            mhe_config,
            out,
            include_output,
        } => energy_inspect(&ckpt, &mhe_config, &out, include_output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
