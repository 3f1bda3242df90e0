use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use emwavenet::config::{PathKey, RunConfig};
use emwavenet::data::{self, Sample};
use emwavenet::experiments::{self, Row};
use emwavenet::network::Network;
use emwavenet::{autograd, train, viz, Error, Result};

/// Propagation-network classifier: data synthesis, training, evaluation,
/// gradient checking and interference experiments.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic CF32 dataset tree `<out>/<class>/<id>.cf32`.
    Synth {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        per_class: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Pixel pitch in meters.
        #[arg(long, default_value_t = 0.01)]
        dx: f64,
        /// Also write this many clutter chips to `<out>/noise/`.
        #[arg(long, default_value_t = 0)]
        noise_chips: usize,
    },
    /// Train from a run config; writes the checkpoint and `metrics.csv`.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint on the test set and write per-class energy maps.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `paths.checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Run an interference protocol on the test set and emit `param,accuracy` CSV.
    Interfere {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Comma-separated grid overriding the default one for the mode
        /// (orders for superpose, dB for snr, area ratios for mask).
        #[arg(long, value_delimiter = ',')]
        params: Option<Vec<f64>>,
        /// Overrides `paths.checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Superpose,
    Snr,
    Mask,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Superpose => "superpose",
            Mode::Snr => "snr",
            Mode::Mask => "mask",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Synth { classes, per_class, n, seed, out, dx, noise_chips } => {
            let samples = data::synth_dataset(classes, per_class, n, dx, seed)?;
            let written = data::write_dataset(&out, &samples)?;
            for i in 0..noise_chips {
                let chip = data::synth_clutter(n, dx, data::derive_seed(seed ^ 0x6e6f697365, i as u64))?;
                data::write_cf(out.join("noise").join(format!("{i:06}.cf32")), &chip.field)?;
            }
            println!("wrote {written} samples in {classes} classes and {noise_chips} noise chips to {}", out.display());
            Ok(0)
        }
        Cmd::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let layout = cfg.layout()?;
            let trainset = load_set(cfg.require(PathKey::TrainDir)?, cfg.net.n)?;
            let ckpt = cfg.require(PathKey::CheckpointOut)?;
            let out = cfg.require(PathKey::OutDir)?;
            let mut net = Network::init(cfg.net.clone(), cfg.train.init, cfg.train.seed)?;
            let history = train::fit(&mut net, &trainset, &layout, &cfg.train).map_err(|d| d.error)?;
            train::save_checkpoint(&net, ckpt)?;
            history.write_csv(out.join("metrics.csv"))?;
            if let Some(last) = history.epochs.last() {
                println!(
                    "trained {} epochs: mean_loss {:.6} train_acc {:.4}; checkpoint {}",
                    history.epochs.len(),
                    last.mean_loss,
                    last.train_acc,
                    ckpt.display()
                );
            }
            Ok(0)
        }
        Cmd::Eval { config, checkpoint } => {
            let cfg = RunConfig::load(&config)?;
            let net = load_net(&cfg, checkpoint)?;
            let layout = cfg.layout()?;
            let test = load_set(cfg.require(PathKey::TestDir)?, net.config().n)?;
            let out = cfg.require(PathKey::OutDir)?;
            let ev = train::evaluate(&net, &test, &layout)?;
            println!("accuracy {:.4} ({} samples)", ev.accuracy, test.len());
            println!("confusion (rows true, columns predicted):");
            for row in &ev.confusion {
                println!("  {}", row.iter().map(|v| format!("{v:>5}")).collect::<String>());
            }
            let maps = viz::class_energy_maps(&net, &test, &layout)?;
            let paths = viz::write_class_maps(&maps, net.config().n, out)?;
            println!("wrote {} energy maps to {}", paths.len(), out.display());
            Ok(0)
        }
        Cmd::Gradcheck { n, layers, classes, seed, tol } => {
            if !(tol >= 0.0) {
                return Err(Error::Invalid(format!("--tol must be non-negative, got {tol}")));
            }
            let report = autograd::gradcheck(n, layers, classes, seed)?;
            println!(
                "max relative error {:.3e} over {} entries (tol {tol:e})",
                report.max_rel_error, report.compared
            );
            Ok(if report.max_rel_error <= tol { 0 } else { 1 })
        }
        Cmd::Interfere { config, mode, params, checkpoint } => {
            let cfg = RunConfig::load(&config)?;
            let net = load_net(&cfg, checkpoint)?;
            let layout = cfg.layout()?;
            let test = load_set(cfg.require(PathKey::TestDir)?, net.config().n)?;
            let out = cfg.require(PathKey::OutDir)?;
            let it = &cfg.interfere;
            let rows: Vec<Row> = match mode {
                Mode::Superpose => {
                    let orders = match params {
                        Some(p) => p.iter().map(|&k| as_order(k)).collect::<Result<Vec<_>>>()?,
                        None => experiments::SUPERPOSE_ORDERS.to_vec(),
                    };
                    experiments::superpose_sweep(&net, &layout, &test, &orders, it.trials, it.seed)?
                }
                Mode::Snr => {
                    let noise = load_noise(&cfg)?;
                    let grid = params.unwrap_or_else(experiments::snr_grid);
                    experiments::snr_sweep(&net, &layout, &test, &noise, &grid, it.seed)?
                }
                Mode::Mask => {
                    let noise = load_noise(&cfg)?;
                    let grid = params.unwrap_or_else(experiments::mask_ratio_grid);
                    experiments::mask_sweep(&net, &layout, &test, &noise, &grid, it.mask_snr_db, it.seed)?
                }
            };
            let path = out.join(format!("interfere_{}.csv", mode.name()));
            experiments::write_rows_csv(&rows, &path)?;
            print!("{}", String::from_utf8_lossy(&experiments::rows_to_csv(&rows)?));
            Ok(0)
        }
    }
}

fn as_order(k: f64) -> Result<usize> {
    if k >= 1.0 && k.fract() == 0.0 {
        Ok(k as usize)
    } else {
        Err(Error::Invalid(format!("superposition order must be a positive integer, got {k}")))
    }
}

fn load_net(cfg: &RunConfig, checkpoint: Option<PathBuf>) -> Result<Network> {
    let path = match checkpoint {
        Some(p) if p.exists() => p,
        Some(p) => return Err(Error::Config(format!("checkpoint {} does not exist", p.display()))),
        None => cfg.require(PathKey::CheckpointIn)?.to_path_buf(),
    };
    let net = train::load_checkpoint(&path)?;
    if net.config().n != cfg.net.n {
        return Err(Error::Config(format!(
            "checkpoint {} has n={} but [net] n={}",
            path.display(),
            net.config().n,
            cfg.net.n
        )));
    }
    Ok(net)
}

/// Reads a dataset tree, zero-padding smaller chips to the network grid.
fn load_set(dir: &Path, n: usize) -> Result<Vec<Sample>> {
    data::read_dataset(dir)?
        .into_iter()
        .map(|s| {
            if s.field.n() == n {
                Ok(s)
            } else {
                Sample::with_labels(data::embed(&s.field, n)?, s.labels().to_vec())
            }
        })
        .collect()
}

fn load_noise(cfg: &RunConfig) -> Result<Vec<data::NoiseChip>> {
    data::read_noise_dir(cfg.require(PathKey::NoiseDir)?)
}
