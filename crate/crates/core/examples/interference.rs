//! Trains a short run (or loads a checkpoint) and sweeps the interference
//! protocols: multi-target superposition, whole-chip clutter at −10…+10 dB,
//! and clutter patches covering 10…90 % of the central window.
//!
//!     cargo run --release --example interference -- [checkpoint]

use emwavenet::classify::default_layout;
use emwavenet::data::{synth_clutter, synth_dataset};
use emwavenet::experiments::{mask_ratio_grid, mask_sweep, snr_grid, snr_sweep, superpose_sweep, Row};
use emwavenet::network::{NetConfig, Network};
use emwavenet::propagation::KernelKind;
use emwavenet::train::{fit, load_checkpoint, TrainConfig};

fn show(title: &str, rows: &[Row]) {
    println!("{title}");
    for r in rows {
        println!("  {:>6}  {:.3}", r.param, r.accuracy);
    }
}

fn main() -> emwavenet::Result<()> {
    let layout = default_layout(64, 4)?;
    let net = match std::env::args().nth(1) {
        Some(path) => load_checkpoint(path)?,
        None => {
            let cfg = NetConfig {
                f: 1e10,
                lambda: 0.03,
                m_layers: 3,
                n: 64,
                d: 0.5,
                dx: 0.01,
                dl: None,
                kernel: KernelKind::Fresnel,
            };
            let tc = TrainConfig { epochs: 60, seed: 3, ..Default::default() };
            let mut net = Network::init(cfg, tc.init, tc.seed)?;
            fit(&mut net, &synth_dataset(4, 150, 64, 0.01, 1)?, &layout, &tc).map_err(|d| d.error)?;
            net
        }
    };
    let test = synth_dataset(4, 30, 64, 0.01, 2)?;
    let noise: Vec<_> = (0..4).map(|i| synth_clutter(64, 0.01, 100 + i)).collect::<Result<_, _>>()?;

    show("top-K set accuracy", &superpose_sweep(&net, &layout, &test, &[1, 2, 3], 100, 0)?);
    show("accuracy vs SNR (dB)", &snr_sweep(&net, &layout, &test, &noise, &snr_grid(), 0)?);
    show("accuracy vs masked fraction", &mask_sweep(&net, &layout, &test, &noise, &mask_ratio_grid(), 0.0, 0)?);
    Ok(())
}
