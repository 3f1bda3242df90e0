//! Trains a 3-layer network on the 4-class synthetic scatterer set and
//! reports the loss curve, test accuracy and confusion matrix.
//!
//!     cargo run --release --example train_synthetic -- [epochs] [checkpoint]

use std::time::Instant;

use emwavenet::classify::default_layout;
use emwavenet::data::synth_dataset;
use emwavenet::network::{NetConfig, Network};
use emwavenet::propagation::KernelKind;
use emwavenet::train::{evaluate, fit, save_checkpoint, TrainConfig};

fn main() -> emwavenet::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map(|s| s.parse().expect("epochs")).unwrap_or(200);
    let checkpoint = args.next();

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
    let train = synth_dataset(4, 150, 64, 0.01, 1)?;
    let test = synth_dataset(4, 30, 64, 0.01, 2)?;
    let layout = default_layout(64, 4)?;
    let tc = TrainConfig { epochs, seed: 3, ..Default::default() };

    let mut net = Network::init(cfg, tc.init, tc.seed)?;
    let start = Instant::now();
    let history = fit(&mut net, &train, &layout, &tc).map_err(|d| d.error)?;
    println!("trained in {:.1} s", start.elapsed().as_secs_f64());
    for r in history.epochs.iter().step_by(10) {
        println!("epoch {:>3}  lr {:.4}  loss {:>9.4}  train acc {:.3}", r.epoch + 1, r.lr, r.mean_loss, r.train_acc);
    }

    let ev = evaluate(&net, &test, &layout)?;
    println!("test accuracy {:.3}", ev.accuracy);
    for row in &ev.confusion {
        println!("  {row:?}");
    }
    if let Some(path) = checkpoint {
        save_checkpoint(&net, &path)?;
        println!("saved {path}");
    }
    Ok(())
}
