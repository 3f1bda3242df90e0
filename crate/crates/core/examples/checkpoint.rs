//! Saves a freshly initialized network, reloads it and checks that the
//! reloaded copy is bit-identical and gives the same detector field.

use emwavenet::data::synth_dataset;
use emwavenet::network::{InitScheme, NetConfig, Network};
use emwavenet::train::{encode_checkpoint, load_checkpoint, save_checkpoint};

fn main() -> emwavenet::Result<()> {
    let mut cfg = NetConfig::mstar();
    cfg.n = 64;
    cfg.m_layers = 2;
    cfg.dx = 0.01;
    let net = Network::init(cfg, InitScheme::UniformPhase, 5)?;
    let path = std::env::temp_dir().join(format!("emwavenet-{}.emwv", std::process::id()));
    save_checkpoint(&net, &path)?;
    let back = load_checkpoint(&path)?;
    println!("{} bytes at {}", std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0), path.display());
    println!("identical bytes: {}", encode_checkpoint(&net) == encode_checkpoint(&back));

    let x = &synth_dataset(2, 1, 64, 0.01, 0)?[0].field;
    let diff = net.forward_field(x)?.max_abs_diff(&back.forward_field(x)?);
    println!("max detector difference after reload: {diff:e}");
    std::fs::remove_file(&path).ok();
    Ok(())
}
