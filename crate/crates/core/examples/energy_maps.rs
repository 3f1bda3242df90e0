//! Writes one mean detector energy map per class as 8-bit PNG, after a short
//! training run, and prints which region is brightest in each.
//!
//!     cargo run --release --example energy_maps -- [out_dir]

use emwavenet::classify::{default_layout, predict, region_energies};
use emwavenet::data::synth_dataset;
use emwavenet::field::ComplexField;
use emwavenet::network::{NetConfig, Network};
use emwavenet::propagation::KernelKind;
use emwavenet::train::{fit, TrainConfig};
use emwavenet::viz::{class_energy_maps, write_class_maps};
use num_complex::Complex64;

fn main() -> emwavenet::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "energy_maps".into());
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
    let layout = default_layout(64, 4)?;
    let tc = TrainConfig { epochs: 60, seed: 3, ..Default::default() };
    let mut net = Network::init(cfg, tc.init, tc.seed)?;
    fit(&mut net, &synth_dataset(4, 150, 64, 0.01, 1)?, &layout, &tc).map_err(|d| d.error)?;

    let test = synth_dataset(4, 30, 64, 0.01, 2)?;
    let maps = class_energy_maps(&net, &test, &layout)?;
    for (c, m) in maps.iter().enumerate() {
        let field = ComplexField::new(64, 0.01, m.iter().map(|&v| Complex64::new(v.sqrt(), 0.0)).collect())?;
        let readout = region_energies(&field, &layout)?;
        println!("class {c}: brightest region {}, in-region share {:.3}", predict(&readout), readout.per_class[c]);
    }
    for p in write_class_maps(&maps, 64, &out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
