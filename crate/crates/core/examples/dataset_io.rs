//! Synthesizes a dataset, writes it as a CF32 tree, reads it back and applies
//! the three interference transforms to one sample.

use emwavenet::data::{
    add_noise_snr, random_mask_noise_placed, read_dataset, superpose, synth_clutter, synth_dataset, write_dataset,
};

fn main() -> emwavenet::Result<()> {
    let root = std::env::temp_dir().join(format!("emwavenet-dataset-{}", std::process::id()));
    let samples = synth_dataset(3, 4, 64, 0.01, 42)?;
    let written = write_dataset(&root, &samples)?;
    let back = read_dataset(&root)?;
    println!("wrote {written} files under {}, read {} back", root.display(), back.len());
    assert_eq!(back.len(), samples.len());

    let x = &back[0];
    let clutter = synth_clutter(64, 0.01, 7)?;
    for db in [-10.0, 0.0, 10.0] {
        let noisy = add_noise_snr(x, &clutter, db, 1)?;
        let mut diff = noisy.field.clone();
        diff.add_scaled((-1.0).into(), &x.field)?;
        let measured = 10.0 * (x.field.total_energy() / diff.total_energy()).log10();
        println!("requested {db:>5} dB, measured {measured:.6} dB");
    }

    let (masked, patch) = random_mask_noise_placed(x, &clutter, (8, 16), 0.0, 3)?;
    println!("mask patch {patch:?}, energy {:.3} -> {:.3}", x.field.total_energy(), masked.field.total_energy());

    let mix = superpose(&[back[0].clone(), back[5].clone()])?;
    println!("superposed labels {:?}", mix.labels());
    std::fs::remove_dir_all(&root).ok();
    Ok(())
}
