//! Interference protocols run against a trained network: coherent
//! superposition of several targets, whole-chip noise at a controlled SNR,
//! and random noise patches inside the central window.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::{predict_multi, region_energies, DetectorLayout};
use crate::data::{add_noise_snr, derive_seed, mask_window, random_mask_noise, superpose, NoiseChip, Sample};
use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::network::Network;

/// One row of an experiment table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub param: f64,
    pub accuracy: f64,
}

/// CSV with header `param,accuracy`.
pub fn rows_to_csv(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["param", "accuracy"])?;
    for r in rows {
        w.write_record([r.param.to_string(), r.accuracy.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Invalid(e.to_string()))
}

pub fn write_rows_csv(rows: &[Row], path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), &rows_to_csv(rows)?)
}

pub const SUPERPOSE_ORDERS: [usize; 3] = [1, 2, 3];

/// −10 … +10 dB in 2 dB steps.
pub fn snr_grid() -> Vec<f64> {
    (-5..=5).map(|i| 2.0 * i as f64).collect()
}

/// Masking ratios 0.1 … 0.9 of the central window area.
pub fn mask_ratio_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Whether the top-`k` classes of the detector energies are exactly the
/// sample's label set.
pub fn set_hit(net: &Network, layout: &DetectorLayout, sample: &Sample) -> Result<bool> {
    let out = net.forward_field(&sample.field)?;
    let top = predict_multi(&region_energies(&out, layout)?, sample.labels().len())?;
    Ok(top == sample.labels())
}

fn set_accuracy(net: &Network, layout: &DetectorLayout, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Invalid("no samples to evaluate".into()));
    }
    let hits = samples
        .par_iter()
        .map(|s| set_hit(net, layout, s).map(usize::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / samples.len() as f64)
}

/// Draws `trials` seeded superpositions of `k` single-label samples with
/// pairwise distinct labels.
pub fn superposed_set(testset: &[Sample], k: usize, trials: usize, seed: u64) -> Result<Vec<Sample>> {
    let mut by_class: Vec<Vec<&Sample>> = Vec::new();
    for s in testset {
        let l = s
            .label()
            .ok_or_else(|| Error::Invalid("superposition needs single-label inputs".into()))?;
        if by_class.len() <= l {
            by_class.resize(l + 1, Vec::new());
        }
        by_class[l].push(s);
    }
    let classes: Vec<usize> = (0..by_class.len()).filter(|&c| !by_class[c].is_empty()).collect();
    if k == 0 || k > classes.len() {
        return Err(Error::Invalid(format!(
            "cannot superpose {k} distinct classes from a set with {} classes",
            classes.len()
        )));
    }
    (0..trials)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            let parts: Vec<Sample> = classes
                .choose_multiple(&mut rng, k)
                .map(|&c| (*by_class[c].choose(&mut rng).unwrap()).clone())
                .collect();
            superpose(&parts)
        })
        .collect()
}

/// Top-K set accuracy for each K. K = 1 scores every test sample once, so it
/// equals plain accuracy; larger K use `trials` seeded draws.
pub fn superpose_sweep(
    net: &Network,
    layout: &DetectorLayout,
    testset: &[Sample],
    orders: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<Row>> {
    orders
        .iter()
        .map(|&k| {
            let accuracy = if k == 1 {
                set_accuracy(net, layout, testset)?
            } else {
                set_accuracy(net, layout, &superposed_set(testset, k, trials, derive_seed(seed, k as u64))?)?
            };
            Ok(Row { param: k as f64, accuracy })
        })
        .collect()
}

fn require_noise(noise: &[NoiseChip]) -> Result<()> {
    if noise.is_empty() {
        Err(Error::Invalid("no noise chips available".into()))
    } else {
        Ok(())
    }
}

/// Accuracy with whole-chip noise at each SNR. Sample `i` uses noise chip
/// `i mod len` and a crop seed derived from `(seed, i)`, identical across
/// SNR levels so that only the noise scale changes.
pub fn snr_sweep(
    net: &Network,
    layout: &DetectorLayout,
    testset: &[Sample],
    noise: &[NoiseChip],
    snr_db: &[f64],
    seed: u64,
) -> Result<Vec<Row>> {
    require_noise(noise)?;
    snr_db
        .iter()
        .map(|&db| {
            let noisy = testset
                .iter()
                .enumerate()
                .map(|(i, s)| add_noise_snr(s, &noise[i % noise.len()], db, derive_seed(seed, i as u64)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Row {
                param: db,
                accuracy: set_accuracy(net, layout, &noisy)?,
            })
        })
        .collect()
}

/// Side of a square patch covering `ratio` of the central window.
pub fn mask_side(n: usize, ratio: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Invalid(format!("masking ratio {ratio} outside [0, 1]")));
    }
    Ok((ratio.sqrt() * mask_window(n).w as f64).round() as usize)
}

/// Accuracy with a noise patch of area `ratio · window²` at `patch_snr_db`
/// added at a seeded position inside the central window.
pub fn mask_sweep(
    net: &Network,
    layout: &DetectorLayout,
    testset: &[Sample],
    noise: &[NoiseChip],
    ratios: &[f64],
    patch_snr_db: f64,
    seed: u64,
) -> Result<Vec<Row>> {
    require_noise(noise)?;
    let n = net.config().n;
    ratios
        .iter()
        .map(|&ratio| {
            let side = mask_side(n, ratio)?;
            let masked = testset
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    random_mask_noise(s, &noise[i % noise.len()], (side, side), patch_snr_db, derive_seed(seed, i as u64))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Row {
                param: ratio,
                accuracy: set_accuracy(net, layout, &masked)?,
            })
        })
        .collect()
}
