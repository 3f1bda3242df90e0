//! Detector-plane energy maps as 8-bit grayscale PNG.

use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat, Luma};

use crate::classify::DetectorLayout;
use crate::data::Sample;
use crate::error::{io_err, Error, Result};
use crate::field::ComplexField;
use crate::network::Network;

/// `|u|² / Σ|u|²` per pixel. An all-zero field maps to all zeros.
pub fn energy_density(u: &ComplexField) -> Vec<f64> {
    let total = u.total_energy();
    if total == 0.0 {
        return vec![0.0; u.as_slice().len()];
    }
    u.as_slice().iter().map(|z| z.norm_sqr() / total).collect()
}

/// Quantizes a row-major density to 8 bits with the maximum at 255.
pub fn to_gray(density: &[f64], n: usize) -> GrayImage {
    let peak = density.iter().cloned().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    GrayImage::from_fn(n as u32, n as u32, |x, y| {
        Luma([(density[y as usize * n + x as usize] * scale).round().min(255.0) as u8])
    })
}

pub fn energy_image(u: &ComplexField) -> GrayImage {
    to_gray(&energy_density(u), u.n())
}

/// Mean total-normalized detector energy over the samples of each class.
/// Classes without samples give an all-zero map.
pub fn class_energy_maps(net: &Network, dataset: &[Sample], layout: &DetectorLayout) -> Result<Vec<Vec<f64>>> {
    let n = net.config().n;
    let mut maps = vec![vec![0.0; n * n]; layout.num_classes()];
    let mut counts = vec![0usize; layout.num_classes()];
    for s in dataset {
        let c = s
            .label()
            .ok_or_else(|| Error::Invalid("energy maps need single-label samples".into()))?;
        if c >= maps.len() {
            return Err(Error::Invalid(format!("label {c} out of range for {} classes", maps.len())));
        }
        let density = energy_density(&net.forward_field(&s.field)?);
        for (m, v) in maps[c].iter_mut().zip(density) {
            *m += v;
        }
        counts[c] += 1;
    }
    for (m, &k) in maps.iter_mut().zip(&counts) {
        if k > 0 {
            m.iter_mut().for_each(|v| *v /= k as f64);
        }
    }
    Ok(maps)
}

/// Writes `<out>/class_<c>.png` for each map and returns the paths.
pub fn write_class_maps(maps: &[Vec<f64>], n: usize, out: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out = out.as_ref();
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    maps.iter()
        .enumerate()
        .map(|(c, m)| {
            let path = out.join(format!("class_{c}.png"));
            let mut bytes = std::io::Cursor::new(Vec::new());
            to_gray(m, n).write_to(&mut bytes, ImageFormat::Png)?;
            crate::io::atomic_write(&path, bytes.get_ref())?;
            Ok(path)
        })
        .collect()
}
