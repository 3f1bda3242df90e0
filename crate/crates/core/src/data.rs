//! Samples, the CF32 file format, a synthetic point-scatterer dataset and the
//! interference transforms used by the robustness experiments.
//!
//! Every randomized transform takes an explicit seed. Per-sample seeds are
//! derived from a master seed with [`derive_seed`], a SplitMix64 step over
//! `master ^ (index · φ64)`, so datasets can be generated in any order or in
//! parallel and still come out identical.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::classify::Rect;
use crate::error::{io_err, Error, Result};
use crate::field::{fft2_in_place, freq_grid, ifft2_in_place, ComplexField};
use crate::io::atomic_write;

/// A complex input field and its class label(s). Ordinary samples carry one
/// label; coherent superpositions carry the union of their sources' labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub field: ComplexField,
    labels: Vec<usize>,
}

impl Sample {
    pub fn new(field: ComplexField, label: usize) -> Self {
        Self {
            field,
            labels: vec![label],
        }
    }

    /// Multi-label sample; labels are sorted and must be distinct.
    pub fn with_labels(field: ComplexField, mut labels: Vec<usize>) -> Result<Self> {
        labels.sort_unstable();
        if labels.is_empty() {
            return Err(Error::Invalid("a sample needs at least one label".into()));
        }
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid(format!("duplicate labels {labels:?}")));
        }
        Ok(Self { field, labels })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The label of a single-target sample.
    pub fn label(&self) -> Option<usize> {
        match self.labels.as_slice() {
            [l] => Some(*l),
            _ => None,
        }
    }
}

/// A clutter patch used as interference.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseChip {
    pub field: ComplexField,
    pub source: String,
}

const CF32_MAGIC: &[u8; 4] = b"CF32";
const CF32_HEADER: usize = 16;

/// Encodes a field as CF32: magic, u32 height, u32 width, f32 dx, then
/// row-major interleaved `(re, im)` f32, all little-endian.
pub fn encode_cf(field: &ComplexField) -> Vec<u8> {
    let n = field.n();
    let mut buf = Vec::with_capacity(CF32_HEADER + 8 * n * n);
    buf.extend_from_slice(CF32_MAGIC);
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(field.dx() as f32).to_le_bytes());
    for z in field.as_slice() {
        buf.extend_from_slice(&(z.re as f32).to_le_bytes());
        buf.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    buf
}

pub fn decode_cf(bytes: &[u8], path: &Path) -> Result<ComplexField> {
    let format = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < CF32_HEADER {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: CF32_HEADER,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != CF32_MAGIC {
        return Err(format(format!("bad magic {:?}, expected \"CF32\"", &bytes[..4])));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let (height, width) = (word(4) as usize, word(8) as usize);
    let dx = f32::from_le_bytes(bytes[12..16].try_into().unwrap()) as f64;
    if height != width {
        return Err(format(format!("only square grids are supported, got {height}x{width}")));
    }
    let expected = CF32_HEADER + 8 * height * width;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(format(format!(
            "size mismatch: header implies {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let data = bytes[CF32_HEADER..]
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    ComplexField::new(height, dx, data).map_err(|e| format(e.to_string()))
}

pub fn write_cf(path: impl AsRef<Path>, field: &ComplexField) -> Result<()> {
    atomic_write(path.as_ref(), &encode_cf(field))
}

pub fn read_cf(path: impl AsRef<Path>) -> Result<ComplexField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_cf(&bytes, path)
}

/// SplitMix64 finalizer over `master ^ (index · 0x9E3779B97F4A7C15)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Scatterer layout of class `c`, in pixels relative to the grid center.
///
/// Class `c` places `3 + c mod 6` scatterers evenly on a circle whose radius
/// grows with the class index, rotated by `0.7·c` radians.
pub fn class_geometry(c: usize, classes: usize, n: usize) -> Vec<(f64, f64)> {
    let count = 3 + c % 6;
    let radius = n as f64 * (0.06 + 0.22 * (c as f64 + 0.5) / classes as f64);
    let offset = 0.7 * c as f64;
    (0..count)
        .map(|i| {
            let a = offset + 2.0 * PI * i as f64 / count as f64;
            (radius * a.cos(), radius * a.sin())
        })
        .collect()
}

const PSF_SIGMA: f64 = 0.8;
const SPECKLE_DB: f64 = -20.0;

fn synth_sample(c: usize, classes: usize, n: usize, dx: f64, seed: u64) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = rng.gen_range(-10.0_f64..10.0).to_radians();
    let (s, co) = theta.sin_cos();
    let center = n as f64 / 2.0;
    let scatterers: Vec<(f64, f64, Complex64)> = class_geometry(c, classes, n)
        .into_iter()
        .map(|(x, y)| {
            let col = center + x * co - y * s + rng.gen_range(-0.5..0.5);
            let row = center + x * s + y * co + rng.gen_range(-0.5..0.5);
            let phase = Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
            (row, col, phase)
        })
        .collect();

    let two_s2 = 2.0 * PSF_SIGMA * PSF_SIGMA;
    let mut field = ComplexField::from_fn(n, dx, |r, col| {
        scatterers
            .iter()
            .map(|&(sr, sc, ph)| {
                let d2 = (r as f64 - sr).powi(2) + (col as f64 - sc).powi(2);
                ph * (-d2 / two_s2).exp()
            })
            .sum()
    })?;

    let speckle = ComplexField::from_fn(n, dx, |_, _| complex_normal(&mut rng))?;
    let scale = (field.total_energy() * 10f64.powf(SPECKLE_DB / 10.0) / speckle.total_energy()).sqrt();
    field.add_scaled(scale.into(), &speckle)?;
    Ok(Sample::new(field, c))
}

/// Point-scatterer targets: each class is a fixed ring of scatterers (see
/// [`class_geometry`]) with a random global rotation in ±10°, sub-pixel
/// jitter, a random phase per scatterer and complex white speckle 20 dB
/// below the target energy. Samples are ordered class by class.
pub fn synth_dataset(
    classes: usize,
    per_class: usize,
    n: usize,
    dx: f64,
    seed: u64,
) -> Result<Vec<Sample>> {
    if classes < 2 {
        return Err(Error::Invalid(format!("need at least 2 classes, got {classes}")));
    }
    let mut out = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        for i in 0..per_class {
            let idx = (c * per_class + i) as u64;
            out.push(synth_sample(c, classes, n, dx, derive_seed(seed, idx))?);
        }
    }
    Ok(out)
}

/// Spatially correlated complex clutter standing in for a forest chip.
pub fn synth_clutter(n: usize, dx: f64, seed: u64) -> Result<NoiseChip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = ComplexField::from_fn(n, dx, |_, _| complex_normal(&mut rng))?;
    // Gaussian low-pass with a correlation length of about two pixels.
    let grid = freq_grid(n, 1.0)?;
    let data = field.as_mut_slice();
    fft2_in_place(data, n);
    for r in 0..n {
        for c in 0..n {
            data[r * n + c] *= (-grid.radial_sq(r, c) * 2.0 * (PI * 2.0).powi(2)).exp();
        }
    }
    ifft2_in_place(data, n);
    Ok(NoiseChip {
        field,
        source: format!("synthetic-clutter-{seed}"),
    })
}

/// Zero-pads `field` into the center of an `n_out × n_out` grid.
pub fn embed(field: &ComplexField, n_out: usize) -> Result<ComplexField> {
    let n_in = field.n();
    if n_in > n_out {
        return Err(Error::Invalid(format!("cannot embed {n_in}x{n_in} into {n_out}x{n_out}")));
    }
    let off = (n_out - n_in) / 2;
    let mut out = ComplexField::zeros(n_out, field.dx())?;
    for r in 0..n_in {
        let src = &field.as_slice()[r * n_in..(r + 1) * n_in];
        let start = (r + off) * n_out + off;
        out.as_mut_slice()[start..start + n_in].copy_from_slice(src);
    }
    Ok(out)
}

/// Coherent (complex) sum of fields; labels are the union.
pub fn superpose(samples: &[Sample]) -> Result<Sample> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Invalid("nothing to superpose".into()))?;
    let mut field = first.field.clone();
    let mut labels = first.labels.clone();
    for s in &samples[1..] {
        s.field.check_same_n(field.n(), "superpose")?;
        field.add_scaled(Complex64::new(1.0, 0.0), &s.field)?;
        labels.extend_from_slice(&s.labels);
    }
    let before = labels.len();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() != before {
        return Err(Error::Invalid("superposed samples must have disjoint labels".into()));
    }
    Ok(Sample { field, labels })
}

/// An `rows × cols` window of the noise chip starting at a seeded origin,
/// wrapping around its edges. Crops larger chips and tiles smaller ones.
fn noise_window(noise: &ComplexField, size: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let nn = noise.n();
    let (or, oc) = (rng.gen_range(0..nn), rng.gen_range(0..nn));
    let mut out = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            out.push(noise[((or + r) % nn, (oc + c) % nn)]);
        }
    }
    out
}

fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Noise scale giving `10·log10(signal / (α²·noise)) = snr_db`.
fn snr_scale(signal: f64, noise: f64, snr_db: f64) -> f64 {
    (signal / (noise * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// Result of a noise overlay: the noisy field and the scaled noise that was added.
#[derive(Clone, Debug)]
pub struct Overlay {
    pub sample: Sample,
    pub added: ComplexField,
}

/// Adds `α·n` to the whole sample with `α` chosen so that the signal-to-noise
/// energy ratio equals `snr_db`.
pub fn overlay_noise_snr(sample: &Sample, noise: &NoiseChip, snr_db: f64, seed: u64) -> Result<Overlay> {
    if !snr_db.is_finite() {
        return Err(Error::Invalid(format!("SNR must be finite, got {snr_db}")));
    }
    let n = sample.field.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = noise_window(&noise.field, n, &mut rng);
    let e_noise = energy(&window);
    if e_noise == 0.0 {
        return Err(Error::Invalid(format!("noise chip '{}' has zero energy", noise.source)));
    }
    let alpha = snr_scale(sample.field.total_energy(), e_noise, snr_db);
    let added = ComplexField::new(n, sample.field.dx(), window.into_iter().map(|z| z * alpha).collect())?;
    let mut field = sample.field.clone();
    field.add_scaled(Complex64::new(1.0, 0.0), &added)?;
    Ok(Overlay {
        sample: Sample {
            field,
            labels: sample.labels.clone(),
        },
        added,
    })
}

pub fn add_noise_snr(sample: &Sample, noise: &NoiseChip, snr_db: f64, seed: u64) -> Result<Sample> {
    overlay_noise_snr(sample, noise, snr_db, seed).map(|o| o.sample)
}

/// Side of the central window that random masks must stay inside: 88 pixels
/// on a 256 grid, scaled proportionally for other grid sizes.
pub fn mask_window(n: usize) -> Rect {
    let side = ((88 * n) as f64 / 256.0).round() as usize;
    let side = side.clamp(1, n);
    let off = (n - side) / 2;
    Rect {
        x0: off,
        y0: off,
        w: side,
        h: side,
    }
}

/// Draws a square patch with side in `side_range` (inclusive) placed
/// uniformly inside [`mask_window`]. The position is drawn as a fraction of
/// the free span, so with a fixed side range the same RNG state yields
/// nested patches as the side grows.
pub fn mask_placement(n: usize, side_range: (usize, usize), rng: &mut impl Rng) -> Result<Rect> {
    let window = mask_window(n);
    let (lo, hi) = side_range;
    if lo > hi {
        return Err(Error::Invalid(format!("empty side range {lo}..={hi}")));
    }
    if hi > window.w {
        return Err(Error::Invalid(format!(
            "mask side {hi} exceeds the central {0}x{0} window",
            window.w
        )));
    }
    let side = rng.gen_range(lo..=hi);
    let (ux, uy): (f64, f64) = (rng.gen(), rng.gen());
    let offset = |u: f64, span: usize| ((u * (span - side + 1) as f64) as usize).min(span - side);
    Ok(Rect {
        x0: window.x0 + offset(ux, window.w),
        y0: window.y0 + offset(uy, window.h),
        w: side,
        h: side,
    })
}

/// Coherently adds a square noise patch of seeded size and position inside the
/// central window, scaled so that signal and noise energies within the patch
/// are at `snr_db`. If the patch holds no signal, the reference is the mean
/// pixel energy of the whole sample times the patch area. Pixels outside the
/// patch are untouched.
pub fn random_mask_noise_placed(
    sample: &Sample,
    noise: &NoiseChip,
    side_range: (usize, usize),
    snr_db: f64,
    seed: u64,
) -> Result<(Sample, Rect)> {
    let n = sample.field.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patch = mask_placement(n, side_range, &mut rng)?;
    let mut field = sample.field.clone();
    if patch.area() == 0 {
        return Ok((sample.clone(), patch));
    }
    let window = noise_window(&noise.field, patch.w, &mut rng);
    let e_noise = energy(&window);
    if e_noise == 0.0 {
        return Err(Error::Invalid(format!("noise chip '{}' has zero energy", noise.source)));
    }
    let pixels = |r: usize| (patch.y0 + r, patch.x0);
    let mut e_signal = 0.0;
    for r in 0..patch.h {
        let (row, col) = pixels(r);
        e_signal += energy(&field.as_slice()[row * n + col..row * n + col + patch.w]);
    }
    if e_signal == 0.0 {
        e_signal = field.total_energy() / (n * n) as f64 * patch.area() as f64;
    }
    let alpha = snr_scale(e_signal, e_noise, snr_db);
    for r in 0..patch.h {
        for c in 0..patch.w {
            field[(patch.y0 + r, patch.x0 + c)] += window[r * patch.w + c] * alpha;
        }
    }
    Ok((
        Sample {
            field,
            labels: sample.labels.clone(),
        },
        patch,
    ))
}

pub fn random_mask_noise(
    sample: &Sample,
    noise: &NoiseChip,
    side_range: (usize, usize),
    snr_db: f64,
    seed: u64,
) -> Result<Sample> {
    random_mask_noise_placed(sample, noise, side_range, snr_db, seed).map(|(s, _)| s)
}

/// Writes `<root>/<class>/<id>.cf32` for single-label samples, numbering
/// samples within each class from zero.
pub fn write_dataset(root: impl AsRef<Path>, samples: &[Sample]) -> Result<usize> {
    let root = root.as_ref();
    let mut counters: Vec<usize> = Vec::new();
    for s in samples {
        let label = s
            .label()
            .ok_or_else(|| Error::Invalid("dataset files hold single-label samples only".into()))?;
        if counters.len() <= label {
            counters.resize(label + 1, 0);
        }
        let dir = root.join(label.to_string());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write_cf(dir.join(format!("{:06}.cf32", counters[label])), &s.field)?;
        counters[label] += 1;
    }
    Ok(samples.len())
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<_>>()?;
    entries.sort();
    Ok(entries)
}

fn is_cf32(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e == "cf32")
}

/// Reads every `<root>/<class_index>/*.cf32`, ordered by class then file
/// name. Directories whose names are not integers (such as `noise/`) are skipped.
pub fn read_dataset(root: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let root = root.as_ref();
    let mut classes: Vec<(usize, PathBuf)> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .filter_map(|p| {
            let idx = p.file_name()?.to_str()?.parse::<usize>().ok()?;
            Some((idx, p))
        })
        .collect();
    classes.sort();
    let mut out = Vec::new();
    for (label, dir) in classes {
        for file in sorted_entries(&dir)?.into_iter().filter(|p| is_cf32(p)) {
            out.push(Sample::new(read_cf(&file)?, label));
        }
    }
    if out.is_empty() {
        return Err(Error::Invalid(format!("no samples found under {}", root.display())));
    }
    Ok(out)
}

/// Reads every `*.cf32` in `dir` as a noise chip.
pub fn read_noise_dir(dir: impl AsRef<Path>) -> Result<Vec<NoiseChip>> {
    let dir = dir.as_ref();
    let chips: Vec<NoiseChip> = sorted_entries(dir)?
        .into_iter()
        .filter(|p| is_cf32(p))
        .map(|p| {
            Ok(NoiseChip {
                field: read_cf(&p)?,
                source: p.display().to_string(),
            })
        })
        .collect::<Result<_>>()?;
    if chips.is_empty() {
        return Err(Error::Invalid(format!("no noise chips in {}", dir.display())));
    }
    Ok(chips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{InitScheme, NetConfig, Network};
    use crate::propagation::KernelKind;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(n: usize, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexField::from_fn(n, 0.01, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .unwrap()
    }

    #[test]
    fn cf32_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.cf32");
        let u = random_field(16, 1).map(|z| c(z.re as f32 as f64, z.im as f32 as f64));
        write_cf(&path, &u).unwrap();
        let back = read_cf(&path).unwrap();
        assert_eq!(back.as_slice(), u.as_slice());
        assert_eq!(encode_cf(&back), fs::read(&path).unwrap());
        assert_eq!(fs::metadata(&path).unwrap().len(), 16 + 8 * 256);
    }

    #[test]
    fn cf32_errors() {
        let p = Path::new("mem.cf32");
        let mut bytes = encode_cf(&random_field(4, 2));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_cf(&bad, p).unwrap_err().to_string().contains("magic"));

        let mut header = b"CF32".to_vec();
        header.extend_from_slice(&256u32.to_le_bytes());
        header.extend_from_slice(&256u32.to_le_bytes());
        header.extend_from_slice(&1f32.to_le_bytes());
        header.extend_from_slice(&[0u8; 100]);
        let msg = decode_cf(&header, p).unwrap_err().to_string();
        assert!(msg.contains("524304") && msg.contains("116"), "{msg}");

        bytes.push(0);
        assert!(decode_cf(&bytes, p).is_err());
        assert!(decode_cf(b"CF3", p).is_err());
    }

    #[test]
    fn synth_is_deterministic_with_phase() {
        let a = synth_dataset(4, 5, 64, 0.01, 7).unwrap();
        let b = synth_dataset(4, 5, 64, 0.01, 7).unwrap();
        assert_eq!(a, b);
        let enc: Vec<u8> = a.iter().flat_map(|s| encode_cf(&s.field)).collect();
        let enc_b: Vec<u8> = b.iter().flat_map(|s| encode_cf(&s.field)).collect();
        assert_eq!(enc, enc_b);
        assert_ne!(a, synth_dataset(4, 5, 64, 0.01, 8).unwrap());
        for s in &a {
            assert!(s.field.as_slice().iter().any(|z| z.im.abs() > 0.0));
            assert!(s.label().unwrap() < 4);
        }
        assert_eq!(a.iter().filter(|s| s.label() == Some(2)).count(), 5);
        assert!(synth_dataset(1, 5, 64, 0.01, 0).is_err());
    }

    #[test]
    fn class_geometries_differ() {
        for classes in [2, 4, 10, 16] {
            let g: Vec<_> = (0..classes).map(|c| class_geometry(c, classes, 64)).collect();
            for i in 0..classes {
                assert!((3..=8).contains(&g[i].len()));
                for j in i + 1..classes {
                    assert_ne!(g[i], g[j]);
                }
            }
        }
    }

    #[test]
    fn embedding() {
        let u = random_field(128, 3);
        let e = embed(&u, 256).unwrap();
        for r in 0..256 {
            for col in 0..256 {
                let inside = (64..192).contains(&r) && (64..192).contains(&col);
                if inside {
                    assert_eq!(e[(r, col)], u[(r - 64, col - 64)]);
                } else {
                    assert_eq!(e[(r, col)], c(0.0, 0.0));
                }
            }
        }
        assert_eq!(e.total_energy(), u.total_energy());
        assert_eq!(embed(&u, 128).unwrap(), u);
        assert!(embed(&u, 64).is_err());
    }

    #[test]
    fn superposition_rules() {
        let x = Sample::new(random_field(8, 1), 0);
        let y = Sample::new(random_field(8, 2), 3);
        assert_eq!(superpose(std::slice::from_ref(&x)).unwrap(), x);

        let neg = Sample::new(x.field.scaled(c(-1.0, 0.0)), 1);
        assert_eq!(superpose(&[x.clone(), neg]).unwrap().field.total_energy(), 0.0);

        let xy = superpose(&[x.clone(), y.clone()]).unwrap();
        let yx = superpose(&[y.clone(), x.clone()]).unwrap();
        assert_eq!(xy.labels(), &[0, 3]);
        assert_eq!(xy.field, yx.field);

        assert!(superpose(&[x.clone(), x.clone()]).is_err());
        assert!(superpose(&[x.clone(), Sample::new(random_field(16, 1), 2)]).is_err());
        assert!(superpose(&[]).is_err());
    }

    #[test]
    fn superposition_passes_through_network() {
        let cfg = NetConfig {
            f: 0.0,
            lambda: 0.03,
            m_layers: 2,
            n: 16,
            d: 0.3,
            dx: 0.01,
            dl: None,
            kernel: KernelKind::Fresnel,
        };
        let net = Network::init(cfg, InitScheme::UniformPhase, 1).unwrap();
        let x = Sample::new(random_field(16, 4), 0);
        let y = Sample::new(random_field(16, 5), 1);
        let s = superpose(&[x.clone(), y.clone()]).unwrap();
        let mut sum = net.forward_field(&x.field).unwrap();
        sum.add_scaled(c(1.0, 0.0), &net.forward_field(&y.field).unwrap()).unwrap();
        assert!(net.forward_field(&s.field).unwrap().rel_l2_diff(&sum) < 1e-12);
    }

    #[test]
    fn snr_overlay() {
        let x = Sample::new(random_field(32, 1), 0);
        let chip = synth_clutter(48, 0.01, 3).unwrap();
        for db in [-10.0, -4.0, 0.0, 6.0, 10.0] {
            let o = overlay_noise_snr(&x, &chip, db, 11).unwrap();
            let measured = 10.0 * (x.field.total_energy() / o.added.total_energy()).log10();
            assert!((measured - db).abs() < 1e-6, "{db}: {measured}");
            let mut recovered = o.sample.field.clone();
            recovered.add_scaled(c(-1.0, 0.0), &o.added).unwrap();
            assert!(recovered.max_abs_diff(&x.field) < 1e-14);
        }
        let zero = overlay_noise_snr(&x, &chip, 0.0, 1).unwrap();
        assert!((zero.added.total_energy() / x.field.total_energy() - 1.0).abs() < 1e-12);
        let ten = overlay_noise_snr(&x, &chip, 10.0, 1).unwrap();
        assert!((ten.added.total_energy() / x.field.total_energy() - 0.1).abs() < 1e-12);

        let dead = NoiseChip {
            field: ComplexField::zeros(8, 0.01).unwrap(),
            source: "dead".into(),
        };
        assert!(add_noise_snr(&x, &dead, 0.0, 0).is_err());
        assert_eq!(add_noise_snr(&x, &chip, 3.0, 9).unwrap(), add_noise_snr(&x, &chip, 3.0, 9).unwrap());
    }

    #[test]
    fn small_chip_is_tiled() {
        let x = Sample::new(random_field(32, 1), 0);
        let chip = synth_clutter(8, 0.01, 3).unwrap();
        let o = overlay_noise_snr(&x, &chip, 0.0, 2).unwrap();
        assert_eq!(o.added[(0, 0)], o.added[(8, 8)]);
    }

    #[test]
    fn masks_stay_in_window() {
        assert_eq!(mask_window(256), Rect { x0: 84, y0: 84, w: 88, h: 88 });
        assert_eq!(mask_window(64).w, 22);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let win = mask_window(256);
        for _ in 0..10_000 {
            let p = mask_placement(256, (1, 88), &mut rng).unwrap();
            assert!(p.x0 >= win.x0 && p.x0 + p.w <= win.x0 + win.w);
            assert!(p.y0 >= win.y0 && p.y0 + p.h <= win.y0 + win.h);
        }
        assert!(mask_placement(256, (10, 89), &mut rng).is_err());
        assert!(mask_placement(256, (10, 9), &mut rng).is_err());
    }

    #[test]
    fn fixed_seed_patches_nest_as_side_grows() {
        let win = mask_window(256);
        for seed in 0..200 {
            let mut prev: Option<Rect> = None;
            for side in 0..=win.w {
                let p = mask_placement(256, (side, side), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                if let Some(q) = prev {
                    assert!(p.x0 <= q.x0 && p.y0 <= q.y0, "seed {seed} side {side}");
                    assert!(p.x0 + p.w >= q.x0 + q.w && p.y0 + p.h >= q.y0 + q.h);
                }
                prev = Some(p);
            }
        }
    }

    #[test]
    fn mask_noise_is_local() {
        let x = Sample::new(random_field(64, 1), 2);
        let chip = synth_clutter(64, 0.01, 3).unwrap();
        let (same, _) = random_mask_noise_placed(&x, &chip, (0, 0), 0.0, 5).unwrap();
        assert_eq!(same, x);

        let (y, patch) = random_mask_noise_placed(&x, &chip, (6, 12), 0.0, 5).unwrap();
        assert!((6..=12).contains(&patch.w));
        let mut e_sig = 0.0;
        let mut e_noise = 0.0;
        for r in 0..64 {
            for col in 0..64 {
                if patch.contains(r, col) {
                    e_sig += x.field[(r, col)].norm_sqr();
                    e_noise += (y.field[(r, col)] - x.field[(r, col)]).norm_sqr();
                } else {
                    assert_eq!(y.field[(r, col)], x.field[(r, col)]);
                }
            }
        }
        assert!((10.0 * (e_sig / e_noise).log10()).abs() < 1e-6);
        assert_eq!(y.labels(), x.labels());
        assert!(random_mask_noise(&x, &chip, (1, 30), 0.0, 1).is_err());
    }

    #[test]
    fn dataset_tree_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set = synth_dataset(3, 4, 64, 0.01, 1).unwrap();
        write_dataset(dir.path(), &set).unwrap();
        fs::create_dir_all(dir.path().join("noise")).unwrap();
        write_cf(dir.path().join("noise/a.cf32"), &synth_clutter(64, 0.01, 0).unwrap().field).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), 12);
        for (a, b) in set.iter().zip(&back) {
            assert_eq!(a.labels(), b.labels());
            assert!(a.field.max_abs_diff(&b.field) < 1e-6);
        }
        assert_eq!(read_noise_dir(dir.path().join("noise")).unwrap().len(), 1);
        assert!(read_dataset(dir.path().join("noise")).is_err());
    }

    #[test]
    fn seed_derivation_spreads() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
